#pragma once

#include <optional>
#include <string>
#include <vector>

#include "ezsdu/lattice.hpp"
#include "ezsdu/preferences.hpp"

namespace ezsdu {

// All grids handed to the operator live in transformed coordinates:
//   U = b theta e^{-delta t} C^{1-S},   W = (1-R) V,
// and the recursion reads W_t = E_t[ int_t^inf (h_ez(U_s, W_s) + eps Lambda_s^theta) ds ].

struct OrderCertificate {
    double k_lower;
    double K_upper;
    AdaptedGrid target;     // Lambda^theta
    AdaptedGrid reference;  // I^Lambda
    /// Empirical decay rate of E[Lambda^theta] over the last step.
    double terminal_decay_rate;
};

/// Forms I^Lambda = E[int Lambda^theta ds] by backward trapezoid steps and
/// bounds Lambda^theta / I^Lambda over steps 0..N-1. With a proportional
/// tail the horizon remainder uses the empirical terminal decay rate.
/// Throws NotInClass if Lambda^theta does not decay at the horizon or the
/// ratio is not bounded away from 0 and infinity.
OrderCertificate order_check(const AdaptedGrid& Lambda, double theta, const Lattice& lat, const TailClosure& tail);

/// One application of F_U (plus eps Lambda^theta when eps > 0).
/// Throws MissingLambda when eps > 0 without Lambda, DimensionMismatch on
/// shape errors, DomainError on negative inputs.
AdaptedGrid apply_F(const Preferences& prefs, const AdaptedGrid& U, const AdaptedGrid& W, const Lattice& lat,
                    const TailClosure& tail, double epsilon = 0.0, const AdaptedGrid* Lambda = nullptr);

struct SolverOptions {
    double epsilon = 0.0;
    double tol = 1e-8;
    int max_iter = 200;
    /// Start from initial_scale * Lambda^theta instead of I^Lambda.
    std::optional<double> initial_scale;
    /// Exponent shift per splitting level when rho <= -1.
    double chi = 0.5;
};

struct SolveReport {
    AdaptedGrid solution{0, Eigen::ArrayXd::Zero(1)};  // W
    int iterations = 0;
    std::vector<double> steps;               // log-space sup-norm steps
    std::vector<double> contraction_ratios;  // steps[i] / steps[i-1]
    bool converged = false;
    double residual = 0.0;  // sup |F(W) - W| / sup |W|
    double modulus = 0.0;   // theoretical log-space contraction constant
    int splitting_depth = 0;
    long long clamp_count = 0;
};

/// Log-space Picard iteration for W = F_U(W). For rho in (-1, 0) this is a
/// plain contraction with constant |rho|. For rho <= -1 the exponent is
/// split: with the outer iterate Q fixed, the inner problem has aggregator
/// (U e^{-chi Q}) Z^{rho+chi}, solved recursively, and the outer map
/// contracts with constant chi / (1 - rho - chi).
/// Throws NotConverged, PreconditionFailed (order class), UnsupportedRegime.
SolveReport picard_solve(const Preferences& prefs, const AdaptedGrid& U, const Lattice& lat, const TailClosure& tail,
                         const SolverOptions& options = {}, const AdaptedGrid* Lambda = nullptr);

/// U = b theta e^{-delta t} C^{1-S} nodewise (+inf where C = 0 and S > 1).
AdaptedGrid consumption_to_U(const Preferences& prefs, const AdaptedGrid& C, const Lattice& lat);

/// V = W / (1-R).
AdaptedGrid W_to_V(const Preferences& prefs, const AdaptedGrid& W);
AdaptedGrid V_to_W(const Preferences& prefs, const AdaptedGrid& V);

enum class LimitKind { Finite, DivergesToPlusInf, DivergesToMinusInf };
std::string to_string(LimitKind kind);

struct GeneralizedUtilityReport {
    std::vector<int> n;
    std::vector<double> values;  // V^n_0
    std::vector<int> iterations;
    LimitKind classification;
    double limit;  // last value when Finite, +-inf otherwise
    bool monotone;
};

/// Divergence threshold for |V^n_0|.
inline constexpr double kDivergenceThreshold = 1e6;

/// Solves for C^n = C v (1/n) C_hat (R > 1) or C ^ n C_hat (R < 1), with
/// C_hat = eta X on the lattice, for n = 1, 2, 4, ... <= n_max.
GeneralizedUtilityReport generalized_utility(const AdaptedGrid& C, const Preferences& prefs, const Market& market,
                                             const Lattice& lat, const TailClosure& tail, int n_max,
                                             const SolverOptions& options = {});

enum class CheckSpace { Utility, Transformed };
enum class Classification { Subsolution, Supersolution, Solution, Neither };
std::string to_string(Classification c);

struct CheckOptions {
    /// Tolerance on defects relative to |value| at the node.
    double tol = 1e-6;
    CheckSpace space = CheckSpace::Utility;
    std::vector<int> gaps{1, 5, 25};
    /// Log-distances of the symmetric wealth bands whose exit times are checked.
    std::vector<double> band_widths{0.05, 0.1, 0.2, 0.4};
};

struct ResidualReport {
    /// Most negative / most positive relative defect V_k - E_k[V_k' + int g].
    double min_defect = 0.0;
    double max_defect = 0.0;
    /// Relative one-step defect per node (steps 0..N-1; step N holds 0).
    AdaptedGrid one_step_defect{0, Eigen::ArrayXd::Zero(1)};
    Eigen::ArrayXd terminal_expectation_trace;  // E_0[V_k]
    bool transversality_ok = false;
    Classification classification = Classification::Neither;
    long long pairs_checked = 0;
    std::string sampling_note;
};

/// Discrete falsifier for the sub/supersolution inequalities. In Utility
/// space `value` is V and `driver` is C with aggregator g_ez; in Transformed
/// space they are W and U with aggregator h_ez. Pairs (k, k+gap) for each
/// gap and exits from wealth bands are checked.
/// Throws SignDomainViolation when the value grid leaves its domain.
ResidualReport check_solution(const AdaptedGrid& value, const AdaptedGrid& driver, const Lattice& lat,
                              const Preferences& prefs, const CheckOptions& options = {});

struct OrderingViolation {
    int step;
    int node;
    double sub;
    double super;
};

struct ComparisonVerdict {
    bool ordered;
    std::vector<OrderingViolation> violations;
    double min_gap;  // min over nodes of super - sub
};

ComparisonVerdict compare(const AdaptedGrid& sub, const AdaptedGrid& super);

}  // namespace ezsdu
