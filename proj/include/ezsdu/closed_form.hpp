#pragma once

#include <string>
#include <vector>

#include "ezsdu/preferences.hpp"

namespace ezsdu {

/// Constant-proportional investment-consumption strategy: a fraction pi of
/// wealth in the risky asset and consumption at rate xi times wealth.
class ProportionalStrategy {
public:
    /// Throws Error{InvalidParameters} unless xi > 0 (xi = 0 is allowed for
    /// lattice construction only; see allow_zero_consumption()).
    ProportionalStrategy(double pi, double xi);

    static ProportionalStrategy allow_zero_consumption(double pi);

    double pi() const { return pi_; }
    double xi() const { return xi_; }

private:
    struct Unchecked {};
    ProportionalStrategy(double pi, double xi, Unchecked) : pi_(pi), xi_(xi) {}

    double pi_, xi_;
};

/// H_nu(pi, xi) = nu + (R-1)(r + lambda sigma pi - xi - pi^2 sigma^2 R / 2).
/// -H_nu is the exponential growth rate of E[e^{-nu t} X_t^{1-R}].
double H_nu(double nu, const Preferences& prefs, const Market& market, const ProportionalStrategy& strat);

/// Same rate with only R supplied; used by the additive (CRRA) diagnostics.
double H_nu(double nu, double R, const Market& market, const ProportionalStrategy& strat);

struct EtaReport {
    double eta;
    /// phi = delta + r (S-1)
    double impatience;
    bool well_posed;
};

/// eta = (delta + (S-1) r + (S-1) lambda^2 / (2R)) / S.
EtaReport eta(const Preferences& prefs, const Market& market);

struct CandidatePolicy {
    double pi_hat;
    double eta;
    /// b^theta eta^{-theta S} / (1-R); the candidate value is this times x^{1-R}.
    double value_coefficient;
    double wealth_exponent;  // 1 - R

    /// value_coefficient * wealth^{1-R}
    double value(double wealth) const;
    ProportionalStrategy strategy() const { return ProportionalStrategy(pi_hat, eta); }
};

/// Throws IllPosed when eta <= 0 and UnsupportedRegime when theta <= 0.
CandidatePolicy candidate_policy(const Preferences& prefs, const Market& market);

/// (b theta xi^{1-S} / H_{delta theta})^theta, the coefficient of
/// e^{-delta theta t} X^{1-R}/(1-R) in the proportional-strategy utility.
/// Throws NotEvaluable when H_{delta theta} <= 0.
double proportional_coefficient(const Preferences& prefs, const Market& market, const ProportionalStrategy& strat);

/// V_t = e^{-delta theta t} (b theta xi^{1-S}/H_{delta theta})^theta x^{1-R}/(1-R).
double proportional_utility(const Preferences& prefs, const Market& market, const ProportionalStrategy& strat,
                            double wealth, double t);

/// Deterministic stream made of exponential pieces: on [start_i, start_{i+1})
/// consumption is level_i * exp(-decay_i (s - start_i)); the last piece runs
/// to infinity.
struct ExponentialPiece {
    double start;
    double level;
    double decay;
};

class DeterministicStream {
public:
    /// Throws InvalidParameters unless starts are strictly increasing from 0
    /// and levels are nonnegative.
    explicit DeterministicStream(std::vector<ExponentialPiece> pieces);

    static DeterministicStream exponential(double level, double decay);
    /// c = first on [0, switch_time), second afterwards.
    static DeterministicStream two_level(double first, double second, double switch_time);

    const std::vector<ExponentialPiece>& pieces() const { return pieces_; }
    double operator()(double t) const;

private:
    std::vector<ExponentialPiece> pieces_;
};

/// V(t) = (b \int_t^inf e^{-delta s} c(s)^{1-S} ds)^theta / (1-R) by adaptive
/// Gauss-Kronrod quadrature up to a cut-off with an analytic exponential tail.
/// Throws DivergentIntegral when the tail rate delta + decay (1-S) is not positive.
double deterministic_utility(const Preferences& prefs, const DeterministicStream& stream, double t);

/// Closed form for a single exponential stream a e^{-gamma s}:
/// e^{-(delta + gamma(1-S)) theta t} (b/(delta + gamma(1-S)))^theta a^{1-R}/(1-R).
double exponential_stream_utility(const Preferences& prefs, double level, double decay, double t);

enum class RootLabel { Zero, Finite, Infinite };

struct Root {
    RootLabel label;
    double value;  // meaningful for Finite; 0 for Zero; unused for Infinite
};

struct RootReport {
    std::vector<Root> roots;
    std::string regime_note;
    double H;  // H_{delta theta}(pi, xi)

    bool has(RootLabel label) const;
    /// The finite root; throws PreconditionFailed if absent.
    double finite_root() const;
};

/// Nonnegative extended-real roots B of B H_{delta theta} = b theta B^rho.
RootReport difference_form_roots(const Preferences& prefs, const Market& market, const ProportionalStrategy& strat);

/// xi^nu_max = (r + lambda^2/2 + nu/(R-1))_+ . Throws InvalidParameters for R = 1.
double xi_nu_max(double nu, const Market& market, double R);

struct BubbleFlag {
    bool is_bubble;
    int value_sign;       // sign of V; 0 when no valid V exists
    int aggregator_sign;  // sign of the aggregator along the path
};

BubbleFlag make_bubble_flag(int value_sign, int aggregator_sign);

struct CrraBubbleQuantities {
    double K;   // xi^{1-R} / H_delta(pi_hat, xi)
    double V0;  // K / (1-R) at unit wealth
    BubbleFlag bubble;
    bool transversality_ok;  // H_nu(pi_hat, xi) > 0
    double H_delta;
    double H_nu;
};

/// Additive CRRA utility under the investment fraction lambda/(sigma R).
/// Throws DegenerateDenominator when H_delta(pi_hat, xi) = 0.
CrraBubbleQuantities crra_bubble_quantities(double delta, double R, const Market& market, double xi, double nu);

/// Well-posedness rate of the additive problem:
/// eta_a = delta/R - (1-R)/R (r + lambda^2/(2R)).
double crra_eta(double delta, double R, const Market& market);

}  // namespace ezsdu
