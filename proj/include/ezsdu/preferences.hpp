#pragma once

#include <Eigen/Dense>

#include <string_view>
#include <utility>

#include "ezsdu/extended_real.hpp"

namespace ezsdu {

/// Epstein-Zin preference vector (b, delta, R, S) with the derived exponents
///   theta = (1-R)/(1-S),  rho = (S-R)/(1-R) = (theta-1)/theta.
/// R = S is admitted and classified as the CRRA regime (theta = 1, rho = 0).
class Preferences {
public:
    /// Throws Error{InvalidParameters} unless b > 0, R, S > 0 and R, S != 1.
    Preferences(double b, double delta, double R, double S);

    double b() const { return b_; }
    double delta() const { return delta_; }
    double R() const { return R_; }
    double S() const { return S_; }
    double theta() const { return theta_; }
    double rho() const { return rho_; }

    /// rho <= -1: the log-space Picard map is no longer a contraction on its
    /// own and the solver must split the exponent.
    bool needs_exponent_splitting() const { return needs_splitting_; }

    /// Sign of the utility domain (1-R) R_+: +1 when R < 1, -1 when R > 1.
    int value_sign() const { return R_ < 1.0 ? 1 : -1; }

    Preferences with_delta(double delta) const { return Preferences(b_, delta, R_, S_); }

private:
    double b_, delta_, R_, S_;
    double theta_, rho_;
    bool needs_splitting_;
};

class Market {
public:
    /// Throws Error{InvalidParameters} unless sigma > 0.
    Market(double r, double mu, double sigma);

    double r() const { return r_; }
    double mu() const { return mu_; }
    double sigma() const { return sigma_; }
    /// Sharpe ratio (mu - r) / sigma.
    double lambda() const { return lambda_; }

private:
    double r_, mu_, sigma_, lambda_;
};

enum class RegimeKind { CRRA, Contractive, ThetaAboveOne, ThetaNegative };

constexpr std::string_view to_string(RegimeKind kind) {
    switch (kind) {
        case RegimeKind::CRRA: return "CRRA";
        case RegimeKind::Contractive: return "Contractive";
        case RegimeKind::ThetaAboveOne: return "ThetaAboveOne";
        case RegimeKind::ThetaNegative: return "ThetaNegative";
    }
    return "Unknown";
}

struct Regime {
    RegimeKind kind;
    bool solver_supported;
};

enum class ValueSign { NonNegative, NonPositive };

Regime derive_regime(const Preferences& prefs);

/// Checked constructor path for raw parameters: same guards as Preferences.
Regime derive_regime(double b, double delta, double R, double S);

ValueSign value_sign(const Preferences& prefs);

/// true iff (1-R) v >= 0.
bool in_value_domain(const Preferences& prefs, double v);

/// Discounted aggregator b e^{-delta t} c^{1-S}/(1-S) ((1-R) v)^rho.
/// Boundary points c = 0 and v = 0 are evaluated through h_ez after the
/// (W, U) change of coordinates, so results may be +-infinity.
double g_ez(const Preferences& prefs, double t, double c, double v);

/// Difference-form aggregator b c^{1-S}/(1-S) ((1-R) v)^rho - delta theta v.
double g_delta(const Preferences& prefs, double c, double v);

/// Transformed aggregator on [0, inf]^2 with 0^rho = inf and inf^rho = 0
/// for rho < 0:
///   u w^rho      for u, w in (0, inf)
///   w^rho        for u in (0, inf), w in {0, inf}
///   u            for u in {0, inf}
ExtendedNonNegative h_ez(ExtendedNonNegative u, ExtendedNonNegative w, double rho);

/// Convenience overload; +inf inputs are decoded into tagged infinities.
double h_ez(double u, double w, double rho);

struct TransformedPoint {
    ExtendedNonNegative W;
    ExtendedNonNegative U;
};

/// W = (1-R) V and U = b theta e^{-delta t} C^{1-S} (U = inf when C = 0, S > 1).
TransformedPoint transform_vc_to_wu(const Preferences& prefs, double V, double C, double t);

struct UtilityPoint {
    double V;
    double C;
};

UtilityPoint transform_wu_to_vc(const Preferences& prefs, ExtendedNonNegative W,
                                ExtendedNonNegative U, double t);

enum class UpcountDirection { DiscountedToDifference, DifferenceToDiscounted };

/// V^Delta_t = e^{delta theta t} V_t (or the inverse) along a time-indexed path.
Eigen::ArrayXd upcount(const Preferences& prefs, const Eigen::ArrayXd& times,
                       const Eigen::ArrayXd& values, UpcountDirection direction);

/// Deterministic change of accounting unit C~_t = e^{-chi t} C_t:
///   delta' = delta - chi (1-S),  r' = r - chi,  mu' = mu - chi.
/// chi = delta / (1-S) removes discounting.
std::pair<Preferences, Market> numeraire_shift(const Preferences& prefs, const Market& market,
                                               double chi);

/// The chi that zeroes the discount rate.
double discount_removing_chi(const Preferences& prefs);

}  // namespace ezsdu
