#include "ezsdu/preferences.hpp"

#include <cmath>
#include <limits>
#include <sstream>

#include "ezsdu/error.hpp"

namespace ezsdu {

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();

std::string describe(const char* name, double value) {
    std::ostringstream os;
    os << name << " = " << value;
    return os.str();
}

// x^p on [0, inf] with tagged boundary values.
ExtendedNonNegative extended_pow(ExtendedNonNegative x, double p) {
    if (p == 0.0) return ExtendedNonNegative::finite(1.0);
    if (x.is_interior()) return ExtendedNonNegative::finite(std::pow(x.finite_value(), p));
    const bool zero = x.is_zero();
    // 0^p = 0 and inf^p = inf for p > 0; swapped for p < 0.
    if ((zero && p > 0.0) || (!zero && p < 0.0)) return ExtendedNonNegative::finite(0.0);
    return ExtendedNonNegative::infinity();
}

// b e^{-delta t} c^{1-S} as an extended value; c = 0 with S > 1 is +inf.
ExtendedNonNegative scaled_consumption(const Preferences& prefs, double t, double c) {
    if (c < 0.0 || std::isnan(c)) throw Error(ErrorCode::DomainError, describe("consumption", c));
    const double scale = prefs.b() * std::exp(-prefs.delta() * t);
    const auto power = extended_pow(ExtendedNonNegative::from_double(c), 1.0 - prefs.S());
    if (power.is_infinite()) return ExtendedNonNegative::infinity();
    return ExtendedNonNegative::finite(scale * power.finite_value());
}

ExtendedNonNegative transformed_utility(const Preferences& prefs, double v) {
    const double w = (1.0 - prefs.R()) * v;
    if (w < 0.0 || std::isnan(w)) {
        throw Error(ErrorCode::DomainError, describe("(1-R) v", w) + " lies outside the value domain");
    }
    return ExtendedNonNegative::from_double(w);
}

}  // namespace

Preferences::Preferences(double b, double delta, double R, double S)
    : b_(b), delta_(delta), R_(R), S_(S) {
    if (!(b > 0.0) || !std::isfinite(b)) throw Error(ErrorCode::InvalidParameters, describe("b", b));
    if (!std::isfinite(delta)) throw Error(ErrorCode::InvalidParameters, describe("delta", delta));
    if (!(R > 0.0) || R == 1.0 || !std::isfinite(R)) throw Error(ErrorCode::InvalidParameters, describe("R", R));
    if (!(S > 0.0) || S == 1.0 || !std::isfinite(S)) throw Error(ErrorCode::InvalidParameters, describe("S", S));

    if (R == S) {
        theta_ = 1.0;
        rho_ = 0.0;
    } else {
        theta_ = (1.0 - R) / (1.0 - S);
        rho_ = (S - R) / (1.0 - R);
    }
    // The two parameterisations must agree: theta = 1/(1-rho).
    const double theta_from_rho = 1.0 / (1.0 - rho_);
    if (std::abs(theta_from_rho - theta_) > 1e-12 * std::max(1.0, std::abs(theta_))) {
        throw Error(ErrorCode::InvalidParameters, "theta and rho disagree");
    }
    needs_splitting_ = rho_ <= -1.0;
}

Market::Market(double r, double mu, double sigma) : r_(r), mu_(mu), sigma_(sigma) {
    if (!std::isfinite(r)) throw Error(ErrorCode::InvalidParameters, describe("r", r));
    if (!std::isfinite(mu)) throw Error(ErrorCode::InvalidParameters, describe("mu", mu));
    if (!(sigma > 0.0) || !std::isfinite(sigma)) throw Error(ErrorCode::InvalidParameters, describe("sigma", sigma));
    lambda_ = (mu - r) / sigma;
}

Regime derive_regime(const Preferences& prefs) {
    const double theta = prefs.theta();
    if (prefs.R() == prefs.S()) return {RegimeKind::CRRA, true};
    if (theta > 1.0) return {RegimeKind::ThetaAboveOne, false};
    if (theta < 0.0) return {RegimeKind::ThetaNegative, false};
    return {RegimeKind::Contractive, true};
}

Regime derive_regime(double b, double delta, double R, double S) {
    return derive_regime(Preferences(b, delta, R, S));
}

ValueSign value_sign(const Preferences& prefs) {
    return prefs.R() < 1.0 ? ValueSign::NonNegative : ValueSign::NonPositive;
}

bool in_value_domain(const Preferences& prefs, double v) { return (1.0 - prefs.R()) * v >= 0.0; }

ExtendedNonNegative h_ez(ExtendedNonNegative u, ExtendedNonNegative w, double rho) {
    if (!u.is_interior()) return u;
    const auto w_pow = extended_pow(w, rho);
    if (!w.is_interior()) return w_pow;
    return ExtendedNonNegative::finite(u.finite_value() * w_pow.finite_value());
}

double h_ez(double u, double w, double rho) {
    if (u < 0.0 || w < 0.0 || std::isnan(u) || std::isnan(w)) {
        throw Error(ErrorCode::DomainError, "h_ez arguments must lie in [0, inf]");
    }
    return h_ez(ExtendedNonNegative::from_double(u), ExtendedNonNegative::from_double(w), rho).to_double();
}

double g_ez(const Preferences& prefs, double t, double c, double v) {
    const auto w = transformed_utility(prefs, v);
    const auto u = scaled_consumption(prefs, t, c);
    return h_ez(u, w, prefs.rho()).to_double() / (1.0 - prefs.S());
}

double g_delta(const Preferences& prefs, double c, double v) {
    const auto w = transformed_utility(prefs, v);
    const auto u = scaled_consumption(prefs.with_delta(0.0), 0.0, c);
    return h_ez(u, w, prefs.rho()).to_double() / (1.0 - prefs.S()) - prefs.delta() * prefs.theta() * v;
}

TransformedPoint transform_vc_to_wu(const Preferences& prefs, double V, double C, double t) {
    const auto w = transformed_utility(prefs, V);
    const auto scaled = scaled_consumption(prefs, t, C);
    if (scaled.is_infinite()) return {w, ExtendedNonNegative::infinity()};
    return {w, ExtendedNonNegative::finite(prefs.theta() * scaled.finite_value())};
}

UtilityPoint transform_wu_to_vc(const Preferences& prefs, ExtendedNonNegative W, ExtendedNonNegative U,
                                double t) {
    const double V = W.to_double() / (1.0 - prefs.R());
    // C^{1-S} = U e^{delta t} / (b theta)
    const double base = U.is_infinite() ? kInf
                                        : U.finite_value() * std::exp(prefs.delta() * t) /
                                              (prefs.b() * prefs.theta());
    const double exponent = 1.0 / (1.0 - prefs.S());
    const auto C = extended_pow(ExtendedNonNegative::from_double(base), exponent);
    return {V, C.to_double()};
}

Eigen::ArrayXd upcount(const Preferences& prefs, const Eigen::ArrayXd& times, const Eigen::ArrayXd& values,
                       UpcountDirection direction) {
    if (times.size() != values.size()) {
        throw Error(ErrorCode::DimensionMismatch, "upcount: times and values differ in length");
    }
    const double rate = prefs.delta() * prefs.theta();
    const double sign = direction == UpcountDirection::DiscountedToDifference ? 1.0 : -1.0;
    return values * (sign * rate * times).exp();
}

std::pair<Preferences, Market> numeraire_shift(const Preferences& prefs, const Market& market, double chi) {
    Preferences shifted_prefs(prefs.b(), prefs.delta() - chi * (1.0 - prefs.S()), prefs.R(), prefs.S());
    Market shifted_market(market.r() - chi, market.mu() - chi, market.sigma());
    return {shifted_prefs, shifted_market};
}

double discount_removing_chi(const Preferences& prefs) { return prefs.delta() / (1.0 - prefs.S()); }

}  // namespace ezsdu
