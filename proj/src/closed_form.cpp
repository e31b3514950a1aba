#include "ezsdu/closed_form.hpp"

#include <boost/math/quadrature/gauss_kronrod.hpp>

#include <algorithm>
#include <cmath>
#include <limits>
#include <sstream>

#include "ezsdu/error.hpp"

namespace ezsdu {

namespace {

int sign_of(double x) { return (x > 0.0) - (x < 0.0); }

double tail_rate(const Preferences& prefs, const ExponentialPiece& piece) {
    return prefs.delta() + piece.decay * (1.0 - prefs.S());
}

// e^{-delta s} c(s)^{1-S} restricted to one piece.
double piece_integrand(const Preferences& prefs, const ExponentialPiece& piece, double s) {
    const double c = piece.level * std::exp(-piece.decay * (s - piece.start));
    return std::exp(-prefs.delta() * s) * std::pow(c, 1.0 - prefs.S());
}

double integrate_piece(const Preferences& prefs, const ExponentialPiece& piece, double a, double b) {
    using boost::math::quadrature::gauss_kronrod;
    if (b <= a) return 0.0;
    auto f = [&](double s) { return piece_integrand(prefs, piece, s); };
    return gauss_kronrod<double, 31>::integrate(f, a, b, 15, 1e-13);
}

}  // namespace

ProportionalStrategy::ProportionalStrategy(double pi, double xi) : pi_(pi), xi_(xi) {
    if (!std::isfinite(pi)) throw Error(ErrorCode::InvalidParameters, "strategy pi must be finite");
    if (!(xi > 0.0) || !std::isfinite(xi)) {
        std::ostringstream os;
        os << "consumption fraction xi must be positive, got " << xi;
        throw Error(ErrorCode::InvalidParameters, os.str());
    }
}

ProportionalStrategy ProportionalStrategy::allow_zero_consumption(double pi) {
    return ProportionalStrategy(pi, 0.0, Unchecked{});
}

double H_nu(double nu, double R, const Market& market, const ProportionalStrategy& strat) {
    const double pi = strat.pi();
    const double sigma = market.sigma();
    return nu + (R - 1.0) * (market.r() + market.lambda() * sigma * pi - strat.xi() -
                             0.5 * pi * pi * sigma * sigma * R);
}

double H_nu(double nu, const Preferences& prefs, const Market& market, const ProportionalStrategy& strat) {
    return H_nu(nu, prefs.R(), market, strat);
}

EtaReport eta(const Preferences& prefs, const Market& market) {
    const double S = prefs.S();
    const double lambda = market.lambda();
    const double value = (prefs.delta() + (S - 1.0) * market.r() + (S - 1.0) * lambda * lambda / (2.0 * prefs.R())) / S;
    return {value, prefs.delta() + market.r() * (S - 1.0), value > 0.0};
}

double CandidatePolicy::value(double wealth) const {
    return value_coefficient * std::pow(wealth, wealth_exponent);
}

CandidatePolicy candidate_policy(const Preferences& prefs, const Market& market) {
    const double theta = prefs.theta();
    if (!(theta > 0.0)) throw Error(ErrorCode::UnsupportedRegime, "candidate policy requires theta > 0");
    const auto rate = eta(prefs, market);
    if (!rate.well_posed) {
        std::ostringstream os;
        os << "eta = " << rate.eta << " <= 0";
        throw Error(ErrorCode::IllPosed, os.str());
    }
    const double R = prefs.R();
    const double coefficient =
        std::pow(prefs.b(), theta) * std::pow(rate.eta, -theta * prefs.S()) / (1.0 - R);
    return {market.lambda() / (market.sigma() * R), rate.eta, coefficient, 1.0 - R};
}

double proportional_coefficient(const Preferences& prefs, const Market& market, const ProportionalStrategy& strat) {
    const double theta = prefs.theta();
    if (!(theta > 0.0)) throw Error(ErrorCode::UnsupportedRegime, "proportional utility requires theta > 0");
    const double H = H_nu(prefs.delta() * theta, prefs, market, strat);
    if (!(H > 0.0)) {
        std::ostringstream os;
        os << "H_{delta theta}(" << strat.pi() << ", " << strat.xi() << ") = " << H
           << " <= 0, the utility integral diverges";
        throw Error(ErrorCode::NotEvaluable, os.str());
    }
    return std::pow(prefs.b() * theta * std::pow(strat.xi(), 1.0 - prefs.S()) / H, theta);
}

double proportional_utility(const Preferences& prefs, const Market& market, const ProportionalStrategy& strat,
                            double wealth, double t) {
    const double A = proportional_coefficient(prefs, market, strat);
    const double R = prefs.R();
    return std::exp(-prefs.delta() * prefs.theta() * t) * A * std::pow(wealth, 1.0 - R) / (1.0 - R);
}

DeterministicStream::DeterministicStream(std::vector<ExponentialPiece> pieces) : pieces_(std::move(pieces)) {
    if (pieces_.empty() || pieces_.front().start != 0.0) {
        throw Error(ErrorCode::InvalidParameters, "stream pieces must start at t = 0");
    }
    for (std::size_t i = 0; i < pieces_.size(); ++i) {
        const auto& p = pieces_[i];
        if (!(p.level >= 0.0) || !std::isfinite(p.level) || !std::isfinite(p.decay)) {
            throw Error(ErrorCode::InvalidParameters, "stream levels must be finite and nonnegative");
        }
        if (i > 0 && !(p.start > pieces_[i - 1].start)) {
            throw Error(ErrorCode::InvalidParameters, "stream piece starts must increase");
        }
    }
}

DeterministicStream DeterministicStream::exponential(double level, double decay) {
    return DeterministicStream({{0.0, level, decay}});
}

DeterministicStream DeterministicStream::two_level(double first, double second, double switch_time) {
    return DeterministicStream({{0.0, first, 0.0}, {switch_time, second, 0.0}});
}

double DeterministicStream::operator()(double t) const {
    auto it = std::upper_bound(pieces_.begin(), pieces_.end(), t,
                               [](double x, const ExponentialPiece& p) { return x < p.start; });
    const auto& p = *std::prev(it == pieces_.begin() ? std::next(it) : it);
    return p.level * std::exp(-p.decay * (t - p.start));
}

double deterministic_utility(const Preferences& prefs, const DeterministicStream& stream, double t) {
    const auto& pieces = stream.pieces();
    const double S = prefs.S();
    double integral = 0.0;
    for (std::size_t i = 0; i < pieces.size(); ++i) {
        const auto& piece = pieces[i];
        const bool last = i + 1 == pieces.size();
        const double end = last ? std::numeric_limits<double>::infinity() : pieces[i + 1].start;
        if (end <= t) continue;
        const double begin = std::max(t, piece.start);
        if (piece.level == 0.0) {
            if (S > 1.0) {
                throw Error(ErrorCode::DivergentIntegral, "zero consumption with S > 1 has infinite disutility");
            }
            continue;
        }
        if (!last) {
            integral += integrate_piece(prefs, piece, begin, end);
            continue;
        }
        const double kappa = tail_rate(prefs, piece);
        if (!(kappa > 0.0)) {
            std::ostringstream os;
            os << "tail rate delta + gamma (1-S) = " << kappa << " is not positive";
            throw Error(ErrorCode::DivergentIntegral, os.str());
        }
        // Extend the quadrature window until the analytic tail is negligible.
        double cut = begin;
        double chunk = 1.0 / kappa;
        double running = integral;
        for (int guard = 0; guard < 200; ++guard) {
            running += integrate_piece(prefs, piece, cut, cut + chunk);
            cut += chunk;
            const double tail = piece_integrand(prefs, piece, cut) / kappa;
            if (tail <= 1e-10 * running) {
                running += tail;
                break;
            }
            chunk *= 2.0;
        }
        integral = running;
    }
    return std::pow(prefs.b() * integral, prefs.theta()) / (1.0 - prefs.R());
}

double exponential_stream_utility(const Preferences& prefs, double level, double decay, double t) {
    const double kappa = prefs.delta() + decay * (1.0 - prefs.S());
    if (!(kappa > 0.0)) throw Error(ErrorCode::DivergentIntegral, "delta + gamma (1-S) must be positive");
    const double theta = prefs.theta();
    const double R = prefs.R();
    return std::exp(-kappa * theta * t) * std::pow(prefs.b() / kappa, theta) * std::pow(level, 1.0 - R) / (1.0 - R);
}

bool RootReport::has(RootLabel label) const {
    return std::any_of(roots.begin(), roots.end(), [&](const Root& r) { return r.label == label; });
}

double RootReport::finite_root() const {
    for (const auto& r : roots) {
        if (r.label == RootLabel::Finite) return r.value;
    }
    throw Error(ErrorCode::PreconditionFailed, "no finite root");
}

RootReport difference_form_roots(const Preferences& prefs, const Market& market, const ProportionalStrategy& strat) {
    const double theta = prefs.theta();
    const double b = prefs.b();
    const double H = H_nu(prefs.delta() * theta, prefs, market, strat);
    RootReport report{{}, {}, H};
    const Root zero{RootLabel::Zero, 0.0};
    const Root infinite{RootLabel::Infinite, std::numeric_limits<double>::infinity()};

    if (theta == 1.0) {
        report.regime_note = "theta = 1: additive case, B H = b";
        if (H > 0.0) report.roots.push_back({RootLabel::Finite, b / H});
    } else if (theta > 0.0 && theta < 1.0) {
        report.regime_note = "theta in (0,1): unique finite root iff H > 0";
        if (H > 0.0) report.roots.push_back({RootLabel::Finite, std::pow(b * theta / H, theta)});
    } else if (theta > 1.0) {
        report.regime_note = "theta > 1: B = 0 always; finite and infinite roots iff H > 0";
        report.roots.push_back(zero);
        if (H > 0.0) {
            report.roots.push_back({RootLabel::Finite, std::pow(b * theta / H, theta)});
            report.roots.push_back(infinite);
        }
    } else {
        report.regime_note = "theta < 0: B = 0 always; finite and infinite roots iff H < 0";
        report.roots.push_back(zero);
        if (H < 0.0) {
            report.roots.push_back({RootLabel::Finite, std::pow(b * std::abs(theta) / std::abs(H), theta)});
            report.roots.push_back(infinite);
        }
    }
    return report;
}

double xi_nu_max(double nu, const Market& market, double R) {
    if (R == 1.0 || !(R > 0.0)) throw Error(ErrorCode::InvalidParameters, "xi_nu_max requires R > 0, R != 1");
    const double lambda = market.lambda();
    return std::max(0.0, market.r() + 0.5 * lambda * lambda + nu / (R - 1.0));
}

BubbleFlag make_bubble_flag(int value_sign, int aggregator_sign) {
    const bool opposite = value_sign != 0 && aggregator_sign != 0 && value_sign != aggregator_sign;
    return {opposite, value_sign, aggregator_sign};
}

double crra_eta(double delta, double R, const Market& market) {
    const double lambda = market.lambda();
    return delta / R - (1.0 - R) / R * (market.r() + lambda * lambda / (2.0 * R));
}

CrraBubbleQuantities crra_bubble_quantities(double delta, double R, const Market& market, double xi, double nu) {
    if (R == 1.0 || !(R > 0.0)) throw Error(ErrorCode::InvalidParameters, "R must be positive and != 1");
    const ProportionalStrategy strat(market.lambda() / (market.sigma() * R), xi);
    const double H_delta = H_nu(delta, R, market, strat);
    if (H_delta == 0.0) throw Error(ErrorCode::DegenerateDenominator, "H_delta(pi_hat, xi) = 0");
    const double K = std::pow(xi, 1.0 - R) / H_delta;
    const double V0 = K / (1.0 - R);
    const double H_transversal = H_nu(nu, R, market, strat);
    return {K, V0, make_bubble_flag(sign_of(V0), sign_of(1.0 / (1.0 - R))), H_transversal > 0.0, H_delta,
            H_transversal};
}

}  // namespace ezsdu
