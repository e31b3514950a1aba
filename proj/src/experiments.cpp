#include "ezsdu/experiments.hpp"

#include <boost/math/quadrature/gauss_kronrod.hpp>

#include <algorithm>
#include <cmath>
#include <limits>
#include <random>
#include <sstream>

#include "ezsdu/error.hpp"

namespace ezsdu {

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();

int sign_of(double x) { return (x > 0.0) - (x < 0.0); }

bool in_A(double t) { return static_cast<long long>(std::floor(t)) % 2 == 0; }

double integrate(const std::function<double(double)>& f, double a, double b) {
    if (b <= a) return 0.0;
    return boost::math::quadrature::gauss_kronrod<double, 31>::integrate(f, a, b, 10, 1e-14);
}

// The EZ example; the additive one is the R = S, b = 1 member of the family.
class ExampleStream {
public:
    explicit ExampleStream(const Preferences& prefs) : prefs_(prefs) {}

    double v_delta(double t) const { return counterexample_v_delta(prefs_.delta() * prefs_.theta(), prefs_.R(), t); }

    // b c^{1-S}/(1-S): 2 delta e^{delta(ceil t - t)} on A^c, 0 on A.
    double felicity(double t) const {
        if (in_A(t)) return 0.0;
        const double u = t - std::floor(t);
        return 2.0 * prefs_.delta() / (1.0 - prefs_.S()) * std::exp(prefs_.delta() * (1.0 - u));
    }

    double discounted(double t) const {
        const double f = felicity(t);
        if (f == 0.0) return 0.0;
        const double w = (1.0 - prefs_.R()) * std::exp(-prefs_.delta() * prefs_.theta() * t) * v_delta(t);
        return std::exp(-prefs_.delta() * t) * f * std::pow(w, prefs_.rho());
    }

    double difference(double t) const {
        const double v = v_delta(t);
        const double f = felicity(t);
        const double first = f == 0.0 ? 0.0 : f * std::pow((1.0 - prefs_.R()) * v, prefs_.rho());
        return first - prefs_.delta() * prefs_.theta() * v;
    }

private:
    Preferences prefs_;
};

// Integral of f over [0, T] split at the integers, where the example's pieces join.
double integrate_to(const std::function<double(double)>& f, double T) {
    double total = 0.0;
    for (long long m = 0; m < T; ++m) {
        // Evaluate strictly inside the unit interval so floor() sees the right piece.
        const double lo = static_cast<double>(m);
        const double hi = std::min(T, lo + 1.0);
        total += integrate([&](double s) { return f(std::min(std::max(s, lo), std::nextafter(lo + 1.0, lo))); }, lo, hi);
    }
    return total;
}

CounterexampleReport run_counterexample(const Preferences& prefs, const std::vector<double>& horizons) {
    if (!(prefs.delta() > 0.0)) throw Error(ErrorCode::InvalidParameters, "counterexample needs delta > 0");
    if (horizons.size() < 3) throw Error(ErrorCode::InvalidParameters, "need at least three horizons");
    const ExampleStream stream(prefs);
    const double rate = prefs.delta() * prefs.theta();
    if (!(rate > 0.0)) throw Error(ErrorCode::InvalidParameters, "counterexample needs delta theta > 0");

    CounterexampleReport report{};
    report.horizons = horizons;
    report.formula_value_at_0 = stream.v_delta(0.0);
    const double full_horizon = std::ceil(35.0 / rate);
    report.discounted_value_at_0 = integrate_to([&](double s) { return stream.discounted(s); }, full_horizon);

    auto positive = [&](double s) { return std::max(stream.difference(s), 0.0); };
    auto negative = [&](double s) { return std::max(-stream.difference(s), 0.0); };
    for (double T : horizons) {
        report.discounted_partials.push_back(integrate_to([&](double s) { return stream.discounted(s); }, T));
        report.positive_part_partials.push_back(integrate_to(positive, T));
        report.negative_part_partials.push_back(integrate_to(negative, T));
    }
    report.positive_fit = fit_line(horizons, report.positive_part_partials);
    report.negative_fit = fit_line(horizons, report.negative_part_partials);
    auto grows = [](const LinearFit& fit) { return fit.slope > 0.0 && fit.t_stat > 5.0; };
    report.difference_form_diverges = grows(report.positive_fit) && grows(report.negative_fit);
    return report;
}

}  // namespace

LinearFit fit_line(const std::vector<double>& x, const std::vector<double>& y) {
    const std::size_t n = x.size();
    if (n < 3 || y.size() != n) throw Error(ErrorCode::InvalidParameters, "fit_line needs >= 3 matched points");
    const Eigen::Map<const Eigen::ArrayXd> X(x.data(), static_cast<Eigen::Index>(n));
    const Eigen::Map<const Eigen::ArrayXd> Y(y.data(), static_cast<Eigen::Index>(n));
    const double x_bar = X.mean(), y_bar = Y.mean();
    const double sxx = (X - x_bar).square().sum();
    const double slope = ((X - x_bar) * (Y - y_bar)).sum() / sxx;
    const double intercept = y_bar - slope * x_bar;
    const double rss = (Y - intercept - slope * X).square().sum();
    const double se = std::sqrt(rss / static_cast<double>(n - 2) / sxx);
    const double t = se > 0.0 ? slope / se : (slope > 0.0 ? kInf : (slope < 0.0 ? -kInf : 0.0));
    return {slope, intercept, se, t};
}

double counterexample_v_delta(double rate, double R, double t) {
    const double u = t - std::floor(t);
    const double direction = in_A(t) ? 1.0 : -1.0;
    return std::exp(rate * u * direction) / (1.0 - R);
}

CounterexampleReport crra_counterexample(double delta, double R, const std::vector<double>& horizons) {
    if (!(R > 1.0)) throw Error(ErrorCode::InvalidParameters, "the additive counterexample needs R > 1");
    return run_counterexample(Preferences(1.0, delta, R, R), horizons);
}

CounterexampleReport ezsdu_counterexample(const Preferences& prefs, const std::vector<double>& horizons) {
    const double theta = prefs.theta();
    if (!(theta > 0.0 && theta < 1.0)) throw Error(ErrorCode::UnsupportedRegime, "needs theta in (0,1)");
    return run_counterexample(prefs, horizons);
}

double ezsdu_positive_slope(const Preferences& prefs) {
    return std::expm1(prefs.delta() * prefs.theta()) / (2.0 * (prefs.R() - 1.0));
}

SweepSummary transversality_sweep(double delta, double R, const Market& market, double nu,
                                  const std::vector<double>& xi_grid) {
    if (R == 1.0 || !(R > 0.0)) throw Error(ErrorCode::InvalidParameters, "sweep requires R > 0, R != 1");
    SweepSummary summary{{}, 0, 0, xi_nu_max(nu, market, R), crra_eta(delta, R, market)};
    const double pi_hat = market.lambda() / (market.sigma() * R);
    const int aggregator_sign = sign_of(1.0 / (1.0 - R));
    for (double xi : xi_grid) {
        const ProportionalStrategy strat(pi_hat, xi);
        SweepCell cell{pi_hat, xi, nu, H_nu(nu, R, market, strat), H_nu(delta, R, market, strat), false,
                       std::numeric_limits<double>::quiet_NaN(), std::numeric_limits<double>::quiet_NaN(),
                       make_bubble_flag(0, aggregator_sign), false};
        cell.transversality_ok = cell.H_nu_value > 0.0;
        if (cell.H_delta_value != 0.0) {
            const auto q = crra_bubble_quantities(delta, R, market, xi, nu);
            cell.K = q.K;
            cell.V0 = q.V0;
            cell.evaluable = true;
            cell.bubble = make_bubble_flag(cell.transversality_ok ? sign_of(q.V0) : 0, aggregator_sign);
        }
        summary.bubbles += cell.bubble.is_bubble;
        summary.transversality_failures += !cell.transversality_ok;
        summary.cells.push_back(cell);
    }
    return summary;
}

std::vector<double> make_grid(double lo, double hi, double step) {
    if (!(step > 0.0) || !(hi >= lo)) throw Error(ErrorCode::InvalidParameters, "bad grid specification");
    std::vector<double> grid;
    const auto count = static_cast<long long>(std::floor((hi - lo) / step + 0.5));
    for (long long i = 0; i <= count; ++i) grid.push_back(lo + static_cast<double>(i) * step);
    return grid;
}

GridSearchResult policy_grid_search(const Preferences& prefs, const Market& market, const std::vector<double>& pi_grid,
                                    const std::vector<double>& xi_grid) {
    const double theta = prefs.theta();
    if (!(theta > 0.0 && theta < 1.0)) throw Error(ErrorCode::UnsupportedRegime, "grid search needs theta in (0,1)");
    const auto rate = eta(prefs, market);
    if (!rate.well_posed) throw Error(ErrorCode::IllPosed, "eta <= 0: the problem is ill-posed");
    if (pi_grid.empty() || xi_grid.empty()) throw Error(ErrorCode::InvalidParameters, "empty search grid");

    GridSearchResult result{0.0, 0.0, 0, 0, -kInf, 0,
                            Eigen::ArrayXXd::Constant(static_cast<Eigen::Index>(pi_grid.size()),
                                                      static_cast<Eigen::Index>(xi_grid.size()),
                                                      std::numeric_limits<double>::quiet_NaN())};
    const double nu = prefs.delta() * theta;
    bool found = false;
    for (std::size_t i = 0; i < pi_grid.size(); ++i) {
        for (std::size_t j = 0; j < xi_grid.size(); ++j) {
            const double xi = xi_grid[j];
            if (!(xi > 0.0)) {
                ++result.masked_cells;
                continue;
            }
            const ProportionalStrategy strat(pi_grid[i], xi);
            if (!(H_nu(nu, prefs, market, strat) > 0.0)) {
                ++result.masked_cells;
                continue;
            }
            const double v = proportional_utility(prefs, market, strat, 1.0, 0.0);
            result.values(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)) = v;
            if (!found || v > result.max_value) {
                found = true;
                result.max_value = v;
                result.pi_index = i;
                result.xi_index = j;
            }
        }
    }
    if (!found) throw Error(ErrorCode::NotEvaluable, "no evaluable cell in the search grid");
    result.pi = pi_grid[result.pi_index];
    result.xi = xi_grid[result.xi_index];
    return result;
}

AversionReport aversion_demos(const Preferences& prefs, double y_low, double y_high, double c_first, double c_second,
                              double switch_time) {
    if (!(prefs.theta() > 0.0)) throw Error(ErrorCode::UnsupportedRegime, "aversion demos need theta > 0");
    if (!(prefs.delta() > 0.0)) throw Error(ErrorCode::InvalidParameters, "aversion demos need delta > 0");
    if (!(y_low > 0.0 && y_high > 0.0 && c_first > 0.0 && c_second > 0.0 && switch_time > 0.0)) {
        throw Error(ErrorCode::InvalidParameters, "levels and switch time must be positive");
    }
    auto level_utility = [&](double level) {
        return deterministic_utility(prefs, DeterministicStream::exponential(level, 0.0), 0.0);
    };
    AversionReport r{};
    r.y_low = y_low;
    r.y_high = y_high;
    const double mean = 0.5 * (y_low + y_high);
    r.utility_random = 0.5 * (level_utility(y_low) + level_utility(y_high));
    r.utility_mean = level_utility(mean);
    r.risk_gap = r.utility_random - r.utility_mean;
    const double q = 1.0 - prefs.R();
    r.moment_ratio = 0.5 * (std::pow(y_low, q) + std::pow(y_high, q)) / std::pow(mean, q);

    r.c_first = c_first;
    r.c_second = c_second;
    r.switch_time = switch_time;
    const double late = std::exp(-prefs.delta() * switch_time);
    r.average_level = c_first * (1.0 - late) + c_second * late;
    r.utility_stream = deterministic_utility(prefs, DeterministicStream::two_level(c_first, c_second, switch_time), 0.0);
    r.utility_average = level_utility(r.average_level);
    r.temporal_gap = r.utility_stream - r.utility_average;

    const double slack = 1e-12 * (std::abs(r.utility_mean) + std::abs(r.utility_average));
    r.signs_as_expected = r.risk_gap <= slack && r.temporal_gap <= slack;
    return r;
}

DivergenceReport wellposed_divergence(const Preferences& prefs, const Market& market, const std::vector<double>& schedule,
                                      double wealth) {
    const auto rate = eta(prefs, market);
    if (rate.well_posed) {
        std::ostringstream os;
        os << "eta = " << rate.eta << " > 0: the problem is well posed";
        throw Error(ErrorCode::WellPosed, os.str());
    }
    const double theta = prefs.theta();
    if (!(theta > 0.0)) throw Error(ErrorCode::UnsupportedRegime, "divergence probes need theta > 0");
    if (schedule.empty()) throw Error(ErrorCode::InvalidParameters, "empty probe schedule");

    DivergenceReport report{};
    report.eta = rate.eta;
    report.risk_averse_above_one = prefs.R() > 1.0;
    const double S = prefs.S();
    const double pi_hat = market.lambda() / (market.sigma() * prefs.R());
    if (!report.risk_averse_above_one) {
        report.xi_star = -rate.eta * S / (1.0 - S);
        for (double offset : schedule) {
            const ProportionalStrategy strat(pi_hat, report.xi_star + offset);
            report.probe.push_back({offset, proportional_utility(prefs, market, strat, wealth, 0.0)});
        }
    } else {
        report.xi_star = std::numeric_limits<double>::quiet_NaN();
        for (double n : schedule) {
            if (!(n > 0.0)) throw Error(ErrorCode::InvalidParameters, "probe index must be positive");
            const double alpha = S / (S - 1.0) * (1.0 / n - rate.eta);
            const Market shifted(market.r() + alpha, market.mu() + alpha, market.sigma());
            const double bound =
                std::pow(n, theta * S) * std::pow(prefs.b(), theta) * std::pow(wealth, 1.0 - prefs.R()) / (1.0 - prefs.R());
            const double candidate = candidate_policy(prefs, shifted).value(wealth);
            if (std::abs(candidate - bound) > 1e-9 * std::abs(bound)) {
                std::ostringstream os;
                os << "shifted candidate value " << candidate << " differs from the bound " << bound;
                throw Error(ErrorCode::ExperimentError, os.str());
            }
            report.probe.push_back({n, bound});
        }
    }
    report.strictly_monotone = true;
    report.max_abs_value = 0.0;
    for (std::size_t i = 0; i < report.probe.size(); ++i) {
        report.max_abs_value = std::max(report.max_abs_value, std::abs(report.probe[i].value));
        if (i == 0) continue;
        const double change = report.probe[i].value - report.probe[i - 1].value;
        if (report.risk_averse_above_one ? !(change < 0.0) : !(change > 0.0)) report.strictly_monotone = false;
    }
    report.verdict = LimitKind::Finite;
    if (report.max_abs_value > kDivergenceThreshold && report.strictly_monotone) {
        report.verdict = report.risk_averse_above_one ? LimitKind::DivergesToMinusInf : LimitKind::DivergesToPlusInf;
    }
    return report;
}

HJBSample hjb_trio(const Preferences& prefs, const Market& market, double epsilon, double x, double y, double c,
                   double pi) {
    const auto [p0, m0] = numeraire_shift(prefs, market, discount_removing_chi(prefs));
    const auto rate = eta(p0, m0);
    if (!rate.well_posed) throw Error(ErrorCode::IllPosed, "eta <= 0: no candidate value function");
    const double R = p0.R(), S = p0.S(), theta = p0.theta(), rho = p0.rho();
    const double eta_ = rate.eta;
    const double lambda = m0.lambda(), sigma = m0.sigma();
    const double K = std::pow(p0.b(), theta) * std::pow(eta_, -theta * S);
    const double z = x + epsilon * y;
    const double v = K * std::pow(z, 1.0 - R) / (1.0 - R);
    const double v1 = K * std::pow(z, -R);
    const double v2 = -R * K * std::pow(z, -R - 1.0);
    const double consumption = c + eta_ * epsilon * y;
    const double shift = eta_ * S / (1.0 - S);

    HJBSample s{x, y, c, pi, 0.0, 0.0, 0.0};
    s.A1 = p0.b() * std::pow(consumption, 1.0 - S) / (1.0 - S) * std::pow((1.0 - R) * v, rho) -
           v1 * (consumption + shift * z);
    const double exposure = pi * sigma * x + lambda * epsilon * y / R;
    s.A2 = v1 * (x * pi * sigma * lambda + lambda * lambda * epsilon * y / R) + 0.5 * v2 * exposure * exposure +
           lambda * lambda * v1 * v1 / (2.0 * v2);
    s.A3 = z * m0.r() * v1 - lambda * lambda * v1 * v1 / (2.0 * v2) + shift * z * v1;
    return s;
}

VerificationReport verification_check(const Preferences& prefs, const Market& market,
                                      const VerificationOptions& options) {
    const double theta = prefs.theta();
    if (!(theta > 0.0 && theta < 1.0)) throw Error(ErrorCode::UnsupportedRegime, "verification needs theta in (0,1)");
    if (!(options.epsilon > 0.0)) throw Error(ErrorCode::InvalidParameters, "epsilon must be positive");
    const auto candidate = candidate_policy(prefs, market);
    const double eta_ = candidate.eta;

    VerificationReport report{};
    report.epsilon = options.epsilon;
    report.max_A1 = report.max_A2 = report.max_abs_A3 = -kInf;
    std::mt19937_64 gen(options.seed);
    std::uniform_real_distribution<double> wealth(0.2, 5.0), fraction(0.0, 0.25), position(-1.0, 2.0);
    for (int i = 0; i < options.n_samples; ++i) {
        const double x = wealth(gen), y = wealth(gen);
        const double c = fraction(gen) * x;
        const auto s = hjb_trio(prefs, market, options.epsilon, x, y, c, position(gen));
        report.max_A1 = std::max(report.max_A1, s.A1);
        report.max_A2 = std::max(report.max_A2, s.A2);
        report.max_abs_A3 = std::max(report.max_abs_A3, std::abs(s.A3));
        report.samples.push_back(s);
    }
    report.at_optimum = hjb_trio(prefs, market, options.epsilon, 1.0, 1.0, eta_, candidate.pi_hat);

    // Y follows the candidate strategy; X a random proportional strategy on the same shocks.
    const Lattice lat = build_lattice(market, candidate.strategy(), options.dt, options.n_steps, 1.0);
    const double K = candidate.value_coefficient;
    const double R = prefs.R();
    const double decay = prefs.delta() * theta;
    std::uniform_real_distribution<double> pick_pi(0.0, 1.25), pick_xi(0.005, 0.1);
    for (int i = 0; i < options.n_strategies; ++i) {
        const double pi = pick_pi(gen), xi = pick_xi(gen);
        const double drift = market.r() + pi * (market.mu() - market.r()) - xi - 0.5 * pi * pi * market.sigma() * market.sigma();
        auto X = [&](int k, int j) { return std::exp(drift * lat.time(k) + pi * market.sigma() * lat.brownian(k, j)); };
        const AdaptedGrid V = AdaptedGrid::from_nodes(lat, [&](int k, int j, double t, double y) {
            return std::exp(-decay * t) * K * std::pow(X(k, j) + options.epsilon * y, 1.0 - R);
        });
        const AdaptedGrid C = AdaptedGrid::from_nodes(
            lat, [&](int k, int j, double, double y) { return xi * X(k, j) + eta_ * options.epsilon * y; });
        CheckOptions check;
        check.tol = options.tol;
        const auto residual = check_solution(V, C, lat, prefs, check);
        report.strategies.push_back({pi, xi, residual.classification, residual.min_defect, residual.max_defect,
                                     residual.transversality_ok});
        report.supersolutions += residual.classification == Classification::Supersolution ||
                                 residual.classification == Classification::Solution;
    }
    return report;
}

ComparisonPropertyReport comparison_property(const Preferences& prefs, const Market& market, double dt, int n_steps,
                                             int pairs, std::uint64_t seed) {
    const auto candidate = candidate_policy(prefs, market);
    const Lattice lat = build_lattice(market, candidate.strategy(), dt, n_steps, 1.0);
    const AdaptedGrid C = AdaptedGrid::from_nodes(lat, [&](int, int, double, double x) { return candidate.eta * x; });
    const AdaptedGrid U = consumption_to_U(prefs, C, lat);
    const TailClosure tail = TailClosure::proportional(prefs, market, candidate.strategy());
    SolverOptions solver;
    solver.tol = 1e-11;
    const AdaptedGrid W = picard_solve(prefs, U, lat, tail, solver).solution;

    ComparisonPropertyReport report{pairs, 0, 0, {}, {}};
    std::mt19937_64 gen(seed);
    std::uniform_real_distribution<double> low(0.5, 0.95), high(1.05, 2.0), unit(-1.0, 1.0);
    CheckOptions check;
    check.tol = 1e-9;
    check.space = CheckSpace::Transformed;

    auto perturbed = [&](double kappa, Classification wanted) {
        const Eigen::ArrayXd noise = Eigen::ArrayXd::NullaryExpr(W.values().size(), [&]() { return unit(gen); });
        for (double amplitude = 1e-3; amplitude > 1e-12; amplitude *= 0.5) {
            AdaptedGrid g(lat.n_steps(), kappa * W.values() * (1.0 + amplitude * noise));
            if (check_solution(g, U, lat, prefs, check).classification == wanted) return g;
            ++report.projections;
        }
        return W.scaled(kappa);
    };

    for (int i = 0; i < pairs; ++i) {
        const double ks = low(gen), kS = high(gen);
        report.kappa_sub.push_back(ks);
        report.kappa_super.push_back(kS);
        const AdaptedGrid sub = perturbed(ks, Classification::Subsolution);
        const AdaptedGrid super = perturbed(kS, Classification::Supersolution);
        if (!compare(sub, super).ordered) ++report.violations;
    }
    return report;
}

}  // namespace ezsdu
