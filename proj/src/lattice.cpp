#include "ezsdu/lattice.hpp"

#include <boost/math/tools/roots.hpp>
#include <boost/math/tools/toms748_solve.hpp>

#include <cmath>
#include <random>
#include <sstream>

#include "ezsdu/error.hpp"
#include "ezsdu/report_io.hpp"

namespace ezsdu {

namespace {

struct TwoPoint {
    double p;
    double z_up;
    double z_down;
};

TwoPoint standardized(double p) { return {p, std::sqrt((1.0 - p) / p), -std::sqrt(p / (1.0 - p))}; }

// Mismatch between E[exp(h z)] and exp(h^2/2) for the standardized two-point
// variable with up-probability p.
double exp_moment_gap(double p, double h) {
    const auto z = standardized(p);
    return p * std::expm1(h * z.z_up) + (1.0 - p) * std::expm1(h * z.z_down) - std::expm1(0.5 * h * h);
}

TwoPoint solve_probability(double h) {
    if (h == 0.0) return standardized(0.5);
    auto f = [h](double p) { return exp_moment_gap(p, h); };
    const double hi = 0.5;
    double lo = 0.45;
    for (double candidate : {0.45, 0.4, 0.3, 0.2, 0.1, 1e-2, 1e-4}) {
        lo = candidate;
        if (f(lo) > 0.0) break;
    }
    if (!(f(lo) > 0.0) || !(f(hi) < 0.0)) {
        std::ostringstream os;
        os << "no moment-matching probability for step volatility " << h;
        throw Error(ErrorCode::InvalidStep, os.str());
    }
    std::uintmax_t max_iter = 200;
    const auto bracket =
        boost::math::tools::toms748_solve(f, lo, hi, boost::math::tools::eps_tolerance<double>(53), max_iter);
    return standardized(0.5 * (bracket.first + bracket.second));
}

}  // namespace

double Lattice::brownian(int step, int node) const {
    const double orientation = strategy_.pi() < 0.0 ? -1.0 : 1.0;
    return orientation * std::sqrt(dt_) * (node * z_up_ + (step - node) * z_down_);
}

double Lattice::growth_factor() const {
    const double pi = strategy_.pi();
    return std::exp((market_.r() + pi * (market_.mu() - market_.r()) - strategy_.xi()) * dt_);
}

double Lattice::log_step_mean() const { return drift_ * dt_ + h_ * (p_up_ * z_up_ + (1.0 - p_up_) * z_down_); }

double Lattice::log_step_variance() const {
    const double centre = h_ * (p_up_ * z_up_ + (1.0 - p_up_) * z_down_);
    return h_ * h_ * (p_up_ * z_up_ * z_up_ + (1.0 - p_up_) * z_down_ * z_down_) - centre * centre;
}

Lattice build_lattice(const Market& market, const ProportionalStrategy& strat, double dt, int n_steps, double x0) {
    if (!(dt > 0.0) || !std::isfinite(dt)) throw Error(ErrorCode::InvalidStep, "dt must be positive");
    if (n_steps < 0) throw Error(ErrorCode::InvalidStep, "n_steps must be nonnegative");
    if (!(x0 > 0.0) || !std::isfinite(x0)) throw Error(ErrorCode::InvalidParameters, "x0 must be positive");

    Lattice lat(market, strat);
    lat.dt_ = dt;
    lat.n_steps_ = n_steps;
    lat.x0_ = x0;
    const double pi = strat.pi();
    const double sigma = market.sigma();
    lat.drift_ = market.r() + pi * (market.mu() - market.r()) - strat.xi() - 0.5 * pi * pi * sigma * sigma;
    lat.h_ = std::abs(pi) * sigma * std::sqrt(dt);

    const auto z = solve_probability(lat.h_);
    lat.p_up_ = z.p;
    lat.z_up_ = z.z_up;
    lat.z_down_ = z.z_down;
    lat.up_ = std::exp(lat.drift_ * dt + lat.h_ * z.z_up);
    lat.down_ = std::exp(lat.drift_ * dt + lat.h_ * z.z_down);

    lat.node_wealth_.resize(Lattice::offset(n_steps + 1));
    const double log_x0 = std::log(x0);
    for (int k = 0; k <= n_steps; ++k) {
        const Eigen::Index base = Lattice::offset(k);
        for (int j = 0; j <= k; ++j) {
            const double shocks = j * z.z_up + (k - j) * z.z_down;
            lat.node_wealth_(base + j) = std::exp(log_x0 + k * lat.drift_ * dt + lat.h_ * shocks);
        }
    }
    return lat;
}

AdaptedGrid::AdaptedGrid(int n_steps, Eigen::ArrayXd values, std::optional<ValueSign> sign)
    : n_steps_(n_steps), values_(std::move(values)), sign_(sign) {
    if (n_steps < 0 || values_.size() != Lattice::offset(n_steps + 1)) {
        std::ostringstream os;
        os << "grid holds " << values_.size() << " values, lattice with " << n_steps << " steps needs "
           << Lattice::offset(n_steps + 1);
        throw Error(ErrorCode::DimensionMismatch, os.str());
    }
    if (!sign_) return;
    for (Eigen::Index i = 0; i < values_.size(); ++i) {
        const double v = values_(i);
        const bool ok = *sign_ == ValueSign::NonNegative ? v >= 0.0 : v <= 0.0;
        if (!ok) {
            std::ostringstream os;
            os << "grid value " << v << " at flat index " << i << " violates the declared sign";
            throw Error(ErrorCode::SignDomainViolation, os.str());
        }
    }
}

AdaptedGrid AdaptedGrid::constant(const Lattice& lat, double value) {
    return AdaptedGrid(lat.n_steps(), Eigen::ArrayXd::Constant(lat.size(), value));
}

AdaptedGrid AdaptedGrid::from_nodes(const Lattice& lat, const std::function<double(int, int, double, double)>& f) {
    Eigen::ArrayXd values(lat.size());
    for (int k = 0; k <= lat.n_steps(); ++k) {
        const Eigen::Index base = Lattice::offset(k);
        for (int j = 0; j <= k; ++j) values(base + j) = f(k, j, lat.time(k), lat.node_wealth()(base + j));
    }
    return AdaptedGrid(lat.n_steps(), std::move(values));
}

AdaptedGrid AdaptedGrid::scaled(double factor) const {
    std::optional<ValueSign> sign = sign_;
    if (factor < 0.0) sign.reset();
    return AdaptedGrid(n_steps_, values_ * factor, sign);
}

void AdaptedGrid::require_same_shape(const AdaptedGrid& other) const {
    if (other.n_steps_ != n_steps_) {
        std::ostringstream os;
        os << "grids have " << n_steps_ << " and " << other.n_steps_ << " steps";
        throw Error(ErrorCode::DimensionMismatch, os.str());
    }
}

void AdaptedGrid::require_lattice(const Lattice& lat) const {
    if (lat.n_steps() != n_steps_) {
        std::ostringstream os;
        os << "grid has " << n_steps_ << " steps, lattice has " << lat.n_steps();
        throw Error(ErrorCode::DimensionMismatch, os.str());
    }
}

TailClosure TailClosure::proportional(const Preferences& prefs, const Market& market,
                                      const ProportionalStrategy& strat) {
    const double H = H_nu(prefs.delta() * prefs.theta(), prefs, market, strat);
    if (!(H > 0.0)) {
        std::ostringstream os;
        os << "proportional tail needs H_{delta theta} > 0, got " << H;
        throw Error(ErrorCode::NotEvaluable, os.str());
    }
    return TailClosure(Mode::ProportionalContinuation, H);
}

TailClosure TailClosure::with_rate(double rate) {
    if (!(rate > 0.0) || !std::isfinite(rate)) throw Error(ErrorCode::NotEvaluable, "tail rate must be positive");
    return TailClosure(Mode::ProportionalContinuation, rate);
}

Eigen::ArrayXd step_expectation(const Lattice& lat, const Eigen::ArrayXd& next) {
    const Eigen::Index m = next.size();
    if (m < 2 || m > lat.n_steps() + 1) {
        std::ostringstream os;
        os << "step_expectation: " << m << " values do not form a step of a " << lat.n_steps() << "-step lattice";
        throw Error(ErrorCode::DimensionMismatch, os.str());
    }
    const double p = lat.p_up();
    return p * next.tail(m - 1) + (1.0 - p) * next.head(m - 1);
}

Eigen::ArrayXd conditional_expectation(const Lattice& lat, const AdaptedGrid& grid, int from, int to) {
    grid.require_lattice(lat);
    if (from < 0 || to < from || to > lat.n_steps()) {
        throw Error(ErrorCode::DimensionMismatch, "conditional_expectation: steps out of range");
    }
    Eigen::ArrayXd values = grid.at(to);
    for (int k = to; k > from; --k) values = step_expectation(lat, values);
    return values;
}

DriftEstimate mc_drift_check(const Market& market, const ProportionalStrategy& strat, double nu, double R,
                             int n_paths, double horizon, std::uint64_t seed, int n_times) {
    if (n_paths < 1000) throw Error(ErrorCode::PreconditionFailed, "mc_drift_check needs at least 1000 paths");
    if (!(horizon > 0.0) || n_times < 2) throw Error(ErrorCode::InvalidParameters, "invalid time grid");

    constexpr int kBatches = 20;
    const double step = horizon / n_times;
    const double pi = strat.pi();
    const double sigma = market.sigma();
    const double drift =
        (market.r() + pi * (market.mu() - market.r()) - strat.xi() - 0.5 * pi * pi * sigma * sigma) * step;
    const double vol = pi * sigma * std::sqrt(step);

    Eigen::ArrayXXd batch_sums = Eigen::ArrayXXd::Zero(n_times + 1, kBatches);
    Eigen::ArrayXi batch_counts = Eigen::ArrayXi::Zero(kBatches);
    for (int path = 0; path < n_paths; ++path) {
        std::seed_seq seq{static_cast<std::uint32_t>(seed), static_cast<std::uint32_t>(seed >> 32),
                          static_cast<std::uint32_t>(path)};
        std::mt19937_64 gen(seq);
        std::normal_distribution<double> normal;
        const int batch = path % kBatches;
        double log_x = 0.0;
        batch_sums(0, batch) += 1.0;
        for (int i = 1; i <= n_times; ++i) {
            log_x += drift + vol * normal(gen);
            batch_sums(i, batch) += std::exp((1.0 - R) * log_x);
        }
        ++batch_counts(batch);
    }

    Eigen::ArrayXd times = Eigen::ArrayXd::LinSpaced(n_times + 1, 0.0, horizon);
    auto slope_of = [&](const Eigen::ArrayXd& y) {
        const double t_bar = times.mean();
        const double y_bar = y.mean();
        return ((times - t_bar) * (y - y_bar)).sum() / (times - t_bar).square().sum();
    };

    const Eigen::ArrayXd totals = batch_sums.rowwise().sum();
    const Eigen::ArrayXd log_mean = (totals / n_paths).log() - nu * times;
    const double slope = slope_of(log_mean);

    Eigen::ArrayXd batch_slopes(kBatches);
    for (int b = 0; b < kBatches; ++b) {
        const Eigen::ArrayXd y = (batch_sums.col(b) / batch_counts(b)).log() - nu * times;
        batch_slopes(b) = slope_of(y);
    }
    const double spread = std::sqrt((batch_slopes - batch_slopes.mean()).square().sum() / (kBatches - 1));
    return {slope, spread / std::sqrt(static_cast<double>(kBatches)), times, log_mean};
}

void write_grid_csv(std::ostream& out, const AdaptedGrid& grid) {
    out << "step,node,value\n";
    for (int k = 0; k <= grid.n_steps(); ++k) {
        for (int j = 0; j <= k; ++j) out << k << ',' << j << ',' << format_number(grid(k, j)) << '\n';
    }
}

}  // namespace ezsdu
