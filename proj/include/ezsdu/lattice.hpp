#pragma once

#include <Eigen/Dense>

#include <cstdint>
#include <functional>
#include <optional>
#include <ostream>

#include "ezsdu/closed_form.hpp"
#include "ezsdu/preferences.hpp"

namespace ezsdu {

/// Recombining binomial tree for the wealth of a constant-proportional
/// strategy. Node (k, j) sits at step k after j up-moves; values of every
/// step are stored contiguously, step k starting at offset k(k+1)/2.
///
/// The one-step log-wealth increment is m dt + h z with z a standardized
/// two-point variable (mean 0, variance 1), m = r + pi(mu-r) - xi - pi^2 sigma^2/2
/// and h = |pi| sigma sqrt(dt). The up-probability is chosen so that, in
/// addition, E[X_{k+1} | X_k] = exp((r + pi(mu-r) - xi) dt) X_k.
class Lattice {
public:
    double dt() const { return dt_; }
    int n_steps() const { return n_steps_; }
    double x0() const { return x0_; }
    double up() const { return up_; }
    double down() const { return down_; }
    double p_up() const { return p_up_; }
    const Market& market() const { return market_; }
    const ProportionalStrategy& strategy() const { return strategy_; }

    /// Total node count (n+1)(n+2)/2.
    Eigen::Index size() const { return node_wealth_.size(); }
    static Eigen::Index offset(int step) { return static_cast<Eigen::Index>(step) * (step + 1) / 2; }
    double time(int step) const { return step * dt_; }

    const Eigen::ArrayXd& node_wealth() const { return node_wealth_; }
    double wealth(int step, int node) const { return node_wealth_(offset(step) + node); }
    Eigen::ArrayXd wealth_at(int step) const { return node_wealth_.segment(offset(step), step + 1); }

    /// Approximate Brownian position at a node, oriented so that
    /// log X = log x0 + m t + pi sigma B.
    double brownian(int step, int node) const;

    /// exp((r + pi(mu-r) - xi) dt), the exact one-step mean growth factor.
    double growth_factor() const;
    /// Mean and variance of the one-step log-wealth increment as represented
    /// by the tree.
    double log_step_mean() const;
    double log_step_variance() const;

private:
    friend Lattice build_lattice(const Market&, const ProportionalStrategy&, double, int, double);
    Lattice(Market market, ProportionalStrategy strategy) : market_(market), strategy_(strategy) {}

    Market market_;
    ProportionalStrategy strategy_;
    double dt_ = 0.0;
    int n_steps_ = 0;
    double x0_ = 1.0;
    double drift_ = 0.0;  // m
    double h_ = 0.0;
    double z_up_ = 1.0, z_down_ = -1.0;
    double up_ = 1.0, down_ = 1.0, p_up_ = 0.5;
    Eigen::ArrayXd node_wealth_;
};

/// Throws InvalidStep if dt <= 0 or n_steps < 0, InvalidParameters if x0 <= 0.
Lattice build_lattice(const Market& market, const ProportionalStrategy& strat, double dt, int n_steps, double x0);

/// A real process on a lattice, one value per node. +inf is stored as IEEE
/// infinity and decoded through ExtendedNonNegative where conventions matter.
class AdaptedGrid {
public:
    /// Throws DimensionMismatch if values do not fit n_steps and
    /// SignDomainViolation if a declared sign constraint fails.
    AdaptedGrid(int n_steps, Eigen::ArrayXd values, std::optional<ValueSign> sign = std::nullopt);

    static AdaptedGrid constant(const Lattice& lat, double value);
    /// f(step, node, t, wealth)
    static AdaptedGrid from_nodes(const Lattice& lat, const std::function<double(int, int, double, double)>& f);

    int n_steps() const { return n_steps_; }
    const Eigen::ArrayXd& values() const { return values_; }
    std::optional<ValueSign> sign_domain() const { return sign_; }

    double operator()(int step, int node) const { return values_(Lattice::offset(step) + node); }
    Eigen::ArrayXd at(int step) const { return values_.segment(Lattice::offset(step), step + 1); }

    AdaptedGrid scaled(double factor) const;
    void require_same_shape(const AdaptedGrid& other) const;
    void require_lattice(const Lattice& lat) const;

private:
    int n_steps_;
    Eigen::ArrayXd values_;
    std::optional<ValueSign> sign_;
};

/// Horizon closure for the infinite-horizon recursion. The proportional mode
/// continues beyond the last step as if the integrand decayed in expectation
/// at the constant rate H_{delta theta} of the bound strategy.
class TailClosure {
public:
    enum class Mode { Zero, ProportionalContinuation };

    static TailClosure zero() { return TailClosure(Mode::Zero, 0.0); }
    /// Throws NotEvaluable unless H_{delta theta}(strat) > 0.
    static TailClosure proportional(const Preferences& prefs, const Market& market, const ProportionalStrategy& strat);
    /// Direct construction from a known positive decay rate.
    static TailClosure with_rate(double rate);

    Mode mode() const { return mode_; }
    double rate() const { return rate_; }
    /// Integral from the horizon to infinity of an integrand whose terminal
    /// value is `terminal`.
    double tail(double terminal) const { return mode_ == Mode::Zero ? 0.0 : terminal / rate_; }

private:
    TailClosure(Mode mode, double rate) : mode_(mode), rate_(rate) {}
    Mode mode_;
    double rate_;
};

/// E[next | step k] for the k+2 values of step k+1; returns k+1 values.
Eigen::ArrayXd step_expectation(const Lattice& lat, const Eigen::ArrayXd& next);

/// E[grid at step `to` | step `from`] by repeated one-step expectations.
Eigen::ArrayXd conditional_expectation(const Lattice& lat, const AdaptedGrid& grid, int from, int to);

struct DriftEstimate {
    double slope;
    double standard_error;
    Eigen::ArrayXd times;
    Eigen::ArrayXd log_mean;
};

/// Exact GBM simulation of X under a proportional strategy, regression of
/// log sample-mean of e^{-nu t} X_t^{1-R} on t. Each path draws from its own
/// generator seeded by (seed, path), so results do not depend on evaluation
/// order. The standard error comes from 20 batch slopes.
DriftEstimate mc_drift_check(const Market& market, const ProportionalStrategy& strat, double nu, double R,
                             int n_paths, double horizon, std::uint64_t seed, int n_times = 50);

/// CSV rows "step,node,value" with 17 significant digits.
void write_grid_csv(std::ostream& out, const AdaptedGrid& grid);

}  // namespace ezsdu
