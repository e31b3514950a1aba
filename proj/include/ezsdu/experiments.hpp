#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "ezsdu/closed_form.hpp"
#include "ezsdu/lattice.hpp"
#include "ezsdu/preferences.hpp"
#include "ezsdu/solver.hpp"

namespace ezsdu {

// Deterministic counterexamples on A = union of [2n, 2n+1).

struct LinearFit {
    double slope;
    double intercept;
    double slope_se;
    double t_stat;  // +inf when the fit is exact
};

/// Ordinary least squares of y on x; needs at least three points.
LinearFit fit_line(const std::vector<double>& x, const std::vector<double>& y);

struct CounterexampleReport {
    double discounted_value_at_0;  // integral of the discounted integrand over [0, inf)
    double formula_value_at_0;     // the closed-form V(0) of the example
    std::vector<double> horizons;
    std::vector<double> discounted_partials;  // integral over [0, T] of the discounted integrand
    std::vector<double> positive_part_partials;
    std::vector<double> negative_part_partials;
    LinearFit positive_fit;
    LinearFit negative_fit;
    /// Both difference-form parts grow linearly (slope > 0, t > 5).
    bool difference_form_diverges;
};

/// V^Delta(t) = (1/(1-R)) exp(rate (t - floor t)(1_A - 1_{A^c})), with
/// rate = delta theta (theta = 1 for the additive case).
double counterexample_v_delta(double rate, double R, double t);

CounterexampleReport crra_counterexample(double delta, double R, const std::vector<double>& horizons);

CounterexampleReport ezsdu_counterexample(const Preferences& prefs, const std::vector<double>& horizons);

/// Linear growth rate of the positive part of the EZ difference-form
/// integrand: (e^{delta theta} - 1) / (2 (R - 1)).
double ezsdu_positive_slope(const Preferences& prefs);

struct SweepCell {
    double pi;
    double xi;
    double nu;
    double H_nu_value;
    double H_delta_value;
    bool transversality_ok;
    double K;
    double V0;
    BubbleFlag bubble;
    bool evaluable;  // H_delta(pi_hat, xi) != 0
};

struct SweepSummary {
    std::vector<SweepCell> cells;
    int bubbles;
    int transversality_failures;
    double xi_nu_max;
    double eta_additive;
};

/// Cells along xi at pi_hat = lambda/(sigma R) for additive CRRA utility.
/// A cell whose transversality fails carries no valid value sign and is
/// never a bubble.
SweepSummary transversality_sweep(double delta, double R, const Market& market, double nu,
                                  const std::vector<double>& xi_grid);

struct GridSearchResult {
    double pi;
    double xi;
    std::size_t pi_index;
    std::size_t xi_index;
    double max_value;
    std::size_t masked_cells;
    /// values(i, j) for pi_grid[i], xi_grid[j]; NaN where not evaluable.
    Eigen::ArrayXXd values;
};

/// Throws IllPosed if eta <= 0, UnsupportedRegime unless theta in (0,1).
GridSearchResult policy_grid_search(const Preferences& prefs, const Market& market, const std::vector<double>& pi_grid,
                                    const std::vector<double>& xi_grid);

/// Evenly spaced grid lo, lo+step, ..., up to hi (inclusive within step/2).
std::vector<double> make_grid(double lo, double hi, double step);

struct AversionReport {
    // Risk: Y in {y_low, y_high} equiprobable, revealed at time 0.
    double y_low, y_high;
    double utility_random;  // E[V(Y)]
    double utility_mean;    // V(E[Y])
    double risk_gap;        // utility_random - utility_mean, <= 0 expected
    double moment_ratio;    // E[Y^{1-R}] / (E Y)^{1-R}
    // Time: two-level stream against its discount-weighted average level.
    double c_first, c_second, switch_time;
    double average_level;
    double utility_stream;
    double utility_average;
    double temporal_gap;  // <= 0 expected
    bool signs_as_expected;
};

AversionReport aversion_demos(const Preferences& prefs, double y_low = 0.5, double y_high = 1.5, double c_first = 1.0,
                              double c_second = 2.0, double switch_time = 10.0);

struct ProbePoint {
    double parameter;  // xi offset (R < 1) or n (R > 1)
    double value;
};

struct DivergenceReport {
    bool risk_averse_above_one;  // R > 1
    double eta;
    double xi_star;  // -eta S / (1-S), R < 1 only
    std::vector<ProbePoint> probe;
    bool strictly_monotone;
    double max_abs_value;
    LimitKind verdict;
};

/// Throws WellPosed if eta > 0. For R < 1 evaluates the proportional utility
/// at pi_hat along xi = xi_star + offset; for R > 1 shifts r and mu by
/// alpha_n = S/(S-1)(1/n - eta) and reports n^{theta S} b^theta x^{1-R}/(1-R).
DivergenceReport wellposed_divergence(const Preferences& prefs, const Market& market, const std::vector<double>& schedule,
                                      double wealth = 1.0);

struct HJBSample {
    double x, y, c, pi;
    double A1, A2, A3;
};

struct StrategyCheck {
    double pi;
    double xi;
    Classification classification;
    double min_defect;
    double max_defect;
    bool transversality_ok;
};

struct VerificationReport {
    double epsilon;
    std::vector<HJBSample> samples;
    HJBSample at_optimum;
    double max_A1, max_A2, max_abs_A3;
    std::vector<StrategyCheck> strategies;
    int supersolutions;
};

struct VerificationOptions {
    double epsilon = 0.1;
    int n_samples = 10000;
    int n_strategies = 20;
    double dt = 0.02;
    int n_steps = 50;
    double tol = 1e-6;
    std::uint64_t seed = 1;
};

/// HJB trio evaluated after a change of numeraire that removes discounting.
HJBSample hjb_trio(const Preferences& prefs, const Market& market, double epsilon, double x, double y, double c,
                   double pi);

VerificationReport verification_check(const Preferences& prefs, const Market& market,
                                      const VerificationOptions& options = {});

struct ComparisonPropertyReport {
    int pairs;
    int violations;
    int projections;  // noise halvings needed to keep the one-sided defects
    std::vector<double> kappa_sub, kappa_super;
};

/// Randomized pairs kappa_sub W* (1+noise), kappa_super W* (1+noise) around
/// the lattice fixed point W*, checked with check_solution and compared.
ComparisonPropertyReport comparison_property(const Preferences& prefs, const Market& market, double dt, int n_steps,
                                             int pairs, std::uint64_t seed);

}  // namespace ezsdu
