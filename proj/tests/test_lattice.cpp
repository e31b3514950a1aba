#include <gtest/gtest.h>

#include <cmath>
#include <sstream>

#include "ezsdu/error.hpp"
#include "ezsdu/lattice.hpp"

using namespace ezsdu;

namespace {

const Preferences P1(1.0, 0.03, 2.0, 2.5);
const Market M1(0.02, 0.07, 0.2);
const ProportionalStrategy kCandidate(0.625, 0.033375);

template <class F>
ErrorCode code_of(F&& f) {
    try {
        f();
    } catch (const Error& e) {
        return e.code();
    }
    ADD_FAILURE() << "expected an ezsdu::Error";
    return ErrorCode::ExperimentError;
}

}  // namespace

TEST(Lattice, LayoutAndSize) {
    const Lattice lat = build_lattice(M1, kCandidate, 0.1, 10, 2.0);
    EXPECT_EQ(lat.size(), 66);
    EXPECT_EQ(Lattice::offset(3), 6);
    EXPECT_EQ(lat.wealth(0, 0), 2.0);
    EXPECT_EQ(lat.wealth_at(10).size(), 11);
    EXPECT_NEAR(lat.time(7), 0.7, 1e-15);
}

TEST(Lattice, MomentsMatchTheDiffusion) {
    const double dt = 0.01;
    const Lattice lat = build_lattice(M1, kCandidate, dt, 5, 1.0);
    const double pi_sigma = 0.625 * 0.2;
    const double m = 0.02 + 0.625 * 0.05 - 0.033375 - 0.5 * pi_sigma * pi_sigma;
    EXPECT_GT(lat.p_up(), 0.0);
    EXPECT_LT(lat.p_up(), 1.0);
    EXPECT_NEAR(lat.log_step_mean(), m * dt, 1e-14);
    EXPECT_NEAR(lat.log_step_variance(), pi_sigma * pi_sigma * dt, 1e-14);
    const Eigen::ArrayXd next = step_expectation(lat, lat.wealth_at(1));
    EXPECT_NEAR(next(0), lat.growth_factor(), 1e-14);
}

TEST(Lattice, MeanWealthGrowsAtTheExactRate) {
    const Lattice lat = build_lattice(M1, kCandidate, 0.05, 40, 1.0);
    const AdaptedGrid X(lat.n_steps(), lat.node_wealth());
    const Eigen::ArrayXd mean = conditional_expectation(lat, X, 0, 40);
    EXPECT_NEAR(mean(0), std::pow(lat.growth_factor(), 40), 1e-12);
}

TEST(Lattice, BrownianPositionReproducesLogWealth) {
    const Lattice lat = build_lattice(M1, kCandidate, 0.02, 20, 1.0);
    const double pi_sigma = 0.625 * 0.2;
    const double m = lat.log_step_mean() / lat.dt();
    for (int j = 0; j <= 20; ++j) {
        EXPECT_NEAR(std::log(lat.wealth(20, j)), m * lat.time(20) + pi_sigma * lat.brownian(20, j), 1e-12);
    }
}

TEST(Lattice, ZeroRiskyFractionIsDeterministic) {
    const Lattice lat = build_lattice(M1, ProportionalStrategy(0.0, 0.01), 0.1, 5, 1.0);
    EXPECT_NEAR(lat.wealth(5, 0), lat.wealth(5, 5), 1e-15);
    EXPECT_NEAR(lat.wealth(5, 2), std::exp((0.02 - 0.01) * 0.5), 1e-14);
}

TEST(Lattice, RejectsBadSteps) {
    EXPECT_EQ(code_of([] { build_lattice(M1, kCandidate, 0.0, 5, 1.0); }), ErrorCode::InvalidStep);
    EXPECT_EQ(code_of([] { build_lattice(M1, kCandidate, 0.1, -1, 1.0); }), ErrorCode::InvalidStep);
    EXPECT_EQ(code_of([] { build_lattice(M1, kCandidate, 0.1, 5, 0.0); }), ErrorCode::InvalidParameters);
}

TEST(AdaptedGrid, ShapeAndSignChecks) {
    EXPECT_EQ(code_of([] { AdaptedGrid(3, Eigen::ArrayXd::Zero(5)); }), ErrorCode::DimensionMismatch);
    EXPECT_EQ(code_of([] { AdaptedGrid(1, Eigen::ArrayXd::Constant(3, 1.0), ValueSign::NonPositive); }),
              ErrorCode::SignDomainViolation);
    const Lattice lat = build_lattice(M1, kCandidate, 0.1, 4, 1.0);
    const AdaptedGrid a = AdaptedGrid::constant(lat, 2.0);
    EXPECT_EQ(a.scaled(1.5)(4, 2), 3.0);
    const AdaptedGrid b(3, Eigen::ArrayXd::Zero(10));
    EXPECT_EQ(code_of([&] { a.require_same_shape(b); }), ErrorCode::DimensionMismatch);
    EXPECT_EQ(code_of([&] { b.require_lattice(lat); }), ErrorCode::DimensionMismatch);
}

TEST(AdaptedGrid, FromNodesSeesTimeAndWealth) {
    const Lattice lat = build_lattice(M1, kCandidate, 0.1, 3, 1.0);
    const auto g = AdaptedGrid::from_nodes(lat, [](int, int, double t, double x) { return t * x; });
    EXPECT_NEAR(g(3, 1), 0.3 * lat.wealth(3, 1), 1e-15);
}

TEST(Expectation, ConstantsArePreserved) {
    const Lattice lat = build_lattice(M1, kCandidate, 0.1, 6, 1.0);
    const Eigen::ArrayXd next = Eigen::ArrayXd::Constant(7, 4.0);
    EXPECT_TRUE(step_expectation(lat, next).isApprox(Eigen::ArrayXd::Constant(6, 4.0)));
    EXPECT_EQ(code_of([&] { step_expectation(lat, Eigen::ArrayXd::Zero(30)); }), ErrorCode::DimensionMismatch);
}

TEST(Tail, ProportionalClosureUsesThetaEta) {
    const auto tail = TailClosure::proportional(P1, M1, kCandidate);
    EXPECT_EQ(tail.mode(), TailClosure::Mode::ProportionalContinuation);
    EXPECT_NEAR(tail.rate(), P1.theta() * 0.033375, 1e-15);
    EXPECT_NEAR(tail.tail(2.0), 2.0 / tail.rate(), 1e-12);
    EXPECT_EQ(TailClosure::zero().tail(5.0), 0.0);
}

TEST(Tail, NotEvaluableForExplosiveStrategy) {
    EXPECT_EQ(code_of([] { TailClosure::proportional(P1, M1, ProportionalStrategy(5.0, 0.01)); }),
              ErrorCode::NotEvaluable);
    EXPECT_EQ(code_of([] { TailClosure::with_rate(0.0); }), ErrorCode::NotEvaluable);
}

TEST(MonteCarlo, ReproducibleAndUnbiased) {
    const auto a = mc_drift_check(M1, kCandidate, P1.delta() * P1.theta(), P1.R(), 20000, 5.0, 11);
    const auto b = mc_drift_check(M1, kCandidate, P1.delta() * P1.theta(), P1.R(), 20000, 5.0, 11);
    EXPECT_EQ(a.slope, b.slope);
    EXPECT_EQ(a.standard_error, b.standard_error);
    EXPECT_LT(std::abs(a.slope + 0.02225), 4.0 * a.standard_error);
    EXPECT_EQ(a.times.size(), 51);
}

TEST(MonteCarlo, RequiresEnoughPaths) {
    EXPECT_EQ(code_of([] { mc_drift_check(M1, kCandidate, 0.02, 2.0, 10, 5.0, 1); }), ErrorCode::PreconditionFailed);
}

TEST(GridCsv, HeaderAndRows) {
    const Lattice lat = build_lattice(M1, kCandidate, 0.1, 1, 1.0);
    std::ostringstream os;
    write_grid_csv(os, AdaptedGrid::constant(lat, 0.1));
    EXPECT_EQ(os.str(), "step,node,value\n0,0,0.10000000000000001\n1,0,0.10000000000000001\n1,1,0.10000000000000001\n");
}
