#include <gtest/gtest.h>

#include <cmath>

#include "ezsdu/error.hpp"
#include "ezsdu/solver.hpp"

using namespace ezsdu;

namespace {

const Preferences P1(1.0, 0.03, 2.0, 2.5);
const Market M1(0.02, 0.07, 0.2);

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

struct Setup {
    CandidatePolicy cand;
    Lattice lat;
    AdaptedGrid C;
    AdaptedGrid U;
    TailClosure tail;
};

Setup setup(const Preferences& prefs, double dt = 0.05, int n = 100) {
    const auto cand = candidate_policy(prefs, M1);
    Lattice lat = build_lattice(M1, cand.strategy(), dt, n, 1.0);
    AdaptedGrid C(n, cand.eta * lat.node_wealth());
    AdaptedGrid U = consumption_to_U(prefs, C, lat);
    return {cand, lat, C, U, TailClosure::proportional(prefs, M1, cand.strategy())};
}

}  // namespace

TEST(Picard, ConvergesToClosedForm) {
    const auto s = setup(P1);
    const auto r = picard_solve(P1, s.U, s.lat, s.tail);
    EXPECT_TRUE(r.converged);
    EXPECT_EQ(r.splitting_depth, 0);
    EXPECT_DOUBLE_EQ(r.modulus, 0.5);
    EXPECT_NEAR(r.solution(0, 0) / (1.0 - P1.R()) / s.cand.value(1.0), 1.0, 1e-3);
    EXPECT_LT(r.residual, 1e-7);
    EXPECT_EQ(r.clamp_count, 0);
}

TEST(Picard, FixedPointIsProportionalToWealthAcrossNodes) {
    const auto s = setup(P1);
    const auto r = picard_solve(P1, s.U, s.lat, s.tail);
    const AdaptedGrid V = W_to_V(P1, r.solution);
    for (int j = 0; j <= 100; j += 25) {
        const double x = s.lat.wealth(100, j);
        EXPECT_NEAR(V(100, j) * x * std::exp(P1.delta() * P1.theta() * 5.0) / V(0, 0), 1.0, 1e-3);
    }
}

TEST(Picard, ContractionRatiosRespectModulus) {
    const auto s = setup(P1);
    const auto r = picard_solve(P1, s.U, s.lat, s.tail);
    for (std::size_t i = 3; i < r.contraction_ratios.size(); ++i) EXPECT_LE(r.contraction_ratios[i], 0.55);
}

TEST(Picard, ExponentSplittingForRhoMinusOne) {
    const Preferences p(1.0, 0.03, 2.0, 3.0);
    const auto s = setup(p);
    const auto r = picard_solve(p, s.U, s.lat, s.tail);
    EXPECT_TRUE(r.converged);
    EXPECT_GE(r.splitting_depth, 1);
    EXPECT_NEAR(r.solution(0, 0) / (1.0 - p.R()) / s.cand.value(1.0), 1.0, 1e-2);
}

TEST(Picard, StartingPointDoesNotMatter) {
    const auto s = setup(P1);
    SolverOptions lo, hi;
    lo.initial_scale = 0.1;
    hi.initial_scale = 10.0;
    const auto a = picard_solve(P1, s.U, s.lat, s.tail, lo);
    const auto b = picard_solve(P1, s.U, s.lat, s.tail, hi);
    EXPECT_LE(((a.solution.values() - b.solution.values()).abs() / b.solution.values().abs()).maxCoeff(), 2 * lo.tol);
}

TEST(Picard, ReportsNonConvergence) {
    const auto s = setup(P1);
    SolverOptions o;
    o.max_iter = 2;
    EXPECT_EQ(code_of([&] { picard_solve(P1, s.U, s.lat, s.tail, o); }), ErrorCode::NotConverged);
}

TEST(Picard, RejectsUnsupportedRegime) {
    const Preferences p(1.0, 0.03, 2.0, 1.5);
    const auto s = setup(P1);
    EXPECT_EQ(code_of([&] { picard_solve(p, s.U, s.lat, s.tail); }), ErrorCode::UnsupportedRegime);
}

TEST(Picard, PerturbedProblemNeedsLambda) {
    const auto s = setup(P1);
    SolverOptions o;
    o.epsilon = 0.1;
    EXPECT_EQ(code_of([&] { picard_solve(P1, s.U, s.lat, s.tail, o); }), ErrorCode::MissingLambda);
    const auto r = picard_solve(P1, s.U, s.lat, s.tail, o, &s.U);
    EXPECT_TRUE(r.converged);
    const auto plain = picard_solve(P1, s.U, s.lat, s.tail);
    EXPECT_GT(r.solution(0, 0), plain.solution(0, 0));
}

TEST(OrderCheck, CandidateConsumptionIsInClass) {
    const auto s = setup(P1);
    const auto cert = order_check(s.U, P1.theta(), s.lat, s.tail);
    EXPECT_GT(cert.k_lower, 0.0);
    EXPECT_LT(cert.K_upper, 1e3);
    EXPECT_NEAR(cert.terminal_decay_rate, P1.theta() * s.cand.eta, 1e-5);
}

TEST(OrderCheck, NonDecayingTargetIsRejected) {
    const auto s = setup(P1);
    const AdaptedGrid growing = AdaptedGrid::from_nodes(s.lat, [](int, int, double t, double) { return std::exp(t); });
    EXPECT_EQ(code_of([&] { order_check(growing, P1.theta(), s.lat, s.tail); }), ErrorCode::NotInClass);
}

TEST(ApplyF, FixedPointIsInvariant) {
    const auto s = setup(P1);
    const auto r = picard_solve(P1, s.U, s.lat, s.tail);
    const AdaptedGrid next = apply_F(P1, s.U, r.solution, s.lat, s.tail);
    EXPECT_LT(((next.values() - r.solution.values()).abs() / r.solution.values().abs()).maxCoeff(), 1e-7);
    const AdaptedGrid negative = r.solution.scaled(-1.0);
    EXPECT_EQ(code_of([&] { apply_F(P1, s.U, negative, s.lat, s.tail); }), ErrorCode::DomainError);
}

TEST(Conversions, RoundTrip) {
    const auto s = setup(P1, 0.1, 10);
    const AdaptedGrid W = AdaptedGrid::constant(s.lat, 3.0);
    const AdaptedGrid V = W_to_V(P1, W);
    EXPECT_EQ(V(5, 2), -3.0);
    EXPECT_TRUE(V_to_W(P1, V).values().isApprox(W.values()));
    const auto U0 = consumption_to_U(P1, AdaptedGrid::constant(s.lat, 0.0), s.lat);
    EXPECT_TRUE(std::isinf(U0(0, 0)));
}

TEST(Residuals, FixedPointIsASolutionAndScalingsAreOneSided) {
    const auto s = setup(P1);
    const auto r = picard_solve(P1, s.U, s.lat, s.tail);
    const AdaptedGrid V = W_to_V(P1, r.solution);
    const auto exact = check_solution(V, s.C, s.lat, P1);
    EXPECT_EQ(exact.classification, Classification::Solution);
    EXPECT_TRUE(exact.transversality_ok);
    EXPECT_GT(exact.pairs_checked, 0);

    CheckOptions transformed;
    transformed.space = CheckSpace::Transformed;
    EXPECT_EQ(check_solution(r.solution.scaled(1.2), s.U, s.lat, P1, transformed).classification,
              Classification::Supersolution);
    EXPECT_EQ(check_solution(r.solution.scaled(0.8), s.U, s.lat, P1, transformed).classification,
              Classification::Subsolution);
    // R > 1 reverses the order when passing back to utilities.
    EXPECT_EQ(check_solution(V.scaled(1.2), s.C, s.lat, P1).classification, Classification::Subsolution);
}

TEST(Residuals, WrongSignIsRejected) {
    const auto s = setup(P1, 0.1, 10);
    EXPECT_EQ(code_of([&] { check_solution(AdaptedGrid::constant(s.lat, 1.0), s.C, s.lat, P1); }),
              ErrorCode::SignDomainViolation);
}

TEST(Compare, ReportsViolations) {
    const AdaptedGrid lo(1, Eigen::Array3d(1.0, 2.0, 3.0));
    const AdaptedGrid hi(1, Eigen::Array3d(1.5, 1.0, 3.0));
    const auto v = compare(lo, hi);
    EXPECT_FALSE(v.ordered);
    ASSERT_EQ(v.violations.size(), 1u);
    EXPECT_EQ(v.violations[0].step, 1);
    EXPECT_EQ(v.violations[0].node, 0);
    EXPECT_DOUBLE_EQ(v.min_gap, -1.0);
    EXPECT_TRUE(compare(lo, lo.scaled(2.0)).ordered);
}

TEST(GeneralizedUtility, ZeroConsumptionIsHomogeneousAndDiverges) {
    const auto s = setup(P1);
    const auto r = generalized_utility(AdaptedGrid::constant(s.lat, 0.0), P1, M1, s.lat, s.tail, 8192);
    ASSERT_EQ(r.n.size(), 14u);
    for (std::size_t i = 0; i < r.n.size(); ++i) EXPECT_NEAR(r.values[i] / (r.n[i] * r.values[0]), 1.0, 1e-10);
    EXPECT_TRUE(r.monotone);
    EXPECT_EQ(r.classification, LimitKind::DivergesToMinusInf);
}

TEST(GeneralizedUtility, ProperStreamHasFiniteLimit) {
    const auto s = setup(P1);
    const auto r = generalized_utility(s.C, P1, M1, s.lat, s.tail, 64);
    EXPECT_EQ(r.classification, LimitKind::Finite);
    EXPECT_NEAR(r.limit / s.cand.value(1.0), 1.0, 1e-3);
}
