#include <gtest/gtest.h>

#include <cmath>
#include <limits>

#include "ezsdu/error.hpp"
#include "ezsdu/preferences.hpp"

using namespace ezsdu;

namespace {

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

const double kInf = std::numeric_limits<double>::infinity();

}  // namespace

TEST(Preferences, DerivedExponentsForReferenceCase) {
    const Preferences p(1.0, 0.03, 2.0, 2.5);
    EXPECT_NEAR(p.theta(), 2.0 / 3.0, 1e-15);
    EXPECT_NEAR(p.rho(), -0.5, 1e-15);
    EXPECT_NEAR(p.theta(), 1.0 / (1.0 - p.rho()), 1e-15);
    EXPECT_FALSE(p.needs_exponent_splitting());
    EXPECT_EQ(p.value_sign(), -1);
}

TEST(Preferences, EqualRiskAndIntertemporalAversionIsCrra) {
    const Preferences p(1.0, 0.03, 2.0, 2.0);
    EXPECT_EQ(p.theta(), 1.0);
    EXPECT_EQ(p.rho(), 0.0);
    EXPECT_EQ(derive_regime(p).kind, RegimeKind::CRRA);
}

TEST(Preferences, RejectsInvalidParameters) {
    EXPECT_EQ(code_of([] { Preferences(0.0, 0.03, 2.0, 2.5); }), ErrorCode::InvalidParameters);
    EXPECT_EQ(code_of([] { Preferences(1.0, 0.03, 1.0, 2.5); }), ErrorCode::InvalidParameters);
    EXPECT_EQ(code_of([] { Preferences(1.0, 0.03, 2.0, 1.0); }), ErrorCode::InvalidParameters);
    EXPECT_EQ(code_of([] { Preferences(1.0, 0.03, -2.0, 2.5); }), ErrorCode::InvalidParameters);
    EXPECT_EQ(code_of([] { Preferences(1.0, std::nan(""), 2.0, 2.5); }), ErrorCode::InvalidParameters);
    EXPECT_EQ(code_of([] { Market(0.02, 0.07, 0.0); }), ErrorCode::InvalidParameters);
}

TEST(Preferences, RegimeClassification) {
    EXPECT_EQ(derive_regime(Preferences(1, 0.03, 2.0, 2.5)).kind, RegimeKind::Contractive);
    EXPECT_EQ(derive_regime(Preferences(1, 0.03, 2.0, 1.5)).kind, RegimeKind::ThetaAboveOne);
    EXPECT_EQ(derive_regime(Preferences(1, 0.03, 0.5, 2.0)).kind, RegimeKind::ThetaNegative);
    EXPECT_FALSE(derive_regime(Preferences(1, 0.03, 2.0, 1.5)).solver_supported);
    EXPECT_TRUE(Preferences(1, 0.03, 2.0, 3.0).needs_exponent_splitting());
}

TEST(Market, SharpeRatio) {
    const Market m(0.02, 0.07, 0.2);
    EXPECT_NEAR(m.lambda(), 0.25, 1e-15);
}

TEST(Aggregator, DomainFollowsRiskAversion) {
    const Preferences above(1, 0.03, 2.0, 2.5), below(1, 0.03, 0.5, 0.25);
    EXPECT_EQ(value_sign(above), ValueSign::NonPositive);
    EXPECT_EQ(value_sign(below), ValueSign::NonNegative);
    EXPECT_TRUE(in_value_domain(above, -1.0));
    EXPECT_FALSE(in_value_domain(above, 1.0));
    EXPECT_TRUE(in_value_domain(below, 1.0));
}

TEST(Aggregator, DiscountedAndDifferenceFormsAgreeAtTimeZeroUpToDrift) {
    const Preferences p(1.0, 0.03, 2.0, 2.5);
    const double c = 0.7, v = -3.0;
    EXPECT_NEAR(g_delta(p, c, v), g_ez(p, 0.0, c, v) - p.delta() * p.theta() * v, 1e-14);
    EXPECT_NEAR(g_ez(p, 1.0, c, v), std::exp(-p.delta()) * g_ez(p, 0.0, c, v), 1e-14);
}

TEST(TransformedAggregator, BoundaryConventions) {
    const double rho = -0.5;
    EXPECT_DOUBLE_EQ(h_ez(2.0, 4.0, rho), 1.0);
    EXPECT_EQ(h_ez(0.0, 4.0, rho), 0.0);
    EXPECT_EQ(h_ez(kInf, 4.0, rho), kInf);
    EXPECT_EQ(h_ez(2.0, 0.0, rho), kInf);
    EXPECT_EQ(h_ez(2.0, kInf, rho), 0.0);
    const auto tagged = h_ez(ExtendedNonNegative::finite(1.0), ExtendedNonNegative::infinity(), rho);
    EXPECT_TRUE(tagged.is_zero());
}

TEST(Transform, RoundTripBetweenUtilityAndTransformedCoordinates) {
    const Preferences p(1.0, 0.03, 2.0, 2.5);
    const auto wu = transform_vc_to_wu(p, -5.0, 0.3, 2.0);
    EXPECT_NEAR(wu.W.finite_value(), 5.0, 1e-14);
    const auto back = transform_wu_to_vc(p, wu.W, wu.U, 2.0);
    EXPECT_NEAR(back.V, -5.0, 1e-13);
    EXPECT_NEAR(back.C, 0.3, 1e-13);
}

TEST(Transform, ZeroConsumptionMapsToInfiniteU) {
    const Preferences p(1.0, 0.03, 2.0, 2.5);
    EXPECT_TRUE(transform_vc_to_wu(p, -1.0, 0.0, 0.0).U.is_infinite());
}

TEST(Upcount, IsInvertible) {
    const Preferences p(1.0, 0.03, 2.0, 2.5);
    Eigen::ArrayXd t(3), v(3);
    t << 0.0, 1.0, 5.0;
    v << -1.0, -2.0, -3.0;
    const auto up = upcount(p, t, v, UpcountDirection::DiscountedToDifference);
    EXPECT_NEAR(up(2), std::exp(p.delta() * p.theta() * 5.0) * -3.0, 1e-13);
    const auto down = upcount(p, t, up, UpcountDirection::DifferenceToDiscounted);
    EXPECT_TRUE(down.isApprox(v, 1e-14));
}

TEST(NumeraireShift, RemovesDiscountingAndKeepsSharpeRatio) {
    const Preferences p(1.0, 0.03, 2.0, 2.5);
    const Market m(0.02, 0.07, 0.2);
    const double chi = discount_removing_chi(p);
    const auto [p0, m0] = numeraire_shift(p, m, chi);
    EXPECT_NEAR(p0.delta(), 0.0, 1e-16);
    EXPECT_NEAR(m0.r(), m.r() - chi, 1e-16);
    EXPECT_NEAR(m0.lambda(), m.lambda(), 1e-14);
    EXPECT_EQ(p0.R(), p.R());
    EXPECT_EQ(p0.S(), p.S());
}

TEST(ErrorCodes, ExitStatusMapping) {
    EXPECT_EQ(exit_code(ErrorCode::ValidationError), 2);
    EXPECT_EQ(exit_code(ErrorCode::ParseError), 2);
    EXPECT_EQ(exit_code(ErrorCode::IoError), 4);
    EXPECT_EQ(exit_code(ErrorCode::NotConverged), 3);
    const Error e(ErrorCode::IllPosed, "eta <= 0");
    EXPECT_STREQ(e.what(), "IllPosed: eta <= 0");
    EXPECT_EQ(e.detail(), "eta <= 0");
}
