#include <gtest/gtest.h>

#include <cmath>
#include <sstream>

#include "hjmsplit/curve.hpp"
#include "test_support.hpp"

using namespace hjmsplit;
using hjmsplit::testing::demo_h0;

TEST(ForwardCurveTest, EvaluateInterpolatesAffinely) {
  const ForwardCurve c(0.5, {1.0, 2.0, 4.0});
  EXPECT_DOUBLE_EQ(evaluate(c, 0.0), 1.0);
  EXPECT_DOUBLE_EQ(evaluate(c, 0.25), 1.5);
  EXPECT_DOUBLE_EQ(evaluate(c, 0.75), 3.0);
  EXPECT_DOUBLE_EQ(evaluate(c, 1.0), 4.0);
  EXPECT_THROW(evaluate(c, 1.01), DomainError);
  EXPECT_THROW(evaluate(c, -0.01), DomainError);
}

TEST(ForwardCurveTest, IntegrateIsExactForPiecewiseAffine) {
  const ForwardCurve c(0.5, {1.0, 2.0, 4.0});
  // trapezoids: 0.75 + 1.5
  EXPECT_DOUBLE_EQ(integrate(c, 0.0, 1.0), 2.25);
  // [0.25, 0.75]: 0.5*(1.5+2)/2 + 0.25*(2+3)/2
  EXPECT_DOUBLE_EQ(integrate(c, 0.25, 0.75), 0.4375 + 0.625);
  EXPECT_EQ(integrate(c, 0.3, 0.3), 0.0);
  EXPECT_THROW(integrate(c, 0.6, 0.2), DomainError);
}

TEST(ForwardCurveTest, ConstructionValidates) {
  EXPECT_THROW(ForwardCurve(0.0, {1.0, 2.0}), ConfigError);
  EXPECT_THROW(ForwardCurve(0.1, {1.0}), ConfigError);
  EXPECT_THROW(ForwardCurve(0.1, {1.0, std::nan("")}), ConfigError);
  EXPECT_EQ(ForwardCurve::node_count(0.25, 1.0), 5u);
  EXPECT_EQ(ForwardCurve::node_count(0.25, 1.1), 6u);
}

TEST(ShiftDecayFlow, ShiftsByWholeSlotsAndAccruesShortRate) {
  ModelState s{ForwardCurve(0.5, {1.0, 2.0, 4.0, 5.0}), 2.0, 0.0};
  const auto out = shift_decay_flow(s, 1.0, 0.5);
  EXPECT_EQ(out.curve.values(), (std::vector<double>{4.0, 5.0, 5.0, 5.0}));
  EXPECT_DOUBLE_EQ(out.z, 0.75 + 1.5);
  EXPECT_DOUBLE_EQ(out.v, 2.0 * std::exp(-0.5));
}

TEST(ShiftDecayFlow, BeyondTheGridUsesTheLastNode) {
  ModelState s{ForwardCurve(0.5, {1.0, 3.0}), 0.0, 0.0};
  const auto out = shift_decay_flow(s, 1.5, 0.0);
  EXPECT_EQ(out.curve.values(), (std::vector<double>{3.0, 3.0}));
  EXPECT_DOUBLE_EQ(out.z, 1.0 + 2 * 0.5 * 3.0);
}

TEST(ShiftDecayFlow, SemigroupProperty) {
  const ModelState s = hjmsplit::testing::demo_state(1.0 / 24, 12.0, 0.3);
  const auto twice = shift_decay_flow(shift_decay_flow(s, 0.25, 1.5), 0.5, 1.5);
  const auto once = shift_decay_flow(s, 0.75, 1.5);
  EXPECT_EQ(twice.curve, once.curve);
  EXPECT_NEAR(twice.z, once.z, 1e-15);
  EXPECT_NEAR(twice.v, once.v, 1e-15);
}

TEST(ShiftDecayFlow, RejectsMisalignedSteps) {
  const ModelState s = hjmsplit::testing::demo_state(0.1, 2.0);
  EXPECT_THROW(shift_decay_flow(s, 0.15, 1.0), ConfigError);
  EXPECT_NO_THROW(shift_decay_flow(s, 0.3, 1.0));
}

TEST(WeightedNormTest, FlatCurveHasOnlyLevelTerm) {
  ModelState s{ForwardCurve::flat(0.1, 5.0, 0.03), 0.2, 0.0};
  const WeightedNorm w{1, 0.1, 0.5};
  EXPECT_NEAR(squared_h_norm(s, w), 0.03 * 0.03 + 0.04, 1e-15);
  EXPECT_NEAR(weighted_norm(s, w), std::cosh(0.5 * std::sqrt(0.03 * 0.03 + 0.04)), 1e-15);
}

TEST(WeightedNormTest, LinearCurveFirstDerivativeTerm) {
  // h(x) = x on [0, 2]: int_0^2 1 * e^{a x} dx with trapezoid weights
  const double dx = 1e-3, a = 0.1;
  ModelState s{ForwardCurve::sample(dx, 2.0, [](double x) { return x; }), 0.0, 0.0};
  const double exact = (std::exp(a * (2.0 - dx)) - 1.0) / a;
  EXPECT_NEAR(squared_h_norm(s, {1, a, 1.0}), exact, 1e-6);
}

TEST(CurveCsv, RoundTripsBitExactly) {
  const ForwardCurve c = ForwardCurve::sample(1.0 / 240, 3.0, demo_h0);
  std::stringstream buf;
  write_curve_csv(buf, c);
  const ForwardCurve back = read_curve_csv(buf);
  EXPECT_EQ(back.values(), c.values());
  EXPECT_NEAR(back.grid_spacing(), c.grid_spacing(), 1e-18);
}

TEST(CurveCsv, RejectsNonUniformGridsAndGarbage) {
  std::istringstream uneven("maturity_years,rate\n0,0.01\n0.5,0.02\n1.2,0.03\n");
  EXPECT_THROW(read_curve_csv(uneven), ConfigError);
  std::istringstream garbage("maturity_years,rate\n0,abc\n");
  EXPECT_THROW(read_curve_csv(garbage), ConfigError);
  std::istringstream offset("maturity_years,rate\n0.1,0.01\n0.2,0.02\n");
  EXPECT_THROW(read_curve_csv(offset), ConfigError);
}

TEST(CurveCsv, ResampleOntoCoarserGrid) {
  const ForwardCurve fine = ForwardCurve::sample(1.0 / 240, 20.0, demo_h0);
  const ForwardCurve coarse = resample(fine, 1.0 / 12, 11.0);
  ASSERT_EQ(coarse.size(), 133u);
  for (std::size_t k = 0; k < coarse.size(); ++k) EXPECT_NEAR(coarse[k], demo_h0(coarse.node(k)), 1e-15);
  EXPECT_THROW(resample(fine, 0.5, 25.0), DomainError);
}
