#include <gtest/gtest.h>

#include <cmath>

#include "hjmsplit/convergence.hpp"
#include "test_support.hpp"

using namespace hjmsplit;
using hjmsplit::testing::demo_h0;
using hjmsplit::testing::demo_spec;

namespace {

const ForwardCurve& demo_curve() {
  static const ForwardCurve c = ForwardCurve::sample(1.0 / 240, 20.0, demo_h0);
  return c;
}

const Payoff kSmooth{PayoffKind::SmoothCosine, 1.0, 1.0};

ConvergenceSettings small_settings() {
  ConvergenceSettings s;
  s.ladder = {2, 4, 8};
  s.reference_steps = 16;
  s.points = PointSpec{PointKind::Sobol, 256, 1};
  return s;
}

}  // namespace

TEST(FitSlope, RecoversPowerLaw) {
  const std::vector<int> n = {4, 8, 16, 32};
  std::vector<double> e;
  for (int k : n) e.push_back(-3.0 * std::pow(k, -1.7));
  EXPECT_NEAR(fit_slope(n, e), 1.7, 1e-12);
  EXPECT_THROW(fit_slope(std::vector<int>{4}, std::vector<double>{1.0}), ConfigError);
}

TEST(ConvergenceStudy, ZeroVolatilityHasNoTimeStepError) {
  VolSpec spec = hjmsplit::testing::zero_vol_spec();
  spec.gamma = {0.0, 0.0, 0.0};
  const auto r = convergence_study(spec, demo_curve(), kSmooth, small_settings());
  ASSERT_EQ(r.levels.size(), 12u);
  for (const auto& l : r.levels) {
    EXPECT_LT(std::abs(l.error), 1e-15) << to_string(l.scheme) << " n=" << l.steps;
    EXPECT_LT(l.noise, 1e-15);
  }
}

TEST(ConvergenceStudy, LevelEqualToReferenceHasZeroError) {
  ConvergenceSettings s = small_settings();
  s.ladder = {4, 16};
  s.schemes = {Scheme::Swss, Scheme::LieTrotterForward};
  const auto r = convergence_study(demo_spec(), demo_curve(), kSmooth, s);
  for (const auto& l : r.of(Scheme::Swss))
    if (l.steps == 16) {
      EXPECT_EQ(l.error, 0.0);
      EXPECT_EQ(l.value, r.reference);
    }
}

TEST(ConvergenceStudy, SecondOrderSchemesBeatLieTrotter) {
  const auto r = convergence_study(demo_spec(), demo_curve(), kSmooth, small_settings());
  const auto fwd = r.of(Scheme::LieTrotterForward), nv = r.of(Scheme::NinomiyaVictoir), swss = r.of(Scheme::Swss);
  for (std::size_t i = 0; i < fwd.size(); ++i) {
    EXPECT_LT(std::abs(nv[i].error), std::abs(fwd[i].error)) << fwd[i].steps;
    EXPECT_LT(std::abs(swss[i].error), std::abs(fwd[i].error)) << fwd[i].steps;
  }
  // first-order errors roughly halve per doubling
  EXPECT_NEAR(fwd[1].error / fwd[2].error, 2.0, 0.5);
}

TEST(ConvergenceStudy, RichardsonRowsCombineAdjacentLevels) {
  const auto r = convergence_study(demo_spec(), demo_curve(), kSmooth, small_settings());
  const auto swss = r.of(Scheme::Swss);
  ASSERT_EQ(r.extrapolated.size(), 2u);
  for (std::size_t i = 0; i < 2; ++i) {
    EXPECT_EQ(r.extrapolated[i].steps, swss[i].steps);
    EXPECT_NEAR(r.extrapolated[i].value, (4.0 * swss[i + 1].value - swss[i].value) / 3.0, 1e-14);
    EXPECT_NEAR(r.extrapolated[i].error, r.extrapolated[i].value - r.reference, 1e-14);
  }
}

TEST(ConvergenceStudy, ThreadCountDoesNotChangeResults) {
  ConvergenceSettings s = small_settings();
  s.schemes = {Scheme::NinomiyaVictoir};
  const auto one = convergence_study(demo_spec(), demo_curve(), kSmooth, s);
  s.threads = 3;
  const auto three = convergence_study(demo_spec(), demo_curve(), kSmooth, s);
  ASSERT_EQ(one.levels.size(), three.levels.size());
  for (std::size_t i = 0; i < one.levels.size(); ++i) {
    EXPECT_EQ(one.levels[i].error, three.levels[i].error);
    EXPECT_EQ(one.levels[i].noise, three.levels[i].noise);
  }
}

TEST(ConvergenceStudy, LadderMustDivideReference) {
  ConvergenceSettings s = small_settings();
  s.ladder = {3, 4};
  s.reference_steps = 16;
  EXPECT_THROW(convergence_study(demo_spec(), demo_curve(), kSmooth, s), ConfigError);
}
