#include <gtest/gtest.h>

#include <cmath>
#include <random>

#include "hjmsplit/splitting.hpp"
#include "test_support.hpp"

using namespace hjmsplit;
using hjmsplit::testing::demo_spec;
using hjmsplit::testing::demo_state;
using hjmsplit::testing::max_abs_diff;
using hjmsplit::testing::random_state;

namespace {

using Field = std::function<VectorFieldValue(const ModelState&)>;

// One classical RK4 step on the full nodewise state (curve and v).
ModelState nodewise_rk4(const Field& f, const ModelState& x, double h) {
  auto add = [](const ModelState& s, const VectorFieldValue& k, double c) {
    ModelState out = s;
    for (std::size_t i = 0; i < out.curve.size(); ++i) out.curve[i] += c * k.curve[i];
    out.v += c * k.v;
    return out;
  };
  const auto k1 = f(x);
  const auto k2 = f(add(x, k1, 0.5 * h));
  const auto k3 = f(add(x, k2, 0.5 * h));
  const auto k4 = f(add(x, k3, h));
  ModelState out = x;
  for (std::size_t i = 0; i < out.curve.size(); ++i)
    out.curve[i] += h / 6.0 * (k1.curve[i] + 2 * k2.curve[i] + 2 * k3.curve[i] + k4.curve[i]);
  out.v += h / 6.0 * (k1.v + 2 * k2.v + 2 * k3.v + k4.v);
  return out;
}

ModelState nodewise_flow(const Field& f, ModelState x, double t, int substeps) {
  for (int i = 0; i < substeps; ++i) x = nodewise_rk4(f, x, t / substeps);
  return x;
}

void expect_states_near(const ModelState& a, const ModelState& b, double tol) {
  ASSERT_EQ(a.curve.size(), b.curve.size());
  EXPECT_LT(max_abs_diff(a.curve.values(), b.curve.values()), tol);
  EXPECT_NEAR(a.v, b.v, tol);
  EXPECT_NEAR(a.z, b.z, tol);
}

// One scheme step built only from value-semantics flows; each flow rebuilds
// all cached quantities from the state.
ModelState composed_step(const VolSpec& spec, Scheme scheme, ModelState s, double dt, const std::vector<double>& dw,
                         double aux) {
  auto sweep_fwd = [&](ModelState x) {
    x = drift_flow(spec, x, dt);
    for (int j = 0; j < spec.factors(); ++j) x = diffusion_flow(spec, j, x, dw[static_cast<std::size_t>(j)]);
    return x;
  };
  auto sweep_bwd = [&](ModelState x) {
    for (int j = spec.factors() - 1; j >= 0; --j) x = diffusion_flow(spec, j, x, dw[static_cast<std::size_t>(j)]);
    return drift_flow(spec, x, dt);
  };
  switch (scheme) {
    case Scheme::LieTrotterForward:
      return sweep_fwd(shift_decay_flow(s, dt, spec.ou_alpha));
    case Scheme::LieTrotterBackward:
      return shift_decay_flow(sweep_bwd(s), dt, spec.ou_alpha);
    case Scheme::NinomiyaVictoir: {
      s = shift_decay_flow(s, 0.5 * dt, spec.ou_alpha);
      s = aux < 0.5 ? sweep_fwd(s) : sweep_bwd(s);
      return shift_decay_flow(s, 0.5 * dt, spec.ou_alpha);
    }
    default:
      throw std::logic_error("composed_step: unsupported scheme");
  }
}

}  // namespace

TEST(DriftFlow, MatchesNodewiseRk4) {
  const VolSpec spec = demo_spec();
  std::mt19937_64 rng(5);
  for (int trial = 0; trial < 10; ++trial) {
    const ModelState s = random_state(rng, 1.0 / 24, 11.0);
    const Field v0 = [&](const ModelState& x) { return stratonovich_drift(spec, x); };
    expect_states_near(drift_flow(spec, s, 0.25), nodewise_rk4(v0, s, 0.25), 1e-15);
  }
}

TEST(DriftFlow, CloseToExactFlow) {
  const VolSpec spec = demo_spec();
  const ModelState s = demo_state(1.0 / 24, 11.0, 0.4);
  const Field v0 = [&](const ModelState& x) { return stratonovich_drift(spec, x); };
  expect_states_near(drift_flow(spec, s, 1.0 / 12), nodewise_flow(v0, s, 1.0 / 12, 200), 1e-12);
}

TEST(DiffusionFlow, MatchesNodewiseRk4) {
  const VolSpec spec = demo_spec();
  std::mt19937_64 rng(9);
  for (int trial = 0; trial < 10; ++trial) {
    const ModelState s = random_state(rng, 1.0 / 24, 11.0);
    for (int j = 0; j < spec.factors(); ++j) {
      const Field vj = [&](const ModelState& x) { return diffusion_field(spec, j, x); };
      const double w = 0.3 * (trial - 5) / 5.0;
      expect_states_near(diffusion_flow(spec, j, s, w), nodewise_rk4(vj, s, w), 1e-15);
    }
  }
}

TEST(DiffusionFlow, CloseToExactFlowAndReversible) {
  const VolSpec spec = demo_spec();
  const ModelState s = demo_state(1.0 / 24, 11.0, -0.2);
  for (int j = 0; j < spec.factors(); ++j) {
    const Field vj = [&](const ModelState& x) { return diffusion_field(spec, j, x); };
    const auto forward = diffusion_flow(spec, j, s, 0.3);
    expect_states_near(forward, nodewise_flow(vj, s, 0.3, 400), 1e-9);
    expect_states_near(diffusion_flow(spec, j, forward, -0.3), s, 1e-9);
  }
}

TEST(Step, FusedChainsMatchComposedFlows) {
  const VolSpec spec = demo_spec();
  const double dt = 1.0 / 12;
  std::mt19937_64 rng(21);
  std::normal_distribution<double> z(0.0, 1.0);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  for (Scheme scheme : {Scheme::LieTrotterForward, Scheme::LieTrotterBackward, Scheme::NinomiyaVictoir}) {
    const double dx = scheme == Scheme::NinomiyaVictoir ? dt / 2 : dt;
    const ModelState start = demo_state(dx, 13.0, 0.1);
    const FactorGrid grid = factor_grid_for(spec, start);
    PathState fused(grid, start);
    ModelState composed = start;
    for (int n = 0; n < 24; ++n) {
      std::vector<double> dw(3);
      for (double& w : dw) w = z(rng) * std::sqrt(dt);
      const double aux = u(rng);
      step(fused, scheme, dt, dw, aux);
      composed = composed_step(spec, scheme, composed, dt, dw, aux);
    }
    expect_states_near(fused.release(), composed, 1e-13);
  }
}

TEST(Step, EulerMatchesItoIncrement) {
  const VolSpec spec = demo_spec();
  const double dt = 1.0 / 12;
  const ModelState s = demo_state(dt, 11.0, 0.2);
  const std::vector<double> dw = {0.1, -0.2, 0.05};
  ModelState expected = s;
  const auto alpha = hjm_drift(spec, s);
  for (std::size_t k = 0; k < s.curve.size(); ++k) expected.curve[k] += alpha[k] * dt;
  for (int j = 0; j < 3; ++j) {
    const auto sj = sigma(spec, j, s);
    for (std::size_t k = 0; k < s.curve.size(); ++k) expected.curve[k] += sj[k] * dw[static_cast<std::size_t>(j)];
    expected.v += spec.gamma[static_cast<std::size_t>(j)] * dw[static_cast<std::size_t>(j)];
  }
  expected = shift_decay_flow(expected, dt, spec.ou_alpha);
  expect_states_near(step(spec, Scheme::EulerMaruyama, s, dt, dw), expected, 1e-15);
}

TEST(Step, SwssIsNotASingleChainStep) {
  const VolSpec spec = demo_spec();
  const ModelState s = demo_state(0.25, 11.0);
  const std::vector<double> dw(3, 0.0);
  EXPECT_THROW(step(spec, Scheme::Swss, s, 0.25, dw), ConfigError);
  EXPECT_THROW(step(spec, Scheme::LieTrotterForward, s, 0.25, std::vector<double>(2, 0.0)), ConfigError);
}

TEST(PathSimulatorTest, ZeroVolatilityIsPureTransport) {
  VolSpec spec = hjmsplit::testing::zero_vol_spec();
  spec.gamma = {0.0, 0.0, 0.0};
  const ModelState start = demo_state(1.0 / 24, 14.0, 0.3);
  for (Scheme scheme : {Scheme::EulerMaruyama, Scheme::LieTrotterForward, Scheme::LieTrotterBackward,
                        Scheme::NinomiyaVictoir, Scheme::Swss}) {
    SimConfig c;
    c.horizon = 2.0;
    c.steps_per_year = 12;
    c.scheme = {scheme, 0};
    const PathSimulator sim(spec, c, start);
    std::vector<double> row(static_cast<std::size_t>(sim.dimension()), 0.3);
    const auto expected = shift_decay_flow(start, 2.0, spec.ou_alpha);
    for (const auto& ws : sim.simulate_path(row)) {
      EXPECT_EQ(ws.state.curve, expected.curve) << to_string(scheme);
      EXPECT_NEAR(ws.state.z, expected.z, 1e-15);
      EXPECT_NEAR(ws.state.v, start.v * std::exp(-spec.ou_alpha * 2.0), 1e-15);
    }
  }
}

TEST(PathSimulatorTest, SwssAveragesBothLieTrotterOrderings) {
  const VolSpec spec = demo_spec();
  const ModelState start = demo_state(1.0 / 12, 12.0);
  SimConfig c;
  c.steps_per_year = 12;
  auto sim_for = [&](Scheme s) {
    c.scheme = {s, 0};
    return PathSimulator(spec, c, start);
  };
  const auto swss = sim_for(Scheme::Swss), fwd = sim_for(Scheme::LieTrotterForward), bwd = sim_for(Scheme::LieTrotterBackward);
  const PointSet ps(PointKind::Sobol, 4, swss.dimension(), 1);
  std::vector<double> row(static_cast<std::size_t>(swss.dimension()));
  for (std::size_t k = 0; k < 4; ++k) {
    ps.point(k, row);
    const auto both = swss.simulate_path(row);
    ASSERT_EQ(both.size(), 2u);
    EXPECT_EQ(both[0].weight, 0.5);
    EXPECT_EQ(both[1].weight, 0.5);
    EXPECT_EQ(both[0].state, fwd.simulate_path(row).front().state);
    EXPECT_EQ(both[1].state, bwd.simulate_path(row).front().state);
  }
}

TEST(PathSimulatorTest, RandomizedSwssPicksOneOrderingFromTheLastCoordinate) {
  const VolSpec spec = demo_spec();
  const ModelState start = demo_state(1.0 / 12, 12.0);
  SimConfig c;
  c.scheme = {Scheme::Swss, 0};
  c.randomized_swss = true;
  const PathSimulator sim(spec, c, start);
  c.randomized_swss = false;
  c.scheme = {Scheme::LieTrotterBackward, 0};
  const PathSimulator bwd(spec, c, start);
  ASSERT_EQ(sim.dimension(), 37);
  std::vector<double> row(37, 0.6);
  const auto one = sim.simulate_path(row);
  ASSERT_EQ(one.size(), 1u);
  EXPECT_EQ(one[0].weight, 1.0);
  EXPECT_EQ(one[0].state, bwd.simulate_path(std::span<const double>(row).first(36)).front().state);
}

TEST(PathSimulatorTest, RunAndRunNormalsAgree) {
  const VolSpec spec = demo_spec();
  SimConfig c;
  c.scheme = {Scheme::NinomiyaVictoir, 0};
  const ModelState start = demo_state(c.grid_spacing(), 12.0);
  const PathSimulator sim(spec, c, start);
  ASSERT_EQ(sim.dimension(), 48);
  const PointSet ps(PointKind::Sobol, 1, 48, 5);
  std::vector<double> row(48);
  ps.point(0, row);
  std::vector<double> normals, aux;
  for (int k = 0; k < 12; ++k) {
    for (int j = 0; j < 3; ++j) normals.push_back(inverse_normal_cdf(row[static_cast<std::size_t>(4 * k + j)]));
    aux.push_back(row[static_cast<std::size_t>(4 * k + 3)]);
  }
  const int last[] = {12};
  ModelState a, b;
  sim.run(row, last, [&](int, const ModelState& s, double) { a = s; });
  sim.run_normals(normals, aux, last, [&](int, const ModelState& s, double) { b = s; });
  EXPECT_EQ(a, b);
  EXPECT_THROW(sim.run_normals(normals, {}, last, [](int, const ModelState&, double) {}), ConfigError);
}

TEST(PathSimulatorTest, ObserverSeesRequestedStepsInOrder) {
  const VolSpec spec = demo_spec();
  SimConfig c;
  c.scheme = {Scheme::LieTrotterForward, 0};
  c.horizon = 2.0;
  const PathSimulator sim(spec, c, demo_state(c.grid_spacing(), 13.0));
  std::vector<double> row(static_cast<std::size_t>(sim.dimension()), 0.5);
  const int obs[] = {3, 12, 24};
  std::vector<int> seen;
  sim.run(row, obs, [&](int k, const ModelState&, double) { seen.push_back(k); });
  EXPECT_EQ(seen, (std::vector<int>{3, 12, 24}));
}

TEST(PathSimulatorTest, DeterministicAndPure) {
  const VolSpec spec = demo_spec();
  SimConfig c;
  const PathSimulator sim(spec, c, demo_state(c.grid_spacing(), 12.0));
  const PointSet ps(PointKind::Sobol, 2, sim.dimension(), 1);
  std::vector<double> r0(static_cast<std::size_t>(sim.dimension())), r1 = r0;
  ps.point(0, r0);
  ps.point(1, r1);
  const auto a = sim.simulate_path(r0);
  sim.simulate_path(r1);
  const auto b = sim.simulate_path(r0);
  EXPECT_EQ(a[0].state, b[0].state);
  EXPECT_EQ(a[1].state, b[1].state);
}

TEST(PathSimulatorTest, ValidatesGridAndDimensions) {
  const VolSpec spec = demo_spec();
  SimConfig c;
  c.scheme = {Scheme::NinomiyaVictoir, 0};
  EXPECT_THROW(PathSimulator(spec, c, demo_state(1.0 / 12, 12.0)), ConfigError);  // NV needs dt/2
  c.scheme = {Scheme::Swss, 0};
  const PathSimulator sim(spec, c, demo_state(1.0 / 24, 12.0));
  EXPECT_THROW(sim.simulate_path(std::vector<double>(10, 0.5)), ConfigError);
  c.steps_per_year = 7;
  c.horizon = 0.5;
  EXPECT_THROW(c.steps(), ConfigError);
}

TEST(Extrapolate, RemovesLeadingErrorTerm) {
  // E(n) = 1 + 3/n^2 + 5/n^3; one step leaves (4 * 5/16^3 - 5/8^3) / 3
  auto e = [](double n) { return 1.0 + 3.0 / (n * n) + 5.0 / (n * n * n); };
  EXPECT_NEAR(extrapolate(e(8), e(16), 2), 1.0 - 20.0 / (3.0 * 16 * 16 * 16), 1e-14);
}
