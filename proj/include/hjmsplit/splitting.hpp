#pragma once

// Split flows, the splitting schemes built from them, and the path simulator.
//
// Ordering convention: the schemes are compositions of Markov semigroups
// acting on payoffs, P^a P^b f(x) = E[f(X^b(X^a(x)))], so the flow of the
// leftmost operator is applied to the state first. LT_FWD therefore shifts
// first, then runs the drift flow, then the diffusion flows 1..d.
//
// Every non-linear vector field of the model moves the curve along fixed
// grid vectors: V_j along lambda_j and V_0 along lambda_j and
// M_j = lambda_j * int_0^x lambda_j, with scalar coefficients that depend on
// the curve only through the benchmark yields int_0^{t_m} h. The RK4 stages
// are therefore run on those yields and the resulting node update is applied
// once, before the next shift. This is algebraically the same as a nodewise
// RK4 step.

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <functional>
#include <numeric>
#include <span>
#include <vector>

#include "hjmsplit/curve.hpp"
#include "hjmsplit/model.hpp"
#include "hjmsplit/qmc.hpp"
#include "hjmsplit/scheme.hpp"

namespace hjmsplit {

struct PointSpec {
  PointKind kind = PointKind::Sobol;
  std::size_t paths = 2048;
  std::uint64_t skip_or_seed = 1;
};

struct SimConfig {
  double horizon = 1.0;
  int steps_per_year = 12;
  SchemeId scheme;
  PointSpec points;
  /// SWSS picks one ordering per path from one extra coordinate instead of
  /// averaging both orderings on shared increments.
  bool randomized_swss = false;
  /// Negative-control switch: flips the sign of the HJM drift term.
  bool negate_hjm_drift = false;
  unsigned threads = 1;

  int steps() const {
    const double n = horizon * steps_per_year;
    detail::require<ConfigError>(steps_per_year > 0 && horizon > 0.0, "sim config: horizon and steps must be positive");
    detail::require<ConfigError>(std::abs(n - std::round(n)) < 1e-9 * std::max(1.0, n),
                                 "sim config: horizon * steps_per_year must be an integer");
    return static_cast<int>(std::round(n));
  }
  double dt() const { return 1.0 / steps_per_year; }

  /// Grid spacing the curve must use: one time step, or half of one for NV
  /// whose linear flow runs over half steps.
  double grid_spacing() const {
    return scheme.scheme == Scheme::NinomiyaVictoir ? 0.5 * dt() : dt();
  }
};

inline DimensionBudget dimension_budget(const SimConfig& config, int factors) {
  return DimensionBudget{config.scheme.scheme, config.steps(), factors, config.randomized_swss};
}

namespace detail {

/// Plain sum with four independent accumulators (fixed association order).
inline double sum_range(const double* p, std::size_t n) {
  double a0 = 0.0, a1 = 0.0, a2 = 0.0, a3 = 0.0;
  std::size_t i = 0;
  for (; i + 4 <= n; i += 4) {
    a0 += p[i];
    a1 += p[i + 1];
    a2 += p[i + 2];
    a3 += p[i + 3];
  }
  for (; i < n; ++i) a0 += p[i];
  return (a0 + a1) + (a2 + a3);
}

// out[k] = src[k] + sum_j (pl_j lam_j[k] + pd_j m_j[k]); out may equal src
// only in the one-factor kernel.
inline void shift_kernel1(double* out, const double* src, std::size_t n, double pl0, const double* __restrict l0,
                          double pd0, const double* __restrict m0) {
  for (std::size_t k = 0; k < n; ++k) out[k] = src[k] + (pl0 * l0[k] + pd0 * m0[k]);
}

inline void shift_kernel2(double* __restrict out, const double* __restrict src, std::size_t n, double pl0,
                          const double* __restrict l0, double pd0, const double* __restrict m0, double pl1,
                          const double* __restrict l1, double pd1, const double* __restrict m1) {
  for (std::size_t k = 0; k < n; ++k) out[k] = src[k] + (pl0 * l0[k] + pd0 * m0[k]) + (pl1 * l1[k] + pd1 * m1[k]);
}

inline void shift_kernel3(double* __restrict out, const double* __restrict src, std::size_t n, double pl0,
                          const double* __restrict l0, double pd0, const double* __restrict m0, double pl1,
                          const double* __restrict l1, double pd1, const double* __restrict m1, double pl2,
                          const double* __restrict l2, double pd2, const double* __restrict m2) {
  for (std::size_t k = 0; k < n; ++k)
    out[k] = src[k] + (pl0 * l0[k] + pd0 * m0[k]) + (pl1 * l1[k] + pd1 * m1[k]) + (pl2 * l2[k] + pd2 * m2[k]);
}

}  // namespace detail

/// VolSpec evaluated on a fixed grid (time-homogeneous, computed once).
class FactorGrid {
 public:
  FactorGrid(const VolSpec& spec, double grid_spacing, std::size_t nodes, double drift_sign = 1.0)
      : spec_(spec), dx_(grid_spacing), nodes_(nodes), drift_sign_(drift_sign) {
    spec_.validate();
    const int d = spec_.factors();
    const double x_max = dx_ * static_cast<double>(nodes_ - 1);
    for (int j = 0; j < d; ++j)
      detail::require<ConfigError>(spec_.t[static_cast<std::size_t>(j)] <= x_max + 1e-12,
                                   "benchmark maturity beyond the curve grid");
    lambda_.resize(static_cast<std::size_t>(d));
    drift_basis_.resize(static_cast<std::size_t>(d));
    for (int j = 0; j < d; ++j) {
      auto& lam = lambda_[static_cast<std::size_t>(j)];
      lam.resize(nodes_);
      for (std::size_t k = 0; k < nodes_; ++k) lam[k] = spec_.lambda(j, static_cast<double>(k) * dx_);
      const auto cum = detail::cumulative_integral(lam, dx_);
      auto& m = drift_basis_[static_cast<std::size_t>(j)];
      m.resize(nodes_);
      for (std::size_t k = 0; k < nodes_; ++k) m[k] = lam[k] * cum[k];
    }
    for (int m = 0; m < d; ++m) {
      const double pos = spec_.t[static_cast<std::size_t>(m)] / dx_;
      auto node = static_cast<std::size_t>(std::floor(pos));
      if (node >= nodes_ - 1) node = nodes_ - 2;
      breaks_.push_back({static_cast<std::size_t>(m), node, std::min(1.0, pos - static_cast<double>(node))});
    }
    sorted_breaks_ = breaks_;
    std::sort(sorted_breaks_.begin(), sorted_breaks_.end(), [](const Break& a, const Break& b) { return a.node < b.node; });
    lambda_yield_.assign(static_cast<std::size_t>(d * d), 0.0);
    drift_yield_.assign(static_cast<std::size_t>(d * d), 0.0);
    for (int j = 0; j < d; ++j) {
      const auto ly = yields(lambda_[static_cast<std::size_t>(j)]);
      const auto my = yields(drift_basis_[static_cast<std::size_t>(j)]);
      for (int m = 0; m < d; ++m) {
        lambda_yield_[index(j, m)] = ly[static_cast<std::size_t>(m)];
        drift_yield_[index(j, m)] = my[static_cast<std::size_t>(m)];
      }
    }
  }

  const VolSpec& spec() const { return spec_; }
  int factors() const { return spec_.factors(); }
  double grid_spacing() const { return dx_; }
  std::size_t nodes() const { return nodes_; }
  double drift_sign() const { return drift_sign_; }
  const std::vector<double>& lambda(int j) const { return lambda_[static_cast<std::size_t>(j)]; }
  const std::vector<double>& drift_basis(int j) const { return drift_basis_[static_cast<std::size_t>(j)]; }
  /// int_0^{t_m} lambda_j
  double lambda_yield(int j, int m) const { return lambda_yield_[index(j, m)]; }
  /// int_0^{t_m} M_j
  double drift_yield(int j, int m) const { return drift_yield_[index(j, m)]; }

  /// Benchmark yields int_0^{t_m} f of a node vector on this grid.
  std::vector<double> yields(std::span<const double> f) const {
    std::vector<double> out(breaks_.size());
    yields(f, out);
    return out;
  }

  void yields(std::span<const double> f, std::span<double> out) const {
    // prefix sums S(k) = f_0 + ... + f_k at the sorted break nodes
    double running = 0.0;
    std::size_t k = 0;
    for (const auto& b : sorted_breaks_) {
      running += detail::sum_range(f.data() + k, b.node + 1 - k);
      k = b.node + 1;
      const double trapezoid = dx_ * (running - 0.5 * f[0] - 0.5 * f[b.node]);
      const double end_value = f[b.node] + b.frac * (f[b.node + 1] - f[b.node]);
      out[b.factor] = trapezoid + 0.5 * b.frac * dx_ * (f[b.node] + end_value);
    }
  }

 private:
  std::size_t index(int j, int m) const { return static_cast<std::size_t>(j * factors() + m); }

  struct Break {
    std::size_t factor;
    std::size_t node;
    double frac;
  };

  VolSpec spec_;
  double dx_;
  std::size_t nodes_;
  double drift_sign_;
  std::vector<Break> breaks_;
  std::vector<Break> sorted_breaks_;
  std::vector<std::vector<double>> lambda_;
  std::vector<std::vector<double>> drift_basis_;
  std::vector<double> lambda_yield_;
  std::vector<double> drift_yield_;
};

/// Working state of one chain: the model state plus cached benchmark yields
/// and node updates that have not yet been written to the curve.
class PathState {
 public:
  PathState(const FactorGrid& grid, ModelState state) : grid_(&grid), state_(std::move(state)) {
    detail::require<ConfigError>(state_.curve.size() == grid.nodes() &&
                                     std::abs(state_.curve.grid_spacing() - grid.grid_spacing()) <= 1e-15,
                                 "path state: curve grid does not match the factor grid");
    const auto d = static_cast<std::size_t>(grid.factors());
    pending_lambda_.assign(d, 0.0);
    pending_drift_.assign(d, 0.0);
    yields_ = grid.yields(state_.curve.values());
  }

  /// RK4 step of dx/dt = V_0(x) over [0, dt].
  void drift(double dt) {
    if (dt == 0.0) return;
    const int d = grid_->factors();
    const auto& spec = grid_->spec();
    const double ev = std::exp(state_.v);
    std::vector<double> a(static_cast<std::size_t>(d)), b(static_cast<std::size_t>(d));
    std::vector<double> acc_a(static_cast<std::size_t>(d), 0.0), acc_b(static_cast<std::size_t>(d), 0.0);
    std::vector<double> stage(yields_);
    auto coefficients = [&](const std::vector<double>& y) {
      for (int j = 0; j < d; ++j) {
        const auto ju = static_cast<std::size_t>(j);
        const double scale = spec.c[ju] * ev;
        const double g = std::tanh(scale * y[ju]);
        a[ju] = grid_->drift_sign() * g * g;
        b[ju] = -0.5 * scale * (1.0 - g * g) * (g * grid_->lambda_yield(j, j) + spec.gamma[ju] * y[ju]);
      }
    };
    auto advance = [&](double h) {
      for (int m = 0; m < d; ++m) {
        double dy = 0.0;
        for (int j = 0; j < d; ++j)
          dy += a[static_cast<std::size_t>(j)] * grid_->drift_yield(j, m) + b[static_cast<std::size_t>(j)] * grid_->lambda_yield(j, m);
        stage[static_cast<std::size_t>(m)] = yields_[static_cast<std::size_t>(m)] + h * dy;
      }
    };
    static constexpr double kWeights[4] = {1.0, 2.0, 2.0, 1.0};
    static constexpr double kNext[4] = {0.5, 0.5, 1.0, 0.0};
    for (int s = 0; s < 4; ++s) {
      coefficients(stage);
      for (std::size_t j = 0; j < a.size(); ++j) {
        acc_a[j] += kWeights[s] * a[j];
        acc_b[j] += kWeights[s] * b[j];
      }
      if (s < 3) advance(kNext[s] * dt);
    }
    for (std::size_t j = 0; j < a.size(); ++j) {
      acc_a[j] *= dt / 6.0;
      acc_b[j] *= dt / 6.0;
    }
    apply(acc_a, acc_b);
  }

  /// RK4 step of dy/ds = V_j(y) from s = 0 to s = w (signed).
  void diffusion(int j, double w) {
    if (w == 0.0) return;
    const auto ju = static_cast<std::size_t>(j);
    const auto& spec = grid_->spec();
    const double c = spec.c[ju];
    const double gamma = spec.gamma[ju];
    const double ly = grid_->lambda_yield(j, j);
    const double y0 = yields_[ju];
    const double v0 = state_.v;
    auto g = [&](double y, double v) { return std::tanh(c * std::exp(v) * y); };
    const double k1 = g(y0, v0);
    const double k2 = g(y0 + 0.5 * w * k1 * ly, v0 + 0.5 * w * gamma);
    const double k3 = g(y0 + 0.5 * w * k2 * ly, v0 + 0.5 * w * gamma);
    const double k4 = g(y0 + w * k3 * ly, v0 + w * gamma);
    const double coeff = w / 6.0 * (k1 + 2.0 * k2 + 2.0 * k3 + k4);
    pending_lambda_[ju] += coeff;
    for (int m = 0; m < grid_->factors(); ++m) yields_[static_cast<std::size_t>(m)] += coeff * grid_->lambda_yield(j, m);
    state_.v = v0 + w * gamma;
  }

  /// Ito-Euler increment: h += alpha_HJM dt + sum_j sigma_j dW_j, v += sum_j gamma_j dW_j.
  void euler(double dt, std::span<const double> dw) {
    const int d = grid_->factors();
    const auto& spec = grid_->spec();
    const double ev = std::exp(state_.v);
    std::vector<double> a(static_cast<std::size_t>(d)), b(static_cast<std::size_t>(d));
    double dv = 0.0;
    for (int j = 0; j < d; ++j) {
      const auto ju = static_cast<std::size_t>(j);
      const double g = std::tanh(spec.c[ju] * ev * yields_[ju]);
      a[ju] = grid_->drift_sign() * g * g * dt;
      b[ju] = g * dw[ju];
      dv += spec.gamma[ju] * dw[ju];
    }
    apply(a, b);
    state_.v += dv;
  }

  /// Exact shift/decay/bank-account flow over dt, fused with writing the
  /// pending node updates. Benchmark yields are carried over incrementally:
  /// int_0^t h(. + dt) = int_0^t h + int_t^{t+dt} h - int_0^dt h.
  void shift(double dt) {
    if (dt == 0.0) return;
    const std::size_t slots = aligned_slots(dt, grid_->grid_spacing());
    if (slots == 0) return;
    auto& h = state_.curve.values();
    const std::size_t n = h.size();
    const int d = grid_->factors();
    const double dx = grid_->grid_spacing();
    auto updated = [&](std::size_t k) {
      double x = h[std::min(k, n - 1)];
      k = std::min(k, n - 1);
      for (int j = 0; j < d; ++j)
        x += pending_lambda_[static_cast<std::size_t>(j)] * grid_->lambda(j)[k] +
             pending_drift_[static_cast<std::size_t>(j)] * grid_->drift_basis(j)[k];
      return x;
    };
    // integral of the updated curve between positions a <= b given in nodes
    auto piece = [&](double a, double b) {
      double total = 0.0;
      auto k = static_cast<std::size_t>(std::floor(a));
      double lo = a;
      while (lo < b) {
        const double hi = std::min(b, static_cast<double>(k + 1));
        const double f0 = updated(k), f1 = updated(k + 1);
        const double u0 = lo - static_cast<double>(k), u1 = hi - static_cast<double>(k);
        total += (hi - lo) * (f0 + 0.5 * (u0 + u1) * (f1 - f0));
        lo = hi;
        ++k;
      }
      return total * dx;
    };
    const double head = piece(0.0, static_cast<double>(slots));
    state_.z += head;
    const double last_pos = static_cast<double>(n - 1 - std::min(slots, n - 1));
    bool recompute = false;
    for (int m = 0; m < d; ++m) {
      const double pos = grid_->spec().t[static_cast<std::size_t>(m)] / dx;
      if (pos > last_pos) {
        recompute = true;
        break;
      }
      yields_[static_cast<std::size_t>(m)] += piece(pos, pos + static_cast<double>(slots)) - head;
    }

    const double tail = updated(n - 1);
    if (slots < n) {
      const std::size_t keep = n - slots;
      scratch_.resize(n);
      double* out = scratch_.data();
      const double* src = h.data() + slots;
      auto lam = [&](int j) { return grid_->lambda(j).data() + slots; };
      auto mb = [&](int j) { return grid_->drift_basis(j).data() + slots; };
      const double* pl = pending_lambda_.data();
      const double* pd = pending_drift_.data();
      switch (d) {
        case 1:
          detail::shift_kernel1(out, src, keep, pl[0], lam(0), pd[0], mb(0));
          break;
        case 2:
          detail::shift_kernel2(out, src, keep, pl[0], lam(0), pd[0], mb(0), pl[1], lam(1), pd[1], mb(1));
          break;
        case 3:
          detail::shift_kernel3(out, src, keep, pl[0], lam(0), pd[0], mb(0), pl[1], lam(1), pd[1], mb(1), pl[2],
                                lam(2), pd[2], mb(2));
          break;
        default:
          std::copy(src, src + keep, out);
          for (int j = 0; j < d; ++j)
            detail::shift_kernel1(out, out, keep, pl[j], lam(j), pd[j], mb(j));
      }
      std::fill(out + keep, out + n, tail);
      h.swap(scratch_);
    } else {
      std::fill(h.begin(), h.end(), tail);
    }
    std::fill(pending_lambda_.begin(), pending_lambda_.end(), 0.0);
    std::fill(pending_drift_.begin(), pending_drift_.end(), 0.0);
    state_.v *= std::exp(-grid_->spec().ou_alpha * dt);
    if (recompute) grid_->yields(h, yields_);
  }

  /// Writes pending node updates to the curve.
  void flush() {
    auto& h = state_.curve.values();
    for (int j = 0; j < grid_->factors(); ++j) {
      const auto ju = static_cast<std::size_t>(j);
      const double pl = pending_lambda_[ju];
      const double pd = pending_drift_[ju];
      if (pl == 0.0 && pd == 0.0) continue;
      const auto& lam = grid_->lambda(j);
      const auto& m = grid_->drift_basis(j);
      for (std::size_t k = 0; k < h.size(); ++k) h[k] += pl * lam[k] + pd * m[k];
      pending_lambda_[ju] = 0.0;
      pending_drift_[ju] = 0.0;
    }
  }

  const ModelState& state() {
    flush();
    return state_;
  }
  ModelState release() {
    flush();
    return std::move(state_);
  }
  const std::vector<double>& yields() const { return yields_; }

 private:
  void apply(const std::vector<double>& drift_coeff, const std::vector<double>& lambda_coeff) {
    const int d = grid_->factors();
    for (int j = 0; j < d; ++j) {
      const auto ju = static_cast<std::size_t>(j);
      pending_drift_[ju] += drift_coeff[ju];
      pending_lambda_[ju] += lambda_coeff[ju];
    }
    for (int m = 0; m < d; ++m) {
      double dy = 0.0;
      for (int j = 0; j < d; ++j)
        dy += drift_coeff[static_cast<std::size_t>(j)] * grid_->drift_yield(j, m) +
              lambda_coeff[static_cast<std::size_t>(j)] * grid_->lambda_yield(j, m);
      yields_[static_cast<std::size_t>(m)] += dy;
    }
  }

  const FactorGrid* grid_;
  ModelState state_;
  std::vector<double> yields_;
  std::vector<double> pending_lambda_;
  std::vector<double> pending_drift_;
  std::vector<double> scratch_;
};

/// Factor grid matching a state's curve.
inline FactorGrid factor_grid_for(const VolSpec& spec, const ModelState& state, double drift_sign = 1.0) {
  return FactorGrid(spec, state.curve.grid_spacing(), state.curve.size(), drift_sign);
}

/// Drift flow: one classical RK4 step for dx/dt = V_0(x) over [0, dt].
inline ModelState drift_flow(const VolSpec& spec, const ModelState& state, double dt) {
  detail::require<DomainError>(dt >= 0.0, "drift_flow: dt must be nonnegative");
  const FactorGrid grid = factor_grid_for(spec, state);
  PathState p(grid, state);
  p.drift(dt);
  return p.release();
}

/// Diffusion flow of V_j evaluated at the (signed) Brownian time w.
inline ModelState diffusion_flow(const VolSpec& spec, int j, const ModelState& state, double w) {
  detail::require<DomainError>(std::isfinite(w), "diffusion_flow: increment must be finite");
  const FactorGrid grid = factor_grid_for(spec, state);
  PathState p(grid, state);
  p.diffusion(j, w);
  return p.release();
}

namespace detail {

inline void forward_sweep(PathState& p, double dt, std::span<const double> dw) {
  p.drift(dt);
  for (std::size_t j = 0; j < dw.size(); ++j) p.diffusion(static_cast<int>(j), dw[j]);
}

inline void backward_sweep(PathState& p, double dt, std::span<const double> dw) {
  for (std::size_t j = dw.size(); j-- > 0;) p.diffusion(static_cast<int>(j), dw[j]);
  p.drift(dt);
}

}  // namespace detail

/// One step of a single-chain scheme. `aux_uniform` selects the NV inner
/// ordering (forward when < 0.5) and is ignored by the other schemes. SWSS is
/// not a single-chain step; use Scheme::LieTrotterForward/Backward per chain.
inline void step(PathState& p, Scheme scheme, double dt, std::span<const double> dw, double aux_uniform = 0.0) {
  switch (scheme) {
    case Scheme::LieTrotterForward:
      p.shift(dt);
      detail::forward_sweep(p, dt, dw);
      break;
    case Scheme::LieTrotterBackward:
      detail::backward_sweep(p, dt, dw);
      p.shift(dt);
      break;
    case Scheme::NinomiyaVictoir:
      p.shift(0.5 * dt);
      if (aux_uniform < 0.5)
        detail::forward_sweep(p, dt, dw);
      else
        detail::backward_sweep(p, dt, dw);
      p.shift(0.5 * dt);
      break;
    case Scheme::EulerMaruyama:
      p.euler(dt, dw);
      p.shift(dt);
      break;
    case Scheme::Swss:
      throw ConfigError("step: SWSS is an average of two chains; step each ordering separately");
  }
}

/// Value-semantics wrapper around step(); `dw` holds one Brownian increment
/// (not a standard normal) per factor.
inline ModelState step(const VolSpec& spec, Scheme scheme, const ModelState& state, double dt,
                       std::span<const double> dw, double aux_uniform = 0.0) {
  detail::require<ConfigError>(dw.size() == static_cast<std::size_t>(spec.factors()),
                               "step: need one Brownian increment per factor");
  const FactorGrid grid = factor_grid_for(spec, state);
  PathState p(grid, state);
  step(p, scheme, dt, dw, aux_uniform);
  return p.release();
}

struct WeightedState {
  ModelState state;
  double weight = 1.0;
};

/// Callback receiving (step index after which the state is observed, state,
/// weight of the chain). Called chain by chain, in increasing step order.
using Observer = std::function<void(int, const ModelState&, double)>;

/// Simulates one path of a scheme from its row of uniforms.
class PathSimulator {
 public:
  PathSimulator(const VolSpec& spec, const SimConfig& config, ModelState initial)
      : config_(config), initial_(std::move(initial)),
        grid_(spec, initial_.curve.grid_spacing(), initial_.curve.size(), config.negate_hjm_drift ? -1.0 : 1.0),
        steps_(config.steps()), budget_(dimension_budget(config, spec.factors())) {
    detail::require<ConfigError>(
        aligned_slots(config_.grid_spacing(), initial_.curve.grid_spacing()) >= 1,
        "sim config: curve grid spacing must divide the scheme's shift length");
    detail::require<ConfigError>(initial_.curve.x_max() + 1e-12 >= config_.horizon,
                                 "initial curve shorter than the simulation horizon");
  }

  int dimension() const { return budget_.total(); }
  int steps() const { return steps_; }
  const FactorGrid& grid() const { return grid_; }
  const SimConfig& config() const { return config_; }

  /// Runs the scheme on one row of uniforms; `observe_steps` (sorted, values
  /// in 1..n) selects the intermediate states reported to `observer`.
  void run(std::span<const double> uniforms, std::span<const int> observe_steps, const Observer& observer) const {
    detail::require<ConfigError>(uniforms.size() == static_cast<std::size_t>(dimension()),
                                 "simulate_path: uniform row has wrong dimension");
    const auto d = static_cast<std::size_t>(grid_.factors());
    const auto stride = static_cast<std::size_t>(budget_.per_step());
    const auto n = static_cast<std::size_t>(steps_);
    std::vector<double> normals(n * d);
    std::vector<double> aux;
    for (std::size_t k = 0; k < n; ++k) {
      for (std::size_t j = 0; j < d; ++j) normals[k * d + j] = inverse_normal_cdf(uniforms[k * stride + j]);
      if (stride > d) aux.push_back(uniforms[k * stride + d]);
    }
    if (budget_.extra() > 0) aux.push_back(uniforms.back());
    run_normals(normals, aux, observe_steps, observer);
  }

  /// Same as run() but driven by standard normals directly: `normals` holds
  /// steps x factors values (step-major); `aux` holds one uniform per step for
  /// NV, one uniform for randomized SWSS, and is empty otherwise.
  void run_normals(std::span<const double> normals, std::span<const double> aux, std::span<const int> observe_steps,
                   const Observer& observer) const {
    const auto d = static_cast<std::size_t>(grid_.factors());
    detail::require<ConfigError>(normals.size() == d * static_cast<std::size_t>(steps_),
                                 "simulate_path: wrong number of Gaussian increments");
    const Scheme scheme = config_.scheme.scheme;
    const std::size_t want_aux = scheme == Scheme::NinomiyaVictoir ? static_cast<std::size_t>(steps_)
                                 : (scheme == Scheme::Swss && config_.randomized_swss) ? 1
                                                                                        : 0;
    detail::require<ConfigError>(aux.size() == want_aux, "simulate_path: wrong number of auxiliary uniforms");
    const double dt = config_.dt();
    const double sqrt_dt = std::sqrt(dt);
    std::vector<double> dw(d);

    auto chain = [&](Scheme which, double weight) {
      PathState p(grid_, initial_);
      std::size_t next = 0;
      for (int n = 0; n < steps_; ++n) {
        const auto base = static_cast<std::size_t>(n) * d;
        for (std::size_t j = 0; j < d; ++j) dw[j] = normals[base + j] * sqrt_dt;
        const double u = which == Scheme::NinomiyaVictoir ? aux[static_cast<std::size_t>(n)] : 0.0;
        step(p, which, dt, dw, u);
        while (next < observe_steps.size() && observe_steps[next] == n + 1) {
          observer(n + 1, p.state(), weight);
          ++next;
        }
      }
    };

    if (scheme != Scheme::Swss) {
      chain(scheme, 1.0);
    } else if (config_.randomized_swss) {
      chain(aux.front() < 0.5 ? Scheme::LieTrotterForward : Scheme::LieTrotterBackward, 1.0);
    } else {
      chain(Scheme::LieTrotterForward, 0.5);
      chain(Scheme::LieTrotterBackward, 0.5);
    }
  }

  /// Terminal states with their weights (two entries for deterministic SWSS).
  std::vector<WeightedState> simulate_path(std::span<const double> uniforms) const {
    std::vector<WeightedState> out;
    const int last[] = {steps_};
    run(uniforms, last, [&](int, const ModelState& s, double w) { out.push_back({s, w}); });
    return out;
  }

 private:
  SimConfig config_;
  ModelState initial_;
  FactorGrid grid_;
  int steps_;
  DimensionBudget budget_;
};

inline std::vector<WeightedState> simulate_path(const VolSpec& spec, const SimConfig& config, const ModelState& initial,
                                                std::span<const double> uniforms) {
  return PathSimulator(spec, config, initial).simulate_path(uniforms);
}

/// Richardson combination of estimates at n and 2n steps for a leading error
/// term of order n^{-order}.
inline double extrapolate(double value_n, double value_2n, int order = 2) {
  const double f = std::ldexp(1.0, order);
  return (f * value_2n - value_n) / (f - 1.0);
}

/// Curve grid [0, x_max] required to simulate `config` and evaluate payoffs
/// reaching `payoff_maturity` past the horizon.
inline double required_x_max(const SimConfig& config, const VolSpec& spec, double payoff_maturity) {
  return config.horizon + std::max(payoff_maturity, spec.max_benchmark());
}

/// Initial state on the simulation grid of `config`.
inline ModelState initial_state(const ForwardCurve& source, const SimConfig& config, const VolSpec& spec,
                                double payoff_maturity, double v0 = 0.0) {
  return ModelState{resample(source, config.grid_spacing(), required_x_max(config, spec, payoff_maturity)), v0, 0.0};
}

}  // namespace hjmsplit
