#pragma once

// Volatility structure of the stochastic-volatility HJM model:
//   sigma_j(h, v) = tanh(c_j e^v int_0^{t_j} h) * lambda_j,
//   lambda_j(x)   = sum_i alpha_{j,i} x^i e^{-beta x},
//   dv            = -ou_alpha v dt + sum_j gamma_j dW^j,
// together with the HJM drift and its Stratonovich form V_0.

#include <cmath>
#include <cstddef>
#include <ostream>
#include <set>
#include <string>
#include <vector>

#include "hjmsplit/curve.hpp"
#include "hjmsplit/errors.hpp"
#include "hjmsplit/kv_config.hpp"

namespace hjmsplit {

struct VolSpec {
  /// alpha[j][i]: coefficient of x^i in the loading polynomial of factor j.
  std::vector<std::vector<double>> alpha;
  double beta = 0.5;
  std::vector<double> c;
  std::vector<double> t;
  double ou_alpha = 1.0;
  std::vector<double> gamma;

  int factors() const { return static_cast<int>(alpha.size()); }
  int polynomial_degree() const { return alpha.empty() ? 0 : static_cast<int>(alpha.front().size()) - 1; }

  void validate() const {
    const std::size_t d = alpha.size();
    detail::require<ConfigError>(c.size() == d && t.size() == d && gamma.size() == d,
                                 "vol spec: alpha, c, t and gamma must have one entry per factor");
    detail::require<ConfigError>(beta > 0.0 && std::isfinite(beta), "vol spec: beta must be positive");
    detail::require<ConfigError>(ou_alpha >= 0.0 && std::isfinite(ou_alpha), "vol spec: ou_alpha must be >= 0");
    for (std::size_t j = 0; j < d; ++j) {
      detail::require<ConfigError>(!alpha[j].empty() && alpha[j].size() == alpha.front().size(),
                                   "vol spec: every factor needs the same polynomial degree");
      detail::require<ConfigError>(t[j] >= 0.0, "vol spec: benchmark maturities must be >= 0");
      for (double a : alpha[j]) detail::require<ConfigError>(std::isfinite(a), "vol spec: alpha must be finite");
      detail::require<ConfigError>(std::isfinite(c[j]) && std::isfinite(gamma[j]), "vol spec: c, gamma finite");
    }
  }

  double lambda(int j, double x) const {
    const auto& coeffs = alpha[static_cast<std::size_t>(j)];
    double poly = 0.0;
    for (auto it = coeffs.rbegin(); it != coeffs.rend(); ++it) poly = poly * x + *it;
    return poly * std::exp(-beta * x);
  }

  /// Upper bound of |lambda_j| over [0, x_max], sampled on the given grid.
  double max_abs_lambda(int j, double grid_spacing, double x_max) const {
    double m = 0.0;
    for (std::size_t k = 0; k < ForwardCurve::node_count(grid_spacing, x_max); ++k)
      m = std::max(m, std::abs(lambda(j, static_cast<double>(k) * grid_spacing)));
    return m;
  }

  double max_benchmark() const {
    double m = 0.0;
    for (double x : t) m = std::max(m, x);
    return m;
  }

  friend bool operator==(const VolSpec&, const VolSpec&) = default;
};

/// Three-factor defaults: benchmarks 0.5y, 2y, 10y; OU rate 1, loadings 0.1.
inline VolSpec default_vol_spec() {
  VolSpec s;
  s.alpha = {{0.01, 0.0, 0.0}, {0.01, 0.0, 0.0}, {0.01, 0.0, 0.0}};
  s.beta = 0.5;
  s.c = {1.0, 1.0, 1.0};
  s.t = {0.5, 2.0, 10.0};
  s.ou_alpha = 1.0;
  s.gamma = {0.1, 0.1, 0.1};
  return s;
}

struct VectorFieldValue {
  std::vector<double> curve;
  double v = 0.0;
};

namespace detail {

inline std::vector<double> lambda_nodes(const VolSpec& spec, int j, const ForwardCurve& grid) {
  std::vector<double> out(grid.size());
  for (std::size_t k = 0; k < out.size(); ++k) out[k] = spec.lambda(j, grid.node(k));
  return out;
}

/// Cumulative trapezoid integral from 0 to each node.
inline std::vector<double> cumulative_integral(const std::vector<double>& f, double dx) {
  std::vector<double> out(f.size(), 0.0);
  for (std::size_t k = 1; k < f.size(); ++k) out[k] = out[k - 1] + 0.5 * dx * (f[k - 1] + f[k]);
  return out;
}

inline double benchmark_yield(const VolSpec& spec, int j, const ModelState& state) {
  return integrate(state.curve, 0.0, spec.t[static_cast<std::size_t>(j)]);
}

}  // namespace detail

/// g_j(h, v) = tanh(c_j e^v int_0^{t_j} h).
inline double g_scalar(const VolSpec& spec, int j, const ModelState& state) {
  return std::tanh(spec.c[static_cast<std::size_t>(j)] * std::exp(state.v) * detail::benchmark_yield(spec, j, state));
}

/// sigma_j at the curve nodes.
inline std::vector<double> sigma(const VolSpec& spec, int j, const ModelState& state) {
  const double g = g_scalar(spec, j, state);
  auto out = detail::lambda_nodes(spec, j, state.curve);
  for (double& x : out) x *= g;
  return out;
}

/// alpha_HJM(x_k) = sum_j sigma_j(x_k) int_0^{x_k} sigma_j.
inline std::vector<double> hjm_drift(const VolSpec& spec, const ModelState& state) {
  std::vector<double> out(state.curve.size(), 0.0);
  for (int j = 0; j < spec.factors(); ++j) {
    const auto s = sigma(spec, j, state);
    const auto cum = detail::cumulative_integral(s, state.curve.grid_spacing());
    for (std::size_t k = 0; k < out.size(); ++k) out[k] += s[k] * cum[k];
  }
  return out;
}

/// Scalar such that D sigma_j(h,v)[V_j(h,v)] = scalar * lambda_j, i.e.
/// c_j e^v sech^2(arg_j) (int_0^{t_j} sigma_j + gamma_j int_0^{t_j} h).
inline double stratonovich_correction_scalar(const VolSpec& spec, int j, const ModelState& state) {
  const auto ju = static_cast<std::size_t>(j);
  const double yield = detail::benchmark_yield(spec, j, state);
  const double scale = spec.c[ju] * std::exp(state.v);
  const double g = std::tanh(scale * yield);
  const double sech2 = 1.0 - g * g;
  ForwardCurve lam(state.curve.grid_spacing(), detail::lambda_nodes(spec, j, state.curve));
  const double sigma_yield = g * integrate(lam, 0.0, spec.t[ju]);
  return scale * sech2 * (sigma_yield + spec.gamma[ju] * yield);
}

/// V_0 = alpha_HJM - 1/2 sum_j D sigma_j(sigma_j, gamma_j); the v-component is
/// zero because the OU drift belongs to the linear part.
inline VectorFieldValue stratonovich_drift(const VolSpec& spec, const ModelState& state) {
  VectorFieldValue out{hjm_drift(spec, state), 0.0};
  for (int j = 0; j < spec.factors(); ++j) {
    const double corr = stratonovich_correction_scalar(spec, j, state);
    for (std::size_t k = 0; k < out.curve.size(); ++k) out.curve[k] -= 0.5 * corr * spec.lambda(j, state.curve.node(k));
  }
  return out;
}

/// V_j = (sigma_j, gamma_j).
inline VectorFieldValue diffusion_field(const VolSpec& spec, int j, const ModelState& state) {
  return {sigma(spec, j, state), spec.gamma[static_cast<std::size_t>(j)]};
}

// --- parameter file -------------------------------------------------------

inline VolSpec read_vol_spec(const KeyValueFile& kv) {
  const int d = static_cast<int>(kv.integer("factors"));
  detail::require<ConfigError>(d >= 0, "vol spec: factors must be >= 0");
  std::set<std::string> allowed = {"factors", "beta", "c", "t", "ou_alpha", "gamma"};
  VolSpec s;
  for (int j = 1; j <= d; ++j) {
    const std::string key = "alpha_" + std::to_string(j);
    allowed.insert(key);
    s.alpha.push_back(kv.array(key));
  }
  kv.require_known(allowed);
  s.beta = kv.number("beta");
  s.c = kv.array("c");
  s.t = kv.array("t");
  s.ou_alpha = kv.number("ou_alpha");
  s.gamma = kv.array("gamma");
  s.validate();
  return s;
}

inline VolSpec read_vol_spec(const std::string& path) { return read_vol_spec(KeyValueFile::load(path)); }

inline void write_vol_spec(std::ostream& out, const VolSpec& s) {
  out << "# HJM volatility specification\n";
  out << "factors = " << s.factors() << '\n';
  for (int j = 0; j < s.factors(); ++j)
    out << "alpha_" << j + 1 << " = " << format_array(s.alpha[static_cast<std::size_t>(j)]) << '\n';
  out << "beta = " << format_exact(s.beta) << '\n';
  out << "c = " << format_array(s.c) << '\n';
  out << "t = " << format_array(s.t) << '\n';
  out << "ou_alpha = " << format_exact(s.ou_alpha) << '\n';
  out << "gamma = " << format_array(s.gamma) << '\n';
}

}  // namespace hjmsplit
