#pragma once

// Forward-curve representation on a uniform maturity grid, the SPDE state,
// the cosh-weighted diagnostic norm and the exact shift/decay flow.

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <fstream>
#include <functional>
#include <iomanip>
#include <sstream>
#include <string>
#include <utility>
#include <vector>

#include "hjmsplit/errors.hpp"

namespace hjmsplit {

/// Piecewise affine continuous forward curve x -> h(x) on the nodes
/// 0, dx, 2dx, ..., (size-1)dx.
class ForwardCurve {
 public:
  ForwardCurve() = default;

  ForwardCurve(double grid_spacing, std::vector<double> values)
      : dx_(grid_spacing), values_(std::move(values)) {
    detail::require<ConfigError>(dx_ > 0.0 && std::isfinite(dx_), "forward curve: grid spacing must be positive");
    detail::require<ConfigError>(values_.size() >= 2, "forward curve: at least two nodes required");
    for (double v : values_)
      detail::require<ConfigError>(std::isfinite(v), "forward curve: node values must be finite");
  }

  static ForwardCurve flat(double grid_spacing, double x_max, double rate) {
    return ForwardCurve(grid_spacing, std::vector<double>(node_count(grid_spacing, x_max), rate));
  }

  /// Samples a function at the nodes of the grid covering [0, x_max].
  static ForwardCurve sample(double grid_spacing, double x_max, const std::function<double(double)>& f) {
    std::vector<double> values(node_count(grid_spacing, x_max));
    for (std::size_t k = 0; k < values.size(); ++k) values[k] = f(static_cast<double>(k) * grid_spacing);
    return ForwardCurve(grid_spacing, std::move(values));
  }

  /// Number of nodes needed so that the last node is at or beyond x_max.
  static std::size_t node_count(double grid_spacing, double x_max) {
    detail::require<ConfigError>(grid_spacing > 0.0 && x_max > 0.0, "forward curve: bad grid");
    const double slots = x_max / grid_spacing;
    const auto n = static_cast<std::size_t>(std::ceil(slots - 1e-9));
    return std::max<std::size_t>(n, 1) + 1;
  }

  double grid_spacing() const { return dx_; }
  double x_max() const { return dx_ * static_cast<double>(values_.size() - 1); }
  std::size_t size() const { return values_.size(); }
  double node(std::size_t k) const { return static_cast<double>(k) * dx_; }

  const std::vector<double>& values() const { return values_; }
  std::vector<double>& values() { return values_; }
  double operator[](std::size_t k) const { return values_[k]; }
  double& operator[](std::size_t k) { return values_[k]; }

  friend bool operator==(const ForwardCurve&, const ForwardCurve&) = default;

 private:
  double dx_ = 1.0;
  std::vector<double> values_;
};

/// Full SPDE state: forward curve, log-volatility driver and log bank account.
struct ModelState {
  ForwardCurve curve;
  double v = 0.0;
  double z = 0.0;

  friend bool operator==(const ModelState&, const ModelState&) = default;
};

namespace detail {

inline void check_maturity(const ForwardCurve& curve, double x) {
  // A few ulps of slack at the long end absorb grid arithmetic such as k*dx.
  const double slack = 1e-12 * std::max(1.0, curve.x_max());
  if (!(x >= 0.0 && x <= curve.x_max() + slack))
    throw DomainError("maturity " + std::to_string(x) + " outside curve domain [0, " +
                      std::to_string(curve.x_max()) + "]");
}

/// Splits x into (node index, fractional offset in [0,1]) with the index
/// clamped so that index+1 is always a valid node.
inline std::pair<std::size_t, double> locate(const ForwardCurve& curve, double x) {
  const double pos = x / curve.grid_spacing();
  const auto last = curve.size() - 1;
  auto k = static_cast<std::size_t>(std::floor(pos));
  if (k >= last) return {last - 1, std::min(1.0, pos - static_cast<double>(last - 1))};
  return {k, pos - static_cast<double>(k)};
}

// Integral of the interpolant from 0 to x (x already validated).
inline double integrate_from_zero(const ForwardCurve& curve, double x) {
  const auto& h = curve.values();
  const double dx = curve.grid_spacing();
  auto [k, frac] = locate(curve, x);
  double sum = 0.0;
  for (std::size_t i = 0; i < k; ++i) sum += 0.5 * (h[i] + h[i + 1]);
  sum *= dx;
  // partial piece [x_k, x]: mean of h(x_k) and the interpolated endpoint
  const double end_value = h[k] + frac * (h[k + 1] - h[k]);
  return sum + 0.5 * frac * dx * (h[k] + end_value);
}

}  // namespace detail

/// Affine interpolation of the curve at maturity x.
inline double evaluate(const ForwardCurve& curve, double x) {
  detail::check_maturity(curve, x);
  auto [k, frac] = detail::locate(curve, x);
  return curve[k] + frac * (curve[k + 1] - curve[k]);
}

/// Exact integral of the piecewise affine interpolant over [a, b].
inline double integrate(const ForwardCurve& curve, double a, double b) {
  detail::check_maturity(curve, a);
  detail::check_maturity(curve, b);
  if (a > b) throw DomainError("integrate: reversed bounds");
  if (a == b) return 0.0;
  return detail::integrate_from_zero(curve, b) - detail::integrate_from_zero(curve, a);
}

/// Number of grid slots covered by dt; throws unless dt is a whole multiple
/// of the grid spacing.
inline std::size_t aligned_slots(double dt, double grid_spacing) {
  detail::require<ConfigError>(dt >= 0.0, "time step must be nonnegative");
  const double ratio = dt / grid_spacing;
  const double rounded = std::round(ratio);
  if (!(std::abs(ratio - rounded) <= 1e-9 * std::max(1.0, ratio)))
    throw ConfigError("time step " + std::to_string(dt) + " is not aligned with grid spacing " +
                      std::to_string(grid_spacing));
  return static_cast<std::size_t>(rounded);
}

/// Exact flow of the linear part: the curve moves left by dt (Musiela shift,
/// flat beyond the last node), v decays at rate ou_alpha and the log bank
/// account accrues the integral of the short rate along the way.
inline ModelState shift_decay_flow(ModelState state, double dt, double ou_alpha) {
  const std::size_t slots = aligned_slots(dt, state.curve.grid_spacing());
  if (slots == 0) return state;
  auto& h = state.curve.values();
  const std::size_t n = h.size();
  const std::size_t covered = std::min(slots, n - 1);
  // integral over [0, dt] of the pre-shift curve, flat beyond the last node
  double accrued = 0.0;
  for (std::size_t i = 0; i < covered; ++i) accrued += 0.5 * (h[i] + h[i + 1]);
  accrued *= state.curve.grid_spacing();
  accrued += static_cast<double>(slots - covered) * state.curve.grid_spacing() * h.back();
  state.z += accrued;

  const double tail = h.back();
  if (slots < n) {
    std::move(h.begin() + static_cast<std::ptrdiff_t>(slots), h.end(), h.begin());
    std::fill(h.end() - static_cast<std::ptrdiff_t>(slots), h.end(), tail);
  } else {
    std::fill(h.begin(), h.end(), tail);
  }
  state.v *= std::exp(-ou_alpha * dt);
  return state;
}

/// Parameters of the weight psi(x) = cosh(beta * ||x||_{H_i}).
struct WeightedNorm {
  int order = 0;
  double alpha = 0.1;
  double beta = 1.0;
};

/// Squared H_i norm: h(0)^2 + sum_{m=1..i} int (D^m h)^2 e^{alpha x} dx + v^2,
/// with forward differences standing in for derivatives.
inline double squared_h_norm(const ModelState& state, const WeightedNorm& w) {
  detail::require<ConfigError>(w.order >= 0 && w.alpha > 0.0 && w.beta > 0.0, "weighted norm: bad parameters");
  const auto& h = state.curve.values();
  const double dx = state.curve.grid_spacing();
  detail::require<ConfigError>(h.size() > static_cast<std::size_t>(w.order),
                               "weighted norm: curve too short for requested derivative order");
  double total = h.front() * h.front() + state.v * state.v;
  std::vector<double> diff = h;
  for (int m = 1; m <= w.order; ++m) {
    for (std::size_t k = 0; k + 1 < diff.size(); ++k) diff[k] = (diff[k + 1] - diff[k]) / dx;
    diff.pop_back();
    if (diff.size() < 2) continue;
    double integral = 0.0;
    for (std::size_t k = 0; k + 1 < diff.size(); ++k) {
      const double x0 = static_cast<double>(k) * dx;
      const double f0 = diff[k] * diff[k] * std::exp(w.alpha * x0);
      const double f1 = diff[k + 1] * diff[k + 1] * std::exp(w.alpha * (x0 + dx));
      integral += 0.5 * dx * (f0 + f1);
    }
    total += integral;
  }
  return total;
}

inline double weighted_norm(const ModelState& state, const WeightedNorm& w) {
  return std::cosh(w.beta * std::sqrt(squared_h_norm(state, w)));
}

/// Reads a two-column CSV (maturity_years, rate) with a header row. The grid
/// spacing is inferred from the first two maturities and must be uniform.
inline ForwardCurve read_curve_csv(std::istream& in) {
  std::string line;
  if (!std::getline(in, line)) throw ConfigError("curve csv: missing header row");
  std::vector<double> maturities, rates;
  std::size_t line_no = 1;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    std::replace(line.begin(), line.end(), ',', ' ');
    std::istringstream fields(line);
    double x = 0.0, r = 0.0;
    if (!(fields >> x >> r)) throw ConfigError("curve csv: cannot parse line " + std::to_string(line_no));
    maturities.push_back(x);
    rates.push_back(r);
  }
  detail::require<ConfigError>(maturities.size() >= 2, "curve csv: at least two rows required");
  detail::require<ConfigError>(maturities.front() == 0.0, "curve csv: first maturity must be 0");
  const double dx = maturities[1] - maturities[0];
  detail::require<ConfigError>(dx > 0.0, "curve csv: maturities must increase");
  for (std::size_t k = 0; k < maturities.size(); ++k) {
    const double expected = static_cast<double>(k) * dx;
    if (std::abs(maturities[k] - expected) > 1e-9 * std::max(1.0, expected))
      throw ConfigError("curve csv: non-uniform grid at row " + std::to_string(k + 2));
  }
  return ForwardCurve(dx, std::move(rates));
}

inline ForwardCurve read_curve_csv(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open curve file " + path);
  return read_curve_csv(in);
}

inline void write_curve_csv(std::ostream& out, const ForwardCurve& curve) {
  out << "maturity_years,rate\n" << std::setprecision(17);
  for (std::size_t k = 0; k < curve.size(); ++k) out << curve.node(k) << ',' << curve[k] << '\n';
}

/// Re-grids a curve onto spacing dx over [0, x_max] by affine interpolation.
/// The source must cover every target node.
inline ForwardCurve resample(const ForwardCurve& source, double dx, double x_max) {
  return ForwardCurve::sample(dx, x_max, [&](double x) { return evaluate(source, x); });
}

}  // namespace hjmsplit
