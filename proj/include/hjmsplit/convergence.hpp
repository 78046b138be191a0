#pragma once

// Weak-error ladder against a high-n reference.
//
// All levels are driven by the same Brownian paths: one point set supplies the
// standard normals of the reference level, and a level with n steps uses the
// block sums of those normals scaled by 1/sqrt(n_ref / n). Each level is
// still an exact-in-law estimate of E[f(X^n)], while the level-vs-reference
// difference is estimated path by path, which removes most of the QMC noise
// from the error column. All levels share one curve grid so that only the
// time step changes along the ladder.

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <numeric>
#include <span>
#include <vector>

#include "hjmsplit/parallel.hpp"
#include "hjmsplit/pricing.hpp"
#include "hjmsplit/splitting.hpp"

namespace hjmsplit {

struct ConvergenceSettings {
  std::vector<Scheme> schemes = {Scheme::LieTrotterForward, Scheme::LieTrotterBackward, Scheme::NinomiyaVictoir,
                                 Scheme::Swss};
  std::vector<int> ladder = {4, 8, 16, 32, 64};
  Scheme reference_scheme = Scheme::Swss;
  int reference_steps = 256;
  PointSpec points{PointKind::Sobol, 1u << 14, 1};
  unsigned threads = 1;
  /// Schemes whose (n, 2n) pairs are combined by one Richardson step.
  std::vector<Scheme> richardson = {Scheme::Swss};
};

struct LevelResult {
  Scheme scheme = Scheme::Swss;
  int steps = 0;
  double value = 0.0;
  /// mean over paths of f(X^n) - f(X^ref)
  double error = 0.0;
  /// sample standard deviation of the per-path differences / sqrt(paths)
  double noise = 0.0;
};

struct ConvergenceResult {
  double reference = 0.0;
  std::vector<LevelResult> levels;
  /// One Richardson step over (n, 2n); `steps` holds n.
  std::vector<LevelResult> extrapolated;

  std::vector<LevelResult> of(Scheme s) const {
    std::vector<LevelResult> out;
    for (const auto& l : levels)
      if (l.scheme == s) out.push_back(l);
    return out;
  }
};

/// Least-squares slope of log|err| against log n (the weak order estimate).
inline double fit_slope(std::span<const int> steps, std::span<const double> errors) {
  detail::require<ConfigError>(steps.size() == errors.size() && steps.size() >= 2, "fit_slope: need two or more points");
  const auto m = static_cast<double>(steps.size());
  double sx = 0.0, sy = 0.0, sxx = 0.0, sxy = 0.0;
  for (std::size_t i = 0; i < steps.size(); ++i) {
    const double x = std::log(static_cast<double>(steps[i]));
    const double y = std::log(std::max(std::abs(errors[i]), 1e-300));
    sx += x;
    sy += y;
    sxx += x * x;
    sxy += x * y;
  }
  return -(m * sxy - sx * sy) / (m * sxx - sx * sx);
}

/// Curve grid spacing shared by every level of the study.
inline double convergence_grid_spacing(const ConvergenceSettings& s, double horizon) {
  auto spacing = [&](Scheme scheme, int n) {
    SimConfig c;
    c.horizon = horizon;
    c.steps_per_year = static_cast<int>(std::lround(n / horizon));
    c.scheme = {scheme, 0};
    return c.grid_spacing();
  };
  double dx = spacing(s.reference_scheme, s.reference_steps);
  for (Scheme scheme : s.schemes)
    for (int n : s.ladder) dx = std::min(dx, spacing(scheme, n));
  return dx;
}

/// Runs every scheme of `settings` over the ladder and the reference on one
/// set of coupled paths. `source` is resampled onto the common grid.
inline ConvergenceResult convergence_study(const VolSpec& spec, const ForwardCurve& source, const Payoff& payoff,
                                           const ConvergenceSettings& settings,
                                           const DirectionTable& table = default_direction_table()) {
  payoff.validate();
  const double horizon = payoff.maturity;
  const int n_ref = settings.reference_steps;
  const int d = spec.factors();
  auto make_config = [&](Scheme scheme, int n) {
    SimConfig c;
    c.horizon = horizon;
    const double per_year = n / horizon;
    detail::require<ConfigError>(std::abs(per_year - std::round(per_year)) < 1e-9,
                                 "convergence: steps must be an integer number per year");
    c.steps_per_year = static_cast<int>(std::lround(per_year));
    c.scheme = {scheme, 0};
    c.points = settings.points;
    return c;
  };
  int aux_needed = 0;
  for (int n : settings.ladder) {
    detail::require<ConfigError>(n >= 1 && n_ref % n == 0, "convergence: every ladder level must divide the reference");
    aux_needed = std::max(aux_needed, n);
  }
  const bool ref_nv = settings.reference_scheme == Scheme::NinomiyaVictoir;
  if (ref_nv) aux_needed = std::max(aux_needed, n_ref);

  const double dx = convergence_grid_spacing(settings, horizon);
  const double x_max = horizon + std::max(payoff.reach(), spec.max_benchmark());
  const ModelState initial{resample(source, dx, x_max), 0.0, 0.0};

  struct Job {
    Scheme scheme;
    int steps;
    PathSimulator sim;
  };
  std::vector<Job> jobs;
  jobs.push_back({settings.reference_scheme, n_ref, PathSimulator(spec, make_config(settings.reference_scheme, n_ref), initial)});
  for (Scheme s : settings.schemes)
    for (int n : settings.ladder) jobs.push_back({s, n, PathSimulator(spec, make_config(s, n), initial)});

  const std::size_t paths = settings.points.paths;
  const auto brownian = static_cast<std::size_t>(n_ref * d);
  const int dim = static_cast<int>(brownian) + aux_needed;
  const PointSet points(settings.points.kind, paths, dim, settings.points.skip_or_seed, &table);

  std::vector<std::vector<double>> values(jobs.size(), std::vector<double>(paths, 0.0));
  parallel_for(paths, settings.threads, [&](std::size_t begin, std::size_t end) {
    std::vector<double> row(static_cast<std::size_t>(dim));
    std::vector<double> fine(brownian);
    std::vector<double> coarse;
    std::vector<double> aux;
    for (std::size_t path = begin; path < end; ++path) {
      points.point(path, row);
      for (std::size_t i = 0; i < brownian; ++i) fine[i] = inverse_normal_cdf(row[i]);
      for (std::size_t jb = 0; jb < jobs.size(); ++jb) {
        const auto& job = jobs[jb];
        const int block = n_ref / job.steps;
        const double scale = 1.0 / std::sqrt(static_cast<double>(block));
        coarse.assign(static_cast<std::size_t>(job.steps * d), 0.0);
        for (int k = 0; k < job.steps; ++k)
          for (int b = 0; b < block; ++b)
            for (int j = 0; j < d; ++j)
              coarse[static_cast<std::size_t>(k * d + j)] += fine[static_cast<std::size_t>((k * block + b) * d + j)];
        for (double& z : coarse) z *= scale;
        aux.clear();
        if (job.scheme == Scheme::NinomiyaVictoir)
          aux.assign(row.begin() + static_cast<std::ptrdiff_t>(brownian),
                     row.begin() + static_cast<std::ptrdiff_t>(brownian) + job.steps);
        const int last[] = {job.steps};
        double acc = 0.0;
        job.sim.run_normals(coarse, aux, last, [&](int, const ModelState& s, double w) { acc += w * payoff_value(payoff, s); });
        values[jb][path] = acc;
      }
    }
  });

  ConvergenceResult out;
  const auto mean = [&](const std::vector<double>& v) { return pairwise_sum(v) / static_cast<double>(v.size()); };
  out.reference = mean(values[0]);
  std::vector<double> diff(paths);
  auto summarize = [&](Scheme scheme, int steps, const std::vector<double>& level) {
    for (std::size_t p = 0; p < paths; ++p) diff[p] = level[p] - values[0][p];
    const double e = mean(diff);
    for (std::size_t p = 0; p < paths; ++p) diff[p] = (diff[p] - e) * (diff[p] - e);
    const double var = paths > 1 ? pairwise_sum(diff) / static_cast<double>(paths - 1) : 0.0;
    return LevelResult{scheme, steps, mean(level), e, std::sqrt(var / static_cast<double>(paths))};
  };
  for (std::size_t jb = 1; jb < jobs.size(); ++jb) out.levels.push_back(summarize(jobs[jb].scheme, jobs[jb].steps, values[jb]));

  auto job_index = [&](Scheme s, int n) -> std::size_t {
    for (std::size_t jb = 1; jb < jobs.size(); ++jb)
      if (jobs[jb].scheme == s && jobs[jb].steps == n) return jb;
    return 0;
  };
  std::vector<double> combined(paths);
  for (Scheme s : settings.richardson)
    for (int n : settings.ladder) {
      const std::size_t lo = job_index(s, n), hi = job_index(s, 2 * n);
      if (lo == 0 || hi == 0) continue;
      const double f = std::ldexp(1.0, weak_order(s));
      for (std::size_t p = 0; p < paths; ++p) combined[p] = (f * values[hi][p] - values[lo][p]) / (f - 1.0);
      out.extrapolated.push_back(summarize(s, n, combined));
    }
  return out;
}

}  // namespace hjmsplit
