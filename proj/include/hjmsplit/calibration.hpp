#pragma once

// Two-stage calibration of the loading coefficients, the shared decay and the
// tanh scalings to a caplet surface: a genetic algorithm for the global
// search, refined by Levenberg-Marquardt. Model quotes are computed on one
// fixed point set so the objective is a deterministic function of the
// parameters.

#include <Eigen/Dense>

#include <algorithm>
#include <chrono>
#include <cmath>
#include <functional>
#include <limits>
#include <numeric>
#include <ostream>
#include <random>
#include <vector>

#include "hjmsplit/model.hpp"
#include "hjmsplit/parallel.hpp"
#include "hjmsplit/pricing.hpp"
#include "hjmsplit/splitting.hpp"

namespace hjmsplit {

struct Bounds {
  std::vector<double> lower;
  std::vector<double> upper;

  std::size_t size() const { return lower.size(); }
  double width(std::size_t i) const { return upper[i] - lower[i]; }

  void validate() const {
    detail::require<ConfigError>(lower.size() == upper.size() && !lower.empty(), "bounds: size mismatch");
    for (std::size_t i = 0; i < lower.size(); ++i)
      detail::require<ConfigError>(std::isfinite(lower[i]) && std::isfinite(upper[i]) && lower[i] <= upper[i],
                                   "bounds: need finite lower <= upper");
  }
  bool contains(const std::vector<double>& p) const {
    for (std::size_t i = 0; i < p.size(); ++i)
      if (p[i] < lower[i] || p[i] > upper[i]) return false;
    return true;
  }
  void project(std::vector<double>& p) const {
    for (std::size_t i = 0; i < p.size(); ++i) p[i] = std::clamp(p[i], lower[i], upper[i]);
  }
};

/// Free parameters in the order alpha_{1,0..i0}, ..., alpha_{d,0..i0}, beta,
/// c_1..c_d. Benchmarks and OU parameters come from the template spec.
inline std::vector<double> pack_params(const VolSpec& spec) {
  std::vector<double> p;
  for (const auto& row : spec.alpha) p.insert(p.end(), row.begin(), row.end());
  p.push_back(spec.beta);
  p.insert(p.end(), spec.c.begin(), spec.c.end());
  return p;
}

inline VolSpec unpack_params(const std::vector<double>& p, const VolSpec& template_spec) {
  VolSpec s = template_spec;
  const auto d = static_cast<std::size_t>(s.factors());
  const auto per = static_cast<std::size_t>(s.polynomial_degree() + 1);
  detail::require<ConfigError>(p.size() == d * per + 1 + d, "unpack: parameter vector has wrong length");
  std::size_t k = 0;
  for (auto& row : s.alpha)
    for (auto& a : row) a = p[k++];
  s.beta = p[k++];
  for (auto& c : s.c) c = p[k++];
  return s;
}

/// Default box: |alpha| <= 0.05, beta in [0.05, 2], c_j in [0, 100 / t_j].
inline Bounds default_bounds(const VolSpec& template_spec) {
  Bounds b;
  for (const auto& row : template_spec.alpha)
    for (std::size_t i = 0; i < row.size(); ++i) {
      b.lower.push_back(-0.05);
      b.upper.push_back(0.05);
    }
  b.lower.push_back(0.05);
  b.upper.push_back(2.0);
  for (double t : template_spec.t) {
    b.lower.push_back(0.0);
    b.upper.push_back(100.0 / std::max(t, 0.1));
  }
  return b;
}

struct CalibCell {
  double maturity = 1.0;
  double tenor = 0.5;
  double strike = 0.03;
  double market = 0.0;
  double weight = 1.0;
};

struct CalibTarget {
  std::vector<CalibCell> cells;
  bool vol_quotes = true;

  void validate() const {
    detail::require<ConfigError>(!cells.empty(), "calibration target: no cells");
    for (const auto& c : cells) detail::require<ConfigError>(c.weight >= 0.0, "calibration target: negative weight");
  }
};

inline CalibTarget target_from_quotes(const std::vector<MarketQuote>& quotes) {
  CalibTarget t;
  t.vol_quotes = quotes.front().is_vol;
  for (const auto& q : quotes) {
    detail::require<ConfigError>(q.is_vol == t.vol_quotes, "calibration target: mixed quote types");
    t.cells.push_back({q.maturity, q.tenor, q.strike, q.value, 1.0});
  }
  return t;
}

/// Simulation settings shared by every objective evaluation.
struct ObjectiveSettings {
  int steps_per_year = 12;
  std::size_t paths = 2048;
  std::uint64_t skip = 1;
  Scheme scheme = Scheme::Swss;
  unsigned threads = 1;
  double clamp = 1.0;
  /// Residual assigned (times the weight) to a cell whose quote cannot be
  /// inverted.
  double penalty = 1.0;
};

struct ObjectiveValue {
  std::vector<double> residuals;
  std::vector<double> model;
  std::vector<bool> flagged;
  double squared_norm() const { return std::inner_product(residuals.begin(), residuals.end(), residuals.begin(), 0.0); }
};

/// Caplet-surface residuals as a function of the packed parameters.
class CalibrationProblem {
 public:
  CalibrationProblem(CalibTarget target, VolSpec template_spec, ForwardCurve initial_curve, ObjectiveSettings settings)
      : target_(std::move(target)), template_(std::move(template_spec)), source_(std::move(initial_curve)),
        settings_(settings) {
    target_.validate();
    template_.validate();
    double horizon = 0.0, reach = 0.0;
    for (const auto& c : target_.cells) {
      horizon = std::max(horizon, c.maturity);
      reach = std::max(reach, c.tenor);
    }
    config_.horizon = horizon;
    config_.steps_per_year = settings_.steps_per_year;
    config_.scheme = SchemeId{settings_.scheme, 0};
    config_.points = PointSpec{PointKind::Sobol, settings_.paths, settings_.skip};
    config_.threads = 1;
    initial_ = initial_state(source_, config_, template_, reach);
    for (const auto& c : target_.cells) {
      payoffs_.push_back(Payoff{PayoffKind::Caplet, c.maturity, c.tenor, c.strike, 1, settings_.clamp});
      conventions_.push_back(caplet_convention(initial_.curve, c.maturity, c.tenor));
    }
  }

  const CalibTarget& target() const { return target_; }
  const VolSpec& template_spec() const { return template_; }
  const ObjectiveSettings& settings() const { return settings_; }
  std::size_t cells() const { return target_.cells.size(); }

  /// Model quotes (vol or price, matching the target) at a parameter vector.
  std::vector<double> model_prices(const std::vector<double>& params) const {
    const VolSpec spec = unpack_params(params, template_);
    std::vector<double> out;
    for (const auto& e : price_many(spec, config_, initial_, payoffs_)) out.push_back(e.value);
    return out;
  }

  ObjectiveValue evaluate(const std::vector<double>& params) const {
    const auto prices = model_prices(params);
    ObjectiveValue v;
    v.residuals.resize(cells());
    v.model.resize(cells());
    v.flagged.assign(cells(), false);
    for (std::size_t i = 0; i < cells(); ++i) {
      const auto& cell = target_.cells[i];
      double quote = prices[i];
      if (target_.vol_quotes) {
        try {
          quote = black_implied_vol(prices[i], conventions_[i].forward, cell.strike, cell.maturity,
                                    conventions_[i].annuity);
        } catch (const DomainError&) {
          v.flagged[i] = true;
          v.model[i] = std::numeric_limits<double>::quiet_NaN();
          v.residuals[i] = cell.weight * settings_.penalty;
          continue;
        }
      }
      v.model[i] = quote;
      v.residuals[i] = cell.weight * (quote - cell.market);
    }
    return v;
  }

  std::vector<double> residuals(const std::vector<double>& params) const { return evaluate(params).residuals; }

  /// Replaces the market quotes by the model's own quotes at `params`.
  CalibTarget synthesize(const std::vector<double>& params) const {
    CalibTarget t = target_;
    const auto v = evaluate(params);
    for (std::size_t i = 0; i < cells(); ++i) {
      detail::require<DomainError>(!v.flagged[i], "synthetic surface: quote inversion failed for cell " + std::to_string(i));
      t.cells[i].market = v.model[i];
    }
    return t;
  }

 private:
  CalibTarget target_;
  VolSpec template_;
  ForwardCurve source_;
  ObjectiveSettings settings_;
  SimConfig config_;
  ModelState initial_;
  std::vector<Payoff> payoffs_;
  std::vector<CapletQuoteConvention> conventions_;
};

// --- genetic algorithm ----------------------------------------------------------

struct GaSettings {
  std::size_t population = 64;
  int generations = 30;
  std::size_t tournament = 4;
  double crossover_rate = 0.7;
  /// Standard deviation of the Gaussian mutation as a fraction of box width.
  double mutation_scale = 0.1;
  std::uint64_t seed = 20240607;
  unsigned threads = 1;
};

struct GaResult {
  std::vector<double> best;
  double best_cost = 0.0;
  /// Best cost in the initial population and after every generation.
  std::vector<double> history;
  std::size_t evaluations = 0;
};

/// Elitist GA: tournament selection, uniform crossover, Gaussian mutation,
/// one elite. Member 0 of the initial population is `start`; the rest are
/// uniform in the box. Deterministic for a fixed seed.
inline GaResult genetic_search(const std::function<double(const std::vector<double>&)>& cost,
                               const std::vector<double>& start, const Bounds& bounds, const GaSettings& settings) {
  bounds.validate();
  detail::require<ConfigError>(start.size() == bounds.size() && bounds.contains(start), "genetic_search: start outside bounds");
  detail::require<ConfigError>(settings.population >= 1 && settings.tournament >= 1 && settings.generations >= 0,
                               "genetic_search: bad settings");
  std::mt19937_64 rng(settings.seed);
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  std::normal_distribution<double> normal(0.0, 1.0);
  const std::size_t dim = bounds.size();

  std::vector<std::vector<double>> pop(settings.population, start);
  for (std::size_t m = 1; m < pop.size(); ++m)
    for (std::size_t i = 0; i < dim; ++i) pop[m][i] = bounds.lower[i] + unit(rng) * bounds.width(i);

  GaResult result;
  std::vector<double> costs(pop.size());
  auto evaluate_all = [&](std::size_t from) {
    parallel_for(pop.size() - from, settings.threads, [&](std::size_t b, std::size_t e) {
      for (std::size_t m = from + b; m < from + e; ++m) {
        const double c = cost(pop[m]);
        costs[m] = std::isfinite(c) ? c : std::numeric_limits<double>::max();
      }
    });
    result.evaluations += pop.size() - from;
  };
  auto best_index = [&] {
    return static_cast<std::size_t>(std::min_element(costs.begin(), costs.end()) - costs.begin());
  };

  evaluate_all(0);
  result.history.push_back(costs[best_index()]);
  for (int g = 0; g < settings.generations; ++g) {
    const std::size_t elite = best_index();
    auto tournament = [&]() -> const std::vector<double>& {
      std::size_t winner = static_cast<std::size_t>(unit(rng) * static_cast<double>(pop.size())) % pop.size();
      for (std::size_t t = 1; t < settings.tournament; ++t) {
        const std::size_t c = static_cast<std::size_t>(unit(rng) * static_cast<double>(pop.size())) % pop.size();
        if (costs[c] < costs[winner]) winner = c;
      }
      return pop[winner];
    };
    std::vector<std::vector<double>> next;
    next.reserve(pop.size());
    next.push_back(pop[elite]);
    while (next.size() < pop.size()) {
      std::vector<double> child = tournament();
      const auto& other = tournament();
      if (unit(rng) < settings.crossover_rate)
        for (std::size_t i = 0; i < dim; ++i)
          if (unit(rng) < 0.5) child[i] = other[i];
      for (std::size_t i = 0; i < dim; ++i) child[i] += settings.mutation_scale * bounds.width(i) * normal(rng);
      bounds.project(child);
      next.push_back(std::move(child));
    }
    const double elite_cost = costs[elite];
    pop = std::move(next);
    costs[0] = elite_cost;
    evaluate_all(1);
    result.history.push_back(costs[best_index()]);
  }
  const std::size_t b = best_index();
  result.best = pop[b];
  result.best_cost = costs[b];
  return result;
}

// --- Levenberg-Marquardt ------------------------------------------------------------

struct LmSettings {
  int max_iterations = 50;
  double initial_damping = 1e-3;
  double gradient_tolerance = 1e-8;
  double step_tolerance = 1e-10;
  double relative_fd_step = 1e-6;
  unsigned threads = 1;
};

struct LmResult {
  std::vector<double> params;
  double cost = 0.0;  // squared residual norm
  int iterations = 0;
  std::size_t evaluations = 0;
  /// Squared residual norm at the start and after every accepted step.
  std::vector<double> history;
  std::string stop_reason;
};

using ResidualFunction = std::function<std::vector<double>(const std::vector<double>&)>;

/// Damped Gauss-Newton with forward-difference Jacobians, multiplicative
/// damping updates and projection onto the box after each step.
inline LmResult levenberg_marquardt(const ResidualFunction& residuals, const std::vector<double>& start,
                                    const Bounds& bounds, const LmSettings& settings) {
  bounds.validate();
  detail::require<ConfigError>(start.size() == bounds.size() && bounds.contains(start), "levenberg_marquardt: start outside bounds");
  const auto n = static_cast<Eigen::Index>(start.size());
  LmResult out;
  out.params = start;
  std::vector<double> r = residuals(out.params);
  ++out.evaluations;
  const auto m = static_cast<Eigen::Index>(r.size());
  auto norm2 = [](const std::vector<double>& v) { return std::inner_product(v.begin(), v.end(), v.begin(), 0.0); };
  out.cost = norm2(r);
  out.history.push_back(out.cost);
  double damping = settings.initial_damping;

  for (out.iterations = 0; out.iterations < settings.max_iterations; ++out.iterations) {
    if (out.cost == 0.0) {
      out.stop_reason = "zero residual";
      return out;
    }
    Eigen::MatrixXd jac(m, n);
    parallel_for(static_cast<std::size_t>(n), settings.threads, [&](std::size_t b, std::size_t e) {
      for (std::size_t i = b; i < e; ++i) {
        std::vector<double> p = out.params;
        double h = settings.relative_fd_step * (1.0 + std::abs(p[i]));
        if (p[i] + h > bounds.upper[i]) h = -h;
        p[i] += h;
        const auto rp = residuals(p);
        for (Eigen::Index k = 0; k < m; ++k)
          jac(k, static_cast<Eigen::Index>(i)) = (rp[static_cast<std::size_t>(k)] - r[static_cast<std::size_t>(k)]) / h;
      }
    });
    out.evaluations += static_cast<std::size_t>(n);
    const Eigen::Map<const Eigen::VectorXd> rv(r.data(), m);
    Eigen::VectorXd grad = jac.transpose() * rv;
    // bound-active coordinates whose descent direction leaves the box are held fixed
    std::vector<Eigen::Index> free;
    for (Eigen::Index i = 0; i < n; ++i) {
      const auto u = static_cast<std::size_t>(i);
      const bool pinned = (out.params[u] <= bounds.lower[u] && grad(i) > 0.0) ||
                          (out.params[u] >= bounds.upper[u] && grad(i) < 0.0);
      if (pinned)
        grad(i) = 0.0;
      else
        free.push_back(i);
    }
    if (grad.lpNorm<Eigen::Infinity>() < settings.gradient_tolerance || free.empty()) {
      out.stop_reason = "gradient tolerance";
      return out;
    }
    const auto nf = static_cast<Eigen::Index>(free.size());
    Eigen::MatrixXd jf(m, nf);
    Eigen::VectorXd gf(nf);
    for (Eigen::Index i = 0; i < nf; ++i) {
      jf.col(i) = jac.col(free[static_cast<std::size_t>(i)]);
      gf(i) = grad(free[static_cast<std::size_t>(i)]);
    }
    const Eigen::MatrixXd jtj = jf.transpose() * jf;

    bool accepted = false;
    while (!accepted) {
      Eigen::MatrixXd a = jtj;
      for (Eigen::Index i = 0; i < nf; ++i) a(i, i) += damping * std::max(jtj(i, i), 1e-12);
      const Eigen::LDLT<Eigen::MatrixXd> ldlt(a);
      Eigen::VectorXd delta_f;
      if (ldlt.info() == Eigen::Success && ldlt.isPositive()) delta_f = ldlt.solve(-gf);
      if (delta_f.size() != nf || !delta_f.allFinite()) {
        damping *= 10.0;
        if (damping > 1e16) {
          out.stop_reason = "damping overflow";
          return out;
        }
        continue;
      }
      Eigen::VectorXd delta = Eigen::VectorXd::Zero(n);
      for (Eigen::Index i = 0; i < nf; ++i) delta(free[static_cast<std::size_t>(i)]) = delta_f(i);
      std::vector<double> trial = out.params;
      for (Eigen::Index i = 0; i < n; ++i) trial[static_cast<std::size_t>(i)] += delta(i);
      bounds.project(trial);
      double step_norm = 0.0, param_norm = 0.0;
      for (std::size_t i = 0; i < trial.size(); ++i) {
        step_norm += (trial[i] - out.params[i]) * (trial[i] - out.params[i]);
        param_norm += out.params[i] * out.params[i];
      }
      if (std::sqrt(step_norm) < settings.step_tolerance * (std::sqrt(param_norm) + settings.step_tolerance)) {
        out.stop_reason = "step tolerance";
        return out;
      }
      const auto rt = residuals(trial);
      ++out.evaluations;
      const double cost = norm2(rt);
      if (std::isfinite(cost) && cost < out.cost) {
        out.params = std::move(trial);
        r = rt;
        out.cost = cost;
        out.history.push_back(cost);
        damping = std::max(damping / 10.0, 1e-12);
        accepted = true;
      } else {
        damping *= 10.0;
        if (damping > 1e16) {
          out.stop_reason = "damping overflow";
          return out;
        }
      }
    }
  }
  out.stop_reason = "max iterations";
  return out;
}

// --- pipeline ------------------------------------------------------------------------

struct CalibrationSettings {
  ObjectiveSettings objective;
  GaSettings ga;
  LmSettings lm;
  Bounds bounds;  // empty: default_bounds(template)
};

struct CalibrationReport {
  std::vector<CalibCell> cells;
  std::vector<double> model;
  std::vector<double> residuals;
  std::vector<bool> flagged;
  double rmse = 0.0;
  double rmse_start = 0.0;
  double rmse_ga = 0.0;
  double wall_seconds = 0.0;
  std::size_t evaluations = 0;
  int lm_iterations = 0;
  std::string lm_stop_reason;
};

struct CalibrationResult {
  VolSpec spec;
  std::vector<double> params;
  CalibrationReport report;
};

inline double rmse_of(const std::vector<double>& residuals) {
  const double ss = std::inner_product(residuals.begin(), residuals.end(), residuals.begin(), 0.0);
  return std::sqrt(ss / static_cast<double>(residuals.size()));
}

/// genetic_search from `start`, then levenberg_marquardt from the GA best.
inline CalibrationResult calibrate(const CalibrationProblem& problem, const std::vector<double>& start,
                                   const CalibrationSettings& settings) {
  const auto t0 = std::chrono::steady_clock::now();
  const Bounds bounds = settings.bounds.size() ? settings.bounds : default_bounds(problem.template_spec());
  std::vector<double> origin = start;
  bounds.project(origin);

  CalibrationResult result;
  auto cost = [&](const std::vector<double>& p) { return problem.evaluate(p).squared_norm(); };
  const GaResult ga = genetic_search(cost, origin, bounds, settings.ga);
  const double cells = static_cast<double>(problem.cells());
  result.report.rmse_start = std::sqrt(ga.history.front() / cells);
  result.report.rmse_ga = std::sqrt(ga.best_cost / cells);

  const LmResult lm = levenberg_marquardt([&](const std::vector<double>& p) { return problem.residuals(p); }, ga.best,
                                          bounds, settings.lm);
  result.params = lm.params;
  result.spec = unpack_params(lm.params, problem.template_spec());
  const ObjectiveValue final_value = problem.evaluate(lm.params);
  auto& rep = result.report;
  rep.cells = problem.target().cells;
  rep.model = final_value.model;
  rep.residuals = final_value.residuals;
  rep.flagged = final_value.flagged;
  rep.rmse = rmse_of(final_value.residuals);
  rep.evaluations = ga.evaluations + lm.evaluations + 1;
  rep.lm_iterations = lm.iterations;
  rep.lm_stop_reason = lm.stop_reason;
  rep.wall_seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  return result;
}

/// Fit report: one row per cell plus a trailing summary comment line.
inline void write_report_csv(std::ostream& out, const CalibrationReport& rep, bool with_timing) {
  out << "cell_id,maturity,strike,market,model,residual\n";
  for (std::size_t i = 0; i < rep.cells.size(); ++i)
    out << i << ',' << format_exact(rep.cells[i].maturity) << ',' << format_exact(rep.cells[i].strike) << ','
        << format_exact(rep.cells[i].market) << ',' << (rep.flagged[i] ? std::string("nan") : format_exact(rep.model[i]))
        << ',' << format_exact(rep.residuals[i]) << '\n';
  out << "# rmse=" << format_exact(rep.rmse) << " rmse_ga=" << format_exact(rep.rmse_ga)
      << " rmse_start=" << format_exact(rep.rmse_start) << " evaluations=" << rep.evaluations
      << " lm_iterations=" << rep.lm_iterations << " stop=" << rep.lm_stop_reason;
  if (with_timing) out << " wall_seconds=" << format_exact(rep.wall_seconds);
  out << '\n';
}

}  // namespace hjmsplit
