// hjmsplit: command-line front end for simulation, convergence studies,
// pricing, martingale checks, calibration and budget planning.
//
// Every command writes CSV with a header row. Exit codes: 0 success,
// 1 domain error (bad numbers at run time), 2 configuration or usage error.

#include <CLI11.hpp>

#include <cctype>
#include <chrono>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <random>
#include <sstream>
#include <string>
#include <vector>

#include "hjmsplit/hjmsplit.hpp"

namespace fs = std::filesystem;
using namespace hjmsplit;

namespace {

// Shared run options: a config file supplies defaults, flags override them.
struct RunOptions {
  std::string config;
  std::string model;
  std::string curve;
  std::string scheme;
  std::optional<int> steps_per_year;
  std::optional<std::size_t> paths;
  std::string points;
  std::optional<std::uint64_t> skip;
  std::string output;
  std::optional<unsigned> threads;
  bool randomized_swss = false;
  bool timing = false;

  std::string payoff;
  std::optional<double> maturity;
  std::optional<double> tenor;
  std::optional<double> strike;
  bool atm = false;
  std::optional<int> count;
  std::optional<double> clamp;
};

// Fully resolved run: files loaded, defaults applied.
struct Run {
  VolSpec spec;
  ForwardCurve curve;
  SimConfig sim;
  Payoff payoff;
  std::string output;
  bool timing = false;
};

const std::set<std::string> kRunKeys = {"model",    "curve",   "scheme",  "steps_per_year", "paths",
                                        "points",   "skip",    "seed",    "threads",        "output",
                                        "payoff",   "maturity", "tenor",  "strike",         "atm",
                                        "count",    "clamp",   "randomized_swss", "ladder", "reference_steps",
                                        "reference_scheme", "schemes", "fit_max"};

std::string resolve_relative(const std::string& path, const std::string& config_path) {
  if (path.empty() || config_path.empty() || fs::path(path).is_absolute()) return path;
  return (fs::path(config_path).parent_path() / path).lexically_normal().string();
}

// Scheme names are accepted in any case (nv, NV, lt_fwd, ...).
Scheme scheme_of(std::string name) {
  for (char& ch : name) ch = static_cast<char>(std::toupper(static_cast<unsigned char>(ch)));
  return parse_scheme(name);
}

PointKind parse_point_kind(const std::string& s) {
  if (s == "sobol") return PointKind::Sobol;
  if (s == "pseudo" || s == "mc") return PointKind::Pseudo;
  throw ConfigError("unknown point kind '" + s + "' (expected sobol or pseudo)");
}

std::optional<KeyValueFile> load_config(const std::string& path) {
  if (path.empty()) return std::nullopt;
  auto kv = KeyValueFile::load(path);
  kv.require_known(kRunKeys);
  return kv;
}

Run resolve(const RunOptions& o, const std::optional<KeyValueFile>& kv, bool need_payoff = true) {
  auto text = [&](const std::string& flag, const char* key, const std::string& fallback) {
    if (!flag.empty()) return flag;
    return kv ? kv->text(key, fallback) : fallback;
  };
  auto file = [&](const std::string& flag, const char* key) {
    if (!flag.empty()) return flag;
    return kv && kv->has(key) ? resolve_relative(kv->text(key), o.config) : std::string();
  };
  auto number = [&](const auto& flag, const char* key, double fallback) -> double {
    if (flag) return static_cast<double>(*flag);
    return kv ? kv->number(key, fallback) : fallback;
  };
  auto integer = [&](const auto& flag, const char* key, long long fallback) -> long long {
    if (flag) return static_cast<long long>(*flag);
    return kv ? kv->integer(key, fallback) : fallback;
  };

  Run r;
  const std::string model = file(o.model, "model");
  const std::string curve = file(o.curve, "curve");
  detail::require<ConfigError>(!model.empty(), "no model file given (--model or 'model' in the config)");
  detail::require<ConfigError>(!curve.empty(), "no curve file given (--curve or 'curve' in the config)");
  r.spec = read_vol_spec(model);
  r.curve = read_curve_csv(curve);

  r.sim.scheme = SchemeId{scheme_of(text(o.scheme, "scheme", "swss")), 0};
  r.sim.steps_per_year = static_cast<int>(integer(o.steps_per_year, "steps_per_year", 12));
  const long long paths = integer(o.paths, "paths", 2048);
  detail::require<ConfigError>(paths >= 1, "paths must be positive");
  const PointKind kind = parse_point_kind(text(o.points, "points", "sobol"));
  const long long skip = o.skip ? static_cast<long long>(*o.skip)
                                : kv ? kv->integer(kind == PointKind::Sobol ? "skip" : "seed", 1) : 1;
  detail::require<ConfigError>(skip >= 0, "skip/seed must be nonnegative");
  r.sim.points = PointSpec{kind, static_cast<std::size_t>(paths), static_cast<std::uint64_t>(skip)};
  const long long threads = integer(o.threads, "threads", 1);
  detail::require<ConfigError>(threads >= 1, "threads must be at least 1");
  r.sim.threads = static_cast<unsigned>(threads);
  r.sim.randomized_swss = o.randomized_swss || (kv && kv->integer("randomized_swss", 0) != 0);
  r.output = o.output.empty() && kv && kv->has("output") ? resolve_relative(kv->text("output"), o.config) : o.output;
  r.timing = o.timing;

  if (need_payoff) {
    Payoff& p = r.payoff;
    p.kind = parse_payoff_kind(text(o.payoff, "payoff", "zcb"));
    p.maturity = number(o.maturity, "maturity", 1.0);
    p.tenor = number(o.tenor, "tenor", 0.25);
    p.count = static_cast<int>(integer(o.count, "count", 1));
    p.clamp = number(o.clamp, "clamp", 1.0);
    p.validate();
    const bool atm = o.atm || (kv && kv->integer("atm", 0) != 0);
    if (atm && !o.strike) {
      const double x_max = p.maturity + p.reach();
      detail::require<DomainError>(r.curve.x_max() + 1e-12 >= x_max, "initial curve does not reach the payoff's last date");
      p.strike = p.kind == PayoffKind::PayerSwaption ? forward_swap_rate(r.curve, p.maturity, p.tenor, p.count)
                                                     : forward_libor(r.curve, p.maturity, p.tenor);
    } else {
      p.strike = number(o.strike, "strike", 0.0);
    }
    r.sim.horizon = p.maturity;
  }
  return r;
}

// Writes to the output file, or stdout when none is given.
class Sink {
 public:
  explicit Sink(const std::string& path) {
    if (!path.empty() && path != "-") {
      file_.open(path);
      if (!file_) throw ConfigError("cannot open output file " + path);
    }
  }
  std::ostream& out() { return file_.is_open() ? static_cast<std::ostream&>(file_) : std::cout; }

 private:
  std::ofstream file_;
};

double seconds_since(std::chrono::steady_clock::time_point t0) {
  return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
}

std::string fmt(double x) { return format_exact(x); }

void add_run_options(CLI::App* cmd, RunOptions& o, bool with_payoff) {
  cmd->add_option("--config", o.config, "Run config file (key = value); flags override its entries")
      ->check(CLI::ExistingFile);
  cmd->add_option("--model", o.model, "Volatility specification file");
  cmd->add_option("--curve", o.curve, "Initial forward curve CSV (maturity_years,rate)");
  cmd->add_option("--scheme", o.scheme, "euler | lt_fwd | lt_bwd | nv | swss (default swss)");
  cmd->add_option("--steps-per-year", o.steps_per_year, "Time steps per year (default 12)");
  cmd->add_option("--paths", o.paths, "Number of paths K (default 2048)");
  cmd->add_option("--points", o.points, "sobol | pseudo (default sobol)");
  cmd->add_option("--skip,--seed", o.skip, "Sobol index of the first point, or pseudo-random seed (default 1)");
  cmd->add_option("--output,-o", o.output, "Output CSV path (default stdout)");
  cmd->add_option("--threads", o.threads, "Worker threads (results do not depend on it)");
  cmd->add_flag("--randomized-swss", o.randomized_swss, "SWSS draws one ordering per path instead of averaging both");
  cmd->add_flag("--timing", o.timing, "Append wall-clock seconds (makes output non-reproducible)");
  if (!with_payoff) return;
  cmd->add_option("--payoff", o.payoff, "zcb | caplet | swaption | smooth (default zcb)");
  cmd->add_option("--maturity", o.maturity, "Payoff maturity T in years (also the simulation horizon)");
  cmd->add_option("--tenor", o.tenor, "Accrual period delta in years");
  cmd->add_option("--strike", o.strike, "Strike K");
  cmd->add_flag("--atm", o.atm, "Use the at-the-money strike of the initial curve");
  cmd->add_option("--count", o.count, "Number of swap payments I");
  cmd->add_option("--clamp", o.clamp, "Bank-account clamp level of Phi");
}

// --- commands ---------------------------------------------------------------------

int cmd_simulate(const RunOptions& o) {
  const auto kv = load_config(o.config);
  Run r = resolve(o, kv);
  const auto t0 = std::chrono::steady_clock::now();
  const ModelState initial = initial_state(r.curve, r.sim, r.spec, 0.0);
  const PathSimulator sim(r.spec, r.sim, initial);
  const PointSet points(r.sim.points.kind, r.sim.points.paths, sim.dimension(), r.sim.points.skip_or_seed,
                        &default_direction_table());
  const int d = r.spec.factors();
  const auto paths = r.sim.points.paths;

  // rows[path] collects the formatted lines of that path's chains
  std::vector<std::string> rows(paths);
  parallel_for(paths, r.sim.threads, [&](std::size_t begin, std::size_t end) {
    std::vector<double> row(static_cast<std::size_t>(sim.dimension()));
    for (std::size_t path = begin; path < end; ++path) {
      points.point(path, row);
      std::ostringstream s;
      int chain = 0;
      for (const auto& ws : sim.simulate_path(row)) {
        s << path << ',' << chain++ << ',' << fmt(ws.weight) << ',' << fmt(ws.state.z) << ',' << fmt(ws.state.v) << ','
          << fmt(ws.state.curve[0]);
        for (int j = 0; j < d; ++j) s << ',' << fmt(integrate(ws.state.curve, 0.0, r.spec.t[static_cast<std::size_t>(j)]));
        s << '\n';
      }
      rows[path] = s.str();
    }
  });

  Sink sink(r.output);
  auto& out = sink.out();
  out << "path,chain,weight,z,v,short_rate";
  for (int j = 1; j <= d; ++j) out << ",int_h_" << j;
  out << '\n';
  for (const auto& s : rows) out << s;
  if (r.timing) out << "# seconds=" << fmt(seconds_since(t0)) << '\n';
  return 0;
}

struct ConvergeOptions {
  std::vector<int> ladder;
  std::optional<int> reference_steps;
  std::string reference_scheme;
  std::vector<std::string> schemes;
  std::optional<int> fit_max;
};

int cmd_converge(const RunOptions& o, const ConvergeOptions& c) {
  const auto kv = load_config(o.config);
  RunOptions opts = o;
  if (opts.payoff.empty() && !(kv && kv->has("payoff"))) opts.payoff = "smooth";
  Run r = resolve(opts, kv);

  ConvergenceSettings s;
  if (!c.ladder.empty()) {
    s.ladder = c.ladder;
  } else if (kv && kv->has("ladder")) {
    s.ladder.clear();
    for (double v : kv->array("ladder")) s.ladder.push_back(static_cast<int>(v));
  }
  s.reference_steps = c.reference_steps ? *c.reference_steps
                                        : static_cast<int>(kv ? kv->integer("reference_steps", 256) : 256);
  const std::string ref = !c.reference_scheme.empty() ? c.reference_scheme
                          : kv                        ? kv->text("reference_scheme", "swss")
                                                      : "swss";
  s.reference_scheme = scheme_of(ref);
  std::vector<std::string> names = c.schemes;
  if (names.empty() && kv && kv->has("schemes")) {
    std::stringstream list(kv->text("schemes"));
    for (std::string item; std::getline(list, item, ',');) names.push_back(item);
  }
  if (!names.empty()) {
    s.schemes.clear();
    for (const auto& n : names) s.schemes.push_back(scheme_of(n));
  }
  s.points = r.sim.points;
  s.threads = r.sim.threads;
  const int fit_max = c.fit_max ? *c.fit_max : static_cast<int>(kv ? kv->integer("fit_max", 32) : 32);

  const auto t0 = std::chrono::steady_clock::now();
  const auto result = convergence_study(r.spec, r.curve, r.payoff, s);
  const double elapsed = seconds_since(t0);

  Sink sink(r.output);
  auto& out = sink.out();
  out << "kind,scheme,n,value,error,noise\n";
  out << "reference," << to_string(s.reference_scheme) << ',' << s.reference_steps << ',' << fmt(result.reference)
      << ",0,0\n";
  for (const auto& l : result.levels)
    out << "level," << to_string(l.scheme) << ',' << l.steps << ',' << fmt(l.value) << ',' << fmt(l.error) << ','
        << fmt(l.noise) << '\n';
  for (const auto& l : result.extrapolated)
    out << "richardson," << to_string(l.scheme) << ',' << l.steps << ',' << fmt(l.value) << ',' << fmt(l.error)
        << ',' << fmt(l.noise) << '\n';
  // slope rows: value holds the fitted order over n <= fit_max
  auto slope_row = [&](const char* kind, Scheme scheme, const std::vector<LevelResult>& rows) {
    std::vector<int> n;
    std::vector<double> e;
    for (const auto& l : rows)
      if (l.scheme == scheme && l.steps <= fit_max) {
        n.push_back(l.steps);
        e.push_back(l.error);
      }
    if (n.size() >= 2) out << kind << ',' << to_string(scheme) << ',' << fit_max << ',' << fmt(fit_slope(n, e)) << ",,\n";
  };
  for (Scheme scheme : s.schemes) slope_row("slope", scheme, result.levels);
  for (Scheme scheme : s.richardson) slope_row("richardson_slope", scheme, result.extrapolated);
  if (r.timing) out << "# seconds=" << fmt(elapsed) << '\n';
  return 0;
}

int cmd_price(const RunOptions& o) {
  const auto kv = load_config(o.config);
  Run r = resolve(o, kv);
  const auto t0 = std::chrono::steady_clock::now();
  const ModelState initial = initial_state(r.curve, r.sim, r.spec, r.payoff.reach());
  const Estimate e = price(r.spec, r.sim, initial, r.payoff);
  const double elapsed = seconds_since(t0);

  Sink sink(r.output);
  auto& out = sink.out();
  out << "payoff,maturity,tenor,strike,count,scheme,steps_per_year,paths,value";
  if (r.timing) out << ",seconds";
  out << '\n';
  out << to_string(r.payoff.kind) << ',' << fmt(r.payoff.maturity) << ',' << fmt(r.payoff.tenor) << ','
      << fmt(r.payoff.strike) << ',' << r.payoff.count << ',' << to_string(r.sim.scheme.scheme) << ','
      << r.sim.steps_per_year << ',' << e.paths << ',' << fmt(e.value);
  if (r.timing) out << ',' << fmt(elapsed);
  out << '\n';
  return 0;
}

int cmd_martingale(const RunOptions& o, bool negate_drift) {
  const auto kv = load_config(o.config);
  Run r = resolve(o, kv);
  r.sim.negate_hjm_drift = negate_drift;
  const auto t0 = std::chrono::steady_clock::now();
  const ModelState initial = initial_state(r.curve, r.sim, r.spec, r.payoff.tenor);
  const auto m = martingale_check(r.spec, r.sim, initial, r.payoff.maturity, r.payoff.tenor);
  const double elapsed = seconds_since(t0);

  Sink sink(r.output);
  auto& out = sink.out();
  out << "maturity,tenor,scheme,steps_per_year,paths,negate_drift,lhs,rhs,rel_gap";
  if (r.timing) out << ",seconds";
  out << '\n';
  out << fmt(r.payoff.maturity) << ',' << fmt(r.payoff.tenor) << ',' << to_string(r.sim.scheme.scheme) << ','
      << r.sim.steps_per_year << ',' << r.sim.points.paths << ',' << (negate_drift ? 1 : 0) << ',' << fmt(m.lhs) << ','
      << fmt(m.rhs) << ',' << fmt(m.rel_gap);
  if (r.timing) out << ',' << fmt(elapsed);
  out << '\n';
  return 0;
}

struct CalibrateOptions {
  std::string market;
  std::string settings;
  std::string params_out;
  bool synthesize = false;
};

const std::set<std::string> kCalibrationKeys = {
    "paths",         "steps_per_year", "skip",          "scheme",         "clamp",          "penalty",
    "ga_population", "ga_generations", "ga_tournament", "ga_crossover",   "ga_mutation",    "ga_seed",
    "lm_max_iterations", "lm_initial_damping", "lm_gradient_tolerance", "lm_step_tolerance", "lm_fd_step",
    "alpha_bound",   "beta_lower",     "beta_upper",    "c_scale",        "start",          "start_seed"};

int cmd_calibrate(const RunOptions& o, const CalibrateOptions& c) {
  const auto kv = load_config(o.config);
  Run r = resolve(o, kv, false);
  detail::require<ConfigError>(!c.market.empty(), "calibrate needs --market");
  const auto quotes = read_market_csv(c.market);
  const CalibTarget target = target_from_quotes(quotes);

  KeyValueFile cs_file;
  if (!c.settings.empty()) {
    cs_file = KeyValueFile::load(c.settings);
    cs_file.require_known(kCalibrationKeys);
  }
  CalibrationSettings cs;
  auto& obj = cs.objective;
  obj.paths = static_cast<std::size_t>(cs_file.integer("paths", static_cast<long long>(r.sim.points.paths)));
  obj.steps_per_year = static_cast<int>(cs_file.integer("steps_per_year", r.sim.steps_per_year));
  obj.skip = static_cast<std::uint64_t>(cs_file.integer("skip", static_cast<long long>(r.sim.points.skip_or_seed)));
  obj.scheme = scheme_of(cs_file.text("scheme", std::string(to_string(r.sim.scheme.scheme))));
  obj.clamp = cs_file.number("clamp", obj.clamp);
  obj.penalty = cs_file.number("penalty", obj.penalty);
  detail::require<ConfigError>(r.sim.points.kind == PointKind::Sobol, "calibrate uses Sobol points only");
  cs.ga.population = static_cast<std::size_t>(cs_file.integer("ga_population", static_cast<long long>(cs.ga.population)));
  cs.ga.generations = static_cast<int>(cs_file.integer("ga_generations", cs.ga.generations));
  cs.ga.tournament = static_cast<std::size_t>(cs_file.integer("ga_tournament", static_cast<long long>(cs.ga.tournament)));
  cs.ga.crossover_rate = cs_file.number("ga_crossover", cs.ga.crossover_rate);
  cs.ga.mutation_scale = cs_file.number("ga_mutation", cs.ga.mutation_scale);
  cs.ga.seed = static_cast<std::uint64_t>(cs_file.integer("ga_seed", static_cast<long long>(cs.ga.seed)));
  cs.ga.threads = r.sim.threads;
  cs.lm.max_iterations = static_cast<int>(cs_file.integer("lm_max_iterations", cs.lm.max_iterations));
  cs.lm.initial_damping = cs_file.number("lm_initial_damping", cs.lm.initial_damping);
  cs.lm.gradient_tolerance = cs_file.number("lm_gradient_tolerance", cs.lm.gradient_tolerance);
  cs.lm.step_tolerance = cs_file.number("lm_step_tolerance", cs.lm.step_tolerance);
  cs.lm.relative_fd_step = cs_file.number("lm_fd_step", cs.lm.relative_fd_step);
  cs.lm.threads = r.sim.threads;

  Bounds bounds = default_bounds(r.spec);
  const std::size_t n_alpha = static_cast<std::size_t>(r.spec.factors() * (r.spec.polynomial_degree() + 1));
  if (cs_file.has("alpha_bound")) {
    const double a = cs_file.number("alpha_bound");
    detail::require<ConfigError>(a > 0.0, "alpha_bound must be positive");
    for (std::size_t i = 0; i < n_alpha; ++i) {
      bounds.lower[i] = -a;
      bounds.upper[i] = a;
    }
  }
  bounds.lower[n_alpha] = cs_file.number("beta_lower", bounds.lower[n_alpha]);
  bounds.upper[n_alpha] = cs_file.number("beta_upper", bounds.upper[n_alpha]);
  if (cs_file.has("c_scale")) {
    const double scale = cs_file.number("c_scale");
    detail::require<ConfigError>(scale > 0.0, "c_scale must be positive");
    for (std::size_t j = 0; j < r.spec.t.size(); ++j) bounds.upper[n_alpha + 1 + j] = scale / std::max(r.spec.t[j], 0.1);
  }
  bounds.validate();
  cs.bounds = bounds;

  const CalibrationProblem problem(target, r.spec, r.curve, obj);
  Sink sink(r.output);
  auto& out = sink.out();

  if (c.synthesize) {
    // the model's own quotes at the given parameters, on the market grid
    const auto synth = problem.synthesize(pack_params(r.spec));
    std::vector<MarketQuote> q = quotes;
    for (std::size_t i = 0; i < q.size(); ++i) q[i].value = synth.cells[i].market;
    write_market_csv(out, q);
    return 0;
  }

  std::vector<double> start = pack_params(r.spec);
  const std::string start_mode = cs_file.text("start", "random");
  if (start_mode == "random") {
    std::mt19937_64 rng(static_cast<std::uint64_t>(cs_file.integer("start_seed", 1)));
    std::uniform_real_distribution<double> unit(0.0, 1.0);
    for (std::size_t i = 0; i < start.size(); ++i) start[i] = bounds.lower[i] + unit(rng) * bounds.width(i);
  } else if (start_mode != "model") {
    throw ConfigError("calibration start must be 'random' or 'model'");
  }

  const auto result = calibrate(problem, start, cs);
  write_report_csv(out, result.report, r.timing);
  if (!c.params_out.empty()) {
    std::ofstream p(c.params_out);
    if (!p) throw ConfigError("cannot open parameter output " + c.params_out);
    write_vol_spec(p, result.spec);
  }
  return 0;
}

struct BudgetOptions {
  double epsilon = 1e-2;
  int order = 2;
  double c_disc = 1.0;
  double c_int = 1.0;
  std::string output;
};

int cmd_budget(const BudgetOptions& b) {
  const auto plan = plan_budget(b.epsilon, b.order, b.c_disc, b.c_int);
  Sink sink(b.output);
  sink.out() << "epsilon,order,c_disc,c_int,steps,paths\n"
             << fmt(b.epsilon) << ',' << b.order << ',' << fmt(b.c_disc) << ',' << fmt(b.c_int) << ',' << plan.steps
             << ',' << plan.paths << '\n';
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"HJM forward-curve simulation with splitting schemes and quasi-Monte Carlo.\n"
               "Set HJMSPLIT_DIRECTION_FILE to use a Joe-Kuo direction-number file instead of the built-in table."};
  app.require_subcommand(1);

  RunOptions sim_o, conv_o, price_o, mart_o, cal_o;
  ConvergeOptions conv;
  CalibrateOptions cal;
  BudgetOptions budget;
  bool negate_drift = false;

  auto* sim = app.add_subcommand("simulate", "Terminal state of every path (one row per path and chain)");
  add_run_options(sim, sim_o, true);

  auto* cv = app.add_subcommand("converge", "Weak-error ladder against a high-n reference");
  add_run_options(cv, conv_o, true);
  cv->add_option("--ladder", conv.ladder, "Step counts n of the ladder (default 4 8 16 32 64)")->delimiter(',');
  cv->add_option("--reference-steps", conv.reference_steps, "Steps of the reference run (default 256)");
  cv->add_option("--reference-scheme", conv.reference_scheme, "Scheme of the reference run (default swss)");
  cv->add_option("--schemes", conv.schemes, "Schemes on the ladder (default lt_fwd,lt_bwd,nv,swss)")->delimiter(',');
  cv->add_option("--fit-max", conv.fit_max, "Largest n used in the slope fit (default 32)");

  auto* pr = app.add_subcommand("price", "Price one payoff");
  add_run_options(pr, price_o, true);

  auto* mg = app.add_subcommand("martingale", "Discounted bond price against the initial discount factor");
  add_run_options(mg, mart_o, true);
  mg->add_flag("--negate-drift", negate_drift, "Flip the sign of the HJM drift (negative control)");

  auto* cb = app.add_subcommand("calibrate", "Fit the volatility parameters to a caplet surface");
  add_run_options(cb, cal_o, false);
  cb->add_option("--market", cal.market, "Market CSV (maturity_years,tenor_years,strike,quote_type,value)")
      ->check(CLI::ExistingFile);
  cb->add_option("--settings", cal.settings, "Calibration settings file (key = value)")->check(CLI::ExistingFile);
  cb->add_option("--params-out", cal.params_out, "Write the calibrated volatility specification here");
  cb->add_flag("--synthesize", cal.synthesize, "Write the model's own quotes on the market grid instead of fitting");

  auto* bg = app.add_subcommand("budget", "Steps and paths for a target error");
  bg->add_option("--eps", budget.epsilon, "Target total error (default 1e-2)");
  bg->add_option("--order", budget.order, "Weak order s of the scheme (default 2)");
  bg->add_option("--c-disc", budget.c_disc, "Discretization error constant (default 1)");
  bg->add_option("--c-int", budget.c_int, "Integration error constant (default 1)");
  bg->add_option("--output,-o", budget.output, "Output CSV path (default stdout)");

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForAllHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    std::cerr << "hjmsplit: " << e.what() << '\n';
    return 2;
  }

  try {
    if (*sim) return cmd_simulate(sim_o);
    if (*cv) return cmd_converge(conv_o, conv);
    if (*pr) return cmd_price(price_o);
    if (*mg) return cmd_martingale(mart_o, negate_drift);
    if (*cb) return cmd_calibrate(cal_o, cal);
    if (*bg) return cmd_budget(budget);
  } catch (const ConfigError& e) {
    std::cerr << "hjmsplit: configuration error: " << e.what() << '\n';
    return 2;
  } catch (const DomainError& e) {
    std::cerr << "hjmsplit: domain error: " << e.what() << '\n';
    return 1;
  } catch (const std::exception& e) {
    std::cerr << "hjmsplit: error: " << e.what() << '\n';
    return 1;
  }
  return 2;
}
