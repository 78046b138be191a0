// Acceptance run: one PASS/FAIL line per criterion, nonzero exit on any FAIL.

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <functional>
#include <random>
#include <sstream>
#include <string>
#include <vector>

#include "hjmsplit/hjmsplit.hpp"

using namespace hjmsplit;
namespace fs = std::filesystem;

namespace {

const std::string kCli = HJMSPLIT_CLI_PATH;
const std::string kDemo = HJMSPLIT_DEMO_DIR;

struct Outcome {
  bool pass = false;
  std::string detail;
};

double seconds_since(std::chrono::steady_clock::time_point t0) {
  return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
}

std::string fmt(const char* f, auto... args) {
  char buf[512];
  std::snprintf(buf, sizeof buf, f, args...);
  return buf;
}

VolSpec demo_model() { return read_vol_spec(kDemo + "/model.cfg"); }
const ForwardCurve& demo_curve() {
  static const ForwardCurve c = read_curve_csv(kDemo + "/initial_curve.csv");
  return c;
}

SimConfig config_for(double horizon, int steps_per_year, std::size_t paths, Scheme scheme = Scheme::Swss,
                     PointKind kind = PointKind::Sobol, std::uint64_t skip_or_seed = 1) {
  SimConfig c;
  c.horizon = horizon;
  c.steps_per_year = steps_per_year;
  c.scheme = SchemeId{scheme, 0};
  c.points = PointSpec{kind, paths, skip_or_seed};
  return c;
}

// Least-squares slope of log y against log x.
double loglog_slope(const std::vector<double>& x, const std::vector<double>& y) {
  const double m = static_cast<double>(x.size());
  double sx = 0, sy = 0, sxx = 0, sxy = 0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    const double lx = std::log(x[i]), ly = std::log(y[i]);
    sx += lx;
    sy += ly;
    sxx += lx * lx;
    sxy += lx * ly;
  }
  return (m * sxy - sx * sy) / (m * sxx - sx * sx);
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::ostringstream s;
  s << in.rdbuf();
  return s.str();
}

int run_cli(const std::string& args) {
  const int status = std::system((kCli + " " + args).c_str());
  return WIFEXITED(status) ? WEXITSTATUS(status) : -1;
}

// --- 1 and 2: weak order and Richardson --------------------------------------------

ConvergenceResult weak_order_study() {
  ConvergenceSettings s;
  s.ladder = {4, 8, 16, 32};
  s.reference_steps = 256;
  s.points = PointSpec{PointKind::Sobol, 1u << 14, 1};
  const Payoff smooth{PayoffKind::SmoothCosine, 1.0, 1.0};
  return convergence_study(demo_model(), demo_curve(), smooth, s);
}

Outcome weak_order(const ConvergenceResult& r, double seconds) {
  Outcome o{true, ""};
  for (Scheme s : {Scheme::LieTrotterForward, Scheme::LieTrotterBackward, Scheme::NinomiyaVictoir, Scheme::Swss}) {
    std::vector<int> n;
    std::vector<double> e;
    for (const auto& l : r.of(s)) {
      n.push_back(l.steps);
      e.push_back(l.error);
    }
    const double slope = fit_slope(n, e);
    const bool ok = weak_order(s) == 1 ? (slope >= 0.7 && slope <= 1.3) : slope >= 1.6;
    o.pass = o.pass && ok;
    o.detail += fmt("%s=%.3f ", std::string(to_string(s)).c_str(), slope);
  }
  o.pass = o.pass && seconds <= 300.0;
  o.detail += fmt("runtime=%.1fs", seconds);
  return o;
}

Outcome richardson_rows(const ConvergenceResult& r) {
  std::vector<int> n;
  std::vector<double> e;
  std::string rows;
  for (const auto& l : r.extrapolated) {
    n.push_back(l.steps);
    e.push_back(l.error);
    rows += fmt("n=%d:%.2e(noise %.1e) ", l.steps, std::abs(l.error), l.noise);
  }
  const double slope = fit_slope(n, e);
  const auto& finest = r.extrapolated.back();
  const bool below_floor = std::abs(finest.error) <= 2.0 * finest.noise;
  return {slope >= 3.0 || below_floor,
          fmt("slope=%.2f finest_below_noise_floor=%s ", slope, below_floor ? "yes" : "no") + rows};
}

// --- 3: martingale -----------------------------------------------------------------

Outcome martingale() {
  const VolSpec spec = demo_model();
  VolSpec zero = spec;
  for (auto& row : zero.alpha)
    for (double& a : row) a = 0.0;
  SimConfig c = config_for(1.0, 12, 2048);
  const ModelState init = initial_state(demo_curve(), c, spec, 0.25);
  const double gap = martingale_check(spec, c, init, 1.0, 0.25).rel_gap;
  const double zero_gap = martingale_check(zero, c, init, 1.0, 0.25).rel_gap;
  c.negate_hjm_drift = true;
  const double flipped = martingale_check(spec, c, init, 1.0, 0.25).rel_gap;
  const double ratio = flipped / gap;
  return {gap < 1e-3 && zero_gap < 1e-12 && ratio >= 10.0,
          fmt("rel_gap=%.3e zero_vol=%.3e flipped=%.3e ratio=%.2f", gap, zero_gap, flipped, ratio)};
}

// --- 4: swaption coarse vs reference -----------------------------------------------

Outcome swaption() {
  const VolSpec spec = demo_model();
  Payoff p{PayoffKind::PayerSwaption, 5.0, 0.25, 0.0, 12};
  auto run = [&](int steps_per_year, std::size_t paths, double* secs) {
    const SimConfig c = config_for(5.0, steps_per_year, paths);
    const auto t0 = std::chrono::steady_clock::now();
    const ModelState init = initial_state(demo_curve(), c, spec, p.reach());
    Payoff q = p;
    q.strike = forward_swap_rate(init.curve, 5.0, 0.25, 12);
    const double v = price(spec, c, init, q).value;
    if (secs) *secs = seconds_since(t0);
    return v;
  };
  double coarse_secs = 0.0;
  const double coarse = run(12, 2048, &coarse_secs);
  const double reference = run(120, 16384, nullptr);
  const double gap = std::abs(coarse - reference) / std::abs(reference);
  return {gap <= 1e-2 && coarse_secs <= 5.0,
          fmt("coarse=%.7f reference=%.7f rel_gap=%.2e coarse_runtime=%.2fs", coarse, reference, gap, coarse_secs)};
}

// --- 5: calibration round trip -----------------------------------------------------

Outcome calibration(const fs::path& work) {
  const fs::path report = work / "calibration_report.csv";
  const auto t0 = std::chrono::steady_clock::now();
  const int code = run_cli("calibrate --config " + kDemo + "/run.cfg --market " + kDemo +
                           "/caplet_surface.csv --settings " + kDemo + "/calibration.cfg -o " + report.string());
  const double secs = seconds_since(t0);
  if (code != 0) return {false, fmt("calibrate exited with %d", code)};
  const std::string text = slurp(report);
  const auto at = text.find("# rmse=");
  if (at == std::string::npos) return {false, "no summary line in report"};
  const double rmse = std::stod(text.substr(at + 7));
  const auto cells = static_cast<long>(std::count(text.begin(), text.end(), '\n')) - 2;
  std::string summary = text.substr(at + 2);
  if (!summary.empty() && summary.back() == '\n') summary.pop_back();
  return {rmse < 1e-3 && secs <= 900.0 && cells == 120,
          fmt("cells=%ld runtime=%.0fs ", cells, secs) + summary};
}

// --- 6: Stratonovich correction ----------------------------------------------------

Outcome stratonovich() {
  const VolSpec spec = demo_model();
  std::mt19937_64 rng(2024);
  std::uniform_real_distribution<double> u(-1.0, 1.0);
  double worst = 0.0;
  for (int trial = 0; trial < 100; ++trial) {
    const double a = 0.01 * u(rng), b = 0.01 * u(rng), k = 0.5 + std::abs(u(rng));
    const ModelState s{ForwardCurve::sample(1.0 / 48, 12.0,
                                            [&](double x) { return evaluate(demo_curve(), x) + a + b * std::sin(k * x); }),
                       0.5 * u(rng), 0.0};
    for (int j = 0; j < spec.factors(); ++j) {
      // directional derivative of sigma_j along (sigma_j, gamma_j) by central differences
      const auto dir = sigma(spec, j, s);
      const double eps = 1e-3, dv = spec.gamma[static_cast<std::size_t>(j)];
      auto moved = [&](double e) {
        ModelState m = s;
        for (std::size_t i = 0; i < dir.size(); ++i) m.curve[i] += e * dir[i];
        m.v += e * dv;
        return sigma(spec, j, m);
      };
      const auto plus = moved(eps), minus = moved(-eps);
      const double scalar = stratonovich_correction_scalar(spec, j, s);
      double num = 0.0, den = 0.0;
      for (std::size_t i = 0; i < dir.size(); ++i) {
        const double analytic = scalar * spec.lambda(j, s.curve.node(i));
        num = std::max(num, std::abs(analytic - (plus[i] - minus[i]) / (2.0 * eps)));
        den = std::max(den, std::abs(analytic));
      }
      worst = std::max(worst, num / den);
    }
  }
  return {worst < 1e-6, fmt("max_rel_err=%.2e over 100 states", worst)};
}

// --- 7: QMC vs MC error decay ------------------------------------------------------

Outcome qmc_vs_mc() {
  const VolSpec spec = demo_model();
  const Payoff zcb{PayoffKind::ZeroCouponBond, 1.0, 1.0};
  auto value = [&](std::size_t paths, PointKind kind, std::uint64_t seed) {
    const SimConfig c = config_for(1.0, 12, paths, Scheme::Swss, kind, seed);
    return price(spec, c, initial_state(demo_curve(), c, spec, zcb.reach()), zcb).value;
  };
  const double reference = value(1u << 18, PointKind::Sobol, 1);
  std::vector<double> k, sobol_err, mc_rmse;
  for (int m = 9; m <= 14; ++m) {
    const std::size_t paths = std::size_t{1} << m;
    k.push_back(static_cast<double>(paths));
    sobol_err.push_back(std::abs(value(paths, PointKind::Sobol, 1) - reference));
    double ss = 0.0;
    for (std::uint64_t seed = 1; seed <= 32; ++seed) {
      const double e = value(paths, PointKind::Pseudo, seed) - reference;
      ss += e * e;
    }
    mc_rmse.push_back(std::sqrt(ss / 32.0));
  }
  const double qs = loglog_slope(k, sobol_err), ms = loglog_slope(k, mc_rmse);
  return {qs <= -0.8 && ms >= -0.65 && ms <= -0.35, fmt("sobol_slope=%.3f pseudo_rmse_slope=%.3f", qs, ms)};
}

// --- 8: moment stability -----------------------------------------------------------

Outcome moments() {
  const VolSpec spec = demo_model();
  const WeightedNorm w{0, 0.1, 0.5};
  std::vector<double> means;
  std::string rows;
  double initial = 0.0;
  for (int n : {4, 8, 16, 32, 64}) {
    const SimConfig c = config_for(1.0, n, 4096);
    const ModelState init = initial_state(demo_curve(), c, spec, 1.0);
    initial = weighted_norm(init, w);
    PathSimulator sim(spec, c, init);
    const PointSet points(PointKind::Sobol, 4096, sim.dimension(), 1);
    std::vector<double> row(static_cast<std::size_t>(sim.dimension()));
    double total = 0.0;
    for (std::size_t p = 0; p < 4096; ++p) {
      points.point(p, row);
      for (const auto& ws : sim.simulate_path(row)) total += ws.weight * weighted_norm(ws.state, w);
    }
    means.push_back(total / 4096.0);
    rows += fmt("n=%d:%.6f ", n, means.back());
  }
  const double lo = *std::min_element(means.begin(), means.end()), hi = *std::max_element(means.begin(), means.end());
  const double variation = (hi - lo) / lo;
  return {std::isfinite(hi) && variation < 0.2,
          fmt("variation=%.2e initial=%.6f ", variation, initial) + rows};
}

// --- 9: determinism ----------------------------------------------------------------

Outcome determinism(const fs::path& work) {
  const std::string d = kDemo + "/";
  {
    std::ofstream market(work / "market.csv");
    std::ifstream full(d + "caplet_surface.csv");
    std::string line;
    for (int i = 0; i < 7 && std::getline(full, line); ++i) market << line << '\n';
    std::ofstream settings(work / "settings.cfg");
    settings << "paths = 256\nsteps_per_year = 4\nga_population = 4\nga_generations = 1\nlm_max_iterations = 1\n";
  }
  const std::vector<std::pair<std::string, std::string>> commands = {
      {"simulate", "simulate --config " + d + "run.cfg --paths 64"},
      {"converge", "converge --config " + d + "converge.cfg --paths 256 --ladder 2,4 --reference-steps 8"},
      {"price", "price --config " + d + "swaption.cfg"},
      {"martingale", "martingale --config " + d + "martingale.cfg"},
      {"calibrate", "calibrate --config " + d + "run.cfg --market " + (work / "market.csv").string() + " --settings " +
                        (work / "settings.cfg").string()},
      {"budget", "budget --eps 1e-3 --order 2"},
  };
  Outcome o{true, ""};
  for (const auto& [name, args] : commands) {
    std::vector<std::string> outputs;
    for (int threads : {1, 8, 1, 8}) {
      const fs::path out = work / fmt("%s_%zu.csv", name.c_str(), outputs.size());
      const std::string thread_flag = name == "budget" ? "" : fmt(" --threads %d", threads);
      if (run_cli(args + thread_flag + " -o " + out.string()) != 0) {
        outputs.push_back("<failed>");
        continue;
      }
      outputs.push_back(slurp(out));
    }
    bool same = outputs.front() != "<failed>" && !outputs.front().empty();
    for (const auto& s : outputs) same = same && s == outputs.front();
    o.pass = o.pass && same;
    o.detail += name + (same ? "=identical " : "=DIFFERENT ");
  }
  return o;
}

}  // namespace

int main() {
  const fs::path work = fs::temp_directory_path() / "hjmsplit_acceptance";
  fs::create_directories(work);
  bool all = true;
  auto report = [&](int id, const std::function<Outcome()>& check) {
    const auto t0 = std::chrono::steady_clock::now();
    Outcome o;
    try {
      o = check();
    } catch (const std::exception& e) {
      o = {false, std::string("exception: ") + e.what()};
    }
    all = all && o.pass;
    std::printf("criterion %d: %s %s [%.1fs]\n", id, o.pass ? "PASS" : "FAIL", o.detail.c_str(), seconds_since(t0));
    std::fflush(stdout);
  };

  ConvergenceResult study;
  double study_seconds = 0.0;
  report(1, [&] {
    const auto t0 = std::chrono::steady_clock::now();
    study = weak_order_study();
    study_seconds = seconds_since(t0);
    return weak_order(study, study_seconds);
  });
  report(2, [&] { return richardson_rows(study); });
  report(3, martingale);
  report(4, swaption);
  report(5, [&] { return calibration(work); });
  report(6, stratonovich);
  report(7, qmc_vs_mc);
  report(8, moments);
  report(9, [&] { return determinism(work); });
  return all ? 0 : 1;
}
