#pragma once

// Payoffs discounted with the clamped bank account exp(Phi(z)), expectation
// estimates over point sets, Black-76 implied volatilities and the
// martingale diagnostic.

#include <algorithm>
#include <cmath>
#include <fstream>
#include <limits>
#include <map>
#include <sstream>
#include <string>
#include <vector>

#include "hjmsplit/curve.hpp"
#include "hjmsplit/model.hpp"
#include "hjmsplit/parallel.hpp"
#include "hjmsplit/qmc.hpp"
#include "hjmsplit/splitting.hpp"

namespace hjmsplit {

enum class PayoffKind { ZeroCouponBond, Caplet, PayerSwaption, SmoothCosine };

inline std::string_view to_string(PayoffKind k) {
  switch (k) {
    case PayoffKind::ZeroCouponBond: return "zcb";
    case PayoffKind::Caplet: return "caplet";
    case PayoffKind::PayerSwaption: return "payer_swaption";
    case PayoffKind::SmoothCosine: return "smooth";
  }
  return "?";
}

inline PayoffKind parse_payoff_kind(std::string_view s) {
  if (s == "zcb") return PayoffKind::ZeroCouponBond;
  if (s == "caplet") return PayoffKind::Caplet;
  if (s == "payer_swaption" || s == "swaption") return PayoffKind::PayerSwaption;
  if (s == "smooth") return PayoffKind::SmoothCosine;
  throw ConfigError("unknown payoff kind '" + std::string(s) + "'");
}

/// Payoff observed at time `maturity`. `tenor` is the accrual period delta,
/// `count` the number of swap payments. SmoothCosine is the test functional
/// exp(-int_0^tenor h) cos(v), undiscounted.
struct Payoff {
  PayoffKind kind = PayoffKind::ZeroCouponBond;
  double maturity = 1.0;
  double tenor = 0.25;
  double strike = 0.0;
  int count = 1;
  double clamp = 1.0;

  void validate() const {
    detail::require<ConfigError>(maturity > 0.0 && tenor > 0.0 && count >= 1 && clamp > 0.0,
                                 "payoff: maturity, tenor, clamp must be positive and count >= 1");
  }
  /// Longest maturity of the terminal curve the payoff reads.
  double reach() const { return kind == PayoffKind::PayerSwaption ? tenor * count : tenor; }

  std::string describe() const {
    std::ostringstream s;
    s << to_string(kind) << " T=" << format_exact(maturity) << " delta=" << format_exact(tenor);
    if (kind == PayoffKind::Caplet || kind == PayoffKind::PayerSwaption) s << " K=" << format_exact(strike);
    if (kind == PayoffKind::PayerSwaption) s << " I=" << count;
    return s.str();
  }
};

struct Estimate {
  double value = 0.0;
  std::size_t paths = 0;
  SchemeId scheme;
  int steps = 0;
};

/// Smooth-enough lower clamp: identity on [-K, inf), bounded below by -2K,
/// continuous first derivative, nondecreasing.
inline double clamp_phi(double z, double clamp) {
  detail::require<DomainError>(clamp > 0.0, "clamp_phi: clamp level must be positive");
  if (z >= -clamp) return z;
  return -clamp - clamp * std::tanh((-z - clamp) / clamp);
}

/// L_delta(h) = (exp(int_0^delta h) - 1) / delta.
inline double libor_rate(const ForwardCurve& curve, double tenor) {
  return std::expm1(integrate(curve, 0.0, tenor)) / tenor;
}

inline double payoff_value(const Payoff& p, const ModelState& terminal) {
  const auto& h = terminal.curve;
  if (p.reach() > h.x_max() + 1e-12) throw DomainError("payoff: terminal curve too short for " + p.describe());
  if (p.kind == PayoffKind::SmoothCosine) return std::exp(-integrate(h, 0.0, p.tenor)) * std::cos(terminal.v);
  const double discount = std::exp(-clamp_phi(terminal.z, p.clamp));
  switch (p.kind) {
    case PayoffKind::ZeroCouponBond:
      return discount * std::exp(-integrate(h, 0.0, p.tenor));
    case PayoffKind::Caplet:
      return discount * std::max(libor_rate(h, p.tenor) - p.strike, 0.0);
    case PayoffKind::PayerSwaption: {
      double bracket = 0.0;
      double prev = 0.0;  // int_0^{(i-1) delta} h
      for (int i = 1; i <= p.count; ++i) {
        const double cum = prev + integrate(h, (i - 1) * p.tenor, i * p.tenor);
        bracket += std::exp(-cum) * (std::exp(cum - prev) - (1.0 + p.tenor * p.strike));
        prev = cum;
      }
      return discount * std::max(bracket, 0.0);
    }
    default:
      break;
  }
  return 0.0;
}

// --- curve analytics at t = 0 ------------------------------------------------

inline double discount_factor(const ForwardCurve& curve, double maturity) {
  return std::exp(-integrate(curve, 0.0, maturity));
}

/// Simple forward rate over [T, T + delta] implied by the curve.
inline double forward_libor(const ForwardCurve& curve, double maturity, double tenor) {
  return std::expm1(integrate(curve, maturity, maturity + tenor)) / tenor;
}

/// Par rate of the swap paying at T + i delta, i = 1..count.
inline double forward_swap_rate(const ForwardCurve& curve, double maturity, double tenor, int count) {
  double annuity = 0.0;
  for (int i = 1; i <= count; ++i) annuity += tenor * discount_factor(curve, maturity + i * tenor);
  return (discount_factor(curve, maturity) - discount_factor(curve, maturity + count * tenor)) / annuity;
}

// --- Monte Carlo / QMC estimation --------------------------------------------

/// Per-path discounted payoffs (rows: payoffs, columns: paths). SWSS rows
/// already hold the 1/2-1/2 average of both orderings of a path.
inline std::vector<std::vector<double>> path_values(const VolSpec& spec, const SimConfig& base,
                                                    const ModelState& initial, const std::vector<Payoff>& payoffs,
                                                    const DirectionTable& table = default_direction_table()) {
  detail::require<ConfigError>(!payoffs.empty(), "pricing: no payoffs");
  SimConfig config = base;
  config.horizon = 0.0;
  for (const auto& p : payoffs) {
    p.validate();
    config.horizon = std::max(config.horizon, p.maturity);
  }
  const PathSimulator sim(spec, config, initial);
  // observation step of each payoff
  std::vector<int> obs(payoffs.size());
  for (std::size_t i = 0; i < payoffs.size(); ++i) {
    SimConfig c = config;
    c.horizon = payoffs[i].maturity;
    obs[i] = c.steps();
  }
  std::vector<int> steps_sorted(obs);
  std::sort(steps_sorted.begin(), steps_sorted.end());
  steps_sorted.erase(std::unique(steps_sorted.begin(), steps_sorted.end()), steps_sorted.end());
  std::multimap<int, std::size_t> by_step;
  for (std::size_t i = 0; i < obs.size(); ++i) by_step.emplace(obs[i], i);

  const PointSet points(config.points.kind, config.points.paths, sim.dimension(), config.points.skip_or_seed, &table);
  std::vector<std::vector<double>> values(payoffs.size(), std::vector<double>(config.points.paths, 0.0));
  parallel_for(config.points.paths, config.threads, [&](std::size_t begin, std::size_t end) {
    std::vector<double> row(static_cast<std::size_t>(sim.dimension()));
    for (std::size_t path = begin; path < end; ++path) {
      points.point(path, row);
      sim.run(row, steps_sorted, [&](int step_index, const ModelState& s, double weight) {
        auto [lo, hi] = by_step.equal_range(step_index);
        for (auto it = lo; it != hi; ++it) values[it->second][path] += weight * payoff_value(payoffs[it->second], s);
      });
    }
  });
  return values;
}

inline std::vector<Estimate> price_many(const VolSpec& spec, const SimConfig& config, const ModelState& initial,
                                        const std::vector<Payoff>& payoffs,
                                        const DirectionTable& table = default_direction_table()) {
  const auto values = path_values(spec, config, initial, payoffs, table);
  std::vector<Estimate> out;
  out.reserve(payoffs.size());
  for (std::size_t i = 0; i < payoffs.size(); ++i) {
    SimConfig c = config;
    c.horizon = payoffs[i].maturity;
    const double mean = pairwise_sum(values[i]) / static_cast<double>(values[i].size());
    out.push_back(Estimate{mean, values[i].size(), config.scheme, c.steps()});
  }
  return out;
}

inline Estimate price(const VolSpec& spec, const SimConfig& config, const ModelState& initial, const Payoff& payoff,
                      const DirectionTable& table = default_direction_table()) {
  return price_many(spec, config, initial, {payoff}, table).front();
}

/// Applies `levels` Richardson steps (order 2 each, gaining two orders per
/// level) over estimates at n, 2n, 4n, ...
inline double richardson(std::vector<double> ladder, int levels, int base_order = 2) {
  detail::require<ConfigError>(levels >= 0 && static_cast<std::size_t>(levels) < ladder.size() + 1,
                               "richardson: not enough estimates");
  int order = base_order;
  for (int l = 0; l < levels; ++l) {
    for (std::size_t i = 0; i + 1 < ladder.size(); ++i) ladder[i] = extrapolate(ladder[i], ladder[i + 1], order);
    ladder.pop_back();
    order += 2;
  }
  return ladder.back();
}

struct MartingaleCheck {
  double lhs = 0.0;
  double rhs = 0.0;
  double rel_gap = 0.0;
};

/// Compares the simulated discounted bond E[exp(-Phi(z_T)) P(T, T+delta)]
/// with the initial discount factor P(0, T+delta).
inline MartingaleCheck martingale_check(const VolSpec& spec, const SimConfig& config, const ModelState& initial,
                                        double maturity, double tenor,
                                        const DirectionTable& table = default_direction_table()) {
  Payoff bond{PayoffKind::ZeroCouponBond, maturity, tenor};
  MartingaleCheck out;
  out.lhs = price(spec, config, initial, bond, table).value;
  out.rhs = discount_factor(initial.curve, maturity + tenor);
  out.rel_gap = std::abs(out.lhs - out.rhs) / out.rhs;
  return out;
}

// --- Black-76 ------------------------------------------------------------------

inline double normal_cdf(double x) { return 0.5 * std::erfc(-x / std::sqrt(2.0)); }

/// annuity * (F N(d1) - K N(d2)).
inline double black76_call(double forward, double strike, double vol, double expiry, double annuity) {
  const double intrinsic = std::max(forward - strike, 0.0);
  if (vol <= 0.0 || expiry <= 0.0) return annuity * intrinsic;
  if (strike <= 0.0) return annuity * (forward - strike);
  const double sd = vol * std::sqrt(expiry);
  const double d1 = (std::log(forward / strike) + 0.5 * sd * sd) / sd;
  return annuity * (forward * normal_cdf(d1) - strike * normal_cdf(d1 - sd));
}

/// Unique Black-76 volatility reproducing `price`; DomainError outside the
/// open no-arbitrage band (intrinsic, annuity * F) except at intrinsic, which
/// maps to zero.
inline double black_implied_vol(double price, double forward, double strike, double expiry, double annuity) {
  detail::require<DomainError>(forward > 0.0 && strike > 0.0 && expiry > 0.0 && annuity > 0.0,
                               "implied vol: forward, strike, expiry and annuity must be positive");
  const double lower = annuity * std::max(forward - strike, 0.0);
  const double upper = annuity * forward;
  const double tol = 1e-14 * upper;
  if (!(price >= lower - tol && price < upper))
    throw DomainError("implied vol: price " + format_exact(price) + " outside no-arbitrage bounds [" +
                      format_exact(lower) + ", " + format_exact(upper) + ")");
  if (price <= lower + tol) return 0.0;
  double lo = 0.0, hi = 1.0;
  while (black76_call(forward, strike, hi, expiry, annuity) < price) {
    hi *= 2.0;
    if (hi > 1e6) throw DomainError("implied vol: no bracket found");
  }
  double vol = 0.5 * (lo + hi);
  for (int iter = 0; iter < 200; ++iter) {
    const double diff = black76_call(forward, strike, vol, expiry, annuity) - price;
    if (std::abs(diff) <= 1e-15 * std::max(upper, 1e-300)) break;
    if (diff > 0.0)
      hi = vol;
    else
      lo = vol;
    const double sd = vol * std::sqrt(expiry);
    const double d1 = (std::log(forward / strike) + 0.5 * sd * sd) / sd;
    const double vega = annuity * forward * std::exp(-0.5 * d1 * d1) / std::sqrt(2.0 * M_PI) * std::sqrt(expiry);
    double next = vega > 0.0 ? vol - diff / vega : 0.5 * (lo + hi);
    if (!(next > lo && next < hi)) next = 0.5 * (lo + hi);
    if (hi - lo < 1e-16 * hi) break;
    vol = next;
  }
  return vol;
}

/// Caplet quote conventions used to map model prices to volatilities: the
/// payoff settles at its maturity, so the annuity is P(0, T) and the forward is
/// the simple rate over [T, T + delta] of the initial curve.
struct CapletQuoteConvention {
  double forward = 0.0;
  double annuity = 0.0;
};

inline CapletQuoteConvention caplet_convention(const ForwardCurve& initial, double maturity, double tenor) {
  return {forward_libor(initial, maturity, tenor), discount_factor(initial, maturity)};
}

// --- market surface file --------------------------------------------------------

struct MarketQuote {
  double maturity = 0.0;
  double tenor = 0.0;
  double strike = 0.0;
  bool is_vol = true;
  double value = 0.0;
};

inline std::vector<MarketQuote> read_market_csv(std::istream& in, const std::string& origin = "market csv") {
  std::string line;
  if (!std::getline(in, line)) throw ConfigError(origin + ": missing header");
  std::vector<MarketQuote> out;
  int line_no = 1;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    std::stringstream fields(line);
    std::string cell;
    std::vector<std::string> cells;
    while (std::getline(fields, cell, ',')) {
      cell.erase(0, cell.find_first_not_of(" \t\r"));
      cell.erase(cell.find_last_not_of(" \t\r") + 1);
      cells.push_back(cell);
    }
    if (cells.size() != 5) throw ConfigError(origin + ":" + std::to_string(line_no) + ": expected 5 columns");
    MarketQuote q;
    try {
      q.maturity = std::stod(cells[0]);
      q.tenor = std::stod(cells[1]);
      q.strike = std::stod(cells[2]);
      q.value = std::stod(cells[4]);
    } catch (const std::exception&) {
      throw ConfigError(origin + ":" + std::to_string(line_no) + ": non-numeric field");
    }
    if (cells[3] == "vol")
      q.is_vol = true;
    else if (cells[3] == "price")
      q.is_vol = false;
    else
      throw ConfigError(origin + ":" + std::to_string(line_no) + ": quote_type must be vol or price");
    out.push_back(q);
  }
  if (out.empty()) throw ConfigError(origin + ": no quotes");
  return out;
}

inline std::vector<MarketQuote> read_market_csv(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open market file " + path);
  return read_market_csv(in, path);
}

inline void write_market_csv(std::ostream& out, const std::vector<MarketQuote>& quotes) {
  out << "maturity_years,tenor_years,strike,quote_type,value\n";
  for (const auto& q : quotes)
    out << format_exact(q.maturity) << ',' << format_exact(q.tenor) << ',' << format_exact(q.strike) << ','
        << (q.is_vol ? "vol" : "price") << ',' << format_exact(q.value) << '\n';
}

}  // namespace hjmsplit
