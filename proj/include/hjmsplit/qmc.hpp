#pragma once

// Driving uniforms for the path simulator: Sobol' points (Joe-Kuo direction
// numbers, Gray-code order) or reproducible pseudo-random rows, the inverse
// normal map, and scheme-dependent dimension accounting.

#include <cmath>
#include <cstdint>
#include <cstdlib>
#include <fstream>
#include <memory>
#include <random>
#include <span>
#include <sstream>
#include <string>
#include <vector>

#include "hjmsplit/detail/joe_kuo_table.hpp"
#include "hjmsplit/errors.hpp"
#include "hjmsplit/scheme.hpp"

namespace hjmsplit {

/// Primitive polynomial data for one Sobol' dimension (Joe-Kuo layout).
struct DirectionEntry {
  unsigned degree = 0;
  std::uint32_t coefficients = 0;
  std::vector<std::uint32_t> initial;
};

/// 32-bit direction vectors for every supported dimension.
class DirectionTable {
 public:
  static constexpr int kBits = 32;

  /// Dimension 1 is the van der Corput sequence; entries describe 2, 3, ...
  explicit DirectionTable(const std::vector<DirectionEntry>& entries) {
    vectors_.reserve((entries.size() + 1) * kBits);
    for (int k = 1; k <= kBits; ++k) vectors_.push_back(std::uint32_t{1} << (kBits - k));
    for (const auto& e : entries) append(e);
  }

  static const DirectionTable& embedded() {
    static const DirectionTable table = [] {
      std::vector<DirectionEntry> entries;
      const std::span<const std::uint32_t> packed(detail::kJoeKuoPacked);
      std::size_t pos = 0;
      while (pos < packed.size()) {
        DirectionEntry e;
        e.degree = packed[pos++];
        e.coefficients = packed[pos++];
        e.initial.assign(packed.begin() + static_cast<std::ptrdiff_t>(pos),
                         packed.begin() + static_cast<std::ptrdiff_t>(pos + e.degree));
        pos += e.degree;
        entries.push_back(std::move(e));
      }
      return DirectionTable(entries);
    }();
    return table;
  }

  /// Parses the Joe-Kuo text format: a header line, then one line per
  /// dimension with d, s, a, m_1..m_s.
  static DirectionTable parse(std::istream& in) {
    std::string line;
    if (!std::getline(in, line)) throw ConfigError("direction file: empty");
    std::vector<DirectionEntry> entries;
    unsigned expected = 2;
    while (std::getline(in, line)) {
      if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
      std::istringstream fields(line);
      unsigned d = 0;
      DirectionEntry e;
      if (!(fields >> d >> e.degree >> e.coefficients))
        throw ConfigError("direction file: malformed line for dimension " + std::to_string(expected));
      if (d != expected) throw ConfigError("direction file: dimensions must be consecutive from 2");
      if (e.degree == 0 || e.degree >= kBits) throw ConfigError("direction file: bad degree");
      e.initial.resize(e.degree);
      for (auto& m : e.initial)
        if (!(fields >> m)) throw ConfigError("direction file: missing m_i for dimension " + std::to_string(d));
      entries.push_back(std::move(e));
      ++expected;
    }
    return DirectionTable(entries);
  }

  static DirectionTable load(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw ConfigError("cannot open direction file " + path);
    return parse(in);
  }

  int max_dimension() const { return static_cast<int>(vectors_.size() / kBits); }

  /// Direction vectors v_1..v_32 of dimension `dim` (0-based).
  std::span<const std::uint32_t> vectors(int dim) const {
    return std::span<const std::uint32_t>(vectors_).subspan(static_cast<std::size_t>(dim) * kBits, kBits);
  }

 private:
  void append(const DirectionEntry& e) {
    const unsigned s = e.degree;
    std::uint32_t v[kBits + 1] = {};
    for (unsigned k = 1; k <= s && k <= kBits; ++k) {
      const std::uint32_t m = e.initial[k - 1];
      if (m == 0 || (m & 1u) == 0 || m >= (std::uint64_t{1} << k))
        throw ConfigError("direction numbers: m_i must be odd and below 2^i");
      v[k] = m << (kBits - k);
    }
    for (unsigned k = s + 1; k <= kBits; ++k) {
      std::uint32_t value = v[k - s] ^ (v[k - s] >> s);
      for (unsigned i = 1; i < s; ++i)
        if ((e.coefficients >> (s - 1 - i)) & 1u) value ^= v[k - i];
      v[k] = value;
    }
    for (int k = 1; k <= kBits; ++k) vectors_.push_back(v[k]);
  }

  std::vector<std::uint32_t> vectors_;
};

enum class PointKind { Sobol, Pseudo };

/// K rows x D columns of uniforms in (0,1). Row k is Sobol' point skip+k
/// (Gray-code order) or an independent pseudo-random draw keyed by (seed, k).
class PointSet {
 public:
  PointSet(PointKind kind, std::size_t rows, int dimension, std::uint64_t skip_or_seed = 1,
           const DirectionTable* table = nullptr)
      : kind_(kind), rows_(rows), dim_(dimension), offset_(skip_or_seed),
        table_(table ? table : &DirectionTable::embedded()) {
    detail::require<ConfigError>(dim_ >= 1, "point set: dimension must be positive");
    if (kind_ == PointKind::Sobol) {
      detail::require<ConfigError>(dim_ <= table_->max_dimension(),
                                   "point set: dimension " + std::to_string(dim_) +
                                       " exceeds direction table (" + std::to_string(table_->max_dimension()) + ")");
      detail::require<ConfigError>(offset_ >= 1, "point set: skip must be at least 1 (index 0 is the origin)");
      detail::require<ConfigError>(offset_ + rows_ <= (std::uint64_t{1} << DirectionTable::kBits),
                                   "point set: index range exceeds 2^32");
    }
  }

  PointKind kind() const { return kind_; }
  std::size_t rows() const { return rows_; }
  int dimension() const { return dim_; }
  std::uint64_t skip_or_seed() const { return offset_; }

  /// Fills `out` (size D) with row `row`; pure in (kind, D, offset, row).
  void point(std::size_t row, std::span<double> out) const {
    if (out.size() != static_cast<std::size_t>(dim_)) throw ConfigError("point set: output size mismatch");
    if (kind_ == PointKind::Sobol) {
      const std::uint64_t index = offset_ + row;
      const std::uint64_t gray = index ^ (index >> 1);
      constexpr double scale = 1.0 / 4294967296.0;
      for (int j = 0; j < dim_; ++j) {
        const auto v = table_->vectors(j);
        std::uint32_t x = 0;
        std::uint64_t g = gray;
        for (int b = 0; g != 0; ++b, g >>= 1)
          if (g & 1u) x ^= v[static_cast<std::size_t>(b)];
        out[static_cast<std::size_t>(j)] = static_cast<double>(x) * scale;
      }
    } else {
      std::seed_seq seq{static_cast<std::uint32_t>(offset_), static_cast<std::uint32_t>(offset_ >> 32),
                        static_cast<std::uint32_t>(row), static_cast<std::uint32_t>(row >> 32)};
      std::mt19937_64 rng(seq);
      constexpr double scale = 1.0 / 9007199254740992.0;  // 2^-53
      for (auto& u : out) u = (static_cast<double>(rng() >> 11) + 0.5) * scale;
    }
  }

  /// Row-major K x D matrix.
  std::vector<double> generate() const {
    std::vector<double> m(rows_ * static_cast<std::size_t>(dim_));
    for (std::size_t r = 0; r < rows_; ++r)
      point(r, std::span<double>(m).subspan(r * static_cast<std::size_t>(dim_), static_cast<std::size_t>(dim_)));
    return m;
  }

 private:
  PointKind kind_;
  std::size_t rows_;
  int dim_;
  std::uint64_t offset_;
  const DirectionTable* table_;
};

/// Direction table from $HJMSPLIT_DIRECTION_FILE when set, else the embedded one.
inline const DirectionTable& default_direction_table() {
  static const std::unique_ptr<DirectionTable> override_table = []() -> std::unique_ptr<DirectionTable> {
    const char* path = std::getenv("HJMSPLIT_DIRECTION_FILE");
    if (path == nullptr || *path == '\0') return nullptr;
    return std::make_unique<DirectionTable>(DirectionTable::load(path));
  }();
  return override_table ? *override_table : DirectionTable::embedded();
}

/// Inverse standard normal CDF: Acklam's rational approximation followed by
/// one Halley step against erfc, accurate to a few ulps over (0,1).
inline double inverse_normal_cdf(double u) {
  if (!(u > 0.0 && u < 1.0)) throw DomainError("inverse normal cdf: argument must lie in (0,1)");
  static constexpr double a[] = {-3.969683028665376e+01, 2.209460984245205e+02, -2.759285104469687e+02,
                                 1.383577518672690e+02,  -3.066479806614716e+01, 2.506628277459239e+00};
  static constexpr double b[] = {-5.447609879822406e+01, 1.615858368580409e+02, -1.556989798598866e+02,
                                 6.680131188771972e+01,  -1.328068155288572e+01};
  static constexpr double c[] = {-7.784894002430293e-03, -3.223964580411365e-01, -2.400758277161838e+00,
                                 -2.549732539343734e+00, 4.374664141464968e+00,  2.938163982698783e+00};
  static constexpr double d[] = {7.784695709041462e-03, 3.224671290700398e-01, 2.445134137142996e+00,
                                 3.754408661907416e+00};
  constexpr double low = 0.02425;
  double x = 0.0;
  if (u < low) {
    const double q = std::sqrt(-2.0 * std::log(u));
    x = (((((c[0] * q + c[1]) * q + c[2]) * q + c[3]) * q + c[4]) * q + c[5]) /
        ((((d[0] * q + d[1]) * q + d[2]) * q + d[3]) * q + 1.0);
  } else if (u <= 1.0 - low) {
    const double q = u - 0.5;
    const double r = q * q;
    x = (((((a[0] * r + a[1]) * r + a[2]) * r + a[3]) * r + a[4]) * r + a[5]) * q /
        (((((b[0] * r + b[1]) * r + b[2]) * r + b[3]) * r + b[4]) * r + 1.0);
  } else {
    const double q = std::sqrt(-2.0 * std::log1p(-u));
    x = -(((((c[0] * q + c[1]) * q + c[2]) * q + c[3]) * q + c[4]) * q + c[5]) /
        ((((d[0] * q + d[1]) * q + d[2]) * q + d[3]) * q + 1.0);
  }
  // Halley refinement; the upper tail works on the complement to keep precision.
  constexpr double sqrt_2pi = 2.50662827463100050242;
  const double e = u <= 0.5 ? 0.5 * std::erfc(-x / std::sqrt(2.0)) - u
                            : (1.0 - u) - 0.5 * std::erfc(x / std::sqrt(2.0));
  const double t = e * sqrt_2pi * std::exp(0.5 * x * x);
  return x - t / (1.0 + 0.5 * x * t);
}

/// Brownian increments Phi^{-1}(u) * sqrt(dt), elementwise.
inline std::vector<double> to_gaussians(std::span<const double> uniforms, double dt) {
  detail::require<ConfigError>(dt >= 0.0, "to_gaussians: dt must be nonnegative");
  const double scale = std::sqrt(dt);
  std::vector<double> out(uniforms.size());
  for (std::size_t i = 0; i < uniforms.size(); ++i) out[i] = inverse_normal_cdf(uniforms[i]) * scale;
  return out;
}

/// Integration dimension consumed by one path of a scheme.
struct DimensionBudget {
  Scheme scheme = Scheme::Swss;
  int steps = 0;
  int factors = 0;
  bool randomized_swss = false;

  int per_step() const { return scheme == Scheme::NinomiyaVictoir ? factors + 1 : factors; }
  int extra() const { return (scheme == Scheme::Swss && randomized_swss) ? 1 : 0; }
  int total() const { return steps * per_step() + extra(); }
};

struct BudgetPlan {
  long long steps = 0;
  long long paths = 0;
};

/// Smallest (n, K) with c_disc / n^s <= eps/2 and c_int / K <= eps/2.
inline BudgetPlan plan_budget(double epsilon, int order, double c_disc, double c_int) {
  detail::require<DomainError>(epsilon > 0.0 && order >= 1 && c_disc > 0.0 && c_int > 0.0,
                               "plan_budget: epsilon, order and constants must be positive");
  auto ceil_tight = [](double x) {
    const double r = std::round(x);
    if (std::abs(x - r) <= 1e-12 * std::max(1.0, std::abs(x))) return static_cast<long long>(r);
    return static_cast<long long>(std::ceil(x));
  };
  BudgetPlan plan;
  plan.steps = std::max(1LL, ceil_tight(std::pow(2.0 * c_disc / epsilon, 1.0 / order)));
  plan.paths = std::max(1LL, ceil_tight(2.0 * c_int / epsilon));
  return plan;
}

}  // namespace hjmsplit
