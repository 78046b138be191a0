#pragma once

#include <stdexcept>
#include <string>

namespace hjmsplit {

/// Input outside the mathematical domain of an operation (bad maturity,
/// price outside no-arbitrage bounds, coordinate on the unit-cube boundary).
class DomainError : public std::domain_error {
 public:
  explicit DomainError(const std::string& what) : std::domain_error(what) {}
};

/// Inconsistent configuration: misaligned meshes, dimension mismatches,
/// malformed parameter files.
class ConfigError : public std::invalid_argument {
 public:
  explicit ConfigError(const std::string& what) : std::invalid_argument(what) {}
};

namespace detail {

template <class Error>
inline void require(bool condition, const std::string& message) {
  if (!condition) throw Error(message);
}

}  // namespace detail

}  // namespace hjmsplit
