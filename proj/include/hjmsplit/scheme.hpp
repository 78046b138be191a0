#pragma once

#include <string>
#include <string_view>

#include "hjmsplit/errors.hpp"

namespace hjmsplit {

enum class Scheme { EulerMaruyama, LieTrotterForward, LieTrotterBackward, NinomiyaVictoir, Swss };

inline std::string_view to_string(Scheme s) {
  switch (s) {
    case Scheme::EulerMaruyama: return "EULER_MARUYAMA";
    case Scheme::LieTrotterForward: return "LT_FWD";
    case Scheme::LieTrotterBackward: return "LT_BWD";
    case Scheme::NinomiyaVictoir: return "NV";
    case Scheme::Swss: return "SWSS";
  }
  return "?";
}

inline Scheme parse_scheme(std::string_view name) {
  if (name == "EULER_MARUYAMA" || name == "EM") return Scheme::EulerMaruyama;
  if (name == "LT_FWD") return Scheme::LieTrotterForward;
  if (name == "LT_BWD") return Scheme::LieTrotterBackward;
  if (name == "NV") return Scheme::NinomiyaVictoir;
  if (name == "SWSS") return Scheme::Swss;
  throw ConfigError("unknown scheme '" + std::string(name) + "'");
}

/// Formal weak order of the scheme without extrapolation.
inline int weak_order(Scheme s) {
  return (s == Scheme::NinomiyaVictoir || s == Scheme::Swss) ? 2 : 1;
}

/// Scheme choice plus the number of Richardson levels applied on top.
struct SchemeId {
  Scheme scheme = Scheme::Swss;
  int extrapolation_levels = 0;
};

}  // namespace hjmsplit
