#include "mpq/types.hpp"

#include <cmath>

namespace mpq {

Duration from_seconds(double seconds) {
  return Duration(static_cast<std::int64_t>(std::llround(seconds * 1e9)));
}

std::string to_string(Design d) {
  return d == Design::kSingleSpace ? "spns" : "mpns";
}

Design parse_design(const std::string& s) {
  if (s == "spns") return Design::kSingleSpace;
  if (s == "mpns") return Design::kMultiSpace;
  throw ConfigError("unknown design '" + s + "' (expected spns|mpns)");
}

}  // namespace mpq
