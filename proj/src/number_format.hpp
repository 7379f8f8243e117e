#pragma once

#include <cstdio>
#include <string>

namespace anisoflow::detail {

// 17 significant digits round-trip a double and keep text outputs byte-stable.
inline std::string format_double(double value) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.17g", value);
  return buf;
}

}  // namespace anisoflow::detail
