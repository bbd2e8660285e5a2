#pragma once

#include <cstdio>
#include <string>

namespace ufse::csv {

// Six significant digits, the precision of every CSV this project emits.
inline std::string format(double v) {
  char buf[32];
  std::snprintf(buf, sizeof(buf), "%.6g", v);
  return buf;
}

}  // namespace ufse::csv
