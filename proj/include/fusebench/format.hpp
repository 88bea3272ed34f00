#pragma once

#include <cmath>
#include <cstdio>
#include <string>

namespace fusebench {

// 9 significant digits, the precision of score and curve CSV files.
inline std::string format_sig9(double v) {
  if (v == 0.0) v = 0.0;  // drop the sign of -0
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.9g", v);
  return buf;
}

// Fraction rendered as a percentage with 3 decimals ("0.00337" -> "0.337").
inline std::string format_percent3(double fraction) {
  double pct = fraction * 100.0;
  if (pct == 0.0) pct = 0.0;
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.3f", pct);
  return buf;
}

inline std::string format_fixed(double v, int decimals) {
  if (v == 0.0) v = 0.0;
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.*f", decimals, v);
  return buf;
}

// FAR target as a JSON key: 0.001 -> "0.001", 0.0001 -> "0.0001".
inline std::string format_target(double target) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.10g", target);
  return buf;
}

// FAR target as a percentage label: 0.001 -> "0.1", 0.0001 -> "0.01".
inline std::string format_target_percent(double target) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.10g", target * 100.0);
  return buf;
}

}  // namespace fusebench
