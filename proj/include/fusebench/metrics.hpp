#pragma once

// Verification error metrics. Decision rule everywhere: accept iff
// score >= threshold. Rates are exact integer counts divided once at the end.

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <filesystem>
#include <fstream>
#include <limits>
#include <optional>
#include <ostream>
#include <span>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "fusebench/error.hpp"
#include "fusebench/format.hpp"

namespace fusebench {

inline constexpr double kInf = std::numeric_limits<double>::infinity();

struct OperatingPoint {
  double threshold = 0.0;
  std::size_t false_accepts = 0;  // impostors with score >= threshold
  std::size_t false_rejects = 0;  // genuines with score < threshold
  double far = 0.0;
  double frr = 0.0;
};

// Operating points at -inf, every distinct observed score, and +inf, with
// strictly increasing thresholds.
struct RocCurve {
  std::vector<OperatingPoint> points;
  std::size_t genuine_n = 0;
  std::size_t impostor_n = 0;
};

inline RocCurve roc(std::span<const double> genuine, std::span<const double> impostor) {
  if (genuine.empty()) throw ProtocolError("roc: no genuine scores");
  if (impostor.empty()) throw ProtocolError("roc: no impostor scores");
  std::vector<double> g(genuine.begin(), genuine.end());
  std::vector<double> im(impostor.begin(), impostor.end());
  for (double s : g) {
    if (!std::isfinite(s)) throw ProtocolError("roc: non-finite genuine score");
  }
  for (double s : im) {
    if (!std::isfinite(s)) throw ProtocolError("roc: non-finite impostor score");
  }
  std::sort(g.begin(), g.end());
  std::sort(im.begin(), im.end());

  RocCurve c;
  c.genuine_n = g.size();
  c.impostor_n = im.size();
  const auto ng = static_cast<double>(c.genuine_n);
  const auto ni = static_cast<double>(c.impostor_n);
  auto push = [&](double t, std::size_t fa, std::size_t fr) {
    c.points.push_back({t, fa, fr, static_cast<double>(fa) / ni, static_cast<double>(fr) / ng});
  };

  push(-kInf, c.impostor_n, 0);
  // Merge walk over the two sorted lists. gi / ii count scores strictly below t.
  std::size_t gi = 0;
  std::size_t ii = 0;
  while (gi < g.size() || ii < im.size()) {
    const double t = std::min(gi < g.size() ? g[gi] : kInf, ii < im.size() ? im[ii] : kInf);
    push(t, c.impostor_n - ii, gi);
    while (gi < g.size() && g[gi] == t) ++gi;
    while (ii < im.size() && im[ii] == t) ++ii;
  }
  push(kInf, 0, c.genuine_n);
  return c;
}

struct EerResult {
  double eer = 0.0;
  double threshold = 0.0;
};

// First operating point where FAR = FRR exactly; otherwise linear interpolation
// of FAR - FRR between the two points that bracket its sign change. The
// threshold is interpolated the same way, or taken from the finite end when
// the upper point is the +inf sentinel.
inline EerResult eer(const RocCurve& c) {
  const auto& p = c.points;
  if (p.size() < 2) throw ProtocolError("eer: curve has no operating points");
  // sign(FAR - FRR) from counts: fa * ng vs fr * ni.
  auto sign = [&](const OperatingPoint& op) {
    const auto lhs = static_cast<unsigned __int128>(op.false_accepts) * c.genuine_n;
    const auto rhs = static_cast<unsigned __int128>(op.false_rejects) * c.impostor_n;
    return lhs > rhs ? 1 : (lhs < rhs ? -1 : 0);
  };
  for (std::size_t k = 0; k < p.size(); ++k) {
    const int s = sign(p[k]);
    if (s == 0) return {p[k].far, p[k].threshold};
    if (s < 0) {
      if (k == 0) break;
      const auto& lo = p[k - 1];
      const auto& hi = p[k];
      const double d_lo = lo.far - lo.frr;
      const double d_hi = hi.far - hi.frr;
      const double alpha = d_lo - d_hi > 0.0 ? d_lo / (d_lo - d_hi) : 0.0;
      const double value = lo.far + alpha * (hi.far - lo.far);
      const double t = std::isfinite(hi.threshold) ? lo.threshold + alpha * (hi.threshold - lo.threshold) : lo.threshold;
      return {value, t};
    }
  }
  throw ProtocolError("eer: curve has no FAR/FRR crossing");
}

struct FarOperatingPoint {
  double target = 0.0;
  double frr = 0.0;
  double far = 0.0;  // achieved, never above target
  double threshold = 0.0;
  std::size_t false_rejects = 0;
  std::size_t false_accepts = 0;
};

// Smallest operating threshold whose FAR does not exceed the target.
inline FarOperatingPoint frr_at_far(const RocCurve& c, double target) {
  if (!(target > 0.0 && target < 1.0)) throw ConfigError("frr_at_far: target must lie in (0, 1)");
  for (const auto& op : c.points) {
    if (op.far <= target) return {target, op.frr, op.far, op.threshold, op.false_rejects, op.false_accepts};
  }
  throw ProtocolError("frr_at_far: curve lacks the +inf sentinel");
}

struct MetricsReport {
  double eer = 0.0;
  double eer_threshold = 0.0;
  std::vector<FarOperatingPoint> frr_at_far;
  std::size_t genuine_n = 0;
  std::size_t impostor_n = 0;
  std::size_t excluded = 0;  // pairs dropped because a needed score was absent
  RocCurve curve;            // left empty when the caller does not keep curves

  const FarOperatingPoint* at_target(double target) const {
    for (const auto& op : frr_at_far) {
      if (op.target == target) return &op;
    }
    return nullptr;
  }
};

inline const std::vector<double> kDefaultFarTargets = {0.001, 0.0001};

inline MetricsReport evaluate(std::span<const double> genuine, std::span<const double> impostor,
                              std::span<const double> far_targets, bool keep_curve = true) {
  MetricsReport r;
  RocCurve c = roc(genuine, impostor);
  const auto e = eer(c);
  r.eer = e.eer;
  r.eer_threshold = e.threshold;
  for (double t : far_targets) r.frr_at_far.push_back(frr_at_far(c, t));
  r.genuine_n = c.genuine_n;
  r.impostor_n = c.impostor_n;
  if (keep_curve) r.curve = std::move(c);
  return r;
}

// ---------------------------------------------------------------------------
// Export

inline constexpr std::string_view kMetricsSchema = "fusebench/metrics/v1";

// Thresholds may be infinite; JSON carries them as the strings "inf"/"-inf".
inline nlohmann::ordered_json threshold_to_json(double t) {
  if (std::isinf(t)) return t > 0 ? "inf" : "-inf";
  return t;
}

inline double threshold_from_json(const nlohmann::json& j) {
  if (j.is_string()) {
    const auto s = j.get<std::string>();
    if (s == "inf") return kInf;
    if (s == "-inf") return -kInf;
    throw IngestError("bad threshold value '" + s + "'");
  }
  return j.get<double>();
}

inline nlohmann::ordered_json metrics_to_json(const MetricsReport& r) {
  nlohmann::ordered_json j;
  j["eer"] = r.eer;
  j["eer_threshold"] = threshold_to_json(r.eer_threshold);
  nlohmann::ordered_json far = nlohmann::ordered_json::object();
  for (const auto& op : r.frr_at_far) {
    nlohmann::ordered_json o;
    o["frr"] = op.frr;
    o["far"] = op.far;
    o["threshold"] = threshold_to_json(op.threshold);
    far[format_target(op.target)] = o;
  }
  j["frr_at_far"] = far;
  j["counts"] = {{"genuine", r.genuine_n}, {"impostor", r.impostor_n}, {"excluded", r.excluded}};
  return j;
}

inline MetricsReport metrics_from_json(const nlohmann::json& j) {
  MetricsReport r;
  r.eer = j.at("eer").get<double>();
  r.eer_threshold = threshold_from_json(j.at("eer_threshold"));
  for (const auto& [key, o] : j.at("frr_at_far").items()) {
    FarOperatingPoint op;
    op.target = std::stod(key);
    op.frr = o.at("frr").get<double>();
    op.far = o.at("far").get<double>();
    op.threshold = threshold_from_json(o.at("threshold"));
    r.frr_at_far.push_back(op);
  }
  std::sort(r.frr_at_far.begin(), r.frr_at_far.end(), [](const auto& a, const auto& b) { return a.target > b.target; });
  const auto& counts = j.at("counts");
  r.genuine_n = counts.at("genuine").get<std::size_t>();
  r.impostor_n = counts.at("impostor").get<std::size_t>();
  r.excluded = counts.at("excluded").get<std::size_t>();
  return r;
}

// DET/ROC points as CSV: threshold,far,frr.
inline void write_curve_csv(std::ostream& os, const RocCurve& c) {
  os << "threshold,far,frr\n";
  for (const auto& p : c.points) {
    os << format_sig9(p.threshold) << ',' << format_sig9(p.far) << ',' << format_sig9(p.frr) << '\n';
  }
}

}  // namespace fusebench
