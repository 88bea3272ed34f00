#pragma once

// Text and CSV result tables: one column per trait holding a weight (or "---"
// when the trait is not part of the combination), then EER and FRR at each
// FAR target, as percentages with three decimals. Fusion rows are grouped by
// combination size.

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <optional>
#include <span>
#include <sstream>
#include <string>
#include <vector>

#include "fusebench/format.hpp"
#include "fusebench/fusion.hpp"
#include "fusebench/metrics.hpp"
#include "fusebench/traits.hpp"

namespace fusebench {

inline constexpr std::string_view kExcludedMark = "---";

// Fewest decimals (up to 6) that print every multiple of `step` exactly.
inline int weight_decimals(double step) {
  const std::size_t k = simplex_divisions(step);
  for (int p = 1; p <= 6; ++p) {
    const double scale = std::pow(10.0, p);
    bool exact = true;
    for (std::size_t i = 0; i <= k && exact; ++i) {
      const double w = static_cast<double>(i) / static_cast<double>(k);
      exact = std::abs(std::round(w * scale) / scale - w) < 1e-12;
    }
    if (exact) return p;
  }
  return 6;
}

// Fewest decimals (up to 6) that print every given weight exactly.
inline int weight_decimals(std::span<const FusionWeights> weights) {
  for (int p = 1; p <= 6; ++p) {
    const double scale = std::pow(10.0, p);
    bool exact = true;
    for (const auto& w : weights) {
      for (double v : w.values()) exact = exact && std::abs(std::round(v * scale) / scale - v) < 1e-12;
    }
    if (exact) return p;
  }
  return 6;
}

struct SingleRow {
  TraitKind trait = TraitKind::Face;
  MetricsReport test;
};

struct FusionRow {
  TraitSet traits;
  FusionWeights weights;
  MetricsReport test;
};

struct ConcatRow {
  TraitSet traits;
  MetricsReport test;
};

namespace detail {

inline std::vector<std::string> metric_titles(std::span<const double> targets, bool csv) {
  std::vector<std::string> out;
  out.push_back(csv ? "eer_pct" : "EER [%]");
  for (double t : targets) {
    const auto pct = format_target_percent(t);
    out.push_back(csv ? "frr_at_far_" + pct + "_pct" : "FRR@FAR" + pct + "% [%]");
  }
  return out;
}

inline std::vector<std::string> metric_cells(const MetricsReport& r, std::span<const double> targets) {
  std::vector<std::string> out;
  out.push_back(format_percent3(r.eer));
  for (double t : targets) {
    const auto* op = r.at_target(t);
    out.push_back(op ? format_percent3(op->frr) : std::string(kExcludedMark));
  }
  return out;
}

inline std::string pad_left(const std::string& s, std::size_t w) {
  return s.size() >= w ? s : std::string(w - s.size(), ' ') + s;
}

inline std::string pad_right(const std::string& s, std::size_t w) {
  return s.size() >= w ? s : s + std::string(w - s.size(), ' ');
}

// Renders rows of cells; `split` is the column index where the trait block
// ends (a '|' separates it from the metrics), `groups` marks rows that start a
// new group.
inline std::string render_grid(const std::vector<std::string>& header, const std::vector<std::vector<std::string>>& rows,
                               std::size_t split, const std::vector<bool>& group_start, bool first_left) {
  std::vector<std::size_t> width(header.size());
  for (std::size_t c = 0; c < header.size(); ++c) {
    width[c] = header[c].size();
    for (const auto& r : rows) width[c] = std::max(width[c], r[c].size());
  }
  auto line = [&](const std::vector<std::string>& cells) {
    std::string s;
    for (std::size_t c = 0; c < cells.size(); ++c) {
      if (c > 0) s += (c == split) ? "  |  " : "  ";
      s += (c == 0 && first_left) ? pad_right(cells[c], width[c]) : pad_left(cells[c], width[c]);
    }
    while (!s.empty() && s.back() == ' ') s.pop_back();
    return s + "\n";
  };
  std::string rule;
  for (std::size_t c = 0; c < header.size(); ++c) {
    if (c > 0) rule += (c == split) ? "--+--" : "--";
    rule += std::string(width[c], '-');
  }
  rule += "\n";

  std::string out = line(header) + rule;
  for (std::size_t i = 0; i < rows.size(); ++i) {
    if (i > 0 && group_start[i]) out += rule;
    out += line(rows[i]);
  }
  return out + rule;
}

}  // namespace detail

inline std::string render_single_table(std::span<const SingleRow> rows, std::span<const double> targets) {
  std::vector<std::string> header{"Trait"};
  for (auto& t : detail::metric_titles(targets, false)) header.push_back(t);
  std::vector<std::vector<std::string>> cells;
  for (const auto& r : rows) {
    std::vector<std::string> c{std::string(trait_title(r.trait))};
    for (auto& m : detail::metric_cells(r.test, targets)) c.push_back(m);
    cells.push_back(std::move(c));
  }
  return detail::render_grid(header, cells, 1, std::vector<bool>(cells.size(), false), true);
}

inline std::string render_single_csv(std::span<const SingleRow> rows, std::span<const double> targets) {
  std::string out = "trait";
  for (auto& t : detail::metric_titles(targets, true)) out += "," + t;
  out += "\n";
  for (const auto& r : rows) {
    out += std::string(trait_id(r.trait));
    for (auto& m : detail::metric_cells(r.test, targets)) out += "," + m;
    out += "\n";
  }
  return out;
}

// Weight cells: "---" for traits outside the combination, else the weight.
inline std::vector<std::string> weight_cells(TraitSet traits, const FusionWeights& w, int decimals) {
  std::vector<std::string> out;
  for (auto t : kAllTraits) {
    out.push_back(traits.contains(t) ? format_fixed(w[t], decimals) : std::string(kExcludedMark));
  }
  return out;
}

inline std::vector<std::string> mark_cells(TraitSet traits) {
  std::vector<std::string> out;
  for (auto t : kAllTraits) out.push_back(traits.contains(t) ? "x" : std::string(kExcludedMark));
  return out;
}

// Rows are emitted in the order given; callers pass them grouped by size.
inline std::string render_fusion_table(std::span<const FusionRow> rows, std::span<const double> targets, int dec) {
  std::vector<std::string> header;
  for (auto t : kAllTraits) header.emplace_back(trait_title(t));
  for (auto& m : detail::metric_titles(targets, false)) header.push_back(m);
  std::vector<std::vector<std::string>> cells;
  std::vector<bool> groups;
  for (std::size_t i = 0; i < rows.size(); ++i) {
    auto c = weight_cells(rows[i].traits, rows[i].weights, dec);
    for (auto& m : detail::metric_cells(rows[i].test, targets)) c.push_back(m);
    cells.push_back(std::move(c));
    groups.push_back(i > 0 && rows[i].traits.size() != rows[i - 1].traits.size());
  }
  return detail::render_grid(header, cells, kTraitCount, groups, false);
}

inline std::string render_fusion_csv(std::span<const FusionRow> rows, std::span<const double> targets, int dec) {
  std::string out;
  for (auto t : kAllTraits) out += std::string(trait_id(t)) + ",";
  const auto titles = detail::metric_titles(targets, true);
  for (std::size_t i = 0; i < titles.size(); ++i) out += (i ? "," : "") + titles[i];
  out += "\n";
  for (const auto& r : rows) {
    for (auto& c : weight_cells(r.traits, r.weights, dec)) out += c + ",";
    const auto m = detail::metric_cells(r.test, targets);
    for (std::size_t i = 0; i < m.size(); ++i) out += (i ? "," : "") + m[i];
    out += "\n";
  }
  return out;
}

inline std::string render_concat_table(std::span<const ConcatRow> rows, std::span<const double> targets) {
  std::vector<std::string> header;
  for (auto t : kAllTraits) header.emplace_back(trait_title(t));
  for (auto& m : detail::metric_titles(targets, false)) header.push_back(m);
  std::vector<std::vector<std::string>> cells;
  std::vector<bool> groups;
  for (std::size_t i = 0; i < rows.size(); ++i) {
    auto c = mark_cells(rows[i].traits);
    for (auto& m : detail::metric_cells(rows[i].test, targets)) c.push_back(m);
    cells.push_back(std::move(c));
    groups.push_back(i > 0 && rows[i].traits.size() != rows[i - 1].traits.size());
  }
  return detail::render_grid(header, cells, kTraitCount, groups, false);
}

inline std::string render_concat_csv(std::span<const ConcatRow> rows, std::span<const double> targets) {
  std::string out;
  for (auto t : kAllTraits) out += std::string(trait_id(t)) + ",";
  const auto titles = detail::metric_titles(targets, true);
  for (std::size_t i = 0; i < titles.size(); ++i) out += (i ? "," : "") + titles[i];
  out += "\n";
  for (const auto& r : rows) {
    for (auto& c : mark_cells(r.traits)) out += c + ",";
    const auto m = detail::metric_cells(r.test, targets);
    for (std::size_t i = 0; i < m.size(); ++i) out += (i ? "," : "") + m[i];
    out += "\n";
  }
  return out;
}

// Full sweep listing: weight columns ("---" for inactive traits) then the
// validation metrics, one row per enumerated vector.
inline std::string render_sweep_csv(const SweepResult& s, std::span<const double> targets, int dec) {
  std::string out;
  for (auto t : kAllTraits) out += std::string(trait_id(t)) + ",";
  const auto titles = detail::metric_titles(targets, true);
  for (std::size_t i = 0; i < titles.size(); ++i) out += (i ? "," : "") + titles[i];
  out += "\n";
  for (const auto& e : s.entries) {
    for (auto& c : weight_cells(s.active, e.weights, dec)) out += c + ",";
    const auto m = detail::metric_cells(e.report, targets);
    for (std::size_t i = 0; i < m.size(); ++i) out += (i ? "," : "") + m[i];
    out += "\n";
  }
  return out;
}

}  // namespace fusebench
