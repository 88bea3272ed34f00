#pragma once

// Score-level fusion as a simplex-constrained weighted sum, exhaustive weight
// sweeps, and an untrained feature-concatenation baseline.

#include <algorithm>
#include <array>
#include <cmath>
#include <cstddef>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "fusebench/core.hpp"
#include "fusebench/error.hpp"
#include "fusebench/matching.hpp"
#include "fusebench/metrics.hpp"
#include "fusebench/parallel.hpp"
#include "fusebench/traits.hpp"

namespace fusebench {

inline constexpr double kWeightSumTolerance = 1e-9;

// Nonnegative per-trait weights summing to one, in canonical trait order.
class FusionWeights {
 public:
  FusionWeights() = default;

  static FusionWeights make(const std::array<double, kTraitCount>& lambda) {
    double sum = 0.0;
    for (double l : lambda) {
      if (!std::isfinite(l) || l < 0.0) throw ConfigError("fusion weights must be finite and nonnegative");
      sum += l;
    }
    if (std::abs(sum - 1.0) > kWeightSumTolerance) throw ConfigError("fusion weights must sum to 1");
    FusionWeights w;
    w.lambda_ = lambda;
    return w;
  }

  static FusionWeights one_hot(TraitKind t) {
    std::array<double, kTraitCount> l{};
    l[index_of(t)] = 1.0;
    return make(l);
  }

  double operator[](TraitKind t) const { return lambda_[index_of(t)]; }
  const std::array<double, kTraitCount>& values() const { return lambda_; }

  // Traits with strictly positive weight.
  TraitSet support() const {
    TraitSet s;
    for (auto t : kAllTraits) {
      if (lambda_[index_of(t)] > 0.0) s.insert(t);
    }
    return s;
  }

  friend bool operator==(const FusionWeights&, const FusionWeights&) = default;
  friend bool operator<(const FusionWeights& a, const FusionWeights& b) { return a.lambda_ < b.lambda_; }

 private:
  std::array<double, kTraitCount> lambda_{};
};

using TraitScores = std::array<std::optional<double>, kTraitCount>;

// Weighted sum over positively weighted traits, accumulated in canonical order.
// nullopt when any of those traits has no score; the caller tallies the pair
// as excluded.
inline std::optional<double> fuse(const TraitScores& scores, const FusionWeights& w) {
  double s = 0.0;
  for (auto t : kAllTraits) {
    const double l = w[t];
    if (l <= 0.0) continue;
    const auto& v = scores[index_of(t)];
    if (!v) return std::nullopt;
    s += l * *v;
  }
  return s;
}

// Per-trait tables over one pair list. Missing entries are traits without a table.
using ScoreTables = std::array<std::optional<ScoreTable>, kTraitCount>;

inline TraitSet available_traits(const ScoreTables& tables) {
  TraitSet s;
  for (auto t : kAllTraits) {
    if (tables[index_of(t)]) s.insert(t);
  }
  return s;
}

// Throws ProtocolError unless every present table lists the same pairs in the
// same order.
inline const PairList& check_aligned(const ScoreTables& tables) {
  const PairList* ref = nullptr;
  for (auto t : kAllTraits) {
    const auto& tab = tables[index_of(t)];
    if (!tab) continue;
    if (tab->trait != t) throw ProtocolError("score table for " + std::string(trait_id(t)) + " carries the wrong trait");
    if (!tab->pairs || tab->scores.size() != tab->pairs->pairs.size()) {
      throw ProtocolError("score table for " + std::string(trait_id(t)) + " is inconsistent with its pair list");
    }
    if (!ref) {
      ref = tab->pairs.get();
    } else if (ref != tab->pairs.get() && !(*ref == *tab->pairs)) {
      throw ProtocolError("score tables are misaligned: " + std::string(trait_id(t)) + " lists different pairs");
    }
  }
  if (!ref) throw ProtocolError("no score tables given");
  return *ref;
}

struct FusedScores {
  std::vector<double> genuine;
  std::vector<double> impostor;
  std::size_t excluded = 0;
};

inline FusedScores fuse_tables(const ScoreTables& tables, const FusionWeights& w) {
  const PairList& pairs = check_aligned(tables);
  if (!w.support().is_subset_of(available_traits(tables))) {
    throw ProtocolError("fusion weights are positive on a trait without a score table");
  }
  FusedScores out;
  TraitScores row;
  for (std::size_t r = 0; r < pairs.pairs.size(); ++r) {
    for (auto t : kAllTraits) {
      const auto& tab = tables[index_of(t)];
      row[index_of(t)] = tab ? tab->scores[r] : std::nullopt;
    }
    const auto s = fuse(row, w);
    if (!s) {
      ++out.excluded;
    } else if (pairs.pairs[r].genuine) {
      out.genuine.push_back(*s);
    } else {
      out.impostor.push_back(*s);
    }
  }
  return out;
}

inline MetricsReport evaluate_fused(const ScoreTables& tables, const FusionWeights& w,
                                    std::span<const double> far_targets, bool keep_curve = true) {
  const auto fused = fuse_tables(tables, w);
  auto r = evaluate(fused.genuine, fused.impostor, far_targets, keep_curve);
  r.excluded = fused.excluded;
  return r;
}

// ---------------------------------------------------------------------------
// Simplex enumeration

// Number of grid points per unit, k = 1/step. Throws unless 1/step is a
// positive integer (to within 1e-9).
inline std::size_t simplex_divisions(double step) {
  if (!(step > 0.0 && step <= 1.0)) throw ConfigError("sweep step must lie in (0, 1]");
  const double inv = 1.0 / step;
  const double k = std::round(inv);
  if (std::abs(k * step - 1.0) > 1e-9) throw ConfigError("1/step must be a positive integer, got step " + format_sig9(step));
  return static_cast<std::size_t>(k);
}

// Every weight vector with entries in {0, 1/k, ..., 1} over the active traits
// summing to one, in ascending lexicographic order of the canonical vector.
inline std::vector<FusionWeights> enumerate_simplex(double step, TraitSet active) {
  if (active.empty()) throw ConfigError("sweep needs at least one active trait");
  const std::size_t k = simplex_divisions(step);
  std::vector<std::size_t> slots;
  for (auto t : kAllTraits) {
    if (active.contains(t)) slots.push_back(index_of(t));
  }
  std::vector<FusionWeights> out;
  std::array<std::size_t, kTraitCount> counts{};
  auto recurse = [&](auto&& self, std::size_t pos, std::size_t remaining) -> void {
    if (pos + 1 == slots.size()) {
      counts[slots[pos]] = remaining;
      std::array<double, kTraitCount> l{};
      for (std::size_t i = 0; i < kTraitCount; ++i) l[i] = static_cast<double>(counts[i]) / static_cast<double>(k);
      out.push_back(FusionWeights::make(l));
      return;
    }
    for (std::size_t c = 0; c <= remaining; ++c) {
      counts[slots[pos]] = c;
      self(self, pos + 1, remaining - c);
    }
    counts[slots[pos]] = 0;
  };
  recurse(recurse, 0, k);
  return out;
}

// ---------------------------------------------------------------------------
// Sweep

enum class Criterion { Eer, FrrAtFar0_1, FrrAtFar0_01 };

inline std::string_view criterion_id(Criterion c) {
  switch (c) {
    case Criterion::Eer: return "eer";
    case Criterion::FrrAtFar0_1: return "frr_far_0.1";
    case Criterion::FrrAtFar0_01: return "frr_far_0.01";
  }
  return "eer";
}

inline Criterion parse_criterion(std::string_view s) {
  for (auto c : {Criterion::Eer, Criterion::FrrAtFar0_1, Criterion::FrrAtFar0_01}) {
    if (criterion_id(c) == s) return c;
  }
  throw ConfigError("unknown criterion '" + std::string(s) + "' (expected eer, frr_far_0.1 or frr_far_0.01)");
}

// FAR target a criterion needs, if any.
inline std::optional<double> criterion_target(Criterion c) {
  switch (c) {
    case Criterion::Eer: return std::nullopt;
    case Criterion::FrrAtFar0_1: return 0.001;
    case Criterion::FrrAtFar0_01: return 0.0001;
  }
  return std::nullopt;
}

inline double criterion_value(const MetricsReport& r, Criterion c) {
  const auto target = criterion_target(c);
  if (!target) return r.eer;
  const auto* op = r.at_target(*target);
  if (!op) throw ProtocolError("report lacks the FAR target needed by criterion " + std::string(criterion_id(c)));
  return op->frr;
}

struct SweepEntry {
  FusionWeights weights;
  MetricsReport report;  // validation metrics, curve not kept
};

struct SweepResult {
  std::vector<SweepEntry> entries;  // enumeration order
  std::size_t selected = 0;
  Criterion criterion = Criterion::Eer;
  double step = 0.1;
  TraitSet active;

  const FusionWeights& selected_weights() const { return entries.at(selected).weights; }

  // Best entry whose support lies within `subset`; ties go to the earliest
  // (lexicographically smallest) vector.
  std::optional<std::size_t> best_within(TraitSet subset) const {
    std::optional<std::size_t> best;
    double best_value = 0.0;
    for (std::size_t i = 0; i < entries.size(); ++i) {
      if (!entries[i].weights.support().is_subset_of(subset)) continue;
      const double v = criterion_value(entries[i].report, criterion);
      if (!best || v < best_value) {
        best = i;
        best_value = v;
      }
    }
    return best;
  }
};

// Far targets with the criterion's own target appended when missing.
inline std::vector<double> targets_for(std::span<const double> far_targets, Criterion c) {
  std::vector<double> out(far_targets.begin(), far_targets.end());
  if (auto t = criterion_target(c); t && std::find(out.begin(), out.end(), *t) == out.end()) out.push_back(*t);
  return out;
}

inline SweepResult evaluate_weight_list(const ScoreTables& tables, std::vector<FusionWeights> weights,
                                        Criterion criterion, std::span<const double> far_targets,
                                        unsigned threads = 1) {
  check_aligned(tables);
  SweepResult res;
  res.criterion = criterion;
  const auto targets = targets_for(far_targets, criterion);
  res.entries.resize(weights.size());
  parallel_for(weights.size(), threads, [&](std::size_t i) {
    res.entries[i].weights = weights[i];
    res.entries[i].report = evaluate_fused(tables, weights[i], targets, false);
  });
  TraitSet all;
  for (const auto& w : weights) all = TraitSet(all.bits() | w.support().bits());
  res.active = all;
  if (auto best = res.best_within(TraitSet::all())) res.selected = *best;
  return res;
}

// Evaluates every simplex vector over `active` on validation tables and
// selects the minimizer of the criterion.
inline SweepResult sweep(const ScoreTables& val_tables, double step, Criterion criterion, TraitSet active,
                         std::span<const double> far_targets, unsigned threads = 1) {
  if (!active.is_subset_of(available_traits(val_tables))) {
    throw ProtocolError("sweep: an active trait has no validation score table");
  }
  auto res = evaluate_weight_list(val_tables, enumerate_simplex(step, active), criterion, far_targets, threads);
  res.step = step;
  res.active = active;
  return res;
}

// Trait subsets of size >= 2 within `active`, grouped by size (pairs, triples,
// ...) and in lexicographic combination order inside each group.
inline std::vector<TraitSet> combination_subsets(TraitSet active) {
  std::vector<TraitKind> traits;
  for (auto t : kAllTraits) {
    if (active.contains(t)) traits.push_back(t);
  }
  std::vector<TraitSet> out;
  for (std::size_t size = 2; size <= traits.size(); ++size) {
    std::vector<std::size_t> idx(size);
    for (std::size_t i = 0; i < size; ++i) idx[i] = i;
    while (true) {
      TraitSet s;
      for (auto i : idx) s.insert(traits[i]);
      out.push_back(s);
      std::size_t p = size;
      while (p > 0 && idx[p - 1] == traits.size() - size + p - 1) --p;
      if (p == 0) break;
      ++idx[p - 1];
      for (std::size_t i = p; i < size; ++i) idx[i] = idx[i - 1] + 1;
    }
  }
  return out;
}

// ---------------------------------------------------------------------------
// Feature-level baseline: untrained concatenation

namespace detail {

template <class T>
void append_unit(std::vector<double>& out, std::span<const T> v) {
  double ss = 0.0;
  for (T x : v) ss += static_cast<double>(x) * static_cast<double>(x);
  if (!(ss > 0.0)) throw MatchError("concat: zero-norm trait vector");
  const double inv = 1.0 / std::sqrt(ss);
  for (T x : v) out.push_back(static_cast<double>(x) * inv);
}

inline void normalize_in_place(std::vector<double>& v) {
  double ss = 0.0;
  for (double x : v) ss += x * x;
  if (!(ss > 0.0)) throw MatchError("concat: zero-norm vector");
  const double inv = 1.0 / std::sqrt(ss);
  for (double& x : v) x *= inv;
}

}  // namespace detail

// Unit-normalizes each part, concatenates them in the given order, and
// unit-normalizes the result.
template <class T>
std::vector<double> concat_fuse(std::span<const std::vector<T>> parts) {
  std::vector<double> out;
  for (const auto& p : parts) detail::append_unit(out, std::span<const T>(p));
  detail::normalize_in_place(out);
  return out;
}

// The trait vector used for concatenation. Iris contributes its four
// subvectors, each unit-normalized, concatenated and normalized again.
inline std::vector<double> trait_vector(const Dataset& data, TraitKind t, std::size_t idx) {
  const auto& f = data.trait(t);
  if (t == TraitKind::Iris) {
    return concat_fuse<float>(std::span<const std::vector<float>>(f.iris[idx].subvectors));
  }
  std::vector<double> out;
  detail::append_unit(out, std::span<const float>(f.plain[idx].vector));
  return out;
}

// Concatenated feature for one sample over `traits`, nullopt when any of them
// is missing for that sample.
inline std::optional<std::vector<double>> concat_sample(const Dataset& data, const SampleKey& key, TraitSet traits) {
  std::vector<std::vector<double>> parts;
  for (auto t : kAllTraits) {
    if (!traits.contains(t)) continue;
    if (!data.has_trait(t)) return std::nullopt;
    const auto idx = data.find(t, key);
    if (!idx) return std::nullopt;
    parts.push_back(trait_vector(data, t, *idx));
  }
  if (parts.empty()) throw ConfigError("concat: no traits selected");
  return concat_fuse<double>(parts);
}

// Cosine scores of concatenated features over a pair list; pairs touching a
// sample without every selected trait are excluded and tallied.
inline FusedScores concat_scores(const Dataset& data, const PairList& pairs, TraitSet traits, unsigned threads = 1) {
  std::vector<std::optional<std::vector<double>>> vecs(pairs.keys.size());
  parallel_for(pairs.keys.size(), threads, [&](std::size_t i) { vecs[i] = concat_sample(data, pairs.keys[i], traits); });
  std::vector<std::optional<double>> scores(pairs.pairs.size());
  parallel_for(pairs.pairs.size(), threads, [&](std::size_t r) {
    const auto& a = vecs[pairs.pairs[r].a];
    const auto& b = vecs[pairs.pairs[r].b];
    if (a && b) scores[r] = cosine(*a, *b);
  });
  FusedScores out;
  for (std::size_t r = 0; r < scores.size(); ++r) {
    if (!scores[r]) {
      ++out.excluded;
    } else if (pairs.pairs[r].genuine) {
      out.genuine.push_back(*scores[r]);
    } else {
      out.impostor.push_back(*scores[r]);
    }
  }
  return out;
}

}  // namespace fusebench
