#pragma once

// Domain types, the in-memory dataset, and the subject-disjoint evaluation
// protocol with deterministic pair enumeration.

#include <algorithm>
#include <array>
#include <cmath>
#include <compare>
#include <cstddef>
#include <cstdint>
#include <limits>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

#include "fusebench/error.hpp"
#include "fusebench/traits.hpp"

namespace fusebench {

struct SampleKey {
  std::string subject_id;
  std::string sample_id;

  friend auto operator<=>(const SampleKey&, const SampleKey&) = default;
  friend bool operator==(const SampleKey&, const SampleKey&) = default;
};

inline std::string to_string(const SampleKey& k) { return k.subject_id + "/" + k.sample_id; }

struct SampleKeyHash {
  std::size_t operator()(const SampleKey& k) const noexcept {
    std::size_t h = std::hash<std::string>{}(k.subject_id);
    return h ^ (std::hash<std::string>{}(k.sample_id) + 0x9e3779b97f4a7c15ULL + (h << 6) + (h >> 2));
  }
};

namespace detail {

template <class T>
double squared_norm(std::span<const T> v) {
  double s = 0.0;
  for (T x : v) s += static_cast<double>(x) * static_cast<double>(x);
  return s;
}

template <class T>
void check_embedding(std::span<const T> v, std::string_view what) {
  if (v.empty()) throw IngestError(std::string(what) + ": empty vector");
  for (T x : v) {
    if (!std::isfinite(static_cast<double>(x))) throw IngestError(std::string(what) + ": non-finite entry");
  }
  if (!(squared_norm(v) > 0.0)) throw IngestError(std::string(what) + ": zero-norm vector");
}

}  // namespace detail

// One embedding for one (subject, sample, trait). Build through make() so the
// finite / non-zero invariants are checked once at ingest.
struct FeatureRecord {
  SampleKey key;
  TraitKind trait = TraitKind::Face;
  std::vector<float> vector;

  static FeatureRecord make(SampleKey key, TraitKind trait, std::vector<float> v) {
    detail::check_embedding<float>(v, to_string(key));
    return FeatureRecord{std::move(key), trait, std::move(v)};
  }
};

inline constexpr std::size_t kIrisSubimages = 4;

// Iris template: four angular-strip embeddings plus the fraction of valid
// pixels in each strip.
struct IrisRecord {
  SampleKey key;
  std::array<std::vector<float>, kIrisSubimages> subvectors;
  std::array<double, kIrisSubimages> mask_ratios{};

  static IrisRecord make(SampleKey key, std::array<std::vector<float>, kIrisSubimages> subs,
                         std::array<double, kIrisSubimages> ratios) {
    const std::string where = to_string(key);
    for (std::size_t i = 0; i < kIrisSubimages; ++i) {
      detail::check_embedding<float>(subs[i], where + " subimage " + std::to_string(i));
      if (subs[i].size() != subs[0].size()) throw IngestError(where + ": iris subvector dimensions differ");
      if (!(ratios[i] >= 0.0 && ratios[i] <= 1.0)) throw IngestError(where + ": mask ratio outside [0,1]");
    }
    return IrisRecord{std::move(key), std::move(subs), ratios};
  }
};

// All records of one trait. Exactly one of `plain` / `iris` is populated,
// depending on whether the trait is Iris.
struct TraitFeatures {
  TraitKind trait = TraitKind::Face;
  std::size_t dim = 0;
  std::vector<FeatureRecord> plain;
  std::vector<IrisRecord> iris;

  std::size_t size() const { return trait == TraitKind::Iris ? iris.size() : plain.size(); }
  const SampleKey& key_at(std::size_t i) const {
    return trait == TraitKind::Iris ? iris[i].key : plain[i].key;
  }
};

// Per-trait feature collections plus the union of sample keys. A key present in
// the universe but absent from one trait is a flagged-missing sample for that
// trait; it is retained and scores as absent.
class Dataset {
 public:
  void add(TraitFeatures features) {
    const auto t = index_of(features.trait);
    if (traits_[t]) throw IngestError("duplicate feature set for trait " + std::string(trait_id(features.trait)));
    std::unordered_map<SampleKey, std::size_t, SampleKeyHash> index;
    for (std::size_t i = 0; i < features.size(); ++i) {
      const SampleKey& k = features.key_at(i);
      if (!index.emplace(k, i).second) {
        throw IngestError("duplicate sample " + to_string(k) + " in trait " + std::string(trait_id(features.trait)));
      }
    }
    check_dims(features);
    index_[t] = std::move(index);
    traits_[t] = std::move(features);
    rebuild_universe();
  }

  bool has_trait(TraitKind t) const { return traits_[index_of(t)].has_value(); }
  const TraitFeatures& trait(TraitKind t) const { return *traits_[index_of(t)]; }

  // Index of the record for `key` within trait `t`, or nullopt when flagged missing.
  std::optional<std::size_t> find(TraitKind t, const SampleKey& key) const {
    const auto& index = index_[index_of(t)];
    auto it = index.find(key);
    if (it == index.end()) return std::nullopt;
    return it->second;
  }

  bool contains(const SampleKey& key) const {
    return std::binary_search(universe_.begin(), universe_.end(), key);
  }

  // Sorted, duplicate-free union of keys over all loaded traits.
  const std::vector<SampleKey>& keys() const { return universe_; }

  // Keys lacking at least one loaded trait.
  std::vector<SampleKey> incomplete_keys() const {
    std::vector<SampleKey> out;
    for (const auto& k : universe_) {
      for (auto t : kAllTraits) {
        if (has_trait(t) && !find(t, k)) {
          out.push_back(k);
          break;
        }
      }
    }
    return out;
  }

 private:
  static void check_dims(const TraitFeatures& f) {
    const std::string name(trait_id(f.trait));
    if (f.dim == 0) throw IngestError(name + ": dimension must be >= 1");
    for (const auto& r : f.plain) {
      if (r.vector.size() != f.dim) throw IngestError(name + ": inconsistent dimension at " + to_string(r.key));
    }
    for (const auto& r : f.iris) {
      if (r.subvectors[0].size() != f.dim) throw IngestError(name + ": inconsistent dimension at " + to_string(r.key));
    }
  }

  void rebuild_universe() {
    std::vector<SampleKey> all;
    for (const auto& f : traits_) {
      if (!f) continue;
      for (std::size_t i = 0; i < f->size(); ++i) all.push_back(f->key_at(i));
    }
    std::sort(all.begin(), all.end());
    all.erase(std::unique(all.begin(), all.end()), all.end());
    universe_ = std::move(all);
  }

  std::array<std::optional<TraitFeatures>, kTraitCount> traits_;
  std::array<std::unordered_map<SampleKey, std::size_t, SampleKeyHash>, kTraitCount> index_;
  std::vector<SampleKey> universe_;
};

// ---------------------------------------------------------------------------
// Protocol

enum class Split : std::size_t { Train = 0, Val = 1, Test = 2 };

inline constexpr std::array<Split, 3> kAllSplits = {Split::Train, Split::Val, Split::Test};

constexpr std::string_view split_id(Split s) {
  constexpr std::array<std::string_view, 3> ids = {"train", "val", "test"};
  return ids[static_cast<std::size_t>(s)];
}

inline Split parse_split(std::string_view s) {
  for (auto sp : kAllSplits) {
    if (split_id(sp) == s) return sp;
  }
  throw ConfigError("unknown split '" + std::string(s) + "' (expected train, val or test)");
}

// Inclusive lexicographic interval of subject IDs, written "S4000..S4083".
struct SubjectRange {
  std::string first;
  std::string last;
  Split split = Split::Train;

  bool contains(std::string_view subject) const { return first <= subject && subject <= last; }

  static SubjectRange parse(std::string_view text, Split split) {
    const auto dots = text.find("..");
    SubjectRange r;
    r.split = split;
    if (dots == std::string_view::npos) {
      r.first = r.last = std::string(text);
    } else {
      r.first = std::string(text.substr(0, dots));
      r.last = std::string(text.substr(dots + 2));
    }
    if (r.first.empty() || r.last.empty() || r.last < r.first) {
      throw ConfigError("invalid subject range '" + std::string(text) + "'");
    }
    return r;
  }
};

inline void check_ranges_disjoint(std::span<const SubjectRange> ranges) {
  for (std::size_t i = 0; i < ranges.size(); ++i) {
    for (std::size_t j = i + 1; j < ranges.size(); ++j) {
      const auto& a = ranges[i];
      const auto& b = ranges[j];
      if (std::max(a.first, b.first) <= std::min(a.last, b.last)) {
        throw ConfigError("overlapping subject ranges " + a.first + ".." + a.last + " and " + b.first + ".." + b.last);
      }
    }
  }
}

using SplitAssignment = std::map<std::string, Split>;

// Assigns each subject to exactly one split. The result depends only on the set
// of subjects, not on the order of `keys`.
inline SplitAssignment split_by_subject(std::span<const SampleKey> keys, std::span<const SubjectRange> ranges) {
  check_ranges_disjoint(ranges);
  SplitAssignment out;
  for (const auto& k : keys) {
    if (out.contains(k.subject_id)) continue;
    const SubjectRange* hit = nullptr;
    for (const auto& r : ranges) {
      if (r.contains(k.subject_id)) {
        hit = &r;
        break;
      }
    }
    if (!hit) throw IngestError("subject " + k.subject_id + " is not covered by any split range");
    out.emplace(k.subject_id, hit->split);
  }
  return out;
}

struct SamplePair {
  std::uint32_t a = 0;  // index into PairList::keys, a < b
  std::uint32_t b = 0;
  bool genuine = false;

  friend bool operator==(const SamplePair&, const SamplePair&) = default;
};

// Canonical pair list of one split: keys sorted ascending, pairs (i, j) with
// i < j in lexicographic order, which is lexicographic order on (key_a, key_b).
struct PairList {
  std::vector<SampleKey> keys;
  std::vector<SamplePair> pairs;

  std::size_t genuine_count() const {
    return static_cast<std::size_t>(std::count_if(pairs.begin(), pairs.end(), [](const SamplePair& p) { return p.genuine; }));
  }
  std::size_t impostor_count() const { return pairs.size() - genuine_count(); }

  friend bool operator==(const PairList&, const PairList&) = default;
};

// All C(n, 2) unordered pairs over the distinct keys. Genuine iff both keys
// share a subject (sample IDs necessarily differ after de-duplication).
inline PairList enumerate_pairs(std::span<const SampleKey> samples) {
  PairList out;
  out.keys.assign(samples.begin(), samples.end());
  std::sort(out.keys.begin(), out.keys.end());
  out.keys.erase(std::unique(out.keys.begin(), out.keys.end()), out.keys.end());
  const std::size_t n = out.keys.size();
  if (n > std::numeric_limits<std::uint32_t>::max()) throw ProtocolError("too many samples in one split");
  out.pairs.reserve(n * (n - (n > 0 ? 1 : 0)) / 2);
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = i + 1; j < n; ++j) {
      out.pairs.push_back({static_cast<std::uint32_t>(i), static_cast<std::uint32_t>(j),
                           out.keys[i].subject_id == out.keys[j].subject_id});
    }
  }
  return out;
}

struct EvalProtocol {
  SplitAssignment assignment;
  std::array<PairList, 3> splits;

  const PairList& pairs(Split s) const { return splits[static_cast<std::size_t>(s)]; }

  std::size_t subject_count(Split s) const {
    return static_cast<std::size_t>(
        std::count_if(assignment.begin(), assignment.end(), [s](const auto& kv) { return kv.second == s; }));
  }
};

inline EvalProtocol make_protocol(std::span<const SampleKey> keys, std::span<const SubjectRange> ranges) {
  EvalProtocol p;
  p.assignment = split_by_subject(keys, ranges);
  std::array<std::vector<SampleKey>, 3> members;
  for (const auto& k : keys) members[static_cast<std::size_t>(p.assignment.at(k.subject_id))].push_back(k);
  for (std::size_t s = 0; s < 3; ++s) p.splits[s] = enumerate_pairs(members[s]);
  return p;
}

}  // namespace fusebench
