#pragma once

// Per-trait match scores: cosine similarity, mask-weighted iris aggregation,
// and all-pairs score tables aligned to a protocol pair list.

#include <algorithm>
#include <array>
#include <cmath>
#include <cstddef>
#include <filesystem>
#include <fstream>
#include <memory>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "fusebench/core.hpp"
#include "fusebench/error.hpp"
#include "fusebench/feature_io.hpp"
#include "fusebench/format.hpp"
#include "fusebench/parallel.hpp"
#include "fusebench/traits.hpp"

namespace fusebench {

namespace detail {

// Pairwise (cascade) summation of x[i] * y[i] in double. The split points
// depend only on the length, so the result is reproducible bit for bit.
template <class T>
double pairwise_dot(const T* x, const T* y, std::size_t n) {
  constexpr std::size_t kBlock = 16;
  if (n <= kBlock) {
    double s = 0.0;
    for (std::size_t i = 0; i < n; ++i) s += static_cast<double>(x[i]) * static_cast<double>(y[i]);
    return s;
  }
  const std::size_t half = n / 2;
  return pairwise_dot(x, y, half) + pairwise_dot(x + half, y + half, n - half);
}

}  // namespace detail

inline constexpr double kScoreSlack = 1e-9;

// Cosine similarity in double precision, clamped to [-1, 1]. Symmetric in its
// arguments bit for bit.
template <class T>
double cosine(std::span<const T> u, std::span<const T> v) {
  if (u.size() != v.size()) {
    throw MatchError("cosine: dimension mismatch (" + std::to_string(u.size()) + " vs " + std::to_string(v.size()) + ")");
  }
  if (u.empty()) throw MatchError("cosine: empty vectors");
  const double uu = detail::pairwise_dot(u.data(), u.data(), u.size());
  const double vv = detail::pairwise_dot(v.data(), v.data(), v.size());
  if (!(uu > 0.0) || !(vv > 0.0)) throw MatchError("cosine: zero-norm vector");
  const double uv = detail::pairwise_dot(u.data(), v.data(), u.size());
  // sqrt(uu * vv) makes cosine(v, v) exactly 1; fall back when the product
  // leaves the normal range.
  const double prod = uu * vv;
  const double denom = std::isnormal(prod) ? std::sqrt(prod) : std::sqrt(uu) * std::sqrt(vv);
  const double c = uv / denom;
  if (!std::isfinite(c) || c < -1.0 - kScoreSlack || c > 1.0 + kScoreSlack) {
    throw MatchError("cosine: result out of range");
  }
  return std::clamp(c, -1.0, 1.0);
}

template <class T>
double cosine(const std::vector<T>& u, const std::vector<T>& v) {
  return cosine(std::span<const T>(u), std::span<const T>(v));
}

// Weight of subimage i when comparing two iris templates: product of both
// templates' mask ratios.
inline std::array<double, kIrisSubimages> iris_weights(const IrisRecord& a, const IrisRecord& b) {
  std::array<double, kIrisSubimages> w{};
  for (std::size_t i = 0; i < kIrisSubimages; ++i) w[i] = a.mask_ratios[i] * b.mask_ratios[i];
  return w;
}

// Mask-weighted mean of the four subimage cosines. Throws OccludedError when
// every weight is zero.
inline double iris_score(const IrisRecord& a, const IrisRecord& b) {
  const auto w = iris_weights(a, b);
  double num = 0.0;
  double den = 0.0;
  for (std::size_t i = 0; i < kIrisSubimages; ++i) {
    if (w[i] == 0.0) continue;
    num += w[i] * cosine(a.subvectors[i], b.subvectors[i]);
    den += w[i];
  }
  if (!(den > 0.0)) throw OccludedError("iris: fully occluded pair " + to_string(a.key) + " vs " + to_string(b.key));
  return std::clamp(num / den, -1.0, 1.0);
}

// Scores of one trait for every pair of a pair list, in pair-list order.
// nullopt marks an absent score (missing trait or fully occluded iris).
struct ScoreTable {
  TraitKind trait = TraitKind::Face;
  std::shared_ptr<const PairList> pairs;
  std::vector<std::optional<double>> scores;

  std::size_t size() const { return scores.size(); }
  std::size_t absent_count() const {
    return static_cast<std::size_t>(std::count(scores.begin(), scores.end(), std::nullopt));
  }
};

struct ScoreTableStats {
  std::size_t missing = 0;   // one side lacks the trait
  std::size_t occluded = 0;  // iris pairs with zero total mask weight
};

inline ScoreTable score_table(const Dataset& data, TraitKind trait, std::shared_ptr<const PairList> pairs,
                              unsigned threads = 1, ScoreTableStats* stats = nullptr) {
  ScoreTable table;
  table.trait = trait;
  table.pairs = pairs;
  const auto& keys = pairs->keys;

  // Resolve every key once. A key outside the dataset universe is an integrity
  // error; a key inside it but without this trait is flagged missing.
  constexpr std::size_t kMissing = static_cast<std::size_t>(-1);
  std::vector<std::size_t> slot(keys.size(), kMissing);
  for (std::size_t i = 0; i < keys.size(); ++i) {
    if (!data.contains(keys[i])) throw DataIntegrityError("sample " + to_string(keys[i]) + " is not in the dataset");
    if (data.has_trait(trait)) {
      if (auto idx = data.find(trait, keys[i])) slot[i] = *idx;
    }
  }

  const auto& pair_vec = pairs->pairs;
  table.scores.assign(pair_vec.size(), std::nullopt);
  std::vector<unsigned char> occluded(pair_vec.size(), 0);
  const TraitFeatures* features = data.has_trait(trait) ? &data.trait(trait) : nullptr;
  parallel_for(pair_vec.size(), threads, [&](std::size_t r) {
    const auto ia = slot[pair_vec[r].a];
    const auto ib = slot[pair_vec[r].b];
    if (ia == kMissing || ib == kMissing) return;
    if (trait == TraitKind::Iris) {
      try {
        table.scores[r] = iris_score(features->iris[ia], features->iris[ib]);
      } catch (const OccludedError&) {
        occluded[r] = 1;
      }
    } else {
      table.scores[r] = cosine(features->plain[ia].vector, features->plain[ib].vector);
    }
  });
  if (stats) {
    stats->occluded = static_cast<std::size_t>(std::count(occluded.begin(), occluded.end(), 1));
    stats->missing = table.absent_count() - stats->occluded;
  }
  return table;
}

// ---------------------------------------------------------------------------
// Score files: trait,subject_a,sample_a,subject_b,sample_b,genuine,score

inline constexpr std::string_view kScoreHeader = "trait,subject_a,sample_a,subject_b,sample_b,genuine,score";

inline void write_score_table(std::ostream& os, const ScoreTable& t) {
  os << kScoreHeader << '\n';
  const std::string trait(trait_id(t.trait));
  std::string line;
  for (std::size_t r = 0; r < t.scores.size(); ++r) {
    const auto& p = t.pairs->pairs[r];
    const auto& a = t.pairs->keys[p.a];
    const auto& b = t.pairs->keys[p.b];
    line.clear();
    line += trait;
    line += ',';
    line += a.subject_id;
    line += ',';
    line += a.sample_id;
    line += ',';
    line += b.subject_id;
    line += ',';
    line += b.sample_id;
    line += p.genuine ? ",1," : ",0,";
    if (t.scores[r]) line += format_sig9(*t.scores[r]);
    line += '\n';
    os << line;
  }
}

inline void write_score_table(const std::filesystem::path& path, const ScoreTable& t) {
  std::ofstream os(path, std::ios::binary | std::ios::trunc);
  if (!os) throw IngestError(path.string() + ": cannot open for writing");
  write_score_table(os, t);
  if (!os) throw IngestError(path.string() + ": write failed");
}

// Reads a score file. Row order must be canonical (strictly increasing
// (key_a, key_b) with key_a < key_b); the pair list is rebuilt from the rows.
// `expected` pins the trait when given.
inline ScoreTable read_score_table(std::istream& is, const std::string& source,
                                   std::optional<TraitKind> expected = std::nullopt) {
  auto fail = [&](std::size_t line_no, const std::string& why) {
    return IngestError(source + ":" + std::to_string(line_no) + ": " + why);
  };
  std::string line;
  if (!std::getline(is, line) || detail::strip_cr(line) != kScoreHeader) {
    throw fail(1, "bad or missing header (expected '" + std::string(kScoreHeader) + "')");
  }
  ScoreTable t;
  if (expected) t.trait = *expected;
  auto pairs = std::make_shared<PairList>();
  std::vector<std::pair<SampleKey, SampleKey>> rows;
  std::vector<bool> genuine;
  std::size_t line_no = 1;
  bool first = true;
  while (std::getline(is, line)) {
    ++line_no;
    const auto text = detail::strip_cr(line);
    if (text.empty()) continue;
    const auto f = detail::split_commas(text);
    if (f.size() != 7) throw fail(line_no, "expected 7 fields, found " + std::to_string(f.size()));
    const auto trait = try_parse_trait(f[0]);
    if (!trait) throw fail(line_no, "field 1 (trait): unknown trait '" + std::string(f[0]) + "'");
    if (first && !expected) t.trait = *trait;
    if (*trait != t.trait) throw fail(line_no, "field 1 (trait): mixed traits in one score file");
    first = false;
    for (int i = 1; i <= 4; ++i) {
      if (!detail::valid_id(f[i])) throw fail(line_no, "field " + std::to_string(i + 1) + ": invalid identifier");
    }
    SampleKey a{std::string(f[1]), std::string(f[2])};
    SampleKey b{std::string(f[3]), std::string(f[4])};
    if (!(a < b)) throw fail(line_no, "pair is not canonical (key_a must sort before key_b)");
    if (!rows.empty() && !(rows.back() < std::pair{a, b})) throw fail(line_no, "rows are not in canonical order");
    if (f[5] != "0" && f[5] != "1") throw fail(line_no, "field 6 (genuine): expected 0 or 1");
    const bool g = f[5] == "1";
    if (g != (a.subject_id == b.subject_id)) throw fail(line_no, "field 6 (genuine): flag disagrees with subject IDs");
    if (f[6].empty()) {
      t.scores.push_back(std::nullopt);
    } else {
      double s = 0.0;
      if (!detail::parse_decimal(f[6], s) || !std::isfinite(s) || s < -1.0 - kScoreSlack || s > 1.0 + kScoreSlack) {
        throw fail(line_no, "field 7 (score): invalid score '" + std::string(f[6]) + "'");
      }
      t.scores.push_back(std::clamp(s, -1.0, 1.0));
    }
    rows.emplace_back(std::move(a), std::move(b));
    genuine.push_back(g);
  }

  for (const auto& [a, b] : rows) {
    pairs->keys.push_back(a);
    pairs->keys.push_back(b);
  }
  std::sort(pairs->keys.begin(), pairs->keys.end());
  pairs->keys.erase(std::unique(pairs->keys.begin(), pairs->keys.end()), pairs->keys.end());
  auto index_of_key = [&](const SampleKey& k) {
    return static_cast<std::uint32_t>(std::lower_bound(pairs->keys.begin(), pairs->keys.end(), k) - pairs->keys.begin());
  };
  pairs->pairs.reserve(rows.size());
  for (std::size_t r = 0; r < rows.size(); ++r) {
    pairs->pairs.push_back({index_of_key(rows[r].first), index_of_key(rows[r].second), genuine[r]});
  }
  t.pairs = std::move(pairs);
  return t;
}

inline ScoreTable read_score_table(const std::filesystem::path& path, std::optional<TraitKind> expected = std::nullopt) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw IngestError(path.string() + ": cannot open score file");
  return read_score_table(is, path.string(), expected);
}

}  // namespace fusebench
