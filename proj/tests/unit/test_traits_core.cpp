#include <gtest/gtest.h>

#include <algorithm>
#include <random>

#include "fusebench/core.hpp"
#include "fusebench/parallel.hpp"
#include "fusebench/traits.hpp"
#include "support/oracles.hpp"

using namespace fusebench;

TEST(Traits, CanonicalOrderAndIds) {
  ASSERT_EQ(kAllTraits.size(), 5u);
  EXPECT_EQ(trait_id(kAllTraits[0]), "face");
  EXPECT_EQ(trait_id(kAllTraits[1]), "periocular");
  EXPECT_EQ(trait_id(kAllTraits[2]), "iris");
  EXPECT_EQ(trait_id(kAllTraits[3]), "nose");
  EXPECT_EQ(trait_id(kAllTraits[4]), "eyebrow");
  for (auto t : kAllTraits) EXPECT_EQ(parse_trait(trait_id(t)), t);
  EXPECT_THROW(parse_trait("ear"), ConfigError);
}

TEST(Traits, TraitSetOps) {
  TraitSet s;
  EXPECT_TRUE(s.empty());
  s.insert(TraitKind::Iris);
  s.insert(TraitKind::Nose);
  EXPECT_EQ(s.size(), 2u);
  EXPECT_TRUE(s.contains(TraitKind::Iris));
  EXPECT_FALSE(s.contains(TraitKind::Face));
  EXPECT_TRUE(s.is_subset_of(TraitSet::all()));
  EXPECT_FALSE(TraitSet::all().is_subset_of(s));
  s.erase(TraitKind::Iris);
  EXPECT_EQ(s.size(), 1u);
}

TEST(Records, RejectBadEmbeddings) {
  SampleKey k{"S1", "01"};
  EXPECT_THROW(FeatureRecord::make(k, TraitKind::Face, {}), IngestError);
  EXPECT_THROW(FeatureRecord::make(k, TraitKind::Face, {0.0f, 0.0f}), IngestError);
  EXPECT_THROW(FeatureRecord::make(k, TraitKind::Face, {1.0f, std::nanf("")}), IngestError);
  EXPECT_NO_THROW(FeatureRecord::make(k, TraitKind::Face, {1.0f, 0.0f}));
}

TEST(Records, IrisRatiosInUnitInterval) {
  SampleKey k{"S1", "01"};
  std::array<std::vector<float>, 4> subs{std::vector<float>{1, 0}, {0, 1}, {1, 1}, {1, -1}};
  EXPECT_NO_THROW(IrisRecord::make(k, subs, {0, 0.5, 1, 1}));
  EXPECT_THROW(IrisRecord::make(k, subs, {0, 0.5, 1.1, 1}), IngestError);
  EXPECT_THROW(IrisRecord::make(k, subs, {-0.1, 0.5, 1, 1}), IngestError);
  auto bad = subs;
  bad[2] = {1, 1, 1};
  EXPECT_THROW(IrisRecord::make(k, bad, {1, 1, 1, 1}), IngestError);
}

TEST(Dataset, FlagsMissingTraitsAndRejectsDuplicates) {
  TraitFeatures face{TraitKind::Face, 2, {}, {}};
  face.plain.push_back(FeatureRecord::make({"S1", "01"}, TraitKind::Face, {1, 0}));
  face.plain.push_back(FeatureRecord::make({"S1", "02"}, TraitKind::Face, {0, 1}));
  TraitFeatures nose{TraitKind::Nose, 2, {}, {}};
  nose.plain.push_back(FeatureRecord::make({"S1", "01"}, TraitKind::Nose, {1, 0}));
  Dataset d;
  d.add(face);
  d.add(nose);
  EXPECT_EQ(d.keys().size(), 2u);
  EXPECT_FALSE(d.find(TraitKind::Nose, {"S1", "02"}).has_value());
  ASSERT_EQ(d.incomplete_keys().size(), 1u);
  EXPECT_EQ(d.incomplete_keys()[0].sample_id, "02");
  EXPECT_THROW(d.add(face), IngestError);

  TraitFeatures dup{TraitKind::Iris, 2, {}, {}};
  std::array<std::vector<float>, 4> subs{std::vector<float>{1, 0}, {1, 0}, {1, 0}, {1, 0}};
  dup.iris.push_back(IrisRecord::make({"S2", "01"}, subs, {1, 1, 1, 1}));
  dup.iris.push_back(IrisRecord::make({"S2", "01"}, subs, {1, 1, 1, 1}));
  EXPECT_THROW(d.add(dup), IngestError);
  EXPECT_FALSE(d.has_trait(TraitKind::Iris));
  EXPECT_EQ(d.keys().size(), 2u);
}

namespace {

std::vector<SampleKey> grid(int subjects, int samples, int first = 4000) {
  std::vector<SampleKey> keys;
  for (int s = 0; s < subjects; ++s) {
    char sid[16];
    std::snprintf(sid, sizeof sid, "S%04d", first + s);
    for (int j = 0; j < samples; ++j) {
      char smp[8];
      std::snprintf(smp, sizeof smp, "%02d", j);
      keys.push_back({sid, smp});
    }
  }
  return keys;
}

}  // namespace

TEST(Split, DefaultRanges142Subjects) {
  const auto keys = grid(142, 1);
  const std::vector<SubjectRange> ranges{SubjectRange::parse("S4000..S4083", Split::Train),
                                         SubjectRange::parse("S4084..S4111", Split::Val),
                                         SubjectRange::parse("S4112..S4141", Split::Test)};
  const auto p = make_protocol(keys, ranges);
  EXPECT_EQ(p.subject_count(Split::Train), 84u);
  EXPECT_EQ(p.subject_count(Split::Val), 28u);
  EXPECT_EQ(p.subject_count(Split::Test), 30u);
}

TEST(Split, SingletonsAndErrors) {
  std::vector<SampleKey> keys{{"A", "1"}, {"B", "1"}, {"C", "1"}};
  const std::vector<SubjectRange> ranges{SubjectRange::parse("A", Split::Train), SubjectRange::parse("B", Split::Val),
                                         SubjectRange::parse("C", Split::Test)};
  const auto a = split_by_subject(keys, ranges);
  EXPECT_EQ(a.at("A"), Split::Train);
  EXPECT_EQ(a.at("B"), Split::Val);
  EXPECT_EQ(a.at("C"), Split::Test);

  std::vector<SampleKey> single{{"S1", "01"}};
  const std::vector<SubjectRange> one{SubjectRange::parse("S1", Split::Val)};
  EXPECT_EQ(split_by_subject(single, one).at("S1"), Split::Val);

  std::vector<SampleKey> extra{{"D", "1"}};
  try {
    split_by_subject(extra, ranges);
    FAIL() << "uncovered subject accepted";
  } catch (const IngestError& e) {
    EXPECT_NE(std::string(e.what()).find("D"), std::string::npos);
  }
  const std::vector<SubjectRange> overlap{SubjectRange::parse("A..C", Split::Train), SubjectRange::parse("B", Split::Val)};
  EXPECT_THROW(split_by_subject(keys, overlap), ConfigError);
  EXPECT_THROW(SubjectRange::parse("S9..S1", Split::Train), ConfigError);
}

TEST(Split, IndependentOfInputOrder) {
  auto keys = grid(12, 3);
  const std::vector<SubjectRange> ranges{SubjectRange::parse("S4000..S4003", Split::Train),
                                         SubjectRange::parse("S4004..S4007", Split::Val),
                                         SubjectRange::parse("S4008..S4011", Split::Test)};
  const auto a = make_protocol(keys, ranges);
  std::mt19937 rng(3);
  std::shuffle(keys.begin(), keys.end(), rng);
  const auto b = make_protocol(keys, ranges);
  EXPECT_EQ(a.assignment, b.assignment);
  for (auto s : kAllSplits) EXPECT_EQ(a.pairs(s), b.pairs(s));
}

TEST(Pairs, SmallExamples) {
  auto p = enumerate_pairs(grid(3, 2));
  EXPECT_EQ(p.genuine_count(), 3u);
  EXPECT_EQ(p.impostor_count(), 12u);
  EXPECT_EQ(p.pairs.size(), 15u);
  p = enumerate_pairs(grid(1, 2));
  EXPECT_EQ(p.genuine_count(), 1u);
  EXPECT_EQ(p.impostor_count(), 0u);
  p = enumerate_pairs(grid(5, 4));
  EXPECT_EQ(p.genuine_count(), 30u);
  EXPECT_EQ(p.impostor_count(), 160u);
  EXPECT_TRUE(enumerate_pairs(std::vector<SampleKey>{}).pairs.empty());
}

TEST(Pairs, CanonicalSortedAndDeduplicated) {
  auto keys = grid(4, 3);
  keys.push_back(keys[2]);
  std::mt19937 rng(1);
  std::shuffle(keys.begin(), keys.end(), rng);
  const auto p = enumerate_pairs(keys);
  ASSERT_EQ(p.keys.size(), 12u);
  ASSERT_EQ(p.pairs.size(), 66u);
  for (std::size_t i = 0; i < p.pairs.size(); ++i) {
    const auto& pr = p.pairs[i];
    EXPECT_LT(p.keys[pr.a], p.keys[pr.b]);
    EXPECT_EQ(pr.genuine, p.keys[pr.a].subject_id == p.keys[pr.b].subject_id);
    if (i > 0) {
      const auto& q = p.pairs[i - 1];
      EXPECT_TRUE(std::pair(p.keys[q.a], p.keys[q.b]) < std::pair(p.keys[pr.a], p.keys[pr.b]));
    }
  }
}

TEST(Parallel, ThreadSpecs) {
  EXPECT_EQ(parse_threads("3"), 3u);
  EXPECT_GE(parse_threads("auto"), 1u);
  EXPECT_THROW(parse_threads("0"), ConfigError);
  EXPECT_THROW(parse_threads("x"), ConfigError);
  EXPECT_EQ(resolve_threads(std::string("2")), 2u);
}

TEST(Parallel, CoversEveryIndexOnceAndRethrows) {
  for (unsigned threads : {1u, 3u, 8u}) {
    std::vector<int> hits(1000, 0);
    parallel_for(hits.size(), threads, [&](std::size_t i) { hits[i] += 1; });
    EXPECT_TRUE(std::all_of(hits.begin(), hits.end(), [](int h) { return h == 1; }));
  }
  EXPECT_THROW(parallel_for(100, 4, [](std::size_t i) {
                 if (i == 70) throw MatchError("boom");
               }),
               MatchError);
}
