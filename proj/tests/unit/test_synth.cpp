#include <gtest/gtest.h>

#include <cmath>
#include <random>
#include <sstream>

#include "fusebench/feature_io.hpp"
#include "fusebench/metrics.hpp"
#include "fusebench/synth.hpp"
#include "support/oracles.hpp"

using namespace fusebench;

TEST(Rng, StreamSeedsAreDistinctAndStable) {
  EXPECT_EQ(stream_seed(42, 0), stream_seed(42, 0));
  EXPECT_NE(stream_seed(42, 0), stream_seed(42, 1));
  EXPECT_NE(stream_seed(42, 0), stream_seed(43, 0));
  // SplitMix64 reference output for state 0 after one increment.
  EXPECT_EQ(splitmix64_mix(0x9e3779b97f4a7c15ull), 0xe220a8397b1dcdafull);
}

TEST(Rng, UniformsStrictlyInsideUnitInterval) {
  SynthRng r(1);
  for (int i = 0; i < 100000; ++i) {
    const double u = r.uniform();
    ASSERT_GT(u, 0.0);
    ASSERT_LT(u, 1.0);
  }
}

TEST(Rng, NormalQuantileInvertsCdf) {
  for (double p : {1e-12, 1e-6, 0.001, 0.02425, 0.1, 0.3, 0.5, 0.7, 0.97575, 0.999, 1 - 1e-9}) {
    EXPECT_NEAR(normal_cdf(normal_quantile(p)), p, 1e-13 + 1e-12 * p);
  }
  EXPECT_EQ(normal_quantile(0.5), 0.0);
  EXPECT_NEAR(normal_quantile(0.975), 1.959963984540054, 1e-12);
}

TEST(Rng, NormalMoments) {
  SynthRng r(5);
  double s = 0;
  double ss = 0;
  const int n = 200000;
  for (int i = 0; i < n; ++i) {
    const double x = r.normal();
    s += x;
    ss += x * x;
  }
  EXPECT_NEAR(s / n, 0.0, 0.01);
  EXPECT_NEAR(ss / n, 1.0, 0.01);
}

TEST(GenScores, Reproducible) {
  const ScoreModel m{0.6, 0.0, 0.15};
  const auto a = gen_scores(m, 100, 200, 9);
  const auto b = gen_scores(m, 100, 200, 9);
  EXPECT_EQ(a.genuine, b.genuine);
  EXPECT_EQ(a.impostor, b.impostor);
  EXPECT_NE(gen_scores(m, 100, 200, 10).genuine, a.genuine);
  EXPECT_THROW(gen_scores({0, 0, 0}, 1, 1, 1), ConfigError);
  EXPECT_THROW(gen_scores(m, 0, 1, 1), ConfigError);
}

TEST(GenScores, PointMassesSeparate) {
  const auto d = gen_scores({1.0, 0.0, 1e-9}, 5000, 5000, 3);
  EXPECT_EQ(evaluate(d.genuine, d.impostor, kDefaultFarTargets).eer, 0.0);
}

TEST(GenScores, EqualMeansGiveOneHalf) {
  const std::size_t n = 20000;
  const auto d = gen_scores({0.2, 0.2, 0.1}, n, n, 4);
  EXPECT_NEAR(evaluate(d.genuine, d.impostor, kDefaultFarTargets).eer, 0.5, 3 / std::sqrt(double(n)));
}

TEST(GenScores, AnalyticEer) {
  const ScoreModel m{0.6, 0.0, 0.15};
  EXPECT_NEAR(m.analytic_eer(), 0.022750131948179, 1e-12);
}

TEST(Embeddings, ZeroNoiseGivesUnitGenuineCosines) {
  EmbeddingModel m;
  m.dim = 12;
  m.subjects = 5;
  m.samples_per_subject = 3;
  m.sigma_w = {0.0, std::nullopt, 0.0, std::nullopt, std::nullopt};
  const auto d = gen_embeddings(m);
  const auto pairs = std::make_shared<const PairList>(enumerate_pairs(d.keys()));
  for (auto t : {TraitKind::Face, TraitKind::Iris}) {
    const auto tab = score_table(d, t, pairs);
    std::vector<double> g;
    std::vector<double> im;
    for (std::size_t r = 0; r < tab.scores.size(); ++r) {
      if (pairs->pairs[r].genuine) {
        EXPECT_EQ(*tab.scores[r], 1.0);
        g.push_back(*tab.scores[r]);
      } else {
        im.push_back(*tab.scores[r]);
      }
    }
    EXPECT_EQ(evaluate(g, im, kDefaultFarTargets).eer, 0.0);
  }
}

TEST(Embeddings, AntipodalCentroids) {
  SynthRng rng(17);
  auto c = random_unit_vector(rng, 16);
  std::vector<double> neg(c.size());
  for (std::size_t i = 0; i < c.size(); ++i) neg[i] = -c[i];
  const auto f = gen_trait_embeddings(TraitKind::Nose, {c, neg}, 3, 0.05, 4000, rng);
  for (std::size_t i = 0; i < f.plain.size(); ++i) {
    for (std::size_t j = i + 1; j < f.plain.size(); ++j) {
      const double s = cosine(f.plain[i].vector, f.plain[j].vector);
      if (f.plain[i].key.subject_id == f.plain[j].key.subject_id) {
        EXPECT_GT(s, 0.99);
      } else {
        EXPECT_LT(s, -0.99);
      }
    }
  }
}

TEST(Embeddings, IrisMaskRatiosInRange) {
  EmbeddingModel m;
  m.sigma_w = {std::nullopt, std::nullopt, 0.5, std::nullopt, std::nullopt};
  const auto f = gen_trait(m, TraitKind::Iris);
  ASSERT_EQ(f.iris.size(), m.subjects * m.samples_per_subject);
  double lo = 1;
  double hi = 0;
  for (const auto& r : f.iris) {
    for (double x : r.mask_ratios) {
      lo = std::min(lo, x);
      hi = std::max(hi, x);
    }
  }
  EXPECT_GE(lo, 0.3);
  EXPECT_LE(hi, 1.0);
  EXPECT_LT(lo, 0.35);
  EXPECT_GT(hi, 0.95);
}

TEST(Embeddings, TraitStreamsAreIndependent) {
  EmbeddingModel a;
  a.dim = 8;
  a.subjects = 4;
  a.samples_per_subject = 2;
  a.sigma_w = {0.3, 0.3, std::nullopt, std::nullopt, std::nullopt};
  auto b = a;
  b.sigma_w[index_of(TraitKind::Face)] = 0.9;
  EXPECT_EQ(gen_trait(a, TraitKind::Periocular).plain[5].vector, gen_trait(b, TraitKind::Periocular).plain[5].vector);
  EXPECT_NE(gen_trait(a, TraitKind::Face).plain[5].vector, gen_trait(b, TraitKind::Face).plain[5].vector);
}

TEST(Embeddings, ByteIdenticalAcrossRuns) {
  EmbeddingModel m;
  m.dim = 10;
  m.subjects = 6;
  m.samples_per_subject = 3;
  m.sigma_w = {0.3, 0.4, 0.5, 0.6, 0.7};
  auto dump = [&] {
    std::string all;
    for (auto t : kAllTraits) {
      std::ostringstream os;
      write_features(os, gen_trait(m, t));
      all += os.str();
    }
    return all;
  };
  EXPECT_EQ(dump(), dump());
}

TEST(Embeddings, LowerNoiseNeverRaisesEer) {
  EmbeddingModel m;
  m.dim = 16;
  m.subjects = 20;
  m.samples_per_subject = 4;
  const auto pairs = std::make_shared<const PairList>(
      enumerate_pairs(gen_embeddings([&] {
                        auto k = m;
                        k.sigma_w[0] = 1.0;
                        return k;
                      }()).keys()));
  double prev = -1;
  for (double sigma : {1.6, 1.3, 1.0, 0.7, 0.4, 0.1}) {
    auto k = m;
    k.sigma_w[0] = sigma;
    const auto d = gen_embeddings(k);
    const auto tab = score_table(d, TraitKind::Face, pairs);
    std::vector<double> g;
    std::vector<double> im;
    for (std::size_t r = 0; r < tab.scores.size(); ++r) (pairs->pairs[r].genuine ? g : im).push_back(*tab.scores[r]);
    const double e = evaluate(g, im, kDefaultFarTargets).eer;
    if (prev >= 0) EXPECT_LE(e, prev) << "sigma " << sigma;
    prev = e;
  }
}
