#pragma once

// Seeded synthetic data: Gaussian score models with a closed-form EER and
// subject-centroid embedding models.
//
// Randomness is fully specified so fixtures are portable:
//  * stream_seed(master, stream) = mix(master + 0x9e3779b97f4a7c15 * (stream + 1)),
//    mix being the SplitMix64 finalizer. Trait t uses stream index_of(t), so
//    changing one trait's parameters never perturbs another trait's draws.
//  * Each stream drives a std::mt19937_64 (output sequence fixed by the standard).
//  * Uniforms are ((x >> 11) + 0.5) * 2^-53, strictly inside (0, 1).
//  * Normals are inverse-CDF transforms of those uniforms: Acklam's rational
//    approximation followed by one Halley step against erfc.

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdint>
#include <cstdio>
#include <memory>
#include <numbers>
#include <optional>
#include <random>
#include <string>
#include <vector>

#include "fusebench/core.hpp"
#include "fusebench/error.hpp"
#include "fusebench/matching.hpp"
#include "fusebench/traits.hpp"

namespace fusebench {

inline std::uint64_t splitmix64_mix(std::uint64_t z) {
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
  return z ^ (z >> 31);
}

inline std::uint64_t stream_seed(std::uint64_t master, std::uint64_t stream) {
  return splitmix64_mix(master + 0x9e3779b97f4a7c15ULL * (stream + 1));
}

// Standard normal quantile. Relative error ~1e-15 after refinement.
inline double normal_quantile(double p) {
  if (!(p > 0.0 && p < 1.0)) throw ConfigError("normal_quantile: p must lie in (0, 1)");
  static constexpr double a[] = {-3.969683028665376e+01, 2.209460984245205e+02, -2.759285104469687e+02,
                                 1.383577518672690e+02,  -3.066479806614716e+01, 2.506628277459239e+00};
  static constexpr double b[] = {-5.447609879822406e+01, 1.615858368580409e+02, -1.556989798598866e+02,
                                 6.680131188771972e+01,  -1.328068155288572e+01};
  static constexpr double c[] = {-7.784894002430293e-03, -3.223964580411365e-01, -2.400758277161838e+00,
                                 -2.549732539343734e+00, 4.374664141464968e+00,  2.938163982698783e+00};
  static constexpr double d[] = {7.784695709041462e-03, 3.224671290700398e-01, 2.445134137142996e+00,
                                 3.754408661907416e+00};
  constexpr double p_low = 0.02425;
  double x = 0.0;
  if (p < p_low) {
    const double q = std::sqrt(-2.0 * std::log(p));
    x = (((((c[0] * q + c[1]) * q + c[2]) * q + c[3]) * q + c[4]) * q + c[5]) /
        ((((d[0] * q + d[1]) * q + d[2]) * q + d[3]) * q + 1.0);
  } else if (p <= 1.0 - p_low) {
    const double q = p - 0.5;
    const double r = q * q;
    x = (((((a[0] * r + a[1]) * r + a[2]) * r + a[3]) * r + a[4]) * r + a[5]) * q /
        (((((b[0] * r + b[1]) * r + b[2]) * r + b[3]) * r + b[4]) * r + 1.0);
  } else {
    const double q = std::sqrt(-2.0 * std::log1p(-p));
    x = -(((((c[0] * q + c[1]) * q + c[2]) * q + c[3]) * q + c[4]) * q + c[5]) /
        ((((d[0] * q + d[1]) * q + d[2]) * q + d[3]) * q + 1.0);
  }
  const double e = 0.5 * std::erfc(-x / std::numbers::sqrt2) - p;
  const double u = e * std::sqrt(2.0 * std::numbers::pi) * std::exp(x * x / 2.0);
  return x - u / (1.0 + x * u / 2.0);
}

inline double normal_cdf(double x) { return 0.5 * std::erfc(-x / std::numbers::sqrt2); }

class SynthRng {
 public:
  explicit SynthRng(std::uint64_t seed) : engine_(seed) {}

  double uniform() { return (static_cast<double>(engine_() >> 11) + 0.5) * 0x1.0p-53; }
  double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }
  double normal() { return normal_quantile(uniform()); }

 private:
  std::mt19937_64 engine_;
};

// ---------------------------------------------------------------------------
// Score-level model

struct ScoreModel {
  double mu_genuine = 0.0;
  double mu_impostor = 0.0;
  double sigma = 1.0;

  void validate() const {
    if (!std::isfinite(mu_genuine) || !std::isfinite(mu_impostor)) throw ConfigError("score model means must be finite");
    if (!(sigma > 0.0) || !std::isfinite(sigma)) throw ConfigError("score model sigma must be positive");
  }

  // Equal-variance normals cross at the midpoint: EER = Phi(-(mu_g - mu_i) / (2 sigma)).
  double analytic_eer() const { return normal_cdf(-(mu_genuine - mu_impostor) / (2.0 * sigma)); }
};

struct ScoreDraws {
  std::vector<double> genuine;
  std::vector<double> impostor;
};

// Genuine scores come from stream 0 of `seed`, impostor scores from stream 1.
inline ScoreDraws gen_scores(const ScoreModel& m, std::size_t genuine_n, std::size_t impostor_n, std::uint64_t seed) {
  m.validate();
  if (genuine_n < 1 || impostor_n < 1) throw ConfigError("gen_scores: counts must be >= 1");
  ScoreDraws d;
  SynthRng g(stream_seed(seed, 0));
  SynthRng i(stream_seed(seed, 1));
  d.genuine.reserve(genuine_n);
  d.impostor.reserve(impostor_n);
  for (std::size_t k = 0; k < genuine_n; ++k) d.genuine.push_back(m.mu_genuine + m.sigma * g.normal());
  for (std::size_t k = 0; k < impostor_n; ++k) d.impostor.push_back(m.mu_impostor + m.sigma * i.normal());
  return d;
}

// Score table over a pair list with draws from the model: the i-th genuine
// pair takes the i-th genuine draw, likewise for impostors. Values are clamped
// to the cosine range.
inline ScoreTable synth_score_table(TraitKind trait, const ScoreModel& m, std::shared_ptr<const PairList> pairs,
                                    std::uint64_t seed) {
  m.validate();
  ScoreTable t;
  t.trait = trait;
  t.pairs = pairs;
  const std::size_t ng = pairs->genuine_count();
  const std::size_t ni = pairs->impostor_count();
  ScoreDraws d;
  if (ng > 0 && ni > 0) d = gen_scores(m, ng, ni, seed);
  else if (ng > 0) d.genuine = gen_scores(m, ng, 1, seed).genuine;
  else if (ni > 0) d.impostor = gen_scores(m, 1, ni, seed).impostor;
  std::size_t gi = 0;
  std::size_t ii = 0;
  t.scores.reserve(pairs->pairs.size());
  for (const auto& p : pairs->pairs) {
    const double s = p.genuine ? d.genuine[gi++] : d.impostor[ii++];
    t.scores.push_back(std::clamp(s, -1.0, 1.0));
  }
  return t;
}

// ---------------------------------------------------------------------------
// Embedding-level model

struct EmbeddingModel {
  std::size_t dim = 64;
  std::size_t subjects = 30;
  std::size_t samples_per_subject = 5;
  std::uint64_t seed = 42;
  unsigned first_subject = 4000;
  std::array<std::optional<double>, kTraitCount> sigma_w{};  // traits without a value are not generated
  double iris_mask_min = 0.3;
  double iris_mask_max = 1.0;

  void validate() const {
    if (dim < 2) throw ConfigError("embedding model: dim must be >= 2");
    if (subjects < 1 || samples_per_subject < 1) throw ConfigError("embedding model: subjects and samples must be >= 1");
    for (const auto& s : sigma_w) {
      if (s && (!(*s >= 0.0) || !std::isfinite(*s))) throw ConfigError("embedding model: sigma_w must be >= 0");
    }
    if (!(iris_mask_min >= 0.0 && iris_mask_min <= iris_mask_max && iris_mask_max <= 1.0)) {
      throw ConfigError("embedding model: iris mask range must lie within [0, 1]");
    }
  }
};

inline std::string subject_id(unsigned first, std::size_t s) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "S%04zu", static_cast<std::size_t>(first) + s);
  return buf;
}

inline std::string sample_id(std::size_t j) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%02zu", j);
  return buf;
}

inline std::vector<double> random_unit_vector(SynthRng& rng, std::size_t dim) {
  std::vector<double> v(dim);
  double ss = 0.0;
  for (auto& x : v) {
    x = rng.normal();
    ss += x * x;
  }
  const double inv = 1.0 / std::sqrt(ss);
  for (auto& x : v) x *= inv;
  return v;
}

// centroid + isotropic noise with per-coordinate sd sigma_w / sqrt(dim)
// (expected noise norm ~ sigma_w), renormalized and stored as float.
inline std::vector<float> noisy_sample(SynthRng& rng, const std::vector<double>& centroid, double sigma_w) {
  const double sd = sigma_w / std::sqrt(static_cast<double>(centroid.size()));
  std::vector<double> x(centroid.size());
  double ss = 0.0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    x[i] = centroid[i] + sd * rng.normal();
    ss += x[i] * x[i];
  }
  const double inv = 1.0 / std::sqrt(ss);
  std::vector<float> out(x.size());
  for (std::size_t i = 0; i < x.size(); ++i) out[i] = static_cast<float>(x[i] * inv);
  return out;
}

// Records for one non-iris trait given explicit subject centroids. All noise
// is drawn after the centroids, subject-major then sample-major.
inline TraitFeatures gen_trait_embeddings(TraitKind trait, const std::vector<std::vector<double>>& centroids,
                                          std::size_t samples_per_subject, double sigma_w, unsigned first_subject,
                                          SynthRng& rng) {
  if (trait == TraitKind::Iris) throw ConfigError("gen_trait_embeddings: use gen_iris_embeddings for iris");
  TraitFeatures f;
  f.trait = trait;
  f.dim = centroids.empty() ? 0 : centroids[0].size();
  for (std::size_t s = 0; s < centroids.size(); ++s) {
    for (std::size_t j = 0; j < samples_per_subject; ++j) {
      f.plain.push_back(FeatureRecord::make({subject_id(first_subject, s), sample_id(j)}, trait,
                                            noisy_sample(rng, centroids[s], sigma_w)));
    }
  }
  return f;
}

inline TraitFeatures gen_iris_embeddings(const EmbeddingModel& m, double sigma_w, SynthRng& rng) {
  std::vector<std::array<std::vector<double>, kIrisSubimages>> centroids(m.subjects);
  for (auto& c : centroids) {
    for (auto& sub : c) sub = random_unit_vector(rng, m.dim);
  }
  TraitFeatures f;
  f.trait = TraitKind::Iris;
  f.dim = m.dim;
  for (std::size_t s = 0; s < m.subjects; ++s) {
    for (std::size_t j = 0; j < m.samples_per_subject; ++j) {
      std::array<std::vector<float>, kIrisSubimages> subs;
      for (std::size_t i = 0; i < kIrisSubimages; ++i) subs[i] = noisy_sample(rng, centroids[s][i], sigma_w);
      std::array<double, kIrisSubimages> ratios{};
      for (auto& r : ratios) r = rng.uniform(m.iris_mask_min, m.iris_mask_max);
      f.iris.push_back(IrisRecord::make({subject_id(m.first_subject, s), sample_id(j)}, std::move(subs), ratios));
    }
  }
  return f;
}

inline TraitFeatures gen_trait(const EmbeddingModel& m, TraitKind t) {
  m.validate();
  const auto& sigma = m.sigma_w[index_of(t)];
  if (!sigma) throw ConfigError("embedding model has no sigma_w for trait " + std::string(trait_id(t)));
  SynthRng rng(stream_seed(m.seed, index_of(t)));
  if (t == TraitKind::Iris) return gen_iris_embeddings(m, *sigma, rng);
  std::vector<std::vector<double>> centroids(m.subjects);
  for (auto& c : centroids) c = random_unit_vector(rng, m.dim);
  return gen_trait_embeddings(t, centroids, m.samples_per_subject, *sigma, m.first_subject, rng);
}

inline Dataset gen_embeddings(const EmbeddingModel& m) {
  m.validate();
  Dataset d;
  for (auto t : kAllTraits) {
    if (m.sigma_w[index_of(t)]) d.add(gen_trait(m, t));
  }
  return d;
}

}  // namespace fusebench
