#pragma once

// Run configuration. One JSON file drives every subcommand; see
// docs/config.md for the grammar. Relative paths resolve against the
// directory that holds the config file.

#include <array>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <optional>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "fusebench/core.hpp"
#include "fusebench/error.hpp"
#include "fusebench/fusion.hpp"
#include "fusebench/geometry.hpp"
#include "fusebench/metrics.hpp"
#include "fusebench/synth.hpp"
#include "fusebench/traits.hpp"

namespace fusebench {

inline constexpr std::string_view kConfigSchema = "fusebench/config/v1";

enum class SynthMode { Embeddings, Scores };

struct SynthConfig {
  SynthMode mode = SynthMode::Embeddings;
  EmbeddingModel embeddings;
  std::array<std::optional<ScoreModel>, kTraitCount> score_models{};
};

struct RunConfig {
  std::filesystem::path base_dir = ".";
  std::uint64_t seed = 42;
  std::filesystem::path out = "out";
  std::array<std::optional<std::filesystem::path>, kTraitCount> features{};
  std::optional<std::filesystem::path> scores_dir;
  std::vector<SubjectRange> splits;
  CropConfig crop;
  int iris_rows = kDefaultIrisRows;
  int iris_cols = kDefaultIrisCols;
  double step = 0.1;
  Criterion criterion = Criterion::Eer;
  std::optional<TraitSet> active;
  std::optional<FusionWeights> forced_weights;
  std::vector<double> far_targets = kDefaultFarTargets;
  bool concat_baseline = false;
  std::optional<SynthConfig> synth;

  std::filesystem::path resolve(const std::filesystem::path& p) const { return p.is_absolute() ? p : base_dir / p; }
  std::filesystem::path score_root() const { return scores_dir ? resolve(*scores_dir) : out / "scores"; }
  std::filesystem::path score_path(Split s, TraitKind t) const {
    return score_root() / std::string(split_id(s)) / (std::string(trait_id(t)) + ".csv");
  }
  std::filesystem::path feature_path(TraitKind t) const {
    if (const auto& p = features[index_of(t)]) return resolve(*p);
    return out / "features" / (std::string(trait_id(t)) + ".feat");
  }
};

namespace detail {

inline std::array<double, kTraitCount> parse_weight_map(const nlohmann::json& j) {
  std::array<double, kTraitCount> l{};
  for (const auto& [k, v] : j.items()) l[index_of(parse_trait(k))] = v.get<double>();
  return l;
}

inline TraitSet parse_trait_list(const nlohmann::json& j) {
  TraitSet s;
  for (const auto& v : j) s.insert(parse_trait(v.get<std::string>()));
  return s;
}

inline void check_far_targets(const std::vector<double>& targets) {
  for (double t : targets) {
    if (!(t > 0.0 && t < 1.0)) throw ConfigError("FAR targets must lie in (0, 1)");
  }
}

inline SynthConfig parse_synth(const nlohmann::json& j, std::uint64_t seed) {
  SynthConfig s;
  const auto mode = j.value("mode", std::string("embeddings"));
  if (mode == "embeddings") {
    s.mode = SynthMode::Embeddings;
  } else if (mode == "scores") {
    s.mode = SynthMode::Scores;
  } else {
    throw ConfigError("synth.mode must be 'embeddings' or 'scores'");
  }
  auto& m = s.embeddings;
  m.seed = seed;
  m.dim = j.value("dim", m.dim);
  m.subjects = j.value("subjects", m.subjects);
  m.samples_per_subject = j.value("samples_per_subject", m.samples_per_subject);
  m.first_subject = j.value("first_subject", m.first_subject);
  if (j.contains("iris_mask_range")) {
    m.iris_mask_min = j.at("iris_mask_range").at(0).get<double>();
    m.iris_mask_max = j.at("iris_mask_range").at(1).get<double>();
  }
  if (!j.contains("traits") || !j.at("traits").is_object() || j.at("traits").empty()) {
    throw ConfigError("synth.traits must name at least one trait");
  }
  for (const auto& [name, params] : j.at("traits").items()) {
    const auto t = parse_trait(name);
    if (s.mode == SynthMode::Embeddings) {
      m.sigma_w[index_of(t)] = params.at("sigma_w").get<double>();
    } else {
      ScoreModel sm{params.at("mu_genuine").get<double>(), params.at("mu_impostor").get<double>(),
                    params.at("sigma").get<double>()};
      sm.validate();
      s.score_models[index_of(t)] = sm;
    }
  }
  if (s.mode == SynthMode::Embeddings) m.validate();
  if (m.subjects < 1 || m.samples_per_subject < 1) throw ConfigError("synth: subjects and samples must be >= 1");
  return s;
}

}  // namespace detail

inline RunConfig parse_config(const nlohmann::json& j, const std::filesystem::path& base_dir) {
  RunConfig c;
  c.base_dir = base_dir;
  try {
    if (!j.is_object()) throw ConfigError("config must be a JSON object");
    if (j.contains("schema") && j.at("schema").get<std::string>() != kConfigSchema) {
      throw ConfigError("config schema '" + j.at("schema").get<std::string>() + "' is not " + std::string(kConfigSchema));
    }
    c.seed = j.value("seed", c.seed);
    if (j.contains("out")) c.out = c.resolve(j.at("out").get<std::string>());
    if (j.contains("scores_dir")) c.scores_dir = j.at("scores_dir").get<std::string>();
    if (j.contains("features")) {
      for (const auto& [k, v] : j.at("features").items()) c.features[index_of(parse_trait(k))] = v.get<std::string>();
    }
    if (j.contains("splits")) {
      for (const auto& s : j.at("splits")) {
        c.splits.push_back(SubjectRange::parse(s.at("range").get<std::string>(), parse_split(s.at("split").get<std::string>())));
      }
      check_ranges_disjoint(c.splits);
    }
    if (j.contains("crop")) {
      const auto& cr = j.at("crop");
      c.crop.periocular = cr.value("periocular", c.crop.periocular);
      c.crop.nose = cr.value("nose", c.crop.nose);
      c.crop.eyebrow_width = cr.value("eyebrow_width", c.crop.eyebrow_width);
      c.crop.eyebrow_height = cr.value("eyebrow_height", c.crop.eyebrow_height);
      for (double v : {c.crop.periocular, c.crop.nose, c.crop.eyebrow_width, c.crop.eyebrow_height}) {
        if (!(v > 0.0)) throw ConfigError("crop scale factors must be positive");
      }
    }
    if (j.contains("iris_size")) {
      c.iris_rows = j.at("iris_size").at(0).get<int>();
      c.iris_cols = j.at("iris_size").at(1).get<int>();
      if (c.iris_rows < 2 || c.iris_cols < 8 || c.iris_cols % 4 != 0) {
        throw ConfigError("iris_size must be at least [2, 8] with a column count divisible by 4");
      }
    }
    if (j.contains("sweep")) {
      const auto& s = j.at("sweep");
      c.step = s.value("step", c.step);
      simplex_divisions(c.step);
      if (s.contains("criterion")) c.criterion = parse_criterion(s.at("criterion").get<std::string>());
      if (s.contains("active")) c.active = detail::parse_trait_list(s.at("active"));
      if (s.contains("weights")) c.forced_weights = FusionWeights::make(detail::parse_weight_map(s.at("weights")));
    }
    if (j.contains("far_targets")) c.far_targets = j.at("far_targets").get<std::vector<double>>();
    detail::check_far_targets(c.far_targets);
    c.concat_baseline = j.value("concat_baseline", false);
    if (j.contains("synth")) c.synth = detail::parse_synth(j.at("synth"), c.seed);
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError(std::string("config: ") + e.what());
  }
  return c;
}

inline RunConfig load_config(const std::filesystem::path& path) {
  std::ifstream is(path);
  if (!is) throw ConfigError(path.string() + ": cannot open config file");
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(is);
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError(path.string() + ": " + e.what());
  }
  auto base = path.parent_path();
  if (base.empty()) base = ".";
  try {
    return parse_config(j, base);
  } catch (const ConfigError& e) {
    throw ConfigError(path.string() + ": " + e.what());
  }
}

}  // namespace fusebench
