#pragma once

// Subcommand implementations behind the fusebench CLI. Each returns an exit
// status: 0 success, 1 success with warnings (absent scores, excluded pairs).
// Input and configuration problems surface as fusebench::Error, which the CLI
// turns into exit status 2.
//
// Output layout under the run directory:
//   features/<trait>.feat              synth (embeddings mode)
//   scores/<split>/<trait>.csv         score, synth (scores mode)
//   sweep/sweep.csv, selected.json, combinations.json, metrics_fused.json, det_fused.csv
//   eval/metrics_<trait>.json, det_<trait>.csv, concat.json
//   report/report.txt, single.csv, fusion.csv, concat.csv

#include <cstdint>
#include <filesystem>
#include <fstream>
#include <memory>
#include <optional>
#include <ostream>
#include <sstream>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "fusebench/config.hpp"
#include "fusebench/core.hpp"
#include "fusebench/error.hpp"
#include "fusebench/feature_io.hpp"
#include "fusebench/fusion.hpp"
#include "fusebench/geometry.hpp"
#include "fusebench/matching.hpp"
#include "fusebench/metrics.hpp"
#include "fusebench/pgm.hpp"
#include "fusebench/report.hpp"
#include "fusebench/synth.hpp"

namespace fusebench {

inline constexpr int kExitOk = 0;
inline constexpr int kExitWarnings = 1;
inline constexpr int kExitInputError = 2;

inline constexpr std::string_view kSelectionSchema = "fusebench/selection/v1";
inline constexpr std::string_view kCombinationsSchema = "fusebench/combinations/v1";
inline constexpr std::string_view kConcatSchema = "fusebench/concat/v1";
inline constexpr std::string_view kGeometrySchema = "fusebench/geometry/v1";
inline constexpr std::string_view kReportHeader = "fusebench report v1";

struct CommandContext {
  RunConfig config;
  unsigned threads = 1;
  std::ostream* out = nullptr;
  std::ostream* err = nullptr;

  std::ostream& log() const { return *out; }
  std::ostream& warn() const { return *err; }
};

namespace pipeline {

inline void ensure_dir(const std::filesystem::path& p) {
  std::error_code ec;
  std::filesystem::create_directories(p, ec);
  if (ec) throw IngestError(p.string() + ": cannot create directory: " + ec.message());
}

inline void write_text(const std::filesystem::path& p, const std::string& text) {
  ensure_dir(p.parent_path());
  std::ofstream os(p, std::ios::binary | std::ios::trunc);
  if (!os) throw IngestError(p.string() + ": cannot open for writing");
  os << text;
  if (!os) throw IngestError(p.string() + ": write failed");
}

inline void write_json(const std::filesystem::path& p, const nlohmann::ordered_json& j) { write_text(p, j.dump(2) + "\n"); }

inline nlohmann::json read_json(const std::filesystem::path& p, std::string_view schema) {
  std::ifstream is(p);
  if (!is) throw IngestError(p.string() + ": cannot open");
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(is);
  } catch (const nlohmann::json::exception& e) {
    throw IngestError(p.string() + ": " + e.what());
  }
  const auto tag = j.is_object() ? j.value("schema", std::string()) : std::string();
  if (tag != schema) throw IngestError(p.string() + ": schema '" + tag + "' does not match '" + std::string(schema) + "'");
  return j;
}

inline nlohmann::ordered_json weights_json(const FusionWeights& w) {
  nlohmann::ordered_json j = nlohmann::ordered_json::object();
  for (auto t : kAllTraits) j[std::string(trait_id(t))] = w[t];
  return j;
}

inline FusionWeights weights_from_json(const nlohmann::json& j) {
  std::array<double, kTraitCount> l{};
  for (auto t : kAllTraits) l[index_of(t)] = j.value(std::string(trait_id(t)), 0.0);
  return FusionWeights::make(l);
}

inline nlohmann::ordered_json traits_json(TraitSet s) {
  nlohmann::ordered_json j = nlohmann::ordered_json::array();
  for (auto t : kAllTraits) {
    if (s.contains(t)) j.push_back(std::string(trait_id(t)));
  }
  return j;
}

inline TraitSet traits_from_json(const nlohmann::json& j) {
  TraitSet s;
  for (const auto& v : j) s.insert(parse_trait(v.get<std::string>()));
  return s;
}

inline std::string weights_text(const FusionWeights& w, int decimals) {
  std::string s;
  for (auto t : kAllTraits) {
    if (!s.empty()) s += ' ';
    s += std::string(trait_id(t)) + "=" + format_fixed(w[t], decimals);
  }
  return s;
}

inline std::string metrics_text(const MetricsReport& r, std::span<const double> targets) {
  std::string s = "EER " + format_percent3(r.eer);
  for (double t : targets) {
    if (const auto* op = r.at_target(t)) s += " | FRR@FAR" + format_target_percent(t) + "% " + format_percent3(op->frr);
  }
  return s + " (%)";
}

inline nlohmann::ordered_json labeled_metrics(const MetricsReport& r, const std::string& label, Split split) {
  nlohmann::ordered_json j;
  j["schema"] = std::string(kMetricsSchema);
  j["label"] = label;
  j["split"] = std::string(split_id(split));
  const auto m = metrics_to_json(r);
  for (auto it = m.begin(); it != m.end(); ++it) j[it.key()] = it.value();
  return j;
}

inline std::string curve_csv(const RocCurve& c) {
  std::ostringstream os;
  write_curve_csv(os, c);
  return os.str();
}

// Loads every requested trait's feature file. Without explicit paths in the
// config, canonical files under <out>/features are picked up when present.
inline Dataset load_dataset(const RunConfig& cfg, std::ostream& log) {
  Dataset data;
  bool explicit_paths = false;
  for (auto t : kAllTraits) explicit_paths = explicit_paths || cfg.features[index_of(t)].has_value();
  for (auto t : kAllTraits) {
    const auto path = cfg.feature_path(t);
    if (explicit_paths && !cfg.features[index_of(t)]) continue;
    if (!std::filesystem::exists(path)) {
      if (explicit_paths) throw IngestError(path.string() + ": feature file does not exist");
      continue;
    }
    auto f = read_features(path);
    log << "loaded " << trait_id(t) << ": " << f.size() << " records, dim " << f.dim << "\n";
    data.add(std::move(f));
  }
  if (data.keys().empty()) throw ConfigError("no feature files found (configure 'features' or run synth first)");
  return data;
}

// Traits to work on: the configured active set, or every trait whose score
// file exists for `split`.
inline TraitSet discover_traits(const RunConfig& cfg, Split split) {
  if (cfg.active) return *cfg.active;
  TraitSet s;
  for (auto t : kAllTraits) {
    if (std::filesystem::exists(cfg.score_path(split, t))) s.insert(t);
  }
  if (s.empty()) {
    throw IngestError("no " + std::string(split_id(split)) + " score files under " + (cfg.score_root() / std::string(split_id(split))).string());
  }
  return s;
}

inline ScoreTables load_tables(const RunConfig& cfg, Split split, TraitSet traits) {
  ScoreTables tables;
  std::shared_ptr<const PairList> shared;
  for (auto t : kAllTraits) {
    if (!traits.contains(t)) continue;
    const auto path = cfg.score_path(split, t);
    if (!std::filesystem::exists(path)) throw IngestError(path.string() + ": missing score file");
    auto tab = read_score_table(path, t);
    if (shared && *shared == *tab.pairs) {
      tab.pairs = shared;
    } else if (!shared) {
      shared = tab.pairs;
    }
    tables[index_of(t)] = std::move(tab);
  }
  check_aligned(tables);
  return tables;
}

inline MetricsReport single_trait_report(const ScoreTable& t, std::span<const double> targets, bool keep_curve) {
  std::vector<double> genuine;
  std::vector<double> impostor;
  for (std::size_t r = 0; r < t.scores.size(); ++r) {
    if (!t.scores[r]) continue;
    (t.pairs->pairs[r].genuine ? genuine : impostor).push_back(*t.scores[r]);
  }
  auto rep = evaluate(genuine, impostor, targets, keep_curve);
  rep.excluded = t.absent_count();
  return rep;
}

inline std::vector<SampleKey> synthetic_keys(const EmbeddingModel& m) {
  std::vector<SampleKey> keys;
  for (std::size_t s = 0; s < m.subjects; ++s) {
    for (std::size_t j = 0; j < m.samples_per_subject; ++j) keys.push_back({subject_id(m.first_subject, s), sample_id(j)});
  }
  return keys;
}

}  // namespace pipeline

// Seed for the scores of `trait` in `split`: two levels of stream_seed.
inline std::uint64_t score_stream_seed(std::uint64_t seed, TraitKind trait, Split split) {
  return stream_seed(stream_seed(seed, index_of(trait)), 16 + static_cast<std::uint64_t>(split));
}

// Synthetic score tables for every configured split and trait (scores mode).
inline std::array<ScoreTables, 3> synth_score_tables(const SynthConfig& s, std::span<const SubjectRange> splits,
                                                     std::uint64_t seed) {
  const auto keys = pipeline::synthetic_keys(s.embeddings);
  const auto protocol = make_protocol(keys, splits);
  std::array<ScoreTables, 3> out;
  for (auto sp : kAllSplits) {
    auto pairs = std::make_shared<const PairList>(protocol.pairs(sp));
    for (auto t : kAllTraits) {
      if (const auto& m = s.score_models[index_of(t)]) {
        out[static_cast<std::size_t>(sp)][index_of(t)] = synth_score_table(t, *m, pairs, score_stream_seed(seed, t, sp));
      }
    }
  }
  return out;
}

inline int cmd_synth(const CommandContext& ctx) {
  const auto& cfg = ctx.config;
  if (!cfg.synth) throw ConfigError("synth: config has no 'synth' section");
  const auto& s = *cfg.synth;
  if (s.mode == SynthMode::Embeddings) {
    auto model = s.embeddings;
    model.seed = cfg.seed;
    for (auto t : kAllTraits) {
      if (!model.sigma_w[index_of(t)]) continue;
      const auto f = gen_trait(model, t);
      const auto path = cfg.out / "features" / (std::string(trait_id(t)) + ".feat");
      pipeline::ensure_dir(path.parent_path());
      write_features(path, f);
      ctx.log() << "synth: " << trait_id(t) << ": " << f.size() << " records -> " << path.string() << "\n";
    }
    return kExitOk;
  }
  if (cfg.splits.empty()) throw ConfigError("synth: scores mode needs 'splits'");
  const auto tables = synth_score_tables(s, cfg.splits, cfg.seed);
  for (auto sp : kAllSplits) {
    for (auto t : kAllTraits) {
      const auto& tab = tables[static_cast<std::size_t>(sp)][index_of(t)];
      if (!tab) continue;
      const auto path = cfg.score_path(sp, t);
      pipeline::ensure_dir(path.parent_path());
      write_score_table(path, *tab);
    }
    const auto& any = tables[static_cast<std::size_t>(sp)];
    for (const auto& tab : any) {
      if (tab) {
        ctx.log() << "synth: " << split_id(sp) << ": " << tab->pairs->genuine_count() << " genuine, "
                  << tab->pairs->impostor_count() << " impostor pairs\n";
        break;
      }
    }
  }
  return kExitOk;
}

inline int cmd_score(const CommandContext& ctx) {
  const auto& cfg = ctx.config;
  if (cfg.splits.empty()) throw ConfigError("score: config has no 'splits'");
  const Dataset data = pipeline::load_dataset(cfg, ctx.log());
  const auto incomplete = data.incomplete_keys();
  if (!incomplete.empty()) {
    ctx.warn() << "warning: " << incomplete.size() << " samples lack at least one trait; their pairs score as absent\n";
  }
  const EvalProtocol protocol = make_protocol(data.keys(), cfg.splits);
  bool warnings = !incomplete.empty();
  for (auto sp : kAllSplits) {
    auto pairs = std::make_shared<const PairList>(protocol.pairs(sp));
    ctx.log() << "score: " << split_id(sp) << ": " << protocol.subject_count(sp) << " subjects, " << pairs->keys.size()
              << " samples, " << pairs->genuine_count() << " genuine / " << pairs->impostor_count() << " impostor pairs\n";
    for (auto t : kAllTraits) {
      if (!data.has_trait(t)) continue;
      ScoreTableStats stats;
      const auto table = score_table(data, t, pairs, ctx.threads, &stats);
      const auto path = cfg.score_path(sp, t);
      pipeline::ensure_dir(path.parent_path());
      write_score_table(path, table);
      if (stats.missing + stats.occluded > 0) {
        warnings = true;
        ctx.warn() << "warning: " << split_id(sp) << "/" << trait_id(t) << ": " << stats.missing
                   << " pairs with a missing trait, " << stats.occluded << " fully occluded iris pairs\n";
      }
    }
  }
  return warnings ? kExitWarnings : kExitOk;
}

inline int cmd_sweep(const CommandContext& ctx) {
  const auto& cfg = ctx.config;
  const TraitSet active = pipeline::discover_traits(cfg, Split::Val);
  const auto val = pipeline::load_tables(cfg, Split::Val, active);
  const auto test = pipeline::load_tables(cfg, Split::Test, active);
  const auto targets = targets_for(cfg.far_targets, cfg.criterion);

  SweepResult res;
  int decimals = 1;
  if (cfg.forced_weights) {
    if (!cfg.forced_weights->support().is_subset_of(active)) {
      throw ConfigError("sweep: forced weights are positive on a trait without score files");
    }
    res = evaluate_weight_list(val, {*cfg.forced_weights}, cfg.criterion, cfg.far_targets, ctx.threads);
    res.step = cfg.step;
    res.active = active;
    decimals = weight_decimals(std::span<const FusionWeights>(&*cfg.forced_weights, 1));
  } else {
    res = sweep(val, cfg.step, cfg.criterion, active, cfg.far_targets, ctx.threads);
    decimals = weight_decimals(cfg.step);
  }
  const auto out_dir = cfg.out / "sweep";
  pipeline::write_text(out_dir / "sweep.csv", render_sweep_csv(res, cfg.far_targets, decimals));

  const auto& chosen = res.entries[res.selected];
  const auto test_report = evaluate_fused(test, chosen.weights, targets, true);
  {
    nlohmann::ordered_json j;
    j["schema"] = std::string(kSelectionSchema);
    j["criterion"] = std::string(criterion_id(cfg.criterion));
    j["step"] = cfg.step;
    j["forced"] = cfg.forced_weights.has_value();
    j["active"] = pipeline::traits_json(active);
    j["weights"] = pipeline::weights_json(chosen.weights);
    j["val"] = metrics_to_json(chosen.report);
    j["test"] = metrics_to_json(test_report);
    pipeline::write_json(out_dir / "selected.json", j);
  }
  auto fused_json = pipeline::labeled_metrics(test_report, "fused", Split::Test);
  fused_json["weights"] = pipeline::weights_json(chosen.weights);
  pipeline::write_json(out_dir / "metrics_fused.json", fused_json);
  pipeline::write_text(out_dir / "det_fused.csv", pipeline::curve_csv(test_report.curve));

  if (!cfg.forced_weights) {
    const auto subsets = combination_subsets(active);
    std::vector<MetricsReport> test_reports(subsets.size());
    std::vector<std::size_t> picks(subsets.size());
    parallel_for(subsets.size(), ctx.threads, [&](std::size_t i) {
      picks[i] = *res.best_within(subsets[i]);
      test_reports[i] = evaluate_fused(test, res.entries[picks[i]].weights, targets, false);
    });
    nlohmann::ordered_json j;
    j["schema"] = std::string(kCombinationsSchema);
    j["criterion"] = std::string(criterion_id(cfg.criterion));
    j["step"] = cfg.step;
    j["active"] = pipeline::traits_json(active);
    nlohmann::ordered_json rows = nlohmann::ordered_json::array();
    for (std::size_t i = 0; i < subsets.size(); ++i) {
      nlohmann::ordered_json row;
      row["traits"] = pipeline::traits_json(subsets[i]);
      row["weights"] = pipeline::weights_json(res.entries[picks[i]].weights);
      row["val"] = metrics_to_json(res.entries[picks[i]].report);
      row["test"] = metrics_to_json(test_reports[i]);
      rows.push_back(row);
    }
    j["rows"] = rows;
    pipeline::write_json(out_dir / "combinations.json", j);
  }

  ctx.log() << "sweep: " << res.entries.size() << " weight vectors evaluated on val (criterion "
            << criterion_id(cfg.criterion) << ")\n";
  ctx.log() << "selected: " << pipeline::weights_text(chosen.weights, decimals) << "\n";
  ctx.log() << "val:  " << pipeline::metrics_text(chosen.report, cfg.far_targets) << "\n";
  ctx.log() << "test: " << pipeline::metrics_text(test_report, cfg.far_targets) << "\n";
  if (chosen.report.excluded + test_report.excluded > 0) {
    ctx.warn() << "warning: " << chosen.report.excluded << " val and " << test_report.excluded
               << " test pairs excluded for absent scores\n";
    return kExitWarnings;
  }
  return kExitOk;
}

inline int cmd_evaluate(const CommandContext& ctx) {
  const auto& cfg = ctx.config;
  const TraitSet traits = pipeline::discover_traits(cfg, Split::Test);
  const auto test = pipeline::load_tables(cfg, Split::Test, traits);
  const auto out_dir = cfg.out / "eval";
  bool warnings = false;
  for (auto t : kAllTraits) {
    const auto& tab = test[index_of(t)];
    if (!tab) continue;
    const auto rep = pipeline::single_trait_report(*tab, cfg.far_targets, true);
    pipeline::write_json(out_dir / ("metrics_" + std::string(trait_id(t)) + ".json"),
                         pipeline::labeled_metrics(rep, std::string(trait_id(t)), Split::Test));
    pipeline::write_text(out_dir / ("det_" + std::string(trait_id(t)) + ".csv"), pipeline::curve_csv(rep.curve));
    ctx.log() << "evaluate: " << trait_id(t) << ": " << pipeline::metrics_text(rep, cfg.far_targets) << "\n";
    if (rep.excluded > 0) {
      warnings = true;
      ctx.warn() << "warning: " << trait_id(t) << ": " << rep.excluded << " test pairs without a score\n";
    }
  }

  if (cfg.concat_baseline) {
    const Dataset data = pipeline::load_dataset(cfg, ctx.log());
    const EvalProtocol protocol = make_protocol(data.keys(), cfg.splits);
    TraitSet loaded;
    for (auto t : kAllTraits) {
      if (data.has_trait(t)) loaded.insert(t);
    }
    const auto subsets = combination_subsets(loaded);
    std::vector<MetricsReport> reports(subsets.size());
    for (std::size_t i = 0; i < subsets.size(); ++i) {
      const auto fused = concat_scores(data, protocol.pairs(Split::Test), subsets[i], ctx.threads);
      reports[i] = evaluate(fused.genuine, fused.impostor, cfg.far_targets, false);
      reports[i].excluded = fused.excluded;
      warnings = warnings || fused.excluded > 0;
    }
    nlohmann::ordered_json j;
    j["schema"] = std::string(kConcatSchema);
    j["method"] = "untrained concatenation of unit-normalized trait features";
    nlohmann::ordered_json rows = nlohmann::ordered_json::array();
    for (std::size_t i = 0; i < subsets.size(); ++i) {
      nlohmann::ordered_json row;
      row["traits"] = pipeline::traits_json(subsets[i]);
      row["test"] = metrics_to_json(reports[i]);
      rows.push_back(row);
    }
    j["rows"] = rows;
    pipeline::write_json(out_dir / "concat.json", j);
    ctx.log() << "evaluate: concatenation baseline over " << subsets.size() << " combinations\n";
  }
  return warnings ? kExitWarnings : kExitOk;
}

struct ReportTables {
  std::vector<SingleRow> singles;
  std::vector<FusionRow> fusion;
  std::vector<ConcatRow> concat;
  int weight_decimals = 1;
  std::string criterion;
  double step = 0.1;
};

inline ReportTables load_report_tables(const RunConfig& cfg) {
  ReportTables r;
  const auto eval_dir = cfg.out / "eval";
  for (auto t : kAllTraits) {
    const auto p = eval_dir / ("metrics_" + std::string(trait_id(t)) + ".json");
    if (!std::filesystem::exists(p)) continue;
    const auto j = pipeline::read_json(p, kMetricsSchema);
    r.singles.push_back({t, metrics_from_json(j)});
  }
  const auto combos = cfg.out / "sweep" / "combinations.json";
  if (std::filesystem::exists(combos)) {
    const auto j = pipeline::read_json(combos, kCombinationsSchema);
    r.step = j.at("step").get<double>();
    r.criterion = j.at("criterion").get<std::string>();
    r.weight_decimals = weight_decimals(r.step);
    for (const auto& row : j.at("rows")) {
      r.fusion.push_back({pipeline::traits_from_json(row.at("traits")), pipeline::weights_from_json(row.at("weights")),
                          metrics_from_json(row.at("test"))});
    }
  }
  const auto concat = eval_dir / "concat.json";
  if (std::filesystem::exists(concat)) {
    const auto j = pipeline::read_json(concat, kConcatSchema);
    for (const auto& row : j.at("rows")) {
      r.concat.push_back({pipeline::traits_from_json(row.at("traits")), metrics_from_json(row.at("test"))});
    }
  }
  return r;
}

inline std::string render_report(const ReportTables& r, std::span<const double> targets) {
  std::string text = std::string(kReportHeader) + "\n";
  if (!r.singles.empty()) {
    text += "\nSingle traits (test)\n";
    text += render_single_table(r.singles, targets);
  }
  if (!r.fusion.empty()) {
    text += "\nScore-level fusion (weights selected on val by " + r.criterion + ", step " + format_sig9(r.step) +
            "; metrics on test)\n";
    text += render_fusion_table(r.fusion, targets, r.weight_decimals);
  }
  if (!r.concat.empty()) {
    text += "\nFeature-level fusion, untrained concatenation baseline (test)\n";
    text += render_concat_table(r.concat, targets);
  }
  return text;
}

inline int cmd_report(const CommandContext& ctx) {
  const auto& cfg = ctx.config;
  const auto tables = load_report_tables(cfg);
  if (tables.singles.empty() && tables.fusion.empty() && tables.concat.empty()) {
    throw IngestError("report: no metrics under " + cfg.out.string() + " (run evaluate and/or sweep first)");
  }
  const auto text = render_report(tables, cfg.far_targets);
  const auto dir = cfg.out / "report";
  pipeline::write_text(dir / "report.txt", text);
  if (!tables.singles.empty()) pipeline::write_text(dir / "single.csv", render_single_csv(tables.singles, cfg.far_targets));
  if (!tables.fusion.empty()) {
    pipeline::write_text(dir / "fusion.csv", render_fusion_csv(tables.fusion, cfg.far_targets, tables.weight_decimals));
  }
  if (!tables.concat.empty()) pipeline::write_text(dir / "concat.csv", render_concat_csv(tables.concat, cfg.far_targets));
  ctx.log() << text;
  return kExitOk;
}

// ---------------------------------------------------------------------------
// Geometry utilities

namespace pipeline {

inline Point2 point_from_json(const nlohmann::json& j) { return {j.at(0).get<double>(), j.at(1).get<double>()}; }
inline nlohmann::ordered_json point_json(Point2 p) { return nlohmann::ordered_json::array({p.x, p.y}); }

inline nlohmann::json read_plain_json(const std::filesystem::path& p) {
  std::ifstream is(p);
  if (!is) throw IngestError(p.string() + ": cannot open");
  try {
    return nlohmann::json::parse(is);
  } catch (const nlohmann::json::exception& e) {
    throw IngestError(p.string() + ": " + e.what());
  }
}

}  // namespace pipeline

inline FaceKeypoints load_keypoints(const std::filesystem::path& p) {
  const auto j = pipeline::read_plain_json(p);
  try {
    return {pipeline::point_from_json(j.at("left_eye")), pipeline::point_from_json(j.at("right_eye")),
            pipeline::point_from_json(j.at("nose_center")), pipeline::point_from_json(j.at("left_eyebrow_center"))};
  } catch (const nlohmann::json::exception& e) {
    throw IngestError(p.string() + ": " + e.what());
  }
}

inline IrisCircles load_circles(const std::filesystem::path& p) {
  const auto j = pipeline::read_plain_json(p);
  try {
    IrisCircles c;
    c.pupil_center = pipeline::point_from_json(j.at("pupil_center"));
    c.pupil_radius = j.at("pupil_radius").get<double>();
    c.iris_center = pipeline::point_from_json(j.at("iris_center"));
    c.iris_radius = j.at("iris_radius").get<double>();
    return c;
  } catch (const nlohmann::json::exception& e) {
    throw IngestError(p.string() + ": " + e.what());
  }
}

inline int cmd_geometry_face(const CommandContext& ctx, const std::filesystem::path& image_path,
                             const std::filesystem::path& keypoints_path) {
  const auto image = read_pgm(image_path);
  const auto kp = load_keypoints(keypoints_path);
  const auto traits = extract_trait_images(image, kp, ctx.config.crop);
  const auto specs = trait_crop_specs(traits.face.keypoints, ctx.config.crop);
  const auto dir = ctx.config.out / "geometry";
  pipeline::ensure_dir(dir);
  write_pgm(dir / "face.pgm", traits.face.image);
  write_pgm(dir / "face_valid.pgm", traits.face.valid);
  write_pgm(dir / "periocular.pgm", traits.periocular.image);
  write_pgm(dir / "nose.pgm", traits.nose.image);
  write_pgm(dir / "eyebrow.pgm", traits.eyebrow.image);

  nlohmann::ordered_json j;
  j["schema"] = std::string(kGeometrySchema);
  j["angle"] = traits.face.angle;
  const auto& k = traits.face.keypoints;
  j["keypoints"] = {{"left_eye", pipeline::point_json(k.left_eye)},
                    {"right_eye", pipeline::point_json(k.right_eye)},
                    {"nose_center", pipeline::point_json(k.nose_center)},
                    {"left_eyebrow_center", pipeline::point_json(k.left_eyebrow_center)}};
  auto crop_json = [](const CropSpec& s, const CropResult& r) {
    nlohmann::ordered_json c;
    c["center"] = pipeline::point_json(s.center);
    c["width"] = s.width;
    c["height"] = s.height;
    c["clipped_fraction"] = r.clipped_fraction;
    return c;
  };
  j["crops"] = {{"periocular", crop_json(specs.periocular, traits.periocular)},
                {"nose", crop_json(specs.nose, traits.nose)},
                {"eyebrow", crop_json(specs.eyebrow, traits.eyebrow)}};
  pipeline::write_json(dir / "face.json", j);
  ctx.log() << "geometry: rotation " << format_sig9(traits.face.angle) << " rad undone; crops written to " << dir.string() << "\n";
  const bool clipped = traits.periocular.clipped_fraction > 0 || traits.nose.clipped_fraction > 0 ||
                       traits.eyebrow.clipped_fraction > 0;
  if (clipped) ctx.warn() << "warning: at least one crop extends past the image border\n";
  return clipped ? kExitWarnings : kExitOk;
}

inline int cmd_geometry_iris(const CommandContext& ctx, const std::filesystem::path& image_path,
                             const std::filesystem::path& circles_path, const std::optional<std::filesystem::path>& mask_path) {
  const auto image = read_pgm(image_path);
  auto circles = load_circles(circles_path);
  if (mask_path) circles.occlusion_mask = read_pgm(*mask_path);
  const auto norm = rubber_sheet(image, circles, ctx.config.iris_rows, ctx.config.iris_cols);
  const auto subs = split_subimages(norm);
  const auto dir = ctx.config.out / "geometry";
  pipeline::ensure_dir(dir);
  write_pgm(dir / "iris_rect.pgm", norm.rect);
  write_pgm(dir / "iris_mask.pgm", norm.mask);
  for (std::size_t i = 0; i < kIrisSubimages; ++i) {
    write_pgm(dir / ("iris_sub" + std::to_string(i) + ".pgm"), subs.rects[i]);
    write_pgm(dir / ("iris_sub" + std::to_string(i) + "_mask.pgm"), subs.masks[i]);
  }
  nlohmann::ordered_json j;
  j["schema"] = std::string(kGeometrySchema);
  j["size"] = {ctx.config.iris_rows, ctx.config.iris_cols};
  j["mask_ratios"] = subs.mask_ratios;
  j["mask_mean"] = norm.mask.mean();
  pipeline::write_json(dir / "iris.json", j);
  ctx.log() << "geometry: iris " << ctx.config.iris_rows << "x" << ctx.config.iris_cols << ", mask ratios";
  for (double m : subs.mask_ratios) ctx.log() << ' ' << format_sig9(m);
  ctx.log() << "\n";
  return kExitOk;
}

}  // namespace fusebench
