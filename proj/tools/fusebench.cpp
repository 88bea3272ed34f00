// fusebench command-line driver.

#include <cstdlib>
#include <filesystem>
#include <iostream>
#include <optional>
#include <string>

#include <CLI11.hpp>

#include "fusebench/config.hpp"
#include "fusebench/error.hpp"
#include "fusebench/fusion.hpp"
#include "fusebench/parallel.hpp"
#include "fusebench/pipeline.hpp"

namespace fb = fusebench;

namespace {

struct GlobalOptions {
  std::string config;
  std::optional<std::string> out;
  std::optional<double> step;
  std::optional<std::string> criterion;
  std::optional<std::uint64_t> seed;
  std::optional<std::string> threads;
};

fb::RunConfig build_config(const GlobalOptions& g) {
  fb::RunConfig cfg;
  if (!g.config.empty()) {
    cfg = fb::load_config(g.config);
  } else {
    cfg.out = "out";
  }
  if (g.out) cfg.out = *g.out;
  if (g.step) {
    fb::simplex_divisions(*g.step);
    cfg.step = *g.step;
  }
  if (g.criterion) cfg.criterion = fb::parse_criterion(*g.criterion);
  if (g.seed) {
    cfg.seed = *g.seed;
    if (cfg.synth) cfg.synth->embeddings.seed = *g.seed;
  }
  return cfg;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"fusebench: score-level fusion benchmark for face-region traits"};
  app.require_subcommand(1);
  GlobalOptions g;
  auto add_common = [&](CLI::App* sub, bool needs_config) {
    auto* opt = sub->add_option("--config", g.config, "run configuration (JSON)");
    if (needs_config) opt->required();
    sub->add_option("--out", g.out, "output directory (overrides the config)");
    sub->add_option("--threads", g.threads, "worker threads: a positive count or 'auto' (default: FUSEBENCH_THREADS, else auto)");
  };

  auto* score = app.add_subcommand("score", "compute per-trait score tables for every split");
  add_common(score, true);

  auto* sweep = app.add_subcommand("sweep", "grid-search fusion weights on val and evaluate the selection on test");
  add_common(sweep, true);
  sweep->add_option("--step", g.step, "simplex grid step (1/step must be an integer)");
  sweep->add_option("--criterion", g.criterion, "selection criterion: eer, frr_far_0.1 or frr_far_0.01");

  auto* evaluate = app.add_subcommand("evaluate", "single-trait test metrics and the concatenation baseline");
  add_common(evaluate, true);

  auto* report = app.add_subcommand("report", "render result tables from evaluate and sweep outputs");
  add_common(report, false);

  auto* synth = app.add_subcommand("synth", "generate synthetic features or score tables");
  add_common(synth, true);
  synth->add_option("--seed", g.seed, "master seed (overrides the config)");

  auto* geometry = app.add_subcommand("geometry", "run alignment and cropping on one image");
  geometry->require_subcommand(1);
  std::string image;
  std::string keypoints;
  std::string circles;
  std::optional<std::string> mask;
  auto* face = geometry->add_subcommand("face", "rotate a face upright and cut the trait crops");
  add_common(face, false);
  face->add_option("--image", image, "face image (binary PGM)")->required();
  face->add_option("--keypoints", keypoints, "keypoints JSON")->required();
  auto* iris = geometry->add_subcommand("iris", "unwrap an iris to a normalized rectangle");
  add_common(iris, false);
  iris->add_option("--image", image, "eye image (binary PGM)")->required();
  iris->add_option("--circles", circles, "pupil and iris circles JSON")->required();
  iris->add_option("--mask", mask, "occlusion mask (binary PGM, white = valid)");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int rc = app.exit(e);
    return rc == 0 ? 0 : fb::kExitInputError;
  }

  try {
    fb::CommandContext ctx;
    ctx.config = build_config(g);
    ctx.threads = fb::resolve_threads(g.threads);
    ctx.out = &std::cout;
    ctx.err = &std::cerr;
    if (*score) return fb::cmd_score(ctx);
    if (*sweep) return fb::cmd_sweep(ctx);
    if (*evaluate) return fb::cmd_evaluate(ctx);
    if (*report) return fb::cmd_report(ctx);
    if (*synth) return fb::cmd_synth(ctx);
    if (*face) return fb::cmd_geometry_face(ctx, image, keypoints);
    if (*iris) {
      std::optional<std::filesystem::path> m;
      if (mask) m = *mask;
      return fb::cmd_geometry_iris(ctx, image, circles, m);
    }
  } catch (const fb::Error& e) {
    std::cerr << "error: " << e.what() << "\n";
    return fb::kExitInputError;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return fb::kExitInputError;
  }
  return fb::kExitInputError;
}
