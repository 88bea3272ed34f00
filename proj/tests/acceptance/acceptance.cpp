// Acceptance checks. Prints one PASS/FAIL line per criterion and exits
// nonzero if any fails.

#include <bit>
#include <chrono>
#include <cstdio>
#include <functional>
#include <iostream>
#include <numbers>
#include <random>

#include <nlohmann/json.hpp>

#include "fusebench/config.hpp"
#include "fusebench/fusion.hpp"
#include "fusebench/matching.hpp"
#include "fusebench/metrics.hpp"
#include "fusebench/pipeline.hpp"
#include "fusebench/synth.hpp"
#include "support/oracles.hpp"

namespace fs = std::filesystem;
using namespace fusebench;

namespace {

const fs::path kFixtures = FUSEBENCH_FIXTURES;
const fs::path kGolden = FUSEBENCH_GOLDEN;

struct Outcome {
  bool pass = true;
  std::string detail;

  void require(bool ok, const std::string& what) {
    if (!ok && pass) detail = what;
    pass = pass && ok;
  }
};

double seconds_since(std::chrono::steady_clock::time_point t0) {
  return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
}

std::string fmt(const char* f, double a, double b = 0) {
  char buf[160];
  std::snprintf(buf, sizeof buf, f, a, b);
  return buf;
}

bool same_bits(double a, double b) { return std::bit_cast<std::uint64_t>(a) == std::bit_cast<std::uint64_t>(b); }

bool same_report(const MetricsReport& a, const MetricsReport& b) {
  if (!same_bits(a.eer, b.eer) || !same_bits(a.eer_threshold, b.eer_threshold)) return false;
  if (a.genuine_n != b.genuine_n || a.impostor_n != b.impostor_n || a.excluded != b.excluded) return false;
  if (a.frr_at_far.size() != b.frr_at_far.size() || a.curve.points.size() != b.curve.points.size()) return false;
  for (std::size_t i = 0; i < a.frr_at_far.size(); ++i) {
    const auto& x = a.frr_at_far[i];
    const auto& y = b.frr_at_far[i];
    if (!same_bits(x.frr, y.frr) || !same_bits(x.far, y.far) || !same_bits(x.threshold, y.threshold) ||
        x.false_accepts != y.false_accepts || x.false_rejects != y.false_rejects) {
      return false;
    }
  }
  for (std::size_t i = 0; i < a.curve.points.size(); ++i) {
    const auto& x = a.curve.points[i];
    const auto& y = b.curve.points[i];
    if (!same_bits(x.threshold, y.threshold) || !same_bits(x.far, y.far) || !same_bits(x.frr, y.frr)) return false;
  }
  return true;
}

oracle::CliResult cli(const std::string& args, const fs::path& out) {
  return oracle::run_cli(args + " --out " + oracle::shell_quote(out.string()), out);
}

std::string cfg_arg(const char* name) { return oracle::shell_quote((kFixtures / name).string()); }

bool run_steps(Outcome& o, const std::vector<std::string>& steps, const std::string& extra, const fs::path& out) {
  for (const auto& s : steps) {
    const auto r = cli(s + extra, out);
    if (r.status != 0) {
      o.require(false, "`" + s + "` exited " + std::to_string(r.status) + ": " + r.output.substr(0, 200));
      return false;
    }
  }
  return true;
}

// ---------------------------------------------------------------------------

Outcome metric_oracle() {
  Outcome o;
  std::mt19937_64 rng(20240611);
  const std::vector<double> targets{0.1, 0.01, 0.001, 0.0001};
  double lib_time = 0;
  double worst = 0;
  for (int trial = 0; trial < 200; ++trial) {
    const std::size_t ng = 1 + rng() % 2000;
    const std::size_t ni = 1 + rng() % 2000;
    const double grain = trial % 3 == 0 ? 0.02 : 1e-12;
    std::normal_distribution<double> gd(0.1 + (rng() % 100) / 100.0, 0.25);
    std::normal_distribution<double> id(0.0, 0.25);
    std::vector<double> g(ng);
    std::vector<double> im(ni);
    for (auto& x : g) x = std::round(gd(rng) / grain) * grain;
    for (auto& x : im) x = std::round(id(rng) / grain) * grain;
    const auto t0 = std::chrono::steady_clock::now();
    const auto r = evaluate(g, im, targets, false);
    lib_time += seconds_since(t0);
    const auto ne = oracle::naive_eer(g, im);
    worst = std::max(worst, std::abs(r.eer - ne.eer));
    o.require(std::abs(r.eer - ne.eer) <= 1e-12, "eer mismatch in trial " + std::to_string(trial));
    for (const auto& op : r.frr_at_far) {
      const auto nf = oracle::naive_frr_at_far(g, im, op.target);
      worst = std::max(worst, std::abs(op.frr - nf.frr));
      o.require(std::abs(op.frr - nf.frr) <= 1e-12, "frr_at_far mismatch in trial " + std::to_string(trial));
    }
  }
  o.require(lib_time < 30.0, fmt("runtime %.2f s", lib_time));
  if (o.pass) o.detail = fmt("200 sets, max |diff| %.3g, %.3f s", worst, lib_time);
  return o;
}

Outcome gaussian_eer() {
  Outcome o;
  const auto t0 = std::chrono::steady_clock::now();
  const ScoreModel m{0.6, 0.0, 0.15};
  const auto d = gen_scores(m, 100000, 100000, 12345);
  const double e = evaluate(d.genuine, d.impostor, kDefaultFarTargets, false).eer;
  const double t = seconds_since(t0);
  const double expect = 0.5 * std::erfc(2.0 / std::numbers::sqrt2);
  o.require(std::abs(e - expect) <= 0.003, fmt("EER %.5f vs %.5f", e, expect));
  o.require(t < 10.0, fmt("runtime %.2f s", t));
  if (o.pass) o.detail = fmt("EER %.4f%% vs %.4f%%", 100 * e, 100 * expect);
  return o;
}

Outcome fusion_identity() {
  Outcome o;
  const auto cfg = load_config(kFixtures / "pipeline.json");
  const auto data = gen_embeddings(cfg.synth->embeddings);
  const auto keys = data.keys();
  const auto protocol = make_protocol(keys, cfg.splits);
  int checked = 0;
  for (auto sp : {Split::Val, Split::Test}) {
    auto pairs = std::make_shared<const PairList>(protocol.pairs(sp));
    ScoreTables tables;
    for (auto t : kAllTraits) tables[index_of(t)] = score_table(data, t, pairs);
    for (auto t : kAllTraits) {
      const auto single = pipeline::single_trait_report(*tables[index_of(t)], cfg.far_targets, true);
      const auto fused = evaluate_fused(tables, FusionWeights::one_hot(t), cfg.far_targets, true);
      o.require(same_report(single, fused), std::string("differs for ") + std::string(trait_id(t)));
      ++checked;
    }
  }
  if (o.pass) o.detail = std::to_string(checked) + " trait/split reports bit-identical";
  return o;
}

Outcome sweep_counts() {
  Outcome o;
  o.require(enumerate_simplex(0.1, TraitSet::all()).size() == 1001, "full simplex is not 1001");
  o.require(oracle::brute_simplex_count(10, 5) == 1001, "brute force is not 1001");
  std::size_t checked = 0;
  for (auto subset : combination_subsets(TraitSet::all())) {
    const int k = static_cast<int>(subset.size());
    if (k < 2 || k > 4) continue;
    const auto n = enumerate_simplex(0.1, subset).size();
    const auto closed = oracle::binomial(10 + k - 1, k - 1);
    o.require(n == closed && n == oracle::brute_simplex_count(10, k), "count mismatch for a " + std::to_string(k) + "-subset");
    for (const auto& w : enumerate_simplex(0.1, subset)) o.require(w.support().is_subset_of(subset), "vector outside subset");
    ++checked;
  }
  o.require(checked == 25, "expected 25 pair/triple/quad subsets");
  if (o.pass) o.detail = "1001 total; pairs 11, triples 66, quads 286 over 25 subsets";
  return o;
}

Outcome fusion_gain() {
  Outcome o;
  const auto dir = oracle::fresh_dir("acc_gain");
  if (!run_steps(o, {"synth", "sweep", "evaluate"}, " --config " + cfg_arg("gain3.json"), dir)) return o;
  const double fused = nlohmann::json::parse(oracle::slurp(dir / "sweep" / "metrics_fused.json"))["eer"].get<double>();
  std::string singles;
  for (const char* t : {"face", "periocular", "nose"}) {
    const double e =
        nlohmann::json::parse(oracle::slurp(dir / "eval" / ("metrics_" + std::string(t) + ".json")))["eer"].get<double>();
    o.require(fused < e, std::string("fused not below ") + t);
    singles += fmt(" %.3f", 100 * e);
  }
  if (o.pass) o.detail = fmt("fused %.3f%% vs singles", 100 * fused) + singles;
  return o;
}

Outcome geometry_round_trip() {
  Outcome o;
  const FaceKeypoints level{{110, 120}, {170, 120}, {140, 165}, {110, 92}};
  const Point2 mid0{140, 120};
  const Point2 centre{127.5, 127.5};
  double worst = 0;
  for (double deg : {5.0, -5.0, 20.0, -20.0, 45.0}) {
    const double a = deg * std::numbers::pi / 180.0;
    const auto rotated = rotate_keypoints(level, centre, a);
    const auto img = oracle::render_blobs(256, 256, {rotated.left_eye, rotated.right_eye, rotated.nose_center}, 3.0);
    const auto r = normalize_rotation(img, rotated);
    const Point2 mid{(r.keypoints.left_eye.x + r.keypoints.right_eye.x) / 2, (r.keypoints.left_eye.y + r.keypoints.right_eye.y) / 2};
    const Point2 got[] = {r.keypoints.left_eye, r.keypoints.right_eye, r.keypoints.nose_center, r.keypoints.left_eyebrow_center};
    const Point2 want[] = {level.left_eye, level.right_eye, level.nose_center, level.left_eyebrow_center};
    for (int i = 0; i < 4; ++i) {
      const double err = distance({got[i].x - mid.x, got[i].y - mid.y}, {want[i].x - mid0.x, want[i].y - mid0.y});
      worst = std::max(worst, err);
      o.require(err <= 1.0, fmt("keypoint error %.3f px at %.0f deg", err, deg));
    }
    for (int i = 0; i < 3; ++i) {
      const double err = distance(oracle::centroid(r.image, got[i], 10), got[i]);
      worst = std::max(worst, err);
      o.require(err <= 1.0, fmt("image blob off by %.3f px at %.0f deg", err, deg));
    }
  }
  const Point2 c{127.5, 127.5};
  GrayImage field(256, 256);
  for (int y = 0; y < 256; ++y) {
    for (int x = 0; x < 256; ++x) field.at(x, y) = std::hypot(x - c.x, y - c.y);
  }
  const auto n = rubber_sheet(field, {c, 30, c, 90, std::nullopt}, 64, 512);
  double sheet = 0;
  for (int row = 0; row < 64; ++row) {
    for (int col = 0; col < 512; ++col) sheet = std::max(sheet, std::abs(n.rect.at(col, row) - (30 + 60.0 * row / 63.0)));
  }
  o.require(sheet < 0.01, fmt("rubber sheet error %.4g", sheet));
  if (o.pass) o.detail = fmt("max keypoint/blob error %.3f px, rubber sheet %.2e", worst, sheet);
  return o;
}

Outcome iris_aggregation() {
  Outcome o;
  std::mt19937_64 rng(99);
  std::normal_distribution<float> nd;
  std::uniform_real_distribution<double> ud(0.0, 1.0);
  auto make = [&](const std::string& s, double zero_p) {
    std::array<std::vector<float>, kIrisSubimages> subs;
    std::array<double, kIrisSubimages> m{};
    for (std::size_t i = 0; i < kIrisSubimages; ++i) {
      subs[i].resize(32);
      for (auto& x : subs[i]) x = nd(rng);
      m[i] = ud(rng) < zero_p ? 0.0 : ud(rng);
    }
    return IrisRecord::make({s, "1"}, subs, m);
  };
  double worst = 0;
  int compared = 0;
  for (int i = 0; i < 1000; ++i) {
    const auto a = make("A", 0.2);
    const auto b = make("B", 0.2);
    std::array<double, 4> sub{};
    double den = 0;
    for (std::size_t k = 0; k < 4; ++k) {
      sub[k] = oracle::cosine_quad(a.subvectors[k], b.subvectors[k]);
      den += a.mask_ratios[k] * b.mask_ratios[k];
    }
    if (den == 0) continue;
    const double err = std::abs(iris_score(a, b) - oracle::iris_formula(sub, a.mask_ratios, b.mask_ratios));
    worst = std::max(worst, err);
    o.require(err <= 1e-12, fmt("iris score off by %.3g", err));
    ++compared;
  }
  o.require(compared > 900, "too few comparable templates");

  // Subject S2 has one fully occluded sample: every pair touching it is absent.
  Dataset data;
  TraitFeatures f;
  f.trait = TraitKind::Iris;
  f.dim = 32;
  for (const char* s : {"S1", "S2", "S3"}) {
    for (const char* j : {"1", "2"}) {
      auto r = make(s, 0.0);
      r.key = {s, j};
      for (auto& m : r.mask_ratios) m = std::max(m, 0.1);
      if (std::string(s) == "S2" && std::string(j) == "2") r.mask_ratios = {0, 0, 0, 0};
      f.iris.push_back(r);
    }
  }
  data.add(f);
  const auto keys = data.keys();
  const auto pairs = std::make_shared<const PairList>(enumerate_pairs(keys));
  ScoreTableStats stats;
  ScoreTables tables;
  tables[index_of(TraitKind::Iris)] = score_table(data, TraitKind::Iris, pairs, 1, &stats);
  const auto& tab = *tables[index_of(TraitKind::Iris)];
  o.require(stats.occluded == 5 && tab.absent_count() == 5, "expected 5 occluded pairs tallied");
  const auto fused = fuse_tables(tables, FusionWeights::one_hot(TraitKind::Iris));
  o.require(fused.excluded == 5 && fused.genuine.size() + fused.impostor.size() == 10, "occluded pairs not excluded");
  if (o.pass) o.detail = fmt("%.0f templates, max |diff| %.3g; 5 occluded pairs absent", compared, worst);
  return o;
}

Outcome protocol_counts() {
  Outcome o;
  for (std::size_t n = 1; n <= 10; ++n) {
    for (std::size_t m = 1; m <= 6; ++m) {
      std::vector<SampleKey> keys;
      for (std::size_t s = 0; s < n; ++s) {
        for (std::size_t j = 0; j < m; ++j) keys.push_back({subject_id(1, s), sample_id(j)});
      }
      std::shuffle(keys.begin(), keys.end(), std::mt19937(static_cast<unsigned>(n * 10 + m)));
      const auto p = enumerate_pairs(keys);
      const auto g = n * oracle::binomial(m, 2);
      const auto i = oracle::binomial(n * m, 2) - g;
      o.require(p.genuine_count() == g && p.impostor_count() == i,
                "counts differ at (" + std::to_string(n) + ", " + std::to_string(m) + ")");
    }
  }
  if (o.pass) o.detail = "60 grids up to (10, 6)";
  return o;
}

std::vector<fs::path> files_under(const fs::path& root) {
  std::vector<fs::path> out;
  for (const auto& e : fs::recursive_directory_iterator(root)) {
    if (e.is_regular_file() && e.path().filename() != "cli.log") out.push_back(fs::relative(e.path(), root));
  }
  std::sort(out.begin(), out.end());
  return out;
}

Outcome determinism() {
  Outcome o;
  const std::vector<std::string> steps{"synth", "score", "sweep", "evaluate", "report"};
  const auto cfg = " --config " + cfg_arg("pipeline.json");
  const fs::path dirs[] = {oracle::fresh_dir("acc_det_t1a"), oracle::fresh_dir("acc_det_t1b"), oracle::fresh_dir("acc_det_t8")};
  const char* threads[] = {" --threads 1", " --threads 1", " --threads 8"};
  for (int i = 0; i < 3; ++i) {
    if (!run_steps(o, steps, cfg + threads[i], dirs[i])) return o;
  }
  const auto ref = files_under(dirs[0]);
  o.require(ref.size() > 20, "too few outputs");
  for (int i = 1; i < 3; ++i) {
    o.require(files_under(dirs[i]) == ref, "different file sets");
    for (const auto& rel : ref) {
      o.require(oracle::slurp(dirs[0] / rel) == oracle::slurp(dirs[i] / rel), rel.string() + " differs");
    }
  }
  if (o.pass) o.detail = std::to_string(ref.size()) + " files identical across 3 runs (threads 1, 1, 8)";
  return o;
}

Outcome report_format() {
  Outcome o;
  const auto dir = oracle::fresh_dir("acc_report");
  if (!run_steps(o, {"synth", "score", "sweep", "evaluate", "report"}, " --config " + cfg_arg("pipeline.json"), dir)) return o;
  for (const char* rel : {"report/report.txt", "report/single.csv", "report/fusion.csv", "report/concat.csv"}) {
    const auto golden = kGolden / "pipeline" / rel;
    o.require(fs::exists(golden), std::string("missing golden ") + rel);
    o.require(oracle::slurp(dir / rel) == oracle::slurp(golden), std::string(rel) + " differs from golden");
  }
  const auto fusion = oracle::slurp(dir / "report" / "fusion.csv");
  o.require(fusion.find("---") != std::string::npos, "no excluded-trait marks");
  if (o.pass) o.detail = "report.txt, single.csv, fusion.csv, concat.csv match goldens";
  return o;
}

}  // namespace

int main() {
  const std::vector<std::pair<const char*, std::function<Outcome()>>> criteria{
      {"metric-oracle-equivalence", metric_oracle},
      {"gaussian-eer-closed-form", gaussian_eer},
      {"fusion-identity", fusion_identity},
      {"sweep-exhaustiveness", sweep_counts},
      {"fusion-gain", fusion_gain},
      {"geometry-round-trip", geometry_round_trip},
      {"iris-aggregation", iris_aggregation},
      {"protocol-counts", protocol_counts},
      {"determinism", determinism},
      {"report-format", report_format},
  };
  int failed = 0;
  for (const auto& [name, fn] : criteria) {
    Outcome o;
    try {
      o = fn();
    } catch (const std::exception& e) {
      o.pass = false;
      o.detail = std::string("exception: ") + e.what();
    }
    std::cout << (o.pass ? "PASS " : "FAIL ") << name << ": " << o.detail << std::endl;
    failed += o.pass ? 0 : 1;
  }
  std::cout << (failed ? "FAILED " : "ALL PASSED ") << (criteria.size() - failed) << "/" << criteria.size() << std::endl;
  return failed ? 1 : 0;
}
