// pentrack: command-line front end.

#include "pentrack/errors.hpp"
#include "pentrack/io.hpp"
#include "pentrack/pipeline.hpp"

#include <CLI11.hpp>

#include <fstream>
#include <iostream>
#include <optional>
#include <sstream>
#include <string>

namespace {

using namespace pentrack;
namespace fs = std::filesystem;

std::string slurp(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) {
    throw ConfigInvalid(path.string(), "cannot open config file");
  }
  std::ostringstream os;
  os << in.rdbuf();
  return os.str();
}

void emit(const std::string& path, const std::string& text) {
  if (path.empty()) {
    std::cout << text;
  } else {
    write_text_file(path, text);
  }
}

struct SimulateArgs {
  std::string config;
  std::string out_dir;
  std::optional<std::uint64_t> seed;
};

int cmd_simulate(const SimulateArgs& a) {
  PenConfig cfg = parse_pen_config(slurp(a.config));
  if (a.seed) {
    cfg.seed = *a.seed;
  }
  const SceneBundle bundle = simulate(cfg);
  for (const auto& name : write_bundle(bundle, a.out_dir)) {
    std::cout << (fs::path(a.out_dir) / name).string() << '\n';
  }
  return 0;
}

struct EstimateArgs {
  std::string correspondences;
  std::string output;
  RansacParams ransac;
};

int cmd_estimate(const EstimateArgs& a) {
  const auto pairs = read_file(a.correspondences, read_correspondences);
  const RansacResult r = estimate_ransac(pairs, a.ransac);
  std::ostringstream os;
  write_homography(os, r.h,
                   "inliers " + std::to_string(r.inlier_count) + " of " +
                       std::to_string(pairs.size()));
  if (!a.output.empty()) {
    write_text_file(a.output, os.str());
  }
  std::cout << os.str();
  return 0;
}

struct TrackArgs {
  std::string detections;
  std::string appearance;
  std::string output;
  TrackerConfig tracker;
};

int cmd_track(const TrackArgs& a) {
  auto dets = read_file(a.detections, read_detections);
  if (!a.appearance.empty()) {
    read_file(a.appearance, [&](std::istream& in, const std::string& source) {
      read_appearance(in, source, dets);
      return 0;
    });
  }
  const auto tracks = track_detections(dets, a.tracker);
  std::ostringstream os;
  write_local_tracks(os, tracks);
  emit(a.output, os.str());
  return 0;
}

struct AlignArgs {
  std::string ceiling;
  std::string angled;
  std::string homography;
  std::string output;
  std::string matches;
  std::string audit;
  long offset = 0;
  GlobalConfig global;
};

int cmd_align(AlignArgs a) {
  const auto ceiling = read_file(a.ceiling, read_local_tracks);
  const auto angled = read_file(a.angled, read_local_tracks);
  const Homography h = read_file(a.homography, read_homography);
  a.global.audit = !a.audit.empty();
  const GlobalRunResult r = run_global(ceiling, angled, h, {a.offset}, a.global);
  std::ostringstream os;
  write_global_tracks(os, r.tracks);
  emit(a.output, os.str());
  if (!a.matches.empty()) {
    std::ostringstream ms;
    write_matches(ms, r.matches);
    write_text_file(a.matches, ms.str());
  }
  if (!a.audit.empty()) {
    write_text_file(a.audit, r.audit);
  }
  return 0;
}

struct EvaluateArgs {
  std::string gt;
  std::vector<std::string> pred;
  std::string matches;
  std::string output;
  double iou_threshold = kDefaultIouThreshold;
  long gt_offset = 0;
};

int cmd_evaluate(const EvaluateArgs& a) {
  const auto gt = read_file(a.gt, read_ground_truth);
  std::vector<AnnotatedBox> pred;
  for (const auto& p : a.pred) {
    const auto part = read_file(p, read_ground_truth);
    pred.insert(pred.end(), part.begin(), part.end());
  }
  std::vector<MatchRecord> matches;
  if (!a.matches.empty()) {
    matches = read_file(a.matches, read_matches);
  }
  const MetricsReport report = evaluate_run(gt, pred, matches, a.iou_threshold, a.gt_offset);
  emit(a.output, format_report(report));
  return 0;
}

struct PipelineArgs {
  std::string config;
  std::string output_dir;
  std::optional<std::uint64_t> seed;
  std::optional<long> offset;
};

int cmd_pipeline(const PipelineArgs& a) {
  const fs::path config_path(a.config);
  PipelineConfig cfg = parse_pipeline_config(slurp(config_path), config_path.parent_path());
  if (!a.output_dir.empty()) {
    cfg.output_dir = a.output_dir;
  }
  if (a.seed) {
    cfg.seed = *a.seed;
    cfg.homography.ransac.seed = *a.seed;
    if (cfg.scene) {
      cfg.scene->seed = *a.seed;
    }
  }
  if (a.offset) {
    cfg.alignment.frame_offset = *a.offset;
  }
  const RunReport report = run_pipeline(cfg);
  std::cout << format_run_report(report);
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Multi-camera tracking with homography handover"};
  app.require_subcommand(1);

  SimulateArgs sim;
  auto* s = app.add_subcommand("simulate", "Generate a synthetic two-camera scene bundle");
  s->add_option("config", sim.config, "Scene config (JSON)")->required();
  s->add_option("out_dir", sim.out_dir, "Output directory")->required();
  s->add_option("--seed", sim.seed, "Override the config seed");

  EstimateArgs est;
  auto* e = app.add_subcommand("estimate-homography", "RANSAC homography from correspondences");
  e->add_option("correspondences", est.correspondences, "Correspondence file")->required();
  e->add_option("-o,--output", est.output, "Also write the homography here");
  e->add_option("--ransac-threshold", est.ransac.threshold_px, "Inlier threshold (px)")
      ->check(CLI::PositiveNumber);
  e->add_option("--ransac-iters", est.ransac.iterations, "RANSAC iterations")
      ->check(CLI::PositiveNumber);
  e->add_option("--seed", est.ransac.seed, "RANSAC seed");

  TrackArgs trk;
  auto* t = app.add_subcommand("track", "Single-camera tracking over a detection CSV");
  t->add_option("detections", trk.detections, "Detection CSV")->required();
  t->add_option("--appearance", trk.appearance, "Appearance sidecar CSV");
  t->add_option("-o,--output", trk.output, "Track CSV (default stdout)");
  t->add_option("--confirm-hits", trk.tracker.confirm_hits)->check(CLI::PositiveNumber);
  t->add_option("--max-age", trk.tracker.max_age)->check(CLI::NonNegativeNumber);
  t->add_option("--gate", trk.tracker.gate)->check(CLI::NonNegativeNumber);
  t->add_option("--alpha", trk.tracker.alpha)->check(CLI::Range(0.0, 1.0));

  AlignArgs aln;
  auto* al = app.add_subcommand("align", "Cross-camera identity alignment");
  al->add_option("--ceiling", aln.ceiling, "Ceiling track CSV")->required();
  al->add_option("--angled", aln.angled, "Angled track CSV")->required();
  al->add_option("--homography", aln.homography, "Ceiling -> angled homography file")->required();
  al->add_option("-o,--output", aln.output, "Global track CSV (default stdout)");
  al->add_option("--matches", aln.matches, "Write per-frame matches here");
  al->add_option("--audit", aln.audit, "Write the matching audit log here");
  al->add_option("--offset", aln.offset, "Angled frame = ceiling frame + offset");
  al->add_option("--min-area", aln.global.align.min_area_px2, "Minimum overlap (px^2)")
      ->check(CLI::NonNegativeNumber);
  al->add_flag("--symmetric", aln.global.align.symmetric, "Also zero matched ceiling rows");
  al->add_option("--solo-grace", aln.global.registry.solo_grace)->check(CLI::NonNegativeNumber);
  al->add_option("--expiry", aln.global.registry.expiry)->check(CLI::NonNegativeNumber);

  EvaluateArgs ev;
  auto* v = app.add_subcommand("evaluate", "Tracking metrics against ground truth");
  v->add_option("--gt", ev.gt, "Ground-truth CSV")->required();
  v->add_option("--pred", ev.pred, "Predicted global track CSV (repeatable)")->required();
  v->add_option("--matches", ev.matches, "Predicted match file");
  v->add_option("-o,--output", ev.output, "Report file (default stdout)");
  v->add_option("--iou-threshold", ev.iou_threshold)->check(CLI::Range(0.0, 1.0));
  v->add_option("--gt-offset", ev.gt_offset, "Angled GT frame = ceiling GT frame + offset");

  PipelineArgs pip;
  auto* p = app.add_subcommand("pipeline", "Run simulate/ingest, track, align, evaluate");
  p->add_option("config", pip.config, "Pipeline config (JSON)")->required();
  p->add_option("--output-dir", pip.output_dir, "Override the output directory");
  p->add_option("--seed", pip.seed, "Override the seed");
  p->add_option("--offset", pip.offset, "Override the alignment offset");

  try {
    app.parse(argc, argv);
  } catch (const CLI::Success& ok) {
    return app.exit(ok);
  } catch (const CLI::ParseError& err) {
    app.exit(err);
    return static_cast<int>(ExitCode::ConfigError);
  }

  try {
    if (*s) return cmd_simulate(sim);
    if (*e) return cmd_estimate(est);
    if (*t) return cmd_track(trk);
    if (*al) return cmd_align(aln);
    if (*v) return cmd_evaluate(ev);
    if (*p) return cmd_pipeline(pip);
  } catch (const std::exception& err) {
    std::cerr << "pentrack: " << err.what() << '\n';
    return static_cast<int>(exit_code_for(err));
  }
  return static_cast<int>(ExitCode::Failure);
}
