#include "pentrack/pipeline.hpp"

#include "pentrack/errors.hpp"
#include "pentrack/io.hpp"

#include "json_fields.hpp"

#include <nlohmann/json.hpp>

#include <chrono>
#include <future>
#include <iomanip>
#include <set>
#include <sstream>
#include <stdexcept>

namespace pentrack {

namespace {

using nlohmann::json;
using detail::Fields;
namespace fs = std::filesystem;

class StageClock {
 public:
  explicit StageClock(std::vector<StageTiming>& out) : out_(out) {}

  template <typename F>
  auto run(const std::string& stage, F&& f) {
    const auto start = std::chrono::steady_clock::now();
    auto finish = [&] {
      const std::chrono::duration<double> d = std::chrono::steady_clock::now() - start;
      out_.push_back({stage, d.count()});
    };
    if constexpr (std::is_void_v<decltype(f())>) {
      f();
      finish();
    } else {
      auto result = f();
      finish();
      return result;
    }
  }

 private:
  std::vector<StageTiming>& out_;
};

fs::path existing_path(const Fields& f, const std::string& key, const fs::path& base,
                       bool required) {
  if (!f.has(key)) {
    if (required) {
      throw ConfigInvalid(f.name(key), "missing");
    }
    return {};
  }
  if (!f.at(key).is_string()) {
    throw ConfigInvalid(f.name(key), "expected a path string");
  }
  fs::path p = f.at(key).get<std::string>();
  if (p.is_relative()) {
    p = base / p;
  }
  if (!fs::exists(p)) {
    throw ConfigInvalid(f.name(key), "file does not exist: " + p.string());
  }
  return p;
}

void flag(const Fields& f, const std::string& key, bool& out) {
  if (!f.has(key)) {
    return;
  }
  if (!f.at(key).is_boolean()) {
    throw ConfigInvalid(f.name(key), "expected true or false");
  }
  out = f.at(key).get<bool>();
}

void check_tracker(const TrackerConfig& t) {
  if (t.confirm_hits < 1) {
    throw ConfigInvalid("tracker.confirm_hits", "must be at least 1");
  }
  if (t.max_age < 0) {
    throw ConfigInvalid("tracker.max_age", "must be non-negative");
  }
  if (!(t.gate >= 0.0)) {
    throw ConfigInvalid("tracker.gate", "must be non-negative");
  }
  if (!(t.alpha >= 0.0 && t.alpha <= 1.0)) {
    throw ConfigInvalid("tracker.alpha", "must be in [0, 1]");
  }
  if (!(t.kalman.std_position > 0.0) || !(t.kalman.std_velocity > 0.0) ||
      !(t.kalman.measurement_scale > 0.0)) {
    throw ConfigInvalid("tracker", "noise parameters must be positive");
  }
}

std::vector<Detection> load_detections(const fs::path& path, const fs::path& appearance) {
  auto dets = read_file(path, read_detections);
  if (!appearance.empty()) {
    read_file(appearance, [&](std::istream& in, const std::string& source) {
      read_appearance(in, source, dets);
      return 0;
    });
  }
  return dets;
}

long distinct_frames(std::span<const Detection> dets) {
  std::set<long> frames;
  for (const auto& d : dets) {
    frames.insert(d.frame);
  }
  return static_cast<long>(frames.size());
}

long distinct_ids(std::span<const LocalTrackRecord> records) {
  std::set<long> ids;
  for (const auto& r : records) {
    ids.insert(r.local_id);
  }
  return static_cast<long>(ids.size());
}

template <typename Writer, typename Items>
std::string to_text(Writer writer, const Items& items) {
  std::ostringstream os;
  writer(os, items);
  return os.str();
}

}  // namespace

ExitCode exit_code_for(const std::exception& e) {
  if (dynamic_cast<const ConfigInvalid*>(&e) != nullptr) {
    return ExitCode::ConfigError;
  }
  if (dynamic_cast<const NoConsensus*>(&e) != nullptr ||
      dynamic_cast<const TooFewPoints*>(&e) != nullptr ||
      dynamic_cast<const DegenerateConfiguration*>(&e) != nullptr ||
      dynamic_cast<const SingularHomography*>(&e) != nullptr) {
    return ExitCode::EstimationFailure;
  }
  if (dynamic_cast<const ParseError*>(&e) != nullptr ||
      dynamic_cast<const OutOfOrderFrame*>(&e) != nullptr ||
      dynamic_cast<const NonPositiveBox*>(&e) != nullptr ||
      dynamic_cast<const InvalidBox*>(&e) != nullptr ||
      dynamic_cast<const EmptyGroundTruth*>(&e) != nullptr) {
    return ExitCode::MalformedInput;
  }
  return ExitCode::Failure;
}

std::vector<LocalTrackRecord> track_detections(std::span<const Detection> detections,
                                               const TrackerConfig& cfg) {
  std::vector<LocalTrackRecord> out;
  if (detections.empty()) {
    return out;
  }
  Tracker tracker(cfg);
  std::size_t i = 0;
  for (long frame = detections.front().frame; frame <= detections.back().frame; ++frame) {
    const std::size_t begin = i;
    while (i < detections.size() && detections[i].frame == frame) {
      ++i;
    }
    if (i < detections.size() && detections[i].frame < frame) {
      throw OutOfOrderFrame(frame, detections[i].frame);
    }
    for (const auto& t : tracker.step(frame, detections.subspan(begin, i - begin))) {
      out.push_back({frame, t.local_id, t.box});
    }
  }
  return out;
}

PipelineConfig parse_pipeline_config(const std::string& json_text, const fs::path& base_dir) {
  json doc;
  try {
    doc = json::parse(json_text);
  } catch (const json::parse_error& e) {
    throw ConfigInvalid("<root>", e.what());
  }
  const Fields root(doc, "");
  root.only({"output_dir", "seed", "simulate", "inputs", "homography", "alignment", "tracker",
             "global", "metrics"});

  PipelineConfig cfg;
  root.integer("seed", cfg.seed);
  if (root.has("output_dir")) {
    if (!root.at("output_dir").is_string()) {
      throw ConfigInvalid("output_dir", "expected a path string");
    }
    cfg.output_dir = root.at("output_dir").get<std::string>();
    if (cfg.output_dir.is_relative()) {
      cfg.output_dir = base_dir / cfg.output_dir;
    }
  }

  if (root.has("simulate") == root.has("inputs")) {
    throw ConfigInvalid("simulate", "exactly one of 'simulate' and 'inputs' is required");
  }
  if (root.has("simulate")) {
    cfg.scene = parse_pen_config(root.at("simulate").dump(), "simulate");
    if (root.has("seed")) {
      cfg.scene->seed = cfg.seed;
    }
  } else {
    const Fields in(root.at("inputs"), "inputs");
    in.only({"ceiling", "angled", "ceiling_appearance", "angled_appearance", "ground_truth"});
    cfg.ceiling_detections = existing_path(in, "ceiling", base_dir, true);
    cfg.angled_detections = existing_path(in, "angled", base_dir, true);
    cfg.ceiling_appearance = existing_path(in, "ceiling_appearance", base_dir, false);
    cfg.angled_appearance = existing_path(in, "angled_appearance", base_dir, false);
    cfg.ground_truth = existing_path(in, "ground_truth", base_dir, false);
  }

  if (!root.has("homography")) {
    throw ConfigInvalid("homography", "missing; give a file, correspondences or a simulated source");
  }
  {
    const Fields h(root.at("homography"), "homography");
    h.only({"source", "path", "ransac_threshold", "ransac_iters"});
    if (!h.has("source") || !h.at("source").is_string()) {
      throw ConfigInvalid("homography.source", "missing");
    }
    const std::string source = h.at("source").get<std::string>();
    using Kind = HomographySource::Kind;
    if (source == "file") {
      cfg.homography.kind = Kind::File;
    } else if (source == "correspondences") {
      cfg.homography.kind = Kind::Correspondences;
    } else if (source == "simulated_truth") {
      cfg.homography.kind = Kind::SimulatedTruth;
    } else if (source == "simulated_correspondences") {
      cfg.homography.kind = Kind::SimulatedCorrespondences;
    } else if (source == "simulated_chain") {
      cfg.homography.kind = Kind::SimulatedChain;
    } else {
      throw ConfigInvalid("homography.source", "unknown source '" + source + "'");
    }
    const bool needs_file = cfg.homography.kind == Kind::File ||
                            cfg.homography.kind == Kind::Correspondences;
    if (needs_file) {
      cfg.homography.path = existing_path(h, "path", base_dir, true);
    } else if (!cfg.scene) {
      throw ConfigInvalid("homography.source", "simulated sources need a 'simulate' section");
    }
    h.number("ransac_threshold", cfg.homography.ransac.threshold_px);
    h.integer("ransac_iters", cfg.homography.ransac.iterations);
    if (!(cfg.homography.ransac.threshold_px > 0.0)) {
      throw ConfigInvalid("homography.ransac_threshold", "must be positive");
    }
    if (cfg.homography.ransac.iterations < 1) {
      throw ConfigInvalid("homography.ransac_iters", "must be at least 1");
    }
    cfg.homography.ransac.seed = cfg.seed;
  }

  if (root.has("alignment")) {
    const Fields a(root.at("alignment"), "alignment");
    a.only({"offset"});
    a.integer("offset", cfg.alignment.frame_offset);
  }

  if (root.has("tracker")) {
    const Fields t(root.at("tracker"), "tracker");
    t.only({"confirm_hits", "max_age", "gate", "alpha", "std_position", "std_velocity",
            "measurement_scale", "gallery_capacity"});
    t.integer("confirm_hits", cfg.tracker.confirm_hits);
    t.integer("max_age", cfg.tracker.max_age);
    t.number("gate", cfg.tracker.gate);
    t.number("alpha", cfg.tracker.alpha);
    t.number("std_position", cfg.tracker.kalman.std_position);
    t.number("std_velocity", cfg.tracker.kalman.std_velocity);
    t.number("measurement_scale", cfg.tracker.kalman.measurement_scale);
    t.integer("gallery_capacity", cfg.tracker.gallery_capacity);
  }
  check_tracker(cfg.tracker);

  if (root.has("global")) {
    const Fields g(root.at("global"), "global");
    g.only({"min_area", "symmetric", "solo_grace", "expiry", "audit"});
    g.number("min_area", cfg.global.align.min_area_px2);
    flag(g, "symmetric", cfg.global.align.symmetric);
    g.integer("solo_grace", cfg.global.registry.solo_grace);
    g.integer("expiry", cfg.global.registry.expiry);
    flag(g, "audit", cfg.global.audit);
    if (cfg.global.align.min_area_px2 < 0.0) {
      throw ConfigInvalid("global.min_area", "must be non-negative");
    }
    if (cfg.global.registry.solo_grace < 0 || cfg.global.registry.expiry < 0) {
      throw ConfigInvalid("global", "solo_grace and expiry must be non-negative");
    }
  }

  if (root.has("metrics")) {
    const Fields m(root.at("metrics"), "metrics");
    m.only({"iou_threshold", "gt_offset"});
    m.number("iou_threshold", cfg.iou_threshold);
    if (m.has("gt_offset")) {
      long off = 0;
      m.integer("gt_offset", off);
      cfg.gt_offset = off;
    }
    if (!(cfg.iou_threshold > 0.0 && cfg.iou_threshold <= 1.0)) {
      throw ConfigInvalid("metrics.iou_threshold", "must be in (0, 1]");
    }
  }
  return cfg;
}

MetricsReport evaluate_run(std::span<const AnnotatedBox> gt, std::span<const AnnotatedBox> pred,
                           std::span<const MatchRecord> matches, double iou_threshold,
                           long gt_offset) {
  MetricsReport report;
  report.clear = evaluate_clear(gt, pred, iou_threshold);
  report.id = id_metrics(gt, pred, iou_threshold);
  const CrossViewPairs pairs = gt_cross_view_pairs(gt, gt_offset);
  if (count_pairs(pairs) > 0) {
    report.handover = cha(pairs, matches, gt, iou_threshold);
  }
  return report;
}

std::string format_run_report(const RunReport& r) {
  std::ostringstream os;
  os << "[counts]\n";
  os << "frames_ceiling=" << r.frames_ceiling << '\n';
  os << "frames_angled=" << r.frames_angled << '\n';
  os << "detections_ceiling=" << r.detections_ceiling << '\n';
  os << "detections_angled=" << r.detections_angled << '\n';
  os << "detections_total=" << r.detections_ceiling + r.detections_angled << '\n';
  os << "local_tracks_ceiling=" << r.local_tracks_ceiling << '\n';
  os << "local_tracks_angled=" << r.local_tracks_angled << '\n';
  os << "local_tracks_total=" << r.local_tracks_ceiling + r.local_tracks_angled << '\n';
  os << "global_ids=" << r.global_ids << '\n';
  os << "matches=" << r.matches << '\n';
  if (r.metrics) {
    os << "[metrics]\n" << format_report(*r.metrics);
  }
  return os.str();
}

std::string format_timings(const RunReport& r) {
  std::ostringstream os;
  os << std::fixed << std::setprecision(6);
  for (const auto& t : r.timings) {
    os << t.stage << "_seconds=" << t.seconds << '\n';
  }
  return os.str();
}

RunReport run_pipeline(const PipelineConfig& cfg) {
  RunReport report;
  StageClock clock(report.timings);
  fs::create_directories(cfg.output_dir);

  std::vector<Detection> ceiling_dets;
  std::vector<Detection> angled_dets;
  std::vector<AnnotatedBox> gt;
  std::optional<Homography> h;
  long gt_offset = cfg.gt_offset.value_or(0);

  if (cfg.scene) {
    SceneBundle bundle = clock.run("simulate", [&] { return simulate(*cfg.scene); });
    write_bundle(bundle, cfg.output_dir / "scene");
    ceiling_dets = std::move(bundle.ceiling_detections);
    angled_dets = std::move(bundle.angled_detections);
    gt = std::move(bundle.ground_truth);
    gt_offset = cfg.gt_offset.value_or(cfg.scene->angled_frame_offset);
    using Kind = HomographySource::Kind;
    switch (cfg.homography.kind) {
      case Kind::SimulatedTruth:
        h = bundle.ceiling_to_angled;
        break;
      case Kind::SimulatedCorrespondences:
        h = clock.run("homography", [&] {
          return estimate_ransac(bundle.correspondences, cfg.homography.ransac).h;
        });
        break;
      case Kind::SimulatedChain: {
        const TopViewChain chain = top_view_chain(*cfg.scene);
        h = compose_ceiling_to_angled(chain.ceiling_to_top, chain.angled_to_top,
                                      chain.topceiling_to_topangled);
        break;
      }
      default:
        break;
    }
  } else {
    clock.run("ingest", [&] {
      ceiling_dets = load_detections(cfg.ceiling_detections, cfg.ceiling_appearance);
      angled_dets = load_detections(cfg.angled_detections, cfg.angled_appearance);
      if (!cfg.ground_truth.empty()) {
        gt = read_file(cfg.ground_truth, read_ground_truth);
      }
    });
  }

  if (!h) {
    if (cfg.homography.kind == HomographySource::Kind::File) {
      h = read_file(cfg.homography.path, read_homography);
    } else if (cfg.homography.kind == HomographySource::Kind::Correspondences) {
      h = clock.run("homography", [&] {
        const auto pairs = read_file(cfg.homography.path, read_correspondences);
        return estimate_ransac(pairs, cfg.homography.ransac).h;
      });
    } else {
      throw ConfigInvalid("homography.source", "simulated sources need a 'simulate' section");
    }
  }

  auto [ceiling_tracks, angled_tracks] = clock.run("track", [&] {
    auto ceiling_job = std::async(std::launch::async,
                                  [&] { return track_detections(ceiling_dets, cfg.tracker); });
    auto angled = track_detections(angled_dets, cfg.tracker);
    return std::pair(ceiling_job.get(), std::move(angled));
  });

  const GlobalRunResult global = clock.run("align", [&] {
    return run_global(ceiling_tracks, angled_tracks, *h, cfg.alignment, cfg.global);
  });

  report.frames_ceiling = distinct_frames(ceiling_dets);
  report.frames_angled = distinct_frames(angled_dets);
  report.detections_ceiling = static_cast<long>(ceiling_dets.size());
  report.detections_angled = static_cast<long>(angled_dets.size());
  report.local_tracks_ceiling = distinct_ids(ceiling_tracks);
  report.local_tracks_angled = distinct_ids(angled_tracks);
  report.global_ids = global.global_ids;
  report.matches = static_cast<long>(global.matches.size());

  if (!gt.empty()) {
    report.metrics = clock.run("evaluate", [&] {
      const auto pred = to_annotated(global.tracks);
      return evaluate_run(gt, pred, global.matches, cfg.iou_threshold, gt_offset);
    });
  }

  std::ostringstream hs;
  write_homography(hs, *h, "ceiling -> angled");
  write_text_file(cfg.output_dir / "homography.txt", hs.str());
  write_text_file(cfg.output_dir / "tracks_ceiling.csv",
                  to_text(write_local_tracks, std::span<const LocalTrackRecord>(ceiling_tracks)));
  write_text_file(cfg.output_dir / "tracks_angled.csv",
                  to_text(write_local_tracks, std::span<const LocalTrackRecord>(angled_tracks)));
  write_text_file(cfg.output_dir / "global_tracks.csv",
                  to_text(write_global_tracks, std::span<const GlobalTrackRecord>(global.tracks)));
  write_text_file(cfg.output_dir / "matches.csv",
                  to_text(write_matches, std::span<const MatchRecord>(global.matches)));
  if (cfg.global.audit) {
    write_text_file(cfg.output_dir / "audit.txt", global.audit);
  }
  write_text_file(cfg.output_dir / "report.txt", format_run_report(report));
  write_text_file(cfg.output_dir / "timings.txt", format_timings(report));
  return report;
}

}  // namespace pentrack
