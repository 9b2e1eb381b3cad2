#pragma once

#include "pentrack/geometry.hpp"
#include "pentrack/global_tracker.hpp"
#include "pentrack/local_tracker.hpp"
#include "pentrack/metrics.hpp"
#include "pentrack/simulator.hpp"

#include <cstdint>
#include <exception>
#include <filesystem>
#include <optional>
#include <span>
#include <string>
#include <vector>

namespace pentrack {

enum class ExitCode : int {
  Ok = 0,
  Failure = 1,
  ConfigError = 2,
  EstimationFailure = 3,
  MalformedInput = 4,
};

ExitCode exit_code_for(const std::exception& e);

// Runs a single-camera tracker over a frame-sorted stream, stepping every
// frame from the first detection to the last.
std::vector<LocalTrackRecord> track_detections(std::span<const Detection> detections,
                                               const TrackerConfig& cfg);

struct HomographySource {
  enum class Kind {
    File,                      // read `path`
    Correspondences,           // RANSAC over the correspondence file at `path`
    SimulatedTruth,            // exact ground-plane map of the simulated scene
    SimulatedCorrespondences,  // RANSAC over the simulated correspondences
    SimulatedChain,            // composition through both metric top views
  };
  Kind kind = Kind::File;
  std::filesystem::path path;
  RansacParams ransac;
};

struct PipelineConfig {
  // Set to simulate the input; otherwise the detection paths are read.
  std::optional<PenConfig> scene;
  std::filesystem::path ceiling_detections;
  std::filesystem::path angled_detections;
  std::filesystem::path ceiling_appearance;  // optional
  std::filesystem::path angled_appearance;   // optional
  std::filesystem::path ground_truth;        // optional when not simulating

  HomographySource homography;
  StreamAlignment alignment;
  TrackerConfig tracker;
  GlobalConfig global;
  double iou_threshold = kDefaultIouThreshold;
  // Offset between ground-truth frame numbers of the two views; defaults to
  // the simulated clock skew, or 0 for ingested data.
  std::optional<long> gt_offset;
  std::filesystem::path output_dir = "pentrack_out";
  std::uint64_t seed = 0;
};

// Parses the JSON pipeline config. Relative paths resolve against
// `base_dir`. Throws ConfigInvalid naming the field, including a missing
// homography section or a referenced file that does not exist.
PipelineConfig parse_pipeline_config(const std::string& json_text,
                                     const std::filesystem::path& base_dir);

struct StageTiming {
  std::string stage;
  double seconds = 0.0;
};

struct RunReport {
  long frames_ceiling = 0;
  long frames_angled = 0;
  long detections_ceiling = 0;
  long detections_angled = 0;
  long local_tracks_ceiling = 0;
  long local_tracks_angled = 0;
  long global_ids = 0;
  long matches = 0;
  std::optional<MetricsReport> metrics;
  std::vector<StageTiming> timings;
};

// Counts and metrics only; identical across reruns.
std::string format_run_report(const RunReport& report);
std::string format_timings(const RunReport& report);

// Simulate or ingest, track both cameras, align, evaluate. Stage artifacts
// and report.txt / timings.txt are written under cfg.output_dir.
RunReport run_pipeline(const PipelineConfig& cfg);

// Metrics for global predictions against ground truth. CHA is included when
// the ground truth has cross-view pairs.
MetricsReport evaluate_run(std::span<const AnnotatedBox> gt, std::span<const AnnotatedBox> pred,
                           std::span<const MatchRecord> matches, double iou_threshold,
                           long gt_offset);

}  // namespace pentrack
