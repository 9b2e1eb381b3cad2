#pragma once

#include "pentrack/errors.hpp"
#include "pentrack/geometry.hpp"
#include "pentrack/global_tracker.hpp"
#include "pentrack/local_tracker.hpp"
#include "pentrack/metrics.hpp"
#include "pentrack/simulator.hpp"

#include <filesystem>
#include <fstream>
#include <iosfwd>
#include <span>
#include <string>
#include <string_view>
#include <vector>

namespace pentrack {

// Fixed point with at most 6 fractional digits, trailing zeros dropped,
// independent of the global locale. Non-finite values are rejected.
std::string format_decimal(double v);

// Parses a decimal field. Throws ParseError tagged with source and line.
double parse_decimal(std::string_view field, const std::string& source, std::size_t line);
long parse_integer(std::string_view field, const std::string& source, std::size_t line);

// Detections: frame,x_min,y_min,width,height,confidence. A first line whose
// first field is not numeric is taken as a header. Frames must be
// nondecreasing.
std::vector<Detection> read_detections(std::istream& in, const std::string& source);
void write_detections(std::ostream& out, std::span<const Detection> detections);

// Appearance sidecar: frame,det_index,v1,...,vk where det_index counts
// detections within the frame. Vectors are normalized on load.
void read_appearance(std::istream& in, const std::string& source,
                     std::vector<Detection>& detections);
void write_appearance(std::ostream& out, std::span<const Detection> detections);

// Local tracks: frame,local_id,x_min,y_min,width,height.
std::vector<LocalTrackRecord> read_local_tracks(std::istream& in, const std::string& source);
void write_local_tracks(std::ostream& out, std::span<const LocalTrackRecord> tracks);

// Global tracks and ground truth: camera,frame,global_id,x_min,y_min,width,height.
std::vector<GlobalTrackRecord> read_global_tracks(std::istream& in, const std::string& source);
void write_global_tracks(std::ostream& out, std::span<const GlobalTrackRecord> tracks);
std::vector<AnnotatedBox> read_ground_truth(std::istream& in, const std::string& source);
void write_ground_truth(std::ostream& out, std::span<const AnnotatedBox> boxes);

// Matches: ceiling_frame,ceiling_id,angled_frame,angled_id followed by the
// ceiling box and the angled box as x_min,y_min,width,height.
std::vector<MatchRecord> read_matches(std::istream& in, const std::string& source);
void write_matches(std::ostream& out, std::span<const MatchRecord> matches);

// Nine whitespace-separated numbers, row-major; lines starting with '#' are
// comments. Written with shortest round-trip digits.
Homography read_homography(std::istream& in, const std::string& source);
void write_homography(std::ostream& out, const Homography& h, const std::string& comment = {});

// One "src_x src_y dst_x dst_y" line per pair, same comment rule.
std::vector<Correspondence> read_correspondences(std::istream& in, const std::string& source);
void write_correspondences(std::ostream& out, std::span<const Correspondence> pairs);

// Opens `path` and hands the stream to `reader`; a missing file is a
// ParseError at line 0.
template <typename Reader>
auto read_file(const std::filesystem::path& path, Reader reader) {
  std::ifstream in(path, std::ios::binary);
  if (!in) {
    throw ParseError(path.string(), 0, "cannot open file");
  }
  return reader(in, path.string());
}

// Throws Error when the file cannot be written.
void write_text_file(const std::filesystem::path& path, const std::string& contents);

// Scene configuration as JSON. Every field is optional and defaults to
// PenConfig::defaults(); cameras are re-placed for a non-default floor size
// unless given explicitly. Throws ConfigInvalid naming the field.
PenConfig parse_pen_config(const std::string& json_text, const std::string& field_prefix = {});

inline constexpr const char* kBundleManifest = "manifest.txt";

// Writes the six bundle files into `dir` (created if needed) and returns
// their names in manifest order.
std::vector<std::string> write_bundle(const SceneBundle& bundle, const std::filesystem::path& dir);

}  // namespace pentrack
