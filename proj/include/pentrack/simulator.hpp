#pragma once

#include "pentrack/geometry.hpp"
#include "pentrack/local_tracker.hpp"
#include "pentrack/metrics.hpp"
#include "pentrack/polygons.hpp"

#include <Eigen/Core>

#include <array>
#include <cstdint>
#include <string>
#include <vector>

namespace pentrack {

// Pinhole camera: pixel ~ k * (r * P + t), P in world metres.
struct CameraModel {
  Eigen::Matrix3d k = Eigen::Matrix3d::Identity();
  Eigen::Matrix3d r = Eigen::Matrix3d::Identity();
  Eigen::Vector3d t = Eigen::Vector3d::Zero();

  // Camera centre `position`, rotation rows = camera axes in world frame.
  static CameraModel from_pose(double focal_px, double cx, double cy,
                               const Eigen::Vector3d& position, const Eigen::Matrix3d& r);

  // Throws DegenerateCamera unless r is a rotation (orthonormal, det +1)
  // and the focal lengths are positive.
  void validate() const;
};

struct WorldPoint {
  double x = 0.0;
  double y = 0.0;
  double z = 0.0;
};

// Throws BehindCamera for non-positive depth.
PixelPoint project_world(const CameraModel& cam, const WorldPoint& p);

// Floor (X, Y, 1) at Z = 0 to pixels: k * [r1 r2 t]. Throws DegenerateCamera
// when the camera centre lies on the floor plane.
Homography ground_plane_homography(const CameraModel& cam);

// A camera plus the image it produces and the strip of floor (by world Y)
// whose agents it reports.
struct CameraView {
  CameraModel model;
  int image_width = 1920;
  int image_height = 1080;
  double roi_y_min = 0.0;
  double roi_y_max = 0.0;
};

struct NoiseConfig {
  double dropout_prob = 0.0;
  double jitter_sigma = 0.0;         // px, per box edge
  double false_positive_rate = 0.0;  // expected boxes per camera per frame
  double merge_prob = 0.0;           // overlapping agents reported as one box
  double split_prob = 0.0;           // one agent reported as two halves
};

struct PenConfig {
  double floor_width = 4.5;   // metres, world X
  double floor_depth = 14.0;  // metres, world Y
  int n_agents = 17;
  double footprint_length = 1.0;
  double footprint_width = 0.4;
  double min_separation = 1.3;  // centre distance, metres
  double max_speed = 0.5;       // metres / second
  double heading_sigma = 0.05;  // radians / frame
  double fps = 15.0;
  int duration = 1800;  // frames
  // Angled frame numbers are shifted by this many frames (clock skew).
  long angled_frame_offset = 0;
  int correspondence_grid = 6;
  CameraView ceiling;
  CameraView angled;
  NoiseConfig noise;
  std::uint64_t seed = 0;

  // Two-camera layout: ceiling camera at 4 m looking straight down over the
  // low-Y part, angled camera at 2.2 m pitched 35 degrees down over the
  // high-Y part, floor strips overlapping by 30% of the depth.
  static PenConfig defaults();

  // Throws ConfigInvalid naming the first offending field.
  void validate() const;
};

// Puts both cameras in the default layout for the config's floor size.
void place_default_cameras(PenConfig& cfg);

// Per-frame agent state, for tests and diagnostics.
struct AgentPose {
  double x = 0.0;
  double y = 0.0;
  double heading = 0.0;
};

struct SceneBundle {
  std::vector<Detection> ceiling_detections;  // frame-sorted
  std::vector<Detection> angled_detections;
  std::vector<AnnotatedBox> ground_truth;  // both cameras
  Homography ceiling_to_angled;
  std::vector<Correspondence> correspondences;  // ceiling px -> angled px
  std::vector<std::vector<AgentPose>> trajectory;  // [frame][agent]
};

// Floor footprint corners (Z = 0) of an agent.
std::array<WorldPoint, 4> footprint_corners(const PenConfig& cfg, const AgentPose& pose);

// Axis-aligned hull of the projected footprint.
BoundingBox footprint_box(const CameraModel& cam, const std::array<WorldPoint, 4>& corners);

// True when the agent is reported by the view: centre inside the floor strip
// and the whole box inside the image.
bool visible(const CameraView& view, const AgentPose& pose, const BoundingBox& box);

// Ceiling->angled map through the ground plane.
Homography true_ceiling_to_angled(const PenConfig& cfg);

// The three maps of the top-view composition: each camera rectified onto a
// metric top view at px_per_metre (ceiling top view anchored at the floor
// corner, angled top view at the start of the angled floor strip), and the
// translation between the two top views.
struct TopViewChain {
  Homography ceiling_to_top;
  Homography angled_to_top;
  Homography topceiling_to_topangled;
};

TopViewChain top_view_chain(const PenConfig& cfg, double px_per_metre = 100.0);

// Pure function of the config. Throws ConfigInvalid.
SceneBundle simulate(const PenConfig& cfg);

}  // namespace pentrack
