#pragma once

#include "pentrack/assignment.hpp"
#include "pentrack/polygons.hpp"

#include <Eigen/Core>

#include <cstddef>
#include <deque>
#include <span>
#include <vector>

namespace pentrack {

struct Detection {
  long frame = 0;
  BoundingBox box;
  double confidence = 1.0;
  // Unit-norm appearance descriptor; empty when the stream carries none.
  Eigen::VectorXd appearance;
};

using StateVector = Eigen::Matrix<double, 8, 1>;
using StateCovariance = Eigen::Matrix<double, 8, 8>;
using Measurement = Eigen::Vector4d;

// (cx, cy, aspect, height) followed by their velocities.
struct TrackState {
  StateVector mean = StateVector::Zero();
  StateCovariance covariance = StateCovariance::Identity();

  BoundingBox box() const;
};

enum class TrackStatus { Tentative, Confirmed, Deleted };

struct Track {
  long local_id = 0;
  TrackState state;
  TrackStatus status = TrackStatus::Tentative;
  int hits = 0;
  int time_since_update = 0;
  std::deque<Eigen::VectorXd> gallery;
};

// Noise standard deviations are relative to the box height, the usual
// SORT-family parameterization.
struct KalmanConfig {
  double std_position = 1.0 / 20.0;
  double std_velocity = 1.0 / 160.0;
  // Multiplies every measurement standard deviation.
  double measurement_scale = 1.0;
};

struct TrackerConfig {
  KalmanConfig kalman;
  int confirm_hits = 3;
  int max_age = 30;
  // Pairs with cost above the gate are never associated.
  double gate = 0.7;
  // Weight of the motion (1 - IoU) term against appearance cosine distance.
  double alpha = 1.0;
  std::size_t gallery_capacity = 100;
};

// Throws NonPositiveBox when width or height is not positive.
Measurement to_measurement(const BoundingBox& b);

TrackState initiate(const BoundingBox& b, const KalmanConfig& cfg);

// Constant-velocity transition matrix for one frame.
StateCovariance transition_matrix();
StateCovariance process_noise(const StateVector& mean, const KalmanConfig& cfg);
Eigen::Matrix4d measurement_noise(const StateVector& mean, const KalmanConfig& cfg);

Track predict(const Track& t, const KalmanConfig& cfg);
Track update(const Track& t, const Detection& d, const TrackerConfig& cfg);

struct AssignResult {
  AssignmentPairs matches;  // (track index, detection index)
  std::vector<std::size_t> unmatched_tracks;
  std::vector<std::size_t> unmatched_detections;
};

// Association cost matrix (tracks x detections) before gating.
Eigen::MatrixXd association_cost(std::span<const Track> tracks,
                                 std::span<const Detection> detections,
                                 const TrackerConfig& cfg);

AssignResult assign(std::span<const Track> tracks, std::span<const Detection> detections,
                    const TrackerConfig& cfg);

struct TrackOutput {
  long local_id = 0;
  BoundingBox box;

  friend bool operator==(const TrackOutput&, const TrackOutput&) = default;
};

// Single-camera tracker. Feed frames in nondecreasing order; skipped frame
// numbers are predicted through.
class Tracker {
 public:
  explicit Tracker(TrackerConfig cfg = {});

  // Returns confirmed tracks updated in this frame, ordered by local_id.
  // Throws OutOfOrderFrame if `frame` precedes the previous call.
  std::vector<TrackOutput> step(long frame, std::span<const Detection> detections);

  const std::vector<Track>& tracks() const { return tracks_; }
  const TrackerConfig& config() const { return cfg_; }
  long issued_ids() const { return next_id_ - 1; }

 private:
  TrackerConfig cfg_;
  std::vector<Track> tracks_;
  long next_id_ = 1;
  long last_frame_ = -1;
  bool started_ = false;
};

}  // namespace pentrack
