#include "pentrack/local_tracker.hpp"

#include "pentrack/errors.hpp"

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <stdexcept>

namespace pentrack {

namespace {

Eigen::Matrix<double, 4, 8> observation_matrix() {
  Eigen::Matrix<double, 4, 8> h = Eigen::Matrix<double, 4, 8>::Zero();
  h.leftCols<4>().setIdentity();
  return h;
}

double cosine_distance(const std::deque<Eigen::VectorXd>& gallery, const Eigen::VectorXd& v) {
  double best = 2.0;
  for (const auto& g : gallery) {
    if (g.size() == v.size()) {
      best = std::min(best, 1.0 - g.dot(v));
    }
  }
  return std::clamp(best, 0.0, 2.0);
}

}  // namespace

BoundingBox TrackState::box() const {
  const double h = mean(3);
  const double w = mean(2) * h;
  return {mean(0) - 0.5 * w, mean(1) - 0.5 * h, mean(0) + 0.5 * w, mean(1) + 0.5 * h};
}

Measurement to_measurement(const BoundingBox& b) {
  if (!(b.width() > 0.0) || !(b.height() > 0.0)) {
    throw NonPositiveBox();
  }
  const PixelPoint c = b.center();
  return {c.x, c.y, b.width() / b.height(), b.height()};
}

TrackState initiate(const BoundingBox& b, const KalmanConfig& cfg) {
  const Measurement z = to_measurement(b);
  TrackState s;
  s.mean.head<4>() = z;
  s.mean.tail<4>().setZero();
  const double h = z(3);
  StateVector std;
  std << 2 * cfg.std_position * h, 2 * cfg.std_position * h, 1e-2, 2 * cfg.std_position * h,
      10 * cfg.std_velocity * h, 10 * cfg.std_velocity * h, 1e-5, 10 * cfg.std_velocity * h;
  s.covariance = std.array().square().matrix().asDiagonal();
  return s;
}

StateCovariance transition_matrix() {
  StateCovariance f = StateCovariance::Identity();
  for (int i = 0; i < 4; ++i) {
    f(i, i + 4) = 1.0;
  }
  return f;
}

StateCovariance process_noise(const StateVector& mean, const KalmanConfig& cfg) {
  const double h = mean(3);
  StateVector std;
  std << cfg.std_position * h, cfg.std_position * h, 1e-2, cfg.std_position * h,
      cfg.std_velocity * h, cfg.std_velocity * h, 1e-5, cfg.std_velocity * h;
  return std.array().square().matrix().asDiagonal();
}

Eigen::Matrix4d measurement_noise(const StateVector& mean, const KalmanConfig& cfg) {
  const double h = mean(3);
  Eigen::Vector4d std(cfg.std_position * h, cfg.std_position * h, 1e-1, cfg.std_position * h);
  std *= cfg.measurement_scale;
  return std.array().square().matrix().asDiagonal();
}

Track predict(const Track& t, const KalmanConfig& cfg) {
  if (t.status == TrackStatus::Deleted) {
    throw std::logic_error("predict on a deleted track");
  }
  Track out = t;
  const StateCovariance f = transition_matrix();
  out.state.mean = f * t.state.mean;
  StateCovariance p = f * t.state.covariance * f.transpose() + process_noise(t.state.mean, cfg);
  out.state.covariance = 0.5 * (p + p.transpose());
  ++out.time_since_update;
  return out;
}

Track update(const Track& t, const Detection& d, const TrackerConfig& cfg) {
  if (t.status == TrackStatus::Deleted) {
    throw std::logic_error("update on a deleted track");
  }
  const Measurement z = to_measurement(d.box);
  const auto h = observation_matrix();
  const StateVector& x = t.state.mean;
  const StateCovariance& p = t.state.covariance;

  const Eigen::Matrix4d s = h * p * h.transpose() + measurement_noise(x, cfg.kalman);
  const Eigen::Matrix<double, 8, 4> k = s.llt().solve(h * p).transpose();
  // Joseph form keeps the covariance symmetric positive semi-definite.
  const StateCovariance i_kh = StateCovariance::Identity() - k * h;
  const StateCovariance joseph = i_kh * p * i_kh.transpose() +
                                 k * measurement_noise(x, cfg.kalman) * k.transpose();

  Track out = t;
  out.state.mean = x + k * (z - h * x);
  out.state.covariance = 0.5 * (joseph + joseph.transpose());
  ++out.hits;
  out.time_since_update = 0;
  if (d.appearance.size() > 0) {
    out.gallery.push_back(d.appearance);
    while (out.gallery.size() > cfg.gallery_capacity) {
      out.gallery.pop_front();
    }
  }
  if (out.status == TrackStatus::Tentative && out.hits >= cfg.confirm_hits) {
    out.status = TrackStatus::Confirmed;
  }
  return out;
}

Eigen::MatrixXd association_cost(std::span<const Track> tracks,
                                 std::span<const Detection> detections,
                                 const TrackerConfig& cfg) {
  Eigen::MatrixXd cost(static_cast<Eigen::Index>(tracks.size()),
                       static_cast<Eigen::Index>(detections.size()));
  for (std::size_t i = 0; i < tracks.size(); ++i) {
    const BoundingBox predicted = tracks[i].state.box();
    for (std::size_t j = 0; j < detections.size(); ++j) {
      const double motion = 1.0 - iou(predicted, detections[j].box);
      double c = motion;
      if (!tracks[i].gallery.empty() && detections[j].appearance.size() > 0) {
        c = cfg.alpha * motion +
            (1.0 - cfg.alpha) * cosine_distance(tracks[i].gallery, detections[j].appearance);
      }
      cost(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)) = c;
    }
  }
  return cost;
}

AssignResult assign(std::span<const Track> tracks, std::span<const Detection> detections,
                    const TrackerConfig& cfg) {
  const Eigen::MatrixXd cost = association_cost(tracks, detections, cfg);
  const CellMask forbidden = (cost.array() > cfg.gate);
  AssignResult r;
  r.matches = hungarian(cost, forbidden);
  std::vector<bool> track_used(tracks.size()), det_used(detections.size());
  for (const auto& [ti, di] : r.matches) {
    track_used[ti] = true;
    det_used[di] = true;
  }
  for (std::size_t i = 0; i < tracks.size(); ++i) {
    if (!track_used[i]) {
      r.unmatched_tracks.push_back(i);
    }
  }
  for (std::size_t j = 0; j < detections.size(); ++j) {
    if (!det_used[j]) {
      r.unmatched_detections.push_back(j);
    }
  }
  return r;
}

Tracker::Tracker(TrackerConfig cfg) : cfg_(std::move(cfg)) {
  if (cfg_.confirm_hits < 1 || cfg_.max_age < 0 || cfg_.gallery_capacity < 1) {
    throw std::invalid_argument("tracker: confirm_hits >= 1, max_age >= 0, gallery >= 1");
  }
}

std::vector<TrackOutput> Tracker::step(long frame, std::span<const Detection> detections) {
  if (started_ && frame < last_frame_) {
    throw OutOfOrderFrame(last_frame_, frame);
  }
  for (const auto& d : detections) {
    if (d.frame != frame) {
      throw std::invalid_argument("tracker: detection frame differs from step frame");
    }
  }
  const long elapsed = started_ ? frame - last_frame_ : 0;
  started_ = true;
  last_frame_ = frame;

  // Skipped frames count as frames without detections.
  for (long k = 0; k < elapsed; ++k) {
    for (auto& t : tracks_) {
      t = predict(t, cfg_.kalman);
    }
    if (k + 1 < elapsed) {
      std::erase_if(tracks_, [&](const Track& t) {
        return t.status == TrackStatus::Tentative || t.time_since_update > cfg_.max_age;
      });
    }
  }

  const AssignResult a = assign(tracks_, detections, cfg_);
  for (const auto& [ti, di] : a.matches) {
    tracks_[ti] = update(tracks_[ti], detections[di], cfg_);
  }
  for (std::size_t ti : a.unmatched_tracks) {
    Track& t = tracks_[ti];
    if (t.status == TrackStatus::Tentative || t.time_since_update > cfg_.max_age) {
      t.status = TrackStatus::Deleted;
    }
  }
  std::erase_if(tracks_, [](const Track& t) { return t.status == TrackStatus::Deleted; });

  for (std::size_t di : a.unmatched_detections) {
    const Detection& d = detections[di];
    Track t;
    t.local_id = next_id_++;
    t.state = initiate(d.box, cfg_.kalman);
    t.hits = 1;
    t.time_since_update = 0;
    if (d.appearance.size() > 0) {
      t.gallery.push_back(d.appearance);
    }
    t.status = t.hits >= cfg_.confirm_hits ? TrackStatus::Confirmed : TrackStatus::Tentative;
    tracks_.push_back(std::move(t));
  }

  std::vector<TrackOutput> out;
  for (const auto& t : tracks_) {
    if (t.status == TrackStatus::Confirmed && t.time_since_update == 0) {
      out.push_back({t.local_id, t.state.box()});
    }
  }
  std::sort(out.begin(), out.end(),
            [](const TrackOutput& a, const TrackOutput& b) { return a.local_id < b.local_id; });
  return out;
}

}  // namespace pentrack
