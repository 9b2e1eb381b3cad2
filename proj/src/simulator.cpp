#include "pentrack/simulator.hpp"

#include "pentrack/errors.hpp"

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <numbers>
#include <random>

namespace pentrack {

namespace {

constexpr double kPi = std::numbers::pi;

// Independent engine per purpose so that, for a fixed seed, changing one
// noise knob never reshuffles the draws of another.
std::mt19937_64 stream(std::uint64_t seed, std::uint32_t tag) {
  std::seed_seq seq{static_cast<std::uint32_t>(seed & 0xffffffffu),
                    static_cast<std::uint32_t>(seed >> 32), tag};
  return std::mt19937_64(seq);
}

void check(bool ok, const char* field, const char* why) {
  if (!ok) {
    throw ConfigInvalid(field, why);
  }
}

void check_view(const CameraView& v, const char* name) {
  const std::string prefix(name);
  if (v.image_width <= 0 || v.image_height <= 0) {
    throw ConfigInvalid(prefix + ".image", "image size must be positive");
  }
  if (!(v.roi_y_min < v.roi_y_max)) {
    throw ConfigInvalid(prefix + ".roi", "roi_y_min must be below roi_y_max");
  }
  try {
    v.model.validate();
  } catch (const DegenerateCamera& e) {
    throw ConfigInvalid(prefix, e.what());
  }
}

bool inside_image(const CameraView& v, const BoundingBox& b) {
  return b.x_min >= 0.0 && b.y_min >= 0.0 && b.x_max <= v.image_width &&
         b.y_max <= v.image_height;
}

bool inside_image(const CameraView& v, const PixelPoint& p) {
  return p.x >= 0.0 && p.y >= 0.0 && p.x <= v.image_width && p.y <= v.image_height;
}

BoundingBox union_box(const BoundingBox& a, const BoundingBox& b) {
  return {std::min(a.x_min, b.x_min), std::min(a.y_min, b.y_min), std::max(a.x_max, b.x_max),
          std::max(a.y_max, b.y_max)};
}

bool overlaps(const BoundingBox& a, const BoundingBox& b) {
  return a.x_min < b.x_max && b.x_min < a.x_max && a.y_min < b.y_max && b.y_min < a.y_max;
}

BoundingBox clamp_to_image(BoundingBox b, const CameraView& v) {
  constexpr double kMinSide = 2.0;
  const double w = v.image_width;
  const double h = v.image_height;
  b.x_min = std::clamp(b.x_min, 0.0, w - kMinSide);
  b.y_min = std::clamp(b.y_min, 0.0, h - kMinSide);
  b.x_max = std::clamp(b.x_max, b.x_min + kMinSide, w);
  b.y_max = std::clamp(b.y_max, b.y_min + kMinSide, h);
  return b;
}

// Noise for one camera over one frame, applied to the noise-free boxes in
// agent order. Every random draw happens regardless of the probabilities, so
// for a fixed seed the dropped set grows monotonically with dropout_prob and
// jitter scales linearly with jitter_sigma.
std::vector<Detection> corrupt(const std::vector<BoundingBox>& clean, long frame,
                               const CameraView& view, const NoiseConfig& noise,
                               std::mt19937_64& rng, std::mt19937_64& fp_rng) {
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  std::normal_distribution<double> normal(0.0, 1.0);

  std::vector<bool> merged(clean.size(), false);
  std::vector<BoundingBox> boxes;
  std::vector<BoundingBox> merged_boxes;
  for (std::size_t i = 0; i < clean.size(); ++i) {
    for (std::size_t j = i + 1; j < clean.size(); ++j) {
      if (!overlaps(clean[i], clean[j])) {
        continue;
      }
      const double u = unit(rng);
      if (u < noise.merge_prob && !merged[i] && !merged[j]) {
        merged[i] = merged[j] = true;
        merged_boxes.push_back(union_box(clean[i], clean[j]));
      }
    }
  }
  for (std::size_t i = 0; i < clean.size(); ++i) {
    if (!merged[i]) {
      boxes.push_back(clean[i]);
    }
  }
  boxes.insert(boxes.end(), merged_boxes.begin(), merged_boxes.end());

  std::vector<BoundingBox> parts;
  for (const auto& b : boxes) {
    const double u = unit(rng);
    if (u < noise.split_prob) {
      if (b.width() >= b.height()) {
        const double mid = 0.5 * (b.x_min + b.x_max);
        parts.push_back({b.x_min, b.y_min, mid, b.y_max});
        parts.push_back({mid, b.y_min, b.x_max, b.y_max});
      } else {
        const double mid = 0.5 * (b.y_min + b.y_max);
        parts.push_back({b.x_min, b.y_min, b.x_max, mid});
        parts.push_back({b.x_min, mid, b.x_max, b.y_max});
      }
    } else {
      parts.push_back(b);
    }
  }

  std::vector<Detection> out;
  for (const auto& b : parts) {
    const double drop = unit(rng);
    const double z[4] = {normal(rng), normal(rng), normal(rng), normal(rng)};
    const double conf = 0.9 + 0.1 * unit(rng);
    if (drop < noise.dropout_prob) {
      continue;
    }
    BoundingBox j{b.x_min + noise.jitter_sigma * z[0], b.y_min + noise.jitter_sigma * z[1],
                  b.x_max + noise.jitter_sigma * z[2], b.y_max + noise.jitter_sigma * z[3]};
    out.push_back({frame, clamp_to_image(j, view), conf, {}});
  }

  if (noise.false_positive_rate > 0.0) {
    std::poisson_distribution<int> count(noise.false_positive_rate);
    const int n = count(fp_rng);
    for (int k = 0; k < n; ++k) {
      const double w = 80.0 + 220.0 * unit(fp_rng);
      const double h = 80.0 + 220.0 * unit(fp_rng);
      const double x = (view.image_width - w) * unit(fp_rng);
      const double y = (view.image_height - h) * unit(fp_rng);
      const double conf = 0.3 + 0.3 * unit(fp_rng);
      out.push_back({frame, clamp_to_image({x, y, x + w, y + h}, view), conf, {}});
    }
  }
  return out;
}

double footprint_margin(const PenConfig& cfg) {
  return 0.5 * std::hypot(cfg.footprint_length, cfg.footprint_width);
}

}  // namespace

CameraModel CameraModel::from_pose(double focal_px, double cx, double cy,
                                   const Eigen::Vector3d& position, const Eigen::Matrix3d& r) {
  CameraModel cam;
  cam.k << focal_px, 0, cx, 0, focal_px, cy, 0, 0, 1;
  cam.r = r;
  cam.t = -r * position;
  return cam;
}

void CameraModel::validate() const {
  const double ortho = (r.transpose() * r - Eigen::Matrix3d::Identity()).cwiseAbs().maxCoeff();
  if (!(ortho < 1e-9)) {
    throw DegenerateCamera("rotation is not orthonormal");
  }
  if (!(std::abs(r.determinant() - 1.0) < 1e-9)) {
    throw DegenerateCamera("rotation determinant is not +1");
  }
  if (!(k(0, 0) > 0.0) || !(k(1, 1) > 0.0)) {
    throw DegenerateCamera("focal length must be positive");
  }
  if (!t.allFinite() || !k.allFinite()) {
    throw DegenerateCamera("non-finite parameters");
  }
}

PixelPoint project_world(const CameraModel& cam, const WorldPoint& p) {
  const Eigen::Vector3d pc = cam.r * Eigen::Vector3d(p.x, p.y, p.z) + cam.t;
  if (!(pc.z() > 1e-12)) {
    throw BehindCamera();
  }
  const Eigen::Vector3d q = cam.k * pc;
  return {q.x() / q.z(), q.y() / q.z()};
}

Homography ground_plane_homography(const CameraModel& cam) {
  Eigen::Matrix3d m;
  m.col(0) = cam.r.col(0);
  m.col(1) = cam.r.col(1);
  m.col(2) = cam.t;
  try {
    return Homography(cam.k * m);
  } catch (const SingularHomography&) {
    throw DegenerateCamera("camera centre lies on the floor plane");
  }
}

PenConfig PenConfig::defaults() {
  PenConfig cfg;
  place_default_cameras(cfg);
  return cfg;
}

void place_default_cameras(PenConfig& cfg) {
  const double w = cfg.floor_width;
  const double d = cfg.floor_depth;

  cfg.ceiling.roi_y_min = 0.0;
  cfg.ceiling.roi_y_max = 0.65 * d;
  cfg.angled.roi_y_min = 0.35 * d;
  cfg.angled.roi_y_max = d;

  // Straight down; image x along world +Y, image y along world +X.
  Eigen::Matrix3d r_ceiling;
  r_ceiling << 0, 1, 0, 1, 0, 0, 0, 0, -1;
  cfg.ceiling.model = CameraModel::from_pose(
      700.0, 960.0, 540.0, Eigen::Vector3d(0.5 * w, 0.5 * cfg.ceiling.roi_y_max, 4.0), r_ceiling);

  // Behind the far wall looking towards -Y, pitched down.
  const double pitch = 35.0 * kPi / 180.0;
  const Eigen::Vector3d forward(0.0, -std::cos(pitch), -std::sin(pitch));
  const Eigen::Vector3d right(-1.0, 0.0, 0.0);
  const Eigen::Vector3d down = forward.cross(right);
  Eigen::Matrix3d r_angled;
  r_angled.row(0) = right.transpose();
  r_angled.row(1) = down.transpose();
  r_angled.row(2) = forward.transpose();
  cfg.angled.model = CameraModel::from_pose(600.0, 960.0, 540.0,
                                            Eigen::Vector3d(0.5 * w, d + 2.0, 2.2), r_angled);
}

void PenConfig::validate() const {
  check(floor_width > 0.0 && std::isfinite(floor_width), "floor_width", "must be positive");
  check(floor_depth > 0.0 && std::isfinite(floor_depth), "floor_depth", "must be positive");
  check(n_agents >= 0, "n_agents", "must be non-negative");
  check(footprint_length > 0.0 && footprint_width > 0.0, "footprint", "must be positive");
  check(min_separation >= 0.0, "min_separation", "must be non-negative");
  check(max_speed >= 0.0, "max_speed", "must be non-negative");
  check(heading_sigma >= 0.0, "heading_sigma", "must be non-negative");
  check(fps > 0.0 && std::isfinite(fps), "fps", "must be positive");
  check(duration >= 1, "duration", "must be at least one frame");
  check(correspondence_grid >= 2, "correspondence_grid", "must be at least 2");
  const double m = footprint_margin(*this);
  check(2.0 * m < floor_width && 2.0 * m < floor_depth, "footprint", "agents do not fit in the pen");
  auto prob = [](double p) { return p >= 0.0 && p <= 1.0; };
  check(prob(noise.dropout_prob), "noise.dropout_prob", "must be in [0, 1]");
  check(prob(noise.merge_prob), "noise.merge_prob", "must be in [0, 1]");
  check(prob(noise.split_prob), "noise.split_prob", "must be in [0, 1]");
  check(noise.jitter_sigma >= 0.0, "noise.jitter_sigma", "must be non-negative");
  check(noise.false_positive_rate >= 0.0, "noise.false_positive_rate", "must be non-negative");
  check_view(ceiling, "ceiling");
  check_view(angled, "angled");
}

std::array<WorldPoint, 4> footprint_corners(const PenConfig& cfg, const AgentPose& pose) {
  const double c = std::cos(pose.heading);
  const double s = std::sin(pose.heading);
  const double hl = 0.5 * cfg.footprint_length;
  const double hw = 0.5 * cfg.footprint_width;
  const double local[4][2] = {{hl, hw}, {hl, -hw}, {-hl, -hw}, {-hl, hw}};
  std::array<WorldPoint, 4> out;
  for (int i = 0; i < 4; ++i) {
    out[static_cast<std::size_t>(i)] = {pose.x + c * local[i][0] - s * local[i][1],
                                        pose.y + s * local[i][0] + c * local[i][1], 0.0};
  }
  return out;
}

BoundingBox footprint_box(const CameraModel& cam, const std::array<WorldPoint, 4>& corners) {
  BoundingBox b{std::numeric_limits<double>::infinity(), std::numeric_limits<double>::infinity(),
                -std::numeric_limits<double>::infinity(),
                -std::numeric_limits<double>::infinity()};
  for (const auto& c : corners) {
    const PixelPoint p = project_world(cam, c);
    b.x_min = std::min(b.x_min, p.x);
    b.y_min = std::min(b.y_min, p.y);
    b.x_max = std::max(b.x_max, p.x);
    b.y_max = std::max(b.y_max, p.y);
  }
  return b;
}

bool visible(const CameraView& view, const AgentPose& pose, const BoundingBox& box) {
  return pose.y >= view.roi_y_min && pose.y <= view.roi_y_max && box.valid() &&
         inside_image(view, box);
}

Homography true_ceiling_to_angled(const PenConfig& cfg) {
  return compose(ground_plane_homography(cfg.angled.model),
                 invert(ground_plane_homography(cfg.ceiling.model)));
}

TopViewChain top_view_chain(const PenConfig& cfg, double px_per_metre) {
  Eigen::Matrix3d metric = Eigen::Matrix3d::Identity();
  metric(0, 0) = px_per_metre;
  metric(1, 1) = px_per_metre;
  Eigen::Matrix3d metric_angled = metric;
  metric_angled(1, 2) = -px_per_metre * cfg.angled.roi_y_min;

  const Homography floor_from_ceiling = invert(ground_plane_homography(cfg.ceiling.model));
  const Homography floor_from_angled = invert(ground_plane_homography(cfg.angled.model));
  TopViewChain chain;
  chain.ceiling_to_top = compose(Homography(metric), floor_from_ceiling);
  chain.angled_to_top = compose(Homography(metric_angled), floor_from_angled);
  chain.topceiling_to_topangled = Homography::translation(0.0, -px_per_metre * cfg.angled.roi_y_min);
  return chain;
}

SceneBundle simulate(const PenConfig& cfg) {
  cfg.validate();

  SceneBundle bundle;
  bundle.ceiling_to_angled = true_ceiling_to_angled(cfg);

  const double margin = footprint_margin(cfg);
  const double x_lo = margin;
  const double x_hi = cfg.floor_width - margin;
  const double y_lo = margin;
  const double y_hi = cfg.floor_depth - margin;

  std::mt19937_64 motion = stream(cfg.seed, 1);
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  std::normal_distribution<double> normal(0.0, 1.0);

  // Random sequential placement with the separation constraint.
  std::vector<AgentPose> agents;
  std::vector<double> speed;
  auto clear_of_others = [&](double x, double y, std::size_t self) {
    for (std::size_t j = 0; j < agents.size(); ++j) {
      if (j != self && std::hypot(agents[j].x - x, agents[j].y - y) < cfg.min_separation) {
        return false;
      }
    }
    return true;
  };
  for (int i = 0; i < cfg.n_agents; ++i) {
    bool placed = false;
    for (int attempt = 0; attempt < 100000 && !placed; ++attempt) {
      const double x = x_lo + (x_hi - x_lo) * unit(motion);
      const double y = y_lo + (y_hi - y_lo) * unit(motion);
      if (clear_of_others(x, y, agents.size())) {
        agents.push_back({x, y, 2.0 * kPi * unit(motion)});
        speed.push_back(cfg.max_speed * unit(motion));
        placed = true;
      }
    }
    if (!placed) {
      throw ConfigInvalid("n_agents", "agents do not fit in the pen at min_separation");
    }
  }

  std::mt19937_64 noise_rng[2] = {stream(cfg.seed, 10), stream(cfg.seed, 11)};
  std::mt19937_64 fp_rng[2] = {stream(cfg.seed, 20), stream(cfg.seed, 21)};
  const CameraView* views[2] = {&cfg.ceiling, &cfg.angled};
  const char* names[2] = {kCeiling, kAngled};
  const long frame_shift[2] = {0, cfg.angled_frame_offset};
  std::vector<Detection>* outputs[2] = {&bundle.ceiling_detections, &bundle.angled_detections};

  const double dt = 1.0 / cfg.fps;
  for (int t = 0; t < cfg.duration; ++t) {
    if (t > 0) {
      for (std::size_t i = 0; i < agents.size(); ++i) {
        AgentPose& a = agents[i];
        const double turn = normal(motion);
        const double accel = normal(motion);
        a.heading += cfg.heading_sigma * turn;
        speed[i] = std::clamp(speed[i] + 0.1 * cfg.max_speed * accel, 0.0, cfg.max_speed);
        double nx = a.x + speed[i] * dt * std::cos(a.heading);
        double ny = a.y + speed[i] * dt * std::sin(a.heading);
        if (nx < x_lo) {
          nx = 2.0 * x_lo - nx;
          a.heading = kPi - a.heading;
        } else if (nx > x_hi) {
          nx = 2.0 * x_hi - nx;
          a.heading = kPi - a.heading;
        }
        if (ny < y_lo) {
          ny = 2.0 * y_lo - ny;
          a.heading = -a.heading;
        } else if (ny > y_hi) {
          ny = 2.0 * y_hi - ny;
          a.heading = -a.heading;
        }
        nx = std::clamp(nx, x_lo, x_hi);
        ny = std::clamp(ny, y_lo, y_hi);
        if (clear_of_others(nx, ny, i)) {
          a.x = nx;
          a.y = ny;
        } else {
          speed[i] = 0.0;
        }
        a.heading = std::remainder(a.heading, 2.0 * kPi);
      }
    }
    bundle.trajectory.push_back(agents);

    for (int cam = 0; cam < 2; ++cam) {
      const long frame = t + frame_shift[cam];
      std::vector<BoundingBox> clean;
      for (std::size_t i = 0; i < agents.size(); ++i) {
        BoundingBox box;
        try {
          box = footprint_box(views[cam]->model, footprint_corners(cfg, agents[i]));
        } catch (const BehindCamera&) {
          continue;
        }
        if (!visible(*views[cam], agents[i], box)) {
          continue;
        }
        clean.push_back(box);
        if (frame >= 0) {
          bundle.ground_truth.push_back({names[cam], frame, static_cast<long>(i) + 1, box});
        }
      }
      // Noise is drawn even for frames that fall before zero after the
      // shift, keeping the streams aligned across offsets.
      auto dets = corrupt(clean, frame, *views[cam], cfg.noise, noise_rng[cam], fp_rng[cam]);
      if (frame >= 0) {
        outputs[cam]->insert(outputs[cam]->end(), dets.begin(), dets.end());
      }
    }
  }

  const int g = cfg.correspondence_grid;
  const double y0 = cfg.angled.roi_y_min;
  const double y1 = cfg.ceiling.roi_y_max;
  const Homography gc = ground_plane_homography(cfg.ceiling.model);
  const Homography ga = ground_plane_homography(cfg.angled.model);
  for (int iy = 0; iy < g; ++iy) {
    for (int ix = 0; ix < g; ++ix) {
      const PixelPoint floor{cfg.floor_width * ix / (g - 1), y0 + (y1 - y0) * iy / (g - 1)};
      try {
        const PixelPoint pc = apply(gc, floor);
        const PixelPoint pa = apply(ga, floor);
        if (inside_image(cfg.ceiling, pc) && inside_image(cfg.angled, pa)) {
          bundle.correspondences.push_back({pc, pa});
        }
      } catch (const PointAtInfinity&) {
      }
    }
  }
  return bundle;
}

}  // namespace pentrack
