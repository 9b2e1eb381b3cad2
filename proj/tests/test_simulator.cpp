#include "pentrack/errors.hpp"
#include "pentrack/io.hpp"
#include "pentrack/simulator.hpp"

#include <gtest/gtest.h>

#include <Eigen/Dense>

#include <cmath>
#include <filesystem>
#include <fstream>
#include <set>
#include <sstream>

using namespace pentrack;
namespace fs = std::filesystem;

namespace {

// Full 3x4 projection matrix K [R | t].
PixelPoint project_3x4(const CameraModel& cam, const WorldPoint& p) {
  Eigen::Matrix<double, 3, 4> rt;
  rt.leftCols<3>() = cam.r;
  rt.col(3) = cam.t;
  const Eigen::Vector3d x = cam.k * rt * Eigen::Vector4d(p.x, p.y, p.z, 1.0);
  return {x(0) / x(2), x(1) / x(2)};
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::ostringstream os;
  os << in.rdbuf();
  return os.str();
}

fs::path fresh_dir(const std::string& name) {
  const fs::path d = fs::temp_directory_path() / ("pentrack_sim_" + name);
  fs::remove_all(d);
  fs::create_directories(d);
  return d;
}

PenConfig small_config() {
  PenConfig cfg = PenConfig::defaults();
  cfg.duration = 150;
  cfg.n_agents = 6;
  return cfg;
}

std::set<std::pair<long, std::string>> det_keys(const std::vector<Detection>& dets) {
  std::set<std::pair<long, std::string>> out;
  for (const auto& d : dets) {
    std::ostringstream os;
    os.precision(17);
    os << d.box.x_min << ',' << d.box.y_min << ',' << d.box.x_max << ',' << d.box.y_max;
    out.emplace(d.frame, os.str());
  }
  return out;
}

}  // namespace

TEST(Camera, OverheadProjectionByHand) {
  // 2 m above the origin looking straight down, f = 100, centre (50, 50).
  Eigen::Matrix3d r;
  r << 1, 0, 0, 0, -1, 0, 0, 0, -1;
  const CameraModel cam = CameraModel::from_pose(100, 50, 50, {0, 0, 2}, r);
  const PixelPoint p = project_world(cam, {1, 0.5, 0});
  EXPECT_NEAR(p.x, 50 + 100 * 1 / 2.0, 1e-12);
  EXPECT_NEAR(p.y, 50 - 100 * 0.5 / 2.0, 1e-12);
  EXPECT_THROW(project_world(cam, {0, 0, 3}), BehindCamera);
}

TEST(Camera, ProjectionMatchesThreeByFour) {
  const PenConfig cfg = PenConfig::defaults();
  for (const auto* view : {&cfg.ceiling, &cfg.angled}) {
    for (double x = 0.0; x <= cfg.floor_width; x += 0.75) {
      for (double y = 0.0; y <= cfg.floor_depth; y += 1.5) {
        for (double z : {0.0, 0.5}) {
          const PixelPoint a = project_world(view->model, {x, y, z});
          const PixelPoint b = project_3x4(view->model, {x, y, z});
          EXPECT_NEAR(a.x, b.x, 1e-9);
          EXPECT_NEAR(a.y, b.y, 1e-9);
        }
      }
    }
  }
}

TEST(Camera, RejectsNonRotation) {
  CameraModel cam;
  cam.r(0, 0) = 2.0;
  EXPECT_THROW(cam.validate(), DegenerateCamera);
  Eigen::Matrix3d r = Eigen::Matrix3d::Identity();
  EXPECT_THROW(ground_plane_homography(CameraModel::from_pose(100, 0, 0, {0, 0, 0}, r)), DegenerateCamera);
}

TEST(GroundPlane, HomographyAgreesWithProjection) {
  const PenConfig cfg = PenConfig::defaults();
  for (const auto* view : {&cfg.ceiling, &cfg.angled}) {
    const Homography h = ground_plane_homography(view->model);
    for (double x = 0.0; x <= cfg.floor_width; x += 0.5) {
      for (double y = 0.0; y <= cfg.floor_depth; y += 1.0) {
        const PixelPoint a = apply(h, {x, y});
        const PixelPoint b = project_world(view->model, {x, y, 0});
        EXPECT_NEAR(a.x, b.x, 1e-9);
        EXPECT_NEAR(a.y, b.y, 1e-9);
      }
    }
  }
}

TEST(GroundPlane, OverheadViewIsASimilarity) {
  const Homography h = ground_plane_homography(PenConfig::defaults().ceiling.model);
  const Eigen::Matrix3d m = h.matrix() / h(2, 2);
  EXPECT_NEAR(m(2, 0), 0.0, 1e-12);
  EXPECT_NEAR(m(2, 1), 0.0, 1e-12);
  const Eigen::Matrix2d a = m.topLeftCorner<2, 2>();
  const Eigen::Matrix2d ata = a.transpose() * a;
  EXPECT_NEAR(ata(0, 1), 0.0, 1e-9);
  EXPECT_NEAR(ata(0, 0), ata(1, 1), 1e-9 * ata(0, 0));
}

TEST(GroundPlane, TranslatingCameraOnlyMovesLastColumn) {
  const PenConfig cfg = PenConfig::defaults();
  const CameraModel& base = cfg.angled.model;
  const Eigen::Vector3d centre = -base.r.transpose() * base.t;
  const CameraModel moved = CameraModel::from_pose(base.k(0, 0), base.k(0, 2), base.k(1, 2),
                                                   centre + Eigen::Vector3d(0.7, -0.4, 0.0), base.r);
  const Eigen::Matrix3d a = ground_plane_homography(base).matrix();
  const Eigen::Matrix3d b = ground_plane_homography(moved).matrix();
  // Same first two columns up to the overall scale.
  const double s = b.col(0).norm() / a.col(0).norm() * (a.col(0).dot(b.col(0)) < 0 ? -1.0 : 1.0);
  EXPECT_LT((b.leftCols<2>() - s * a.leftCols<2>()).cwiseAbs().maxCoeff(), 1e-12);
  EXPECT_GT((b.col(2) - s * a.col(2)).cwiseAbs().maxCoeff(), 1e-3);
}

TEST(GroundPlane, TopViewChainEqualsDirectMap) {
  for (const double depth : {9.0, 14.0, 20.0}) {
    PenConfig cfg = PenConfig::defaults();
    cfg.floor_depth = depth;
    place_default_cameras(cfg);
    const TopViewChain c = top_view_chain(cfg);
    const Homography chained =
        compose_ceiling_to_angled(c.ceiling_to_top, c.angled_to_top, c.topceiling_to_topangled);
    EXPECT_LT(canonical_distance(chained, true_ceiling_to_angled(cfg)), 1e-9) << depth;
  }
}

TEST(Simulate, StationaryAgentSeenEveryFrame) {
  PenConfig cfg = PenConfig::defaults();
  cfg.n_agents = 1;
  cfg.max_speed = 0.0;
  cfg.duration = 10;
  for (std::uint64_t seed = 0; seed < 20; ++seed) {
    cfg.seed = seed;
    const SceneBundle s = simulate(cfg);
    ASSERT_EQ(s.trajectory.size(), 10u);
    for (const auto& poses : s.trajectory) {
      EXPECT_EQ(poses[0].x, s.trajectory[0][0].x);
      EXPECT_EQ(poses[0].y, s.trajectory[0][0].y);
    }
    std::size_t gt_ceiling = 0;
    for (const auto& g : s.ground_truth) {
      EXPECT_EQ(g.identity, 1);
      gt_ceiling += g.camera == kCeiling ? 1 : 0;
    }
    const std::size_t gt_angled = s.ground_truth.size() - gt_ceiling;
    EXPECT_TRUE(gt_ceiling == 0 || gt_ceiling == 10);
    EXPECT_TRUE(gt_angled == 0 || gt_angled == 10);
    EXPECT_GT(gt_ceiling + gt_angled, 0u);
    EXPECT_EQ(s.ceiling_detections.size(), gt_ceiling);
    EXPECT_EQ(s.angled_detections.size(), gt_angled);
  }
}

TEST(Simulate, NoiseFreeDetectionsEqualGroundTruth) {
  const SceneBundle s = simulate(small_config());
  std::size_t k = 0;
  for (const auto& g : s.ground_truth) {
    if (g.camera != kCeiling) continue;
    ASSERT_LT(k, s.ceiling_detections.size());
    EXPECT_EQ(s.ceiling_detections[k].frame, g.frame);
    EXPECT_EQ(s.ceiling_detections[k].box, g.box);
    ++k;
  }
  EXPECT_EQ(k, s.ceiling_detections.size());
}

TEST(Simulate, FullDropoutKeepsGroundTruth) {
  PenConfig cfg = small_config();
  cfg.noise.dropout_prob = 1.0;
  const SceneBundle s = simulate(cfg);
  EXPECT_TRUE(s.ceiling_detections.empty());
  EXPECT_TRUE(s.angled_detections.empty());
  EXPECT_EQ(s.ground_truth, simulate(small_config()).ground_truth);
}

TEST(Simulate, DropoutIsNestedAcrossRates) {
  PenConfig lo = small_config();
  lo.noise.dropout_prob = 0.1;
  PenConfig hi = lo;
  hi.noise.dropout_prob = 0.3;
  const auto a = det_keys(simulate(lo).ceiling_detections);
  const auto b = det_keys(simulate(hi).ceiling_detections);
  EXPECT_LT(b.size(), a.size());
  for (const auto& k : b) EXPECT_TRUE(a.contains(k));
}

TEST(Simulate, DeterministicBundle) {
  PenConfig cfg = small_config();
  cfg.noise = {0.1, 2.0, 0.5, 0.1, 0.1};
  cfg.seed = 99;
  const fs::path d1 = fresh_dir("a");
  const fs::path d2 = fresh_dir("b");
  const auto names = write_bundle(simulate(cfg), d1);
  write_bundle(simulate(cfg), d2);
  EXPECT_EQ(names.size(), 6u);
  for (const auto& n : names) EXPECT_EQ(slurp(d1 / n), slurp(d2 / n)) << n;
  EXPECT_EQ(slurp(d1 / kBundleManifest), slurp(d2 / kBundleManifest));
  cfg.seed = 100;
  const fs::path d3 = fresh_dir("c");
  write_bundle(simulate(cfg), d3);
  EXPECT_NE(slurp(d1 / names[0]), slurp(d3 / names[0]));
}

TEST(Simulate, AgentsStayInsideAndApart) {
  PenConfig cfg = PenConfig::defaults();
  cfg.duration = 600;
  const SceneBundle s = simulate(cfg);
  const double margin = 0.5 * std::hypot(cfg.footprint_length, cfg.footprint_width);
  for (const auto& poses : s.trajectory) {
    ASSERT_EQ(poses.size(), 17u);
    for (std::size_t i = 0; i < poses.size(); ++i) {
      EXPECT_GE(poses[i].x, margin - 1e-9);
      EXPECT_LE(poses[i].x, cfg.floor_width - margin + 1e-9);
      EXPECT_GE(poses[i].y, margin - 1e-9);
      EXPECT_LE(poses[i].y, cfg.floor_depth - margin + 1e-9);
      for (std::size_t j = i + 1; j < poses.size(); ++j) {
        EXPECT_GE(std::hypot(poses[i].x - poses[j].x, poses[i].y - poses[j].y), cfg.min_separation - 1e-9);
      }
    }
  }
}

TEST(Simulate, BoxesInsideImages) {
  PenConfig cfg = small_config();
  cfg.noise = {0.0, 8.0, 1.0, 0.2, 0.2};
  const SceneBundle s = simulate(cfg);
  for (const auto& d : s.ceiling_detections) {
    EXPECT_GE(d.box.x_min, 0.0);
    EXPECT_LE(d.box.x_max, cfg.ceiling.image_width);
    EXPECT_GE(d.box.y_min, 0.0);
    EXPECT_LE(d.box.y_max, cfg.ceiling.image_height);
    EXPECT_TRUE(d.box.valid());
  }
}

TEST(Simulate, CorrespondencesRecoverTrueMap) {
  const SceneBundle s = simulate(PenConfig::defaults());
  ASSERT_GE(s.correspondences.size(), 4u);
  for (const auto& c : s.correspondences) {
    const PixelPoint p = apply(s.ceiling_to_angled, c.src);
    EXPECT_NEAR(p.x, c.dst.x, 1e-6);
    EXPECT_NEAR(p.y, c.dst.y, 1e-6);
  }
  EXPECT_LT(canonical_distance(estimate_dlt(s.correspondences), s.ceiling_to_angled), 1e-6);
}

TEST(Simulate, TrueMapCarriesCeilingBoxesOntoTheSameAgent) {
  // Every agent seen by both cameras overlaps its own angled box after
  // projection, and overlaps it more than any other agent's box.
  PenConfig cfg = PenConfig::defaults();
  cfg.duration = 300;
  const SceneBundle s = simulate(cfg);
  std::map<long, std::vector<AnnotatedBox>> angled;
  for (const auto& g : s.ground_truth) {
    if (g.camera == kAngled) angled[g.frame].push_back(g);
  }
  long checked = 0;
  for (const auto& g : s.ground_truth) {
    if (g.camera != kCeiling) continue;
    const auto it = angled.find(g.frame);
    if (it == angled.end()) continue;
    const Quadrilateral q = project_box(s.ceiling_to_angled, g.box);
    double own = -1.0, other = 0.0;
    for (const auto& a : it->second) {
      const double v = intersection_area(q, a.box);
      if (a.identity == g.identity) own = v;
      else other = std::max(other, v);
    }
    if (own < 0.0) continue;
    ++checked;
    EXPECT_GT(own, 0.0);
    EXPECT_GT(own, other);
  }
  EXPECT_GT(checked, 1000);
}

TEST(Config, InvalidFieldsAreNamed) {
  auto field_of = [](PenConfig cfg) -> std::string {
    try {
      simulate(cfg);
    } catch (const ConfigInvalid& e) {
      return e.field();
    }
    return "";
  };
  PenConfig c = PenConfig::defaults();
  c.floor_width = -1;
  EXPECT_EQ(field_of(c), "floor_width");
  c = PenConfig::defaults();
  c.duration = 0;
  EXPECT_EQ(field_of(c), "duration");
  c = PenConfig::defaults();
  c.noise.dropout_prob = 1.5;
  EXPECT_EQ(field_of(c), "noise.dropout_prob");
  c = PenConfig::defaults();
  c.n_agents = 500;
  EXPECT_EQ(field_of(c), "n_agents");
  c = PenConfig::defaults();
  c.correspondence_grid = 1;
  EXPECT_EQ(field_of(c), "correspondence_grid");
  c = PenConfig::defaults();
  c.fps = 0;
  EXPECT_EQ(field_of(c), "fps");
}

TEST(Simulate, AngledOffsetShiftsFrameLabels) {
  PenConfig cfg = small_config();
  cfg.angled_frame_offset = 7;
  const SceneBundle s = simulate(cfg);
  const SceneBundle base = simulate(small_config());
  ASSERT_EQ(s.angled_detections.size(), base.angled_detections.size());
  for (std::size_t i = 0; i < s.angled_detections.size(); ++i) {
    EXPECT_EQ(s.angled_detections[i].frame, base.angled_detections[i].frame + 7);
    EXPECT_EQ(s.angled_detections[i].box, base.angled_detections[i].box);
  }
}
