#include "pentrack/geometry.hpp"

#include "pentrack/errors.hpp"

#include <Eigen/Dense>
#include <Eigen/SVD>

#include <algorithm>
#include <array>
#include <cmath>
#include <limits>
#include <random>
#include <stdexcept>

namespace pentrack {

namespace {

constexpr double kInfinityTolerance = 1e-12;
constexpr double kRankTolerance = 1e-12;
constexpr double kCollinearTolerance = 1e-10;

// Similarity taking the points to centroid 0, mean distance sqrt(2).
Eigen::Matrix3d hartley_transform(std::span<const PixelPoint> pts) {
  double cx = 0.0;
  double cy = 0.0;
  for (const auto& p : pts) {
    cx += p.x;
    cy += p.y;
  }
  cx /= static_cast<double>(pts.size());
  cy /= static_cast<double>(pts.size());
  double mean_dist = 0.0;
  for (const auto& p : pts) {
    mean_dist += std::hypot(p.x - cx, p.y - cy);
  }
  mean_dist /= static_cast<double>(pts.size());
  if (!(mean_dist > 0.0) || !std::isfinite(mean_dist)) {
    throw DegenerateConfiguration("coincident points");
  }
  const double s = std::sqrt(2.0) / mean_dist;
  Eigen::Matrix3d t;
  t << s, 0, -s * cx, 0, s, -s * cy, 0, 0, 1;
  return t;
}

PixelPoint transform(const Eigen::Matrix3d& t, const PixelPoint& p) {
  return {t(0, 0) * p.x + t(0, 2), t(1, 1) * p.y + t(1, 2)};
}

double cross(const PixelPoint& a, const PixelPoint& b, const PixelPoint& c) {
  return (b.x - a.x) * (c.y - a.y) - (b.y - a.y) * (c.x - a.x);
}

// Any three of the four (normalized) points collinear.
bool has_collinear_triple(std::span<const PixelPoint, 4> p) {
  static constexpr int kTriples[4][3] = {{0, 1, 2}, {0, 1, 3}, {0, 2, 3}, {1, 2, 3}};
  for (const auto& t : kTriples) {
    if (std::abs(cross(p[t[0]], p[t[1]], p[t[2]])) < kCollinearTolerance) {
      return true;
    }
  }
  return false;
}

}  // namespace

Eigen::Matrix3d canonicalize(const Eigen::Matrix3d& m) {
  const double norm = m.norm();
  if (!(norm > 0.0) || !std::isfinite(norm)) {
    throw SingularHomography("matrix is zero or non-finite");
  }
  Eigen::Matrix3d c = m / norm;
  // First element (row-major) of largest magnitude decides the sign.
  int best_r = 0;
  int best_c = 0;
  double best = -1.0;
  for (int r = 0; r < 3; ++r) {
    for (int k = 0; k < 3; ++k) {
      if (std::abs(c(r, k)) > best) {
        best = std::abs(c(r, k));
        best_r = r;
        best_c = k;
      }
    }
  }
  if (c(best_r, best_c) < 0.0) {
    c = -c;
  }
  return c;
}

Homography::Homography() : m_(canonicalize(Eigen::Matrix3d::Identity())) {}

Homography::Homography(const Eigen::Matrix3d& m) : m_(canonicalize(m)) {
  if (!(std::abs(m_.determinant()) > kSingularTolerance)) {
    throw SingularHomography();
  }
}

Homography Homography::translation(double tx, double ty) {
  Eigen::Matrix3d m = Eigen::Matrix3d::Identity();
  m(0, 2) = tx;
  m(1, 2) = ty;
  return Homography(m);
}

Homography Homography::from_row_major(std::span<const double, 9> values) {
  Eigen::Matrix3d m;
  for (int r = 0; r < 3; ++r) {
    for (int c = 0; c < 3; ++c) {
      m(r, c) = values[static_cast<std::size_t>(r * 3 + c)];
    }
  }
  return Homography(m);
}

double canonical_distance(const Homography& a, const Homography& b) {
  return (a.matrix() - b.matrix()).norm();
}

PixelPoint apply(const Homography& h, const PixelPoint& p) {
  const Eigen::Matrix3d& m = h.matrix();
  const double u = m(0, 0) * p.x + m(0, 1) * p.y + m(0, 2);
  const double v = m(1, 0) * p.x + m(1, 1) * p.y + m(1, 2);
  const double w = m(2, 0) * p.x + m(2, 1) * p.y + m(2, 2);
  if (std::abs(w) < kInfinityTolerance) {
    throw PointAtInfinity();
  }
  return {u / w, v / w};
}

Homography compose(const Homography& outer, const Homography& inner) {
  return Homography(outer.matrix() * inner.matrix());
}

Homography invert(const Homography& h) {
  return Homography(h.matrix().inverse());
}

double reprojection_error(const Homography& h, const Correspondence& c) {
  try {
    const PixelPoint q = apply(h, c.src);
    return std::hypot(q.x - c.dst.x, q.y - c.dst.y);
  } catch (const PointAtInfinity&) {
    return std::numeric_limits<double>::infinity();
  }
}

Homography estimate_dlt(std::span<const Correspondence> pairs) {
  const std::size_t n = pairs.size();
  if (n < 4) {
    throw TooFewPoints(n);
  }
  std::vector<PixelPoint> src(n);
  std::vector<PixelPoint> dst(n);
  for (std::size_t i = 0; i < n; ++i) {
    src[i] = pairs[i].src;
    dst[i] = pairs[i].dst;
  }
  const Eigen::Matrix3d t_src = hartley_transform(src);
  const Eigen::Matrix3d t_dst = hartley_transform(dst);
  for (std::size_t i = 0; i < n; ++i) {
    src[i] = transform(t_src, src[i]);
    dst[i] = transform(t_dst, dst[i]);
  }
  if (n == 4 && (has_collinear_triple(std::span<const PixelPoint, 4>(src.data(), 4)) ||
                 has_collinear_triple(std::span<const PixelPoint, 4>(dst.data(), 4)))) {
    throw DegenerateConfiguration("three of four points are collinear");
  }

  Eigen::MatrixXd a = Eigen::MatrixXd::Zero(static_cast<Eigen::Index>(2 * n), 9);
  for (std::size_t i = 0; i < n; ++i) {
    const double x = src[i].x;
    const double y = src[i].y;
    const double u = dst[i].x;
    const double v = dst[i].y;
    const auto r = static_cast<Eigen::Index>(2 * i);
    a.row(r) << -x, -y, -1, 0, 0, 0, u * x, u * y, u;
    a.row(r + 1) << 0, 0, 0, -x, -y, -1, v * x, v * y, v;
  }
  const Eigen::JacobiSVD<Eigen::MatrixXd> svd(a, Eigen::ComputeFullV);
  const Eigen::VectorXd& s = svd.singularValues();
  // A one-dimensional null space is required: the 8th singular value must
  // stay clear of zero.
  if (!(s(0) > 0.0) || s(7) / s(0) < kRankTolerance) {
    throw DegenerateConfiguration("correspondences do not determine a unique homography");
  }
  const Eigen::VectorXd h = svd.matrixV().col(8);
  Eigen::Matrix3d hn;
  hn << h(0), h(1), h(2), h(3), h(4), h(5), h(6), h(7), h(8);
  const Eigen::Matrix3d m = t_dst.inverse() * hn * t_src;
  try {
    return Homography(m);
  } catch (const SingularHomography&) {
    throw DegenerateConfiguration("estimated homography is singular");
  }
}

RansacResult estimate_ransac(std::span<const Correspondence> pairs, const RansacParams& params) {
  if (!(params.threshold_px > 0.0)) {
    throw std::invalid_argument("RANSAC threshold must be positive");
  }
  if (params.iterations < 1) {
    throw std::invalid_argument("RANSAC iterations must be >= 1");
  }
  const std::size_t n = pairs.size();
  if (n < 4) {
    throw NoConsensus("fewer than 4 correspondences");
  }

  std::mt19937_64 rng(params.seed);
  std::uniform_int_distribution<std::size_t> pick(0, n - 1);

  std::vector<bool> best_mask;
  std::size_t best_count = 0;
  double best_error = std::numeric_limits<double>::infinity();

  std::vector<bool> mask(n);
  for (int it = 0; it < params.iterations; ++it) {
    std::array<std::size_t, 4> idx{};
    for (std::size_t k = 0; k < 4; ++k) {
      std::size_t candidate = 0;
      do {
        candidate = pick(rng);
      } while (std::find(idx.begin(), idx.begin() + static_cast<long>(k), candidate) !=
               idx.begin() + static_cast<long>(k));
      idx[k] = candidate;
    }
    const std::array<Correspondence, 4> sample = {pairs[idx[0]], pairs[idx[1]], pairs[idx[2]],
                                                  pairs[idx[3]]};
    Homography model;
    try {
      model = estimate_dlt(sample);
    } catch (const DegenerateConfiguration&) {
      continue;
    }

    std::size_t count = 0;
    double error = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
      const double e = reprojection_error(model, pairs[i]);
      mask[i] = e <= params.threshold_px;
      if (mask[i]) {
        ++count;
        error += e;
      }
    }
    if (count > best_count || (count == best_count && count > 0 && error < best_error)) {
      best_count = count;
      best_error = error;
      best_mask = mask;
    }
  }
  if (best_count < 4) {
    throw NoConsensus("best model has " + std::to_string(best_count) + " inliers");
  }

  // Refit on the consensus set until the set stops changing.
  RansacResult result;
  std::vector<bool> current = best_mask;
  for (int round = 0; round < 5; ++round) {
    std::vector<Correspondence> inliers;
    for (std::size_t i = 0; i < n; ++i) {
      if (current[i]) {
        inliers.push_back(pairs[i]);
      }
    }
    const Homography refit = estimate_dlt(inliers);
    std::vector<bool> next(n);
    std::size_t count = 0;
    for (std::size_t i = 0; i < n; ++i) {
      next[i] = reprojection_error(refit, pairs[i]) <= params.threshold_px;
      count += next[i] ? 1 : 0;
    }
    result.h = refit;
    result.inliers = current;
    result.inlier_count = inliers.size();
    if (next == current || count < inliers.size()) {
      break;
    }
    current = std::move(next);
  }
  return result;
}

Homography compose_ceiling_to_angled(const Homography& ceiling_to_top,
                                     const Homography& angled_to_top,
                                     const Homography& topceiling_to_topangled) {
  return compose(invert(angled_to_top), compose(topceiling_to_topangled, ceiling_to_top));
}

}  // namespace pentrack
