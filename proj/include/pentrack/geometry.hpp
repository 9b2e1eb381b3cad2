#pragma once

#include <Eigen/Core>

#include <cstdint>
#include <span>
#include <vector>

namespace pentrack {

struct PixelPoint {
  double x = 0.0;
  double y = 0.0;

  friend bool operator==(const PixelPoint&, const PixelPoint&) = default;
};

struct Correspondence {
  PixelPoint src;
  PixelPoint dst;
};

// Invertible 3x3 projective map between two image planes.
//
// The matrix is kept in canonical form: unit Frobenius norm with the
// largest-magnitude element positive, so two homographies that differ only
// by scale compare equal element-wise.
class Homography {
 public:
  static constexpr double kSingularTolerance = 1e-12;

  // Identity.
  Homography();

  // Throws SingularHomography when |det| of the normalized matrix is at or
  // below kSingularTolerance (or the matrix is non-finite).
  explicit Homography(const Eigen::Matrix3d& m);

  static Homography identity() { return Homography(); }
  static Homography translation(double tx, double ty);

  // Row-major 9 values.
  static Homography from_row_major(std::span<const double, 9> values);

  const Eigen::Matrix3d& matrix() const { return m_; }
  double operator()(int row, int col) const { return m_(row, col); }

 private:
  Eigen::Matrix3d m_;
};

// Canonical form of an arbitrary non-zero matrix.
Eigen::Matrix3d canonicalize(const Eigen::Matrix3d& m);

// Frobenius distance between canonical forms.
double canonical_distance(const Homography& a, const Homography& b);

// (u/w, v/w) of h * [x, y, 1]^T. Throws PointAtInfinity when |w| < 1e-12.
PixelPoint apply(const Homography& h, const PixelPoint& p);

// outer o inner: apply(compose(a, b), p) == apply(a, apply(b, p)).
Homography compose(const Homography& outer, const Homography& inner);

Homography invert(const Homography& h);

// Forward reprojection error |apply(h, src) - dst|; +inf if src maps to
// infinity.
double reprojection_error(const Homography& h, const Correspondence& c);

// Normalized DLT over all pairs (Hartley isotropic scaling on both sides).
// Throws TooFewPoints (< 4 pairs) or DegenerateConfiguration.
Homography estimate_dlt(std::span<const Correspondence> pairs);

struct RansacParams {
  double threshold_px = 3.0;
  int iterations = 1000;
  std::uint64_t seed = 0;
};

struct RansacResult {
  Homography h;
  std::vector<bool> inliers;
  std::size_t inlier_count = 0;
};

// 4-point RANSAC followed by a DLT refit on the consensus set. Throws
// NoConsensus when no model gathers 4 inliers (including < 4 pairs), and
// std::invalid_argument for a non-positive threshold or iteration count.
RansacResult estimate_ransac(std::span<const Correspondence> pairs, const RansacParams& params);

// invert(angled_to_top) o topceiling_to_topangled o ceiling_to_top
Homography compose_ceiling_to_angled(const Homography& ceiling_to_top,
                                     const Homography& angled_to_top,
                                     const Homography& topceiling_to_topangled);

}  // namespace pentrack
