#include "pentrack/polygons.hpp"

#include "pentrack/errors.hpp"

#include <algorithm>
#include <cmath>
#include <functional>

namespace pentrack {

namespace {

constexpr double kClipEpsilon = 1e-9;

double signed_area(std::span<const PixelPoint> v) {
  double sum = 0.0;
  for (std::size_t i = 0; i < v.size(); ++i) {
    const PixelPoint& a = v[i];
    const PixelPoint& b = v[(i + 1) % v.size()];
    sum += a.x * b.y - b.x * a.y;
  }
  return 0.5 * sum;
}

// One Sutherland-Hodgman pass. `side` is >= 0 inside the half-plane and is
// affine along segments, so the crossing point interpolates linearly.
std::vector<PixelPoint> clip_half_plane(const std::vector<PixelPoint>& in,
                                        const std::function<double(const PixelPoint&)>& side) {
  std::vector<PixelPoint> out;
  if (in.empty()) {
    return out;
  }
  out.reserve(in.size() + 2);
  for (std::size_t i = 0; i < in.size(); ++i) {
    const PixelPoint& cur = in[i];
    const PixelPoint& prev = in[(i + in.size() - 1) % in.size()];
    const double sc = side(cur);
    const double sp = side(prev);
    const bool cur_in = sc >= -kClipEpsilon;
    const bool prev_in = sp >= -kClipEpsilon;
    if (cur_in != prev_in) {
      const double t = sp / (sp - sc);
      out.push_back({prev.x + t * (cur.x - prev.x), prev.y + t * (cur.y - prev.y)});
    }
    if (cur_in) {
      out.push_back(cur);
    }
  }
  return out;
}

}  // namespace

bool BoundingBox::valid() const {
  return std::isfinite(x_min) && std::isfinite(y_min) && std::isfinite(x_max) &&
         std::isfinite(y_max) && x_min < x_max && y_min < y_max;
}

std::array<PixelPoint, 4> BoundingBox::corners() const {
  return {PixelPoint{x_min, y_min}, PixelPoint{x_max, y_min}, PixelPoint{x_max, y_max},
          PixelPoint{x_min, y_max}};
}

void require_valid(const BoundingBox& b) {
  if (!b.valid()) {
    throw InvalidBox("(" + std::to_string(b.x_min) + ", " + std::to_string(b.y_min) + ", " +
                     std::to_string(b.x_max) + ", " + std::to_string(b.y_max) + ")");
  }
}

Quadrilateral project_box(const Homography& h, const BoundingBox& b) {
  Quadrilateral q;
  const auto corners = b.corners();
  for (std::size_t i = 0; i < 4; ++i) {
    q.vertices[i] = apply(h, corners[i]);
  }
  return q;
}

double polygon_area(std::span<const PixelPoint> vertices) {
  if (vertices.size() < 3) {
    throw TooFewVertices(vertices.size());
  }
  return std::abs(signed_area(vertices));
}

std::vector<PixelPoint> clip_to_box(std::span<const PixelPoint> subject, const BoundingBox& b) {
  std::vector<PixelPoint> poly(subject.begin(), subject.end());
  poly = clip_half_plane(poly, [&](const PixelPoint& p) { return p.x - b.x_min; });
  poly = clip_half_plane(poly, [&](const PixelPoint& p) { return b.x_max - p.x; });
  poly = clip_half_plane(poly, [&](const PixelPoint& p) { return p.y - b.y_min; });
  poly = clip_half_plane(poly, [&](const PixelPoint& p) { return b.y_max - p.y; });
  return poly;
}

std::vector<PixelPoint> clip_to_convex(std::span<const PixelPoint> subject,
                                       std::span<const PixelPoint> convex_window) {
  std::vector<PixelPoint> poly(subject.begin(), subject.end());
  if (convex_window.size() < 3) {
    return {};
  }
  const double orientation = signed_area(convex_window) >= 0.0 ? 1.0 : -1.0;
  for (std::size_t i = 0; i < convex_window.size(); ++i) {
    const PixelPoint a = convex_window[i];
    const PixelPoint b = convex_window[(i + 1) % convex_window.size()];
    poly = clip_half_plane(poly, [&](const PixelPoint& p) {
      return orientation * ((b.x - a.x) * (p.y - a.y) - (b.y - a.y) * (p.x - a.x));
    });
  }
  return poly;
}

double intersection_area(const Quadrilateral& q, const BoundingBox& b) {
  const auto clipped = clip_to_box(q.vertices, b);
  if (clipped.size() < 3) {
    return 0.0;
  }
  return polygon_area(clipped);
}

double iou(const BoundingBox& a, const BoundingBox& b) {
  const double w = std::min(a.x_max, b.x_max) - std::max(a.x_min, b.x_min);
  const double h = std::min(a.y_max, b.y_max) - std::max(a.y_min, b.y_min);
  if (w <= 0.0 || h <= 0.0) {
    return 0.0;
  }
  const double inter = w * h;
  const double uni = a.area() + b.area() - inter;
  return uni > 0.0 ? inter / uni : 0.0;
}

}  // namespace pentrack
