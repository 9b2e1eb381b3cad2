#pragma once

#include "pentrack/geometry.hpp"

#include <array>
#include <span>
#include <vector>

namespace pentrack {

// Axis-aligned box in pixels.
struct BoundingBox {
  double x_min = 0.0;
  double y_min = 0.0;
  double x_max = 0.0;
  double y_max = 0.0;

  static BoundingBox from_xywh(double x, double y, double w, double h) {
    return {x, y, x + w, y + h};
  }

  double width() const { return x_max - x_min; }
  double height() const { return y_max - y_min; }
  double area() const { return width() * height(); }
  PixelPoint center() const { return {0.5 * (x_min + x_max), 0.5 * (y_min + y_max)}; }

  // x_min < x_max, y_min < y_max, all finite.
  bool valid() const;

  // TL, TR, BR, BL.
  std::array<PixelPoint, 4> corners() const;

  friend bool operator==(const BoundingBox&, const BoundingBox&) = default;
};

// Throws InvalidBox unless b.valid().
void require_valid(const BoundingBox& b);

// Image of a box under a homography; vertices keep the TL, TR, BR, BL order
// of the source corners. May be non-convex under strong perspective.
struct Quadrilateral {
  std::array<PixelPoint, 4> vertices;
};

Quadrilateral project_box(const Homography& h, const BoundingBox& b);

// |shoelace| / 2. Throws TooFewVertices below 3.
double polygon_area(std::span<const PixelPoint> vertices);

// Sutherland-Hodgman clip of an arbitrary polygon against the four
// half-planes of an axis-aligned box.
std::vector<PixelPoint> clip_to_box(std::span<const PixelPoint> subject, const BoundingBox& b);

// Clip against a convex polygon (either winding).
std::vector<PixelPoint> clip_to_convex(std::span<const PixelPoint> subject,
                                       std::span<const PixelPoint> convex_window);

// Area of q intersected with b, in square pixels. Disjoint inputs give 0.
double intersection_area(const Quadrilateral& q, const BoundingBox& b);

double iou(const BoundingBox& a, const BoundingBox& b);

}  // namespace pentrack
