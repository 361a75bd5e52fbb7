#pragma once

#include <algorithm>
#include <cmath>

namespace mim {

// Axis-aligned box in pixels: (x, y) is the top-left corner.
struct BBox {
  double x = 0.0, y = 0.0, w = 0.0, h = 0.0;

  double cx() const { return x + 0.5 * w; }
  double cy() const { return y + 0.5 * h; }
  double area() const { return w * h; }
  bool valid() const { return w > 0.0 && h > 0.0; }
  static BBox from_center(double cx, double cy, double w, double h) {
    return {cx - 0.5 * w, cy - 0.5 * h, w, h};
  }
  friend bool operator==(const BBox&, const BBox&) = default;
};

inline double intersection_area(const BBox& a, const BBox& b) {
  const double iw = std::min(a.x + a.w, b.x + b.w) - std::max(a.x, b.x);
  const double ih = std::min(a.y + a.h, b.y + b.h) - std::max(a.y, b.y);
  return (iw > 0.0 && ih > 0.0) ? iw * ih : 0.0;
}

// area(a ∩ b) / area(a ∪ b); 0 when either box is degenerate.
inline double iou(const BBox& a, const BBox& b) {
  if (!a.valid() || !b.valid()) return 0.0;
  const double inter = intersection_area(a, b);
  if (inter <= 0.0) return 0.0;
  return inter / (a.area() + b.area() - inter);
}

inline double center_error(const BBox& a, const BBox& b) {
  return std::hypot(a.cx() - b.cx(), a.cy() - b.cy());
}

}  // namespace mim
