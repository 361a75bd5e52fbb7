#include <algorithm>
#include <cmath>
#include <vector>

#include "mim/error.hpp"
#include "mim/rat_memory.hpp"

namespace mim::rat {
namespace {

// One axis of a bilinear read at pixel-index coordinate p (pixel j has
// center j): taps i0, i1 with weights w0, w1. Outside taps either clamp to
// the border or carry zero weight.
struct Tap {
  std::size_t i0 = 0, i1 = 0;
  double w0 = 0.0, w1 = 0.0;
};

Tap make_tap(double p, std::size_t n, bool zero_outside) {
  const double fp = std::floor(p);
  const double a = p - fp;
  const long i0 = static_cast<long>(fp), i1 = i0 + 1, last = static_cast<long>(n) - 1;
  Tap t;
  t.w0 = a == 0.0 ? 1.0 : 1.0 - a;
  t.w1 = a == 0.0 ? 0.0 : a;
  auto place = [&](long i, std::size_t& idx, double& w) {
    if (i < 0 || i > last) {
      if (zero_outside) w = 0.0;
      i = std::clamp(i, 0L, last);
    }
    idx = static_cast<std::size_t>(i);
  };
  place(i0, t.i0, t.w0);
  place(i1, t.i1, t.w1);
  return t;
}

// out(c, i, j) for i < rows, j < cols reads the source at
// (u0 + (j + 0.5) · su − 0.5, v0 + (i + 0.5) · sv − 0.5).
void resample(const Frame& f, double u0, double su, double v0, double sv, std::size_t rows,
              std::size_t cols, bool zero_outside, Frame& out) {
  std::vector<Tap> tx(cols), ty(rows);
  for (std::size_t j = 0; j < cols; ++j)
    tx[j] = make_tap(u0 + (static_cast<double>(j) + 0.5) * su - 0.5, f.width, zero_outside);
  for (std::size_t i = 0; i < rows; ++i)
    ty[i] = make_tap(v0 + (static_cast<double>(i) + 0.5) * sv - 0.5, f.height, zero_outside);
  for (std::size_t c = 0; c < f.channels; ++c)
    for (std::size_t i = 0; i < rows; ++i) {
      const Tap& y = ty[i];
      for (std::size_t j = 0; j < cols; ++j) {
        const Tap& x = tx[j];
        const double top = x.w0 * f.at(c, y.i0, x.i0) + x.w1 * f.at(c, y.i0, x.i1);
        const double bottom = x.w0 * f.at(c, y.i1, x.i0) + x.w1 * f.at(c, y.i1, x.i1);
        out.at(c, i, j) = y.w0 * top + y.w1 * bottom;
      }
    }
}

}  // namespace

Crop crop_and_resize(const Frame& frame, const BBox& bbox, double factor, std::size_t out_size) {
  MIM_CHECK(bbox.valid(), DomainError, "crop_and_resize: degenerate bounding box");
  MIM_CHECK(factor >= 1.0, DomainError, "crop_and_resize: enlargement factor must be >= 1");
  MIM_CHECK(out_size > 0, DomainError, "crop_and_resize: output size must be positive");
  const double w = bbox.w * factor, h = bbox.h * factor;
  const double x0 = std::max(0.0, bbox.cx() - 0.5 * w);
  const double y0 = std::max(0.0, bbox.cy() - 0.5 * h);
  const double x1 = std::min(static_cast<double>(frame.width), bbox.cx() + 0.5 * w);
  const double y1 = std::min(static_cast<double>(frame.height), bbox.cy() + 0.5 * h);
  MIM_CHECK(x1 > x0 && y1 > y0, DomainError, "crop_and_resize: bounding box lies outside frame");

  Crop out;
  out.region = {x0, y0, x1 - x0, y1 - y0};
  const double scale = static_cast<double>(out_size) / std::max(out.region.w, out.region.h);
  out.content_w = std::clamp<std::size_t>(
      static_cast<std::size_t>(std::lround(out.region.w * scale)), 1, out_size);
  out.content_h = std::clamp<std::size_t>(
      static_cast<std::size_t>(std::lround(out.region.h * scale)), 1, out_size);
  out.image = Frame(frame.channels, out_size, out_size);
  resample(frame, x0, 1.0 / scale, y0, 1.0 / scale, out.content_h, out.content_w, false, out.image);
  return out;
}

Frame crop_square(const Frame& frame, double cx, double cy, double side, std::size_t out_h,
                  std::size_t out_w) {
  MIM_CHECK(side > 0.0, DomainError, "crop_square: side must be positive");
  MIM_CHECK(out_h > 0 && out_w > 0, DomainError, "crop_square: output size must be positive");
  Frame out(frame.channels, out_h, out_w);
  resample(frame, cx - 0.5 * side, side / static_cast<double>(out_w), cy - 0.5 * side,
           side / static_cast<double>(out_h), out_h, out_w, true, out);
  return out;
}

Frame crop_context(const Frame& frame, const BBox& bbox, double factor, std::size_t out_h,
                   std::size_t out_w) {
  MIM_CHECK(bbox.valid(), DomainError, "crop_context: degenerate bounding box");
  MIM_CHECK(factor > 0.0, DomainError, "crop_context: factor must be positive");
  return crop_square(frame, bbox.cx(), bbox.cy(), factor * std::max(bbox.w, bbox.h), out_h, out_w);
}

}  // namespace mim::rat
