#pragma once

#include <cstddef>
#include <vector>

namespace mim {

// Planar RGB image, channel-major (C×H×W), values nominally in [0, 1].
struct Frame {
  std::size_t channels = 3;
  std::size_t height = 0;
  std::size_t width = 0;
  std::vector<double> data;

  Frame() = default;
  Frame(std::size_t c, std::size_t h, std::size_t w, double fill = 0.0)
      : channels(c), height(h), width(w), data(c * h * w, fill) {}

  double& at(std::size_t c, std::size_t y, std::size_t x) {
    return data[(c * height + y) * width + x];
  }
  double at(std::size_t c, std::size_t y, std::size_t x) const {
    return data[(c * height + y) * width + x];
  }
  bool same_size(const Frame& o) const {
    return channels == o.channels && height == o.height && width == o.width;
  }
  friend bool operator==(const Frame&, const Frame&) = default;
};

}  // namespace mim
