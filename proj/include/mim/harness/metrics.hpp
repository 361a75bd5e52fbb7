#pragma once

#include <vector>

#include "mim/bbox.hpp"

namespace mim::harness {

inline constexpr std::size_t kPrecisionSteps = 50;  // thresholds 0..50 px
inline constexpr std::size_t kSuccessSteps = 100;   // thresholds i/100, i = 0..100

struct MetricReport {
  std::size_t frames = 0;
  std::vector<double> precision;  // [i] = fraction with center error <= i px
  std::vector<double> success;    // [i] = fraction with IoU > i/100
  double precision_at_20 = 0.0;
  double success_auc = 0.0;    // trapezoid over the success grid
  double precision_auc = 0.0;  // trapezoid over the precision grid, normalized to [0, 1]
  double mean_iou = 0.0;
  double mean_center_error = 0.0;
};

double precision_threshold(std::size_t i);
double success_threshold(std::size_t i);

// Throws DomainError on length mismatch or an empty trajectory.
MetricReport evaluate(const std::vector<BBox>& traj, const std::vector<BBox>& gt);

}  // namespace mim::harness
