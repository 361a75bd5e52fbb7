#pragma once

#include <string>

#include "mim/harness/metrics.hpp"

namespace mim::harness {

// Side-by-side precision and success plots as a standalone SVG document.
std::string curves_svg(const MetricReport& report, const std::string& title);

// "threshold_px,precision,threshold_iou,success" rows; the shorter precision
// grid leaves its columns empty past 50 px.
std::string metrics_csv(const MetricReport& report);

}  // namespace mim::harness
