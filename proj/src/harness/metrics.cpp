#include "mim/harness/metrics.hpp"

#include "mim/error.hpp"

namespace mim::harness {

double precision_threshold(std::size_t i) { return static_cast<double>(i); }
double success_threshold(std::size_t i) { return static_cast<double>(i) / 100.0; }

MetricReport evaluate(const std::vector<BBox>& traj, const std::vector<BBox>& gt) {
  MIM_CHECK(traj.size() == gt.size(), DomainError,
            "evaluate: trajectory has " + std::to_string(traj.size()) + " boxes, ground truth " +
                std::to_string(gt.size()));
  MIM_CHECK(!traj.empty(), DomainError, "evaluate: empty trajectory");
  const std::size_t n = traj.size();
  std::vector<double> ious(n), errs(n);
  MetricReport r;
  r.frames = n;
  for (std::size_t f = 0; f < n; ++f) {
    ious[f] = iou(traj[f], gt[f]);
    errs[f] = center_error(traj[f], gt[f]);
    r.mean_iou += ious[f];
    r.mean_center_error += errs[f];
  }
  r.mean_iou /= static_cast<double>(n);
  r.mean_center_error /= static_cast<double>(n);

  // Integer counts keep the AUC sums exact.
  std::vector<std::size_t> pc(kPrecisionSteps + 1), sc(kSuccessSteps + 1);
  for (std::size_t f = 0; f < n; ++f) {
    for (std::size_t i = 0; i <= kPrecisionSteps; ++i) pc[i] += errs[f] <= precision_threshold(i);
    for (std::size_t i = 0; i <= kSuccessSteps; ++i) sc[i] += ious[f] > success_threshold(i);
  }
  const double nd = static_cast<double>(n);
  for (auto c : pc) r.precision.push_back(static_cast<double>(c) / nd);
  for (auto c : sc) r.success.push_back(static_cast<double>(c) / nd);
  r.precision_at_20 = r.precision[20];

  auto trapezoid = [nd](const std::vector<std::size_t>& c) {
    std::size_t twice = 0;
    for (std::size_t i = 0; i + 1 < c.size(); ++i) twice += c[i] + c[i + 1];
    return static_cast<double>(twice) / (2.0 * nd * static_cast<double>(c.size() - 1));
  };
  r.success_auc = trapezoid(sc);
  r.precision_auc = trapezoid(pc);
  return r;
}

}  // namespace mim::harness
