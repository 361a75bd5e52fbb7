#pragma once

// Independent reference computations and the oracle suites built on them.
// Oracles deliberately avoid the code paths they check: series exponentials
// instead of scaling-and-squaring, full sorts instead of partial ones, exact
// integer arithmetic for threshold decisions, and central differences for
// gradients.

#include <filesystem>
#include <functional>
#include <string>
#include <vector>

#include "mim/autodiff.hpp"
#include "mim/bbox.hpp"
#include "mim/rat_memory.hpp"
#include "mim/rng.hpp"
#include "mim/ssm.hpp"

namespace mim::verify {

// Σ_{k<terms} M^k / k!
Tensor taylor_exp(const Tensor& m, std::size_t terms = 50);
// Ā and B̄ from explicit series, no scaling.
ssm::DiscreteSSM taylor_discretize(const ssm::ContinuousSSM& c, std::size_t terms = 50);

// Random dense system with ‖ΔA‖₁ ≤ max_norm.
ssm::ContinuousSSM random_system(Rng& rng, std::size_t n, std::size_t l, double max_norm);
// Random system whose Ā has spectral norm below 1, so long scans stay bounded.
ssm::ContinuousSSM random_stable_system(Rng& rng, std::size_t n, std::size_t l);

// Every entry scored with its own dot/norm evaluation, then fully sorted by
// (similarity desc, index asc) and truncated.
std::vector<rat::Retrieved> brute_force_top_k(const std::vector<std::vector<double>>& entries,
                                              std::span<const double> query, std::size_t k);

// Exact decision cos(a, b) < num/den for integer vectors (num, den > 0).
bool integer_cosine_below(const std::vector<long long>& a, const std::vector<long long>& b,
                          long long num, long long den);

struct GradCheck {
  std::size_t probes = 0;
  double max_error = 0.0;  // max |analytic − numeric| / max(1, |numeric|)
  std::string worst;       // "<param>[index]"
};

// Central differences on randomly chosen entries of the given leaves. loss()
// must rebuild the graph from the current leaf values on each call.
GradCheck check_gradients(const std::function<ad::Var()>& loss,
                          const std::vector<std::pair<std::string, ad::Var>>& params,
                          std::size_t probes, Rng& rng, double step = 1e-5);

// Five-frame toy trajectory with IoUs {1, 0.8, 0.5, 0.2, 0} and its report
// tabulated by hand.
struct HandTable {
  std::vector<BBox> traj, gt;
  std::vector<double> ious;
  std::vector<double> precision;  // 51 entries
  std::vector<double> success;    // 101 entries
  double success_auc = 0.0;
};
HandTable five_frame_table();

struct SuiteResult {
  std::string name;
  bool passed = false;
  std::string detail;
  double seconds = 0.0;
};

SuiteResult suite_discretization(std::size_t systems = 200, std::uint64_t seed = 11);
SuiteResult suite_scan_equivalence(std::size_t systems = 100, std::uint64_t seed = 12);
SuiteResult suite_selective_lti(std::size_t cases = 50, std::uint64_t seed = 13);
SuiteResult suite_retrieval(std::size_t trials = 1000, std::uint64_t seed = 14);
SuiteResult suite_corpus_threshold(std::size_t streams = 1000, std::uint64_t seed = 15);
SuiteResult suite_gradients(std::uint64_t seed = 16);
SuiteResult suite_fixed_point(std::uint64_t seed = 17);
SuiteResult suite_metrics();
SuiteResult suite_round_trip(const std::filesystem::path& scratch, std::uint64_t seed = 18);

std::vector<SuiteResult> run_all(const std::filesystem::path& scratch);
// {"passed": bool, "suites": [{"name", "passed", "detail", "seconds"}, ...]}
std::string summary_json(const std::vector<SuiteResult>& results);

}  // namespace mim::verify
