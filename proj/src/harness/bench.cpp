#include "mim/harness/bench.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <sstream>

#include "mim/error.hpp"
#include "mim/ops.hpp"
#include "mim/rng.hpp"
#include "mim/ssm.hpp"

namespace mim::harness {
namespace {

Tensor random_tensor(std::size_t rows, std::size_t cols, double lo, double hi, Rng& rng) {
  Tensor t({rows, cols});
  for (auto& v : t.values()) v = rng.uniform(lo, hi);
  return t;
}

}  // namespace

std::vector<BenchRow> bench_scan(const std::vector<std::size_t>& lengths, const BenchOptions& opt) {
  MIM_CHECK(opt.runs >= 5, DomainError, "bench_scan needs at least 5 runs per length");
  for (std::size_t i = 0; i < lengths.size(); ++i)
    MIM_CHECK(lengths[i] > 0 && (i == 0 || lengths[i] > lengths[i - 1]), DomainError,
              "bench_scan lengths must be positive and strictly ascending");
  Rng rng(opt.seed);
  const std::size_t D = opt.dim, N = opt.state;
  Tensor a({D, N});
  for (std::size_t d = 0; d < D; ++d)
    for (std::size_t n = 0; n < N; ++n) a.at(d, n) = -static_cast<double>(n + 1);
  const Tensor skip = random_tensor(1, D, 0.5, 1.5, rng);

  std::vector<BenchRow> rows;
  volatile double sink = 0.0;
  for (std::size_t m : lengths) {
    const Tensor x = random_tensor(m, D, -1.0, 1.0, rng);
    const Tensor delta = random_tensor(m, D, 0.01, 0.1, rng);
    const Tensor b = random_tensor(m, N, -1.0, 1.0, rng);
    const Tensor c = random_tensor(m, N, -1.0, 1.0, rng);
    // One untimed warm-up run.
    sink = sink + ssm::scan_core_values(x, delta, a, b, c, skip, m, ssm::Direction::kForward)[0];
    std::vector<double> ns;
    for (std::size_t r = 0; r < opt.runs; ++r) {
      const auto t0 = std::chrono::steady_clock::now();
      const Tensor y = ssm::scan_core_values(x, delta, a, b, c, skip, m, ssm::Direction::kForward);
      const auto t1 = std::chrono::steady_clock::now();
      sink = sink + y[y.size() - 1];
      ns.push_back(std::chrono::duration<double, std::nano>(t1 - t0).count());
    }
    double mean = 0.0;
    for (double v : ns) mean += v;
    mean /= static_cast<double>(ns.size());
    double var = 0.0;
    for (double v : ns) var += (v - mean) * (v - mean);
    var /= static_cast<double>(ns.size());
    std::sort(ns.begin(), ns.end());
    const std::size_t h = ns.size() / 2;
    BenchRow row;
    row.length = m;
    row.median_ns = ns.size() % 2 ? ns[h] : 0.5 * (ns[h - 1] + ns[h]);
    row.cv = std::sqrt(var) / mean;
    row.ratio = rows.empty() ? 0.0 : row.median_ns / rows.back().median_ns;
    rows.push_back(row);
  }
  return rows;
}

std::string bench_csv(const std::vector<BenchRow>& rows) {
  std::ostringstream os;
  os << "length,median_ns,cv,ratio\n";
  for (std::size_t i = 0; i < rows.size(); ++i) {
    os << rows[i].length << ',' << static_cast<long long>(std::llround(rows[i].median_ns)) << ','
       << rows[i].cv << ',';
    if (i > 0) os << rows[i].ratio;
    os << '\n';
  }
  return os.str();
}

}  // namespace mim::harness
