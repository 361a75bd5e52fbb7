#pragma once

#include <string>
#include <vector>

namespace mim::harness {

struct BenchRow {
  std::size_t length = 0;
  double median_ns = 0.0;
  double cv = 0.0;     // standard deviation / mean over the runs
  double ratio = 0.0;  // median(length) / median(previous length); 0 on the first row
};

struct BenchOptions {
  std::size_t dim = 16;
  std::size_t state = 16;
  std::size_t runs = 7;  // at least 5
  std::uint64_t seed = 7;
};

// Times one forward selective scan (values only) per length on a single
// thread. Throws DomainError unless lengths are strictly ascending.
std::vector<BenchRow> bench_scan(const std::vector<std::size_t>& lengths,
                                 const BenchOptions& opt = {});

// "length,median_ns,cv,ratio" header plus one line per row; ratio empty on the first row.
std::string bench_csv(const std::vector<BenchRow>& rows);

}  // namespace mim::harness
