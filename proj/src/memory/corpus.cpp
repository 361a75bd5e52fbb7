#include <algorithm>
#include <cmath>
#include <fstream>
#include <limits>
#include <numeric>

#include "mim/binary_io.hpp"
#include "mim/error.hpp"
#include "mim/rat_memory.hpp"

namespace mim::rat {
namespace {
constexpr char kHeader[] = "MIMMEM v1\n";

double sum_sq(std::span<const double> v) {
  double s = 0.0;
  for (double x : v) s += x * x;
  return s;
}

double plain_dot(std::span<const double> a, std::span<const double> b) {
  double s = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) s += a[i] * b[i];
  return s;
}

}  // namespace

double cosine_similarity(std::span<const double> a, std::span<const double> b) {
  MIM_CHECK(a.size() == b.size(), ShapeError, "cosine_similarity: length mismatch");
  const double na = sum_sq(a), nb = sum_sq(b);
  MIM_CHECK(na > 0.0 && nb > 0.0, DomainError, "cosine_similarity: zero-norm vector");
  return plain_dot(a, b) / std::sqrt(na * nb);
}

MemoryCorpus::MemoryCorpus(double tau, std::size_t dim, std::size_t capacity)
    : tau_(tau), dim_(dim), capacity_(capacity) {
  MIM_CHECK(std::isfinite(tau) && tau > -1.0 && tau <= 1.0, DomainError,
            "memory threshold must lie in (-1, 1]");
  MIM_CHECK(dim > 0, DomainError, "memory embedding dim must be positive");
  MIM_CHECK(capacity > 0, DomainError, "memory capacity must be positive");
}

void MemoryCorpus::check_embedding(std::span<const double> e) const {
  MIM_CHECK(e.size() == dim_, ShapeError,
            "embedding has " + std::to_string(e.size()) + " entries, corpus expects " +
                std::to_string(dim_));
  for (double v : e) MIM_CHECK(std::isfinite(v), DomainError, "non-finite embedding");
  MIM_CHECK(sum_sq(e) > 0.0, DomainError, "zero-norm embedding");
}

double MemoryCorpus::similarity_to(std::size_t i, std::span<const double> q,
                                   double q_norm_sq) const {
  return plain_dot(q, entries_[i]) / std::sqrt(q_norm_sq * norm_sq_[i]);
}

double MemoryCorpus::max_similarity(std::span<const double> e) const {
  check_embedding(e);
  const double nq = sum_sq(e);
  double best = -std::numeric_limits<double>::infinity();
  for (std::size_t i = 0; i < entries_.size(); ++i) best = std::max(best, similarity_to(i, e, nq));
  return best;
}

bool MemoryCorpus::maybe_insert(std::span<const double> e) {
  if (max_similarity(e) >= tau_) return false;
  if (entries_.size() == capacity_) {
    entries_.pop_front();
    norm_sq_.pop_front();
  }
  entries_.emplace_back(e.begin(), e.end());
  norm_sq_.push_back(sum_sq(e));
  return true;
}

std::vector<Retrieved> MemoryCorpus::score_all(std::span<const double> query) const {
  check_embedding(query);
  const double nq = sum_sq(query);
  std::vector<Retrieved> out;
  out.reserve(entries_.size());
  for (std::size_t i = 0; i < entries_.size(); ++i) out.push_back({i, similarity_to(i, query, nq)});
  return out;
}

std::vector<Retrieved> MemoryCorpus::retrieve_top_k(std::span<const double> query,
                                                    std::size_t k) const {
  MIM_CHECK(k >= 1, DomainError, "retrieve_top_k: K must be at least 1");
  std::vector<Retrieved> all = score_all(query);
  const std::size_t take = std::min(k, all.size());
  std::partial_sort(all.begin(), all.begin() + static_cast<std::ptrdiff_t>(take), all.end(),
                    [](const Retrieved& a, const Retrieved& b) {
                      return a.similarity > b.similarity ||
                             (a.similarity == b.similarity && a.index < b.index);
                    });
  all.resize(take);
  return all;
}

Tensor MemoryCorpus::entry_tensor(std::size_t i) const {
  return Tensor({1, dim_}, entries_.at(i));
}

void MemoryCorpus::save(const std::filesystem::path& path) const {
  std::ofstream os(path, std::ios::binary | std::ios::trunc);
  MIM_CHECK(os, FormatError, "cannot open memory file for writing: " + path.string());
  os.write(kHeader, sizeof(kHeader) - 1);
  io::put<double>(os, tau_);
  io::put<std::uint64_t>(os, dim_);
  io::put<std::uint64_t>(os, entries_.size());
  for (const auto& e : entries_)
    for (double v : e) io::put<double>(os, v);
  MIM_CHECK(os.good(), FormatError, "failed writing memory file " + path.string());
}

MemoryCorpus MemoryCorpus::load(const std::filesystem::path& path, std::size_t capacity) {
  std::ifstream is(path, std::ios::binary);
  MIM_CHECK(is, FormatError, "cannot open memory file: " + path.string());
  std::string header(sizeof(kHeader) - 1, '\0');
  is.read(header.data(), static_cast<std::streamsize>(header.size()));
  MIM_CHECK(is && header == kHeader, FormatError, "bad memory header in " + path.string());
  const double tau = io::get<double>(is, "tau");
  const auto dim = io::get<std::uint64_t>(is, "dim");
  const auto count = io::get<std::uint64_t>(is, "count");
  MIM_CHECK(count <= capacity, FormatError, "memory file holds more entries than capacity");
  MemoryCorpus c(tau, dim, capacity);
  for (std::uint64_t n = 0; n < count; ++n) {
    std::vector<double> e(dim);
    for (auto& v : e) v = io::get<double>(is, "entry");
    c.check_embedding(e);
    c.norm_sq_.push_back(sum_sq(e));
    c.entries_.push_back(std::move(e));
  }
  MIM_CHECK(is.peek() == std::char_traits<char>::eof(), FormatError,
            "trailing bytes in memory file " + path.string());
  return c;
}

}  // namespace mim::rat
