#pragma once

#include <doctest.h>

#include <cmath>
#include <functional>
#include <string>
#include <vector>

#include "mim/autodiff.hpp"
#include "mim/rng.hpp"
#include "mim/tensor.hpp"
#include "mim/verify.hpp"

namespace mim::test {

inline Tensor random_tensor(Rng& rng, std::size_t rows, std::size_t cols, double scale = 1.0) {
  Tensor t({rows, cols});
  for (auto& v : t.values()) v = rng.normal(0.0, scale);
  return t;
}

inline ad::Var random_param(Rng& rng, std::size_t rows, std::size_t cols, double scale = 1.0) {
  return ad::Var::parameter(random_tensor(rng, rows, cols, scale));
}

inline void check_close(const Tensor& a, const Tensor& b, double tol) {
  REQUIRE(a.shape() == b.shape());
  CHECK(max_abs_diff(a, b) <= tol);
}

// Finite-difference check over every listed leaf.
inline void check_grad(const std::function<ad::Var()>& loss,
                       const std::vector<std::pair<std::string, ad::Var>>& params,
                       std::uint64_t seed = 1, std::size_t probes = 30, double tol = 1e-6) {
  Rng rng(seed);
  const auto r = verify::check_gradients(loss, params, probes, rng);
  INFO("worst " << r.worst << " error " << r.max_error);
  CHECK(r.max_error < tol);
}

}  // namespace mim::test
