#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "support.hpp"

#include "mim/error.hpp"
#include "mim/kernels/kernels.hpp"

using namespace mim;
using namespace mim::kernels;

namespace {

std::vector<double> random_vec(Rng& rng, std::size_t n) {
  std::vector<double> v(n);
  for (auto& x : v) x = rng.normal();
  return v;
}

double max_diff(const std::vector<double>& a, const std::vector<double>& b) {
  double m = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) m = std::max(m, std::abs(a[i] - b[i]));
  return m;
}

}  // namespace

TEST_CASE("AVX2 kernels agree with the scalar reference") {
  if (!isa_available(Isa::kAvx2)) {
    MESSAGE("AVX2 unavailable; only the scalar path is exercised");
    return;
  }
  const KernelTable& s = table_for(Isa::kScalar);
  const KernelTable& v = table_for(Isa::kAvx2);
  Rng rng(21);
  // Sizes straddle the 4-wide vector width and its remainders.
  for (std::size_t n : {0, 1, 3, 4, 5, 7, 8, 9, 16, 31, 33, 128}) {
    const auto a = random_vec(rng, n), b = random_vec(rng, n);
    CHECK(std::abs(s.dot(a.data(), b.data(), n) - v.dot(a.data(), b.data(), n)) <= 1e-12 * (1 + n));

    auto ys = random_vec(rng, n);
    auto yv = ys;
    s.axpy(0.7, a.data(), ys.data(), n);
    v.axpy(0.7, a.data(), yv.data(), n);
    CHECK(max_diff(ys, yv) <= 1e-14);
  }
  for (int trial = 0; trial < 40; ++trial) {
    const std::size_t m = 1 + rng.index(13), n = 1 + rng.index(13), k = 1 + rng.index(13);
    const auto a = random_vec(rng, m * k), b = random_vec(rng, k * n), bt = random_vec(rng, n * k),
               at = random_vec(rng, k * m);
    auto c0 = random_vec(rng, m * n);
    for (auto fn : {&KernelTable::gemm_nn, &KernelTable::gemm_nt, &KernelTable::gemm_tn}) {
      auto cs = c0, cv = c0;
      const double* lhs = fn == &KernelTable::gemm_tn ? at.data() : a.data();
      const double* rhs = fn == &KernelTable::gemm_nt ? bt.data() : b.data();
      (s.*fn)(m, n, k, lhs, rhs, cs.data());
      (v.*fn)(m, n, k, lhs, rhs, cv.data());
      CHECK(max_diff(cs, cv) <= 1e-12);
    }
  }
  for (std::size_t n : {1, 3, 4, 6, 8, 16, 17}) {
    const auto decay = random_vec(rng, n), gain = random_vec(rng, n), hp = random_vec(rng, n),
               c = random_vec(rng, n);
    std::vector<double> hs(n), hv(n);
    const double ys = s.scan_step(n, decay.data(), gain.data(), 0.4, hp.data(), hs.data(), c.data());
    const double yv = v.scan_step(n, decay.data(), gain.data(), 0.4, hp.data(), hv.data(), c.data());
    CHECK(std::abs(ys - yv) <= 1e-13);
    CHECK(max_diff(hs, hv) <= 1e-14);

    auto carry_s = random_vec(rng, n);
    auto carry_v = carry_s;
    std::vector<double> dcs(n), dcv(n), dds(n), ddv(n), dgs(n), dgv(n);
    const double xs = s.scan_step_back(n, decay.data(), gain.data(), 0.4, hp.data(), hs.data(),
                                       c.data(), -1.3, carry_s.data(), dcs.data(), dds.data(),
                                       dgs.data());
    const double xv = v.scan_step_back(n, decay.data(), gain.data(), 0.4, hp.data(), hs.data(),
                                       c.data(), -1.3, carry_v.data(), dcv.data(), ddv.data(),
                                       dgv.data());
    CHECK(std::abs(xs - xv) <= 1e-13);
    CHECK(max_diff(carry_s, carry_v) <= 1e-14);
    CHECK(max_diff(dcs, dcv) <= 1e-14);
    CHECK(max_diff(dds, ddv) <= 1e-14);
    CHECK(max_diff(dgs, dgv) <= 1e-14);
  }
}

TEST_CASE("scalar scan step follows its documented recurrence") {
  const KernelTable& s = table_for(Isa::kScalar);
  const std::vector<double> decay{0.5, 0.25}, gain{1.0, 2.0}, hp{4.0, 8.0}, c{1.0, -1.0};
  std::vector<double> h(2);
  const double y = s.scan_step(2, decay.data(), gain.data(), 3.0, hp.data(), h.data(), c.data());
  CHECK(h[0] == 5.0);  // 0.5·4 + 1·3
  CHECK(h[1] == 8.0);  // 0.25·8 + 2·3
  CHECK(y == -3.0);
}

TEST_CASE("ISA selection") {
  CHECK(isa_available(Isa::kScalar));
  const Isa before = active_isa();
  set_isa(Isa::kScalar);
  CHECK(active_isa() == Isa::kScalar);
  CHECK(&active() == &table_for(Isa::kScalar));
  CHECK(isa_name(Isa::kScalar) == "scalar");
  set_isa(before);
  if (!isa_available(Isa::kAvx2)) CHECK_THROWS_AS(set_isa(Isa::kAvx2), DomainError);
}
