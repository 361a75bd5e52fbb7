#include <atomic>
#include <cstdlib>
#include <string>

#include "mim/error.hpp"
#include "mim/kernels/kernels.hpp"

namespace mim::kernels {
namespace {

bool cpu_has_avx2() {
#if defined(__x86_64__) || defined(_M_X64)
  __builtin_cpu_init();
  return __builtin_cpu_supports("avx2") && __builtin_cpu_supports("fma");
#else
  return false;
#endif
}

Isa detect() {
  if (const char* env = std::getenv("MIM_SIMD"); env && std::string(env) == "scalar")
    return Isa::kScalar;
  return isa_available(Isa::kAvx2) ? Isa::kAvx2 : Isa::kScalar;
}

std::atomic<Isa>& current() {
  static std::atomic<Isa> isa{detect()};
  return isa;
}

}  // namespace

bool isa_available(Isa isa) {
  if (isa == Isa::kScalar) return true;
  static const bool avx2 = avx2::table() != nullptr && cpu_has_avx2();
  return avx2;
}

Isa active_isa() { return current().load(std::memory_order_relaxed); }

void set_isa(Isa isa) {
  MIM_CHECK(isa_available(isa), DomainError,
            "instruction set " + std::string(isa_name(isa)) + " unavailable on this CPU");
  current().store(isa, std::memory_order_relaxed);
}

std::string_view isa_name(Isa isa) { return isa == Isa::kAvx2 ? "avx2" : "scalar"; }

const KernelTable& table_for(Isa isa) {
  if (isa == Isa::kAvx2 && isa_available(Isa::kAvx2)) return *avx2::table();
  return scalar::table();
}

const KernelTable& active() { return table_for(active_isa()); }

}  // namespace mim::kernels
