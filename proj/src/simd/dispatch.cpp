#include <atomic>
#include <cstdlib>
#include <stdexcept>
#include <string>

#include "claimforge/simd/kernels.hpp"

namespace claimforge::simd {

namespace detail {
#ifndef CLAIMFORGE_HAVE_AVX2
const KernelTable* avx2_table() { return nullptr; }
#endif
}  // namespace detail

namespace {

bool cpu_has_avx2() {
#if defined(__x86_64__) || defined(__i386__)
  return __builtin_cpu_supports("avx2");
#else
  return false;
#endif
}

Isa detect() {
  if (const char* env = std::getenv("CLAIMFORGE_ISA")) {
    const std::string v = env;
    if (v == "scalar") return Isa::kScalar;
    if (v == "avx2" && isa_supported(Isa::kAvx2)) return Isa::kAvx2;
  }
  return isa_supported(Isa::kAvx2) ? Isa::kAvx2 : Isa::kScalar;
}

std::atomic<const KernelTable*>& active() {
  static std::atomic<const KernelTable*> table{&kernel_table(detect())};
  return table;
}

}  // namespace

std::string_view to_string(Isa isa) {
  return isa == Isa::kAvx2 ? "avx2" : "scalar";
}

bool isa_supported(Isa isa) {
  if (isa == Isa::kScalar) return true;
  return detail::avx2_table() != nullptr && cpu_has_avx2();
}

const KernelTable& kernel_table(Isa isa) {
  if (!isa_supported(isa)) {
    throw std::invalid_argument("ISA not supported: " +
                                std::string(to_string(isa)));
  }
  return isa == Isa::kAvx2 ? *detail::avx2_table() : detail::scalar_table();
}

const KernelTable& kernels() { return *active().load(std::memory_order_acquire); }

Isa active_isa() { return kernels().isa; }

void force_isa(Isa isa) {
  active().store(&kernel_table(isa), std::memory_order_release);
}

}  // namespace claimforge::simd
