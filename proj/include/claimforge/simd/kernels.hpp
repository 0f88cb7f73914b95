#pragma once

// Data-parallel inner loops used by similarity, MinHash and selection code.
//
// Every kernel has a scalar reference and an AVX2 variant. Floating-point
// reductions use four interleaved partial sums combined as
// ((p0 + p1) + (p2 + p3)) followed by the tail in order, and the kernels
// are built with -ffp-contract=off, so both variants return bit-identical
// results. The active table is chosen once at startup from CPUID and can be
// pinned with CLAIMFORGE_ISA=scalar|avx2 or force_isa().

#include <cstddef>
#include <cstdint>
#include <span>
#include <string_view>

namespace claimforge::simd {

enum class Isa { kScalar, kAvx2 };

std::string_view to_string(Isa isa);

struct KernelTable {
  Isa isa;
  // sum_i a[i] * b[i]
  double (*dot)(const double* a, const double* b, std::size_t n);
  // sum_i max(0, sims[i] - best[i])
  double (*coverage_gain)(const double* sims, const double* best,
                          std::size_t n);
  // best[i] = max(best[i], sims[i])
  void (*max_update)(double* best, const double* sims, std::size_t n);
  // out[p] = min over shingles s of fmix32(s ^ seeds[p]); out untouched
  // positions start at UINT32_MAX.
  void (*minhash)(const std::uint32_t* shingles, std::size_t n_shingles,
                  const std::uint32_t* seeds, std::uint32_t* out,
                  std::size_t n_perm);
  // number of positions where a[i] == b[i]
  std::size_t (*count_equal)(const std::uint32_t* a, const std::uint32_t* b,
                             std::size_t n);
};

bool isa_supported(Isa isa);

// Table for a specific ISA; throws std::invalid_argument if unsupported.
const KernelTable& kernel_table(Isa isa);

// Table selected for this process.
const KernelTable& kernels();

Isa active_isa();
void force_isa(Isa isa);

// Convenience wrappers over the active table.
inline double dot(std::span<const double> a, std::span<const double> b) {
  return kernels().dot(a.data(), b.data(), a.size());
}
inline double coverage_gain(std::span<const double> sims,
                            std::span<const double> best) {
  return kernels().coverage_gain(sims.data(), best.data(), sims.size());
}
inline void max_update(std::span<double> best, std::span<const double> sims) {
  kernels().max_update(best.data(), sims.data(), best.size());
}
inline void minhash(std::span<const std::uint32_t> shingles,
                    std::span<const std::uint32_t> seeds,
                    std::span<std::uint32_t> out) {
  kernels().minhash(shingles.data(), shingles.size(), seeds.data(), out.data(),
                    out.size());
}
inline std::size_t count_equal(std::span<const std::uint32_t> a,
                               std::span<const std::uint32_t> b) {
  return kernels().count_equal(a.data(), b.data(), a.size());
}

namespace detail {
const KernelTable& scalar_table();
const KernelTable* avx2_table();  // nullptr when not compiled in
}  // namespace detail

}  // namespace claimforge::simd
