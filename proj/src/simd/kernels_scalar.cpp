#include <algorithm>
#include <cstdint>
#include <limits>

#include "claimforge/hash.hpp"
#include "claimforge/simd/kernels.hpp"

namespace claimforge::simd::detail {
namespace {

double dot_scalar(const double* a, const double* b, std::size_t n) {
  double p[4] = {0.0, 0.0, 0.0, 0.0};
  std::size_t i = 0;
  for (; i + 4 <= n; i += 4) {
    for (int l = 0; l < 4; ++l) p[l] = p[l] + a[i + l] * b[i + l];
  }
  double s = (p[0] + p[1]) + (p[2] + p[3]);
  for (; i < n; ++i) s = s + a[i] * b[i];
  return s;
}

inline double positive_part(double d) { return d > 0.0 ? d : 0.0; }

double coverage_gain_scalar(const double* sims, const double* best,
                            std::size_t n) {
  double p[4] = {0.0, 0.0, 0.0, 0.0};
  std::size_t i = 0;
  for (; i + 4 <= n; i += 4) {
    for (int l = 0; l < 4; ++l) {
      p[l] = p[l] + positive_part(sims[i + l] - best[i + l]);
    }
  }
  double s = (p[0] + p[1]) + (p[2] + p[3]);
  for (; i < n; ++i) s = s + positive_part(sims[i] - best[i]);
  return s;
}

void max_update_scalar(double* best, const double* sims, std::size_t n) {
  for (std::size_t i = 0; i < n; ++i) {
    if (sims[i] > best[i]) best[i] = sims[i];
  }
}

void minhash_scalar(const std::uint32_t* shingles, std::size_t n_shingles,
                    const std::uint32_t* seeds, std::uint32_t* out,
                    std::size_t n_perm) {
  std::fill(out, out + n_perm, std::numeric_limits<std::uint32_t>::max());
  for (std::size_t s = 0; s < n_shingles; ++s) {
    const std::uint32_t x = shingles[s];
    for (std::size_t p = 0; p < n_perm; ++p) {
      out[p] = std::min(out[p], fmix32(x ^ seeds[p]));
    }
  }
}

std::size_t count_equal_scalar(const std::uint32_t* a, const std::uint32_t* b,
                               std::size_t n) {
  std::size_t c = 0;
  for (std::size_t i = 0; i < n; ++i) c += a[i] == b[i];
  return c;
}

}  // namespace

const KernelTable& scalar_table() {
  static const KernelTable table{Isa::kScalar,      dot_scalar,
                                 coverage_gain_scalar, max_update_scalar,
                                 minhash_scalar,    count_equal_scalar};
  return table;
}

}  // namespace claimforge::simd::detail
