#include <immintrin.h>

#include <algorithm>
#include <cstdint>
#include <limits>

#include "claimforge/hash.hpp"
#include "claimforge/simd/kernels.hpp"

namespace claimforge::simd::detail {
namespace {

// Lane order matches the scalar reference: ((p0 + p1) + (p2 + p3)).
inline double reduce4(__m256d v) {
  alignas(32) double p[4];
  _mm256_store_pd(p, v);
  return (p[0] + p[1]) + (p[2] + p[3]);
}

double dot_avx2(const double* a, const double* b, std::size_t n) {
  __m256d acc = _mm256_setzero_pd();
  std::size_t i = 0;
  for (; i + 4 <= n; i += 4) {
    acc = _mm256_add_pd(acc,
                        _mm256_mul_pd(_mm256_loadu_pd(a + i),
                                      _mm256_loadu_pd(b + i)));
  }
  double s = reduce4(acc);
  for (; i < n; ++i) s = s + a[i] * b[i];
  return s;
}

double coverage_gain_avx2(const double* sims, const double* best,
                          std::size_t n) {
  const __m256d zero = _mm256_setzero_pd();
  __m256d acc = zero;
  std::size_t i = 0;
  for (; i + 4 <= n; i += 4) {
    const __m256d d =
        _mm256_sub_pd(_mm256_loadu_pd(sims + i), _mm256_loadu_pd(best + i));
    acc = _mm256_add_pd(acc, _mm256_max_pd(d, zero));
  }
  double s = reduce4(acc);
  for (; i < n; ++i) {
    const double d = sims[i] - best[i];
    s = s + (d > 0.0 ? d : 0.0);
  }
  return s;
}

void max_update_avx2(double* best, const double* sims, std::size_t n) {
  std::size_t i = 0;
  for (; i + 4 <= n; i += 4) {
    _mm256_storeu_pd(best + i, _mm256_max_pd(_mm256_loadu_pd(sims + i),
                                             _mm256_loadu_pd(best + i)));
  }
  for (; i < n; ++i) {
    if (sims[i] > best[i]) best[i] = sims[i];
  }
}

inline __m256i fmix32_x8(__m256i h) {
  h = _mm256_xor_si256(h, _mm256_srli_epi32(h, 16));
  h = _mm256_mullo_epi32(h, _mm256_set1_epi32(static_cast<int>(0x85ebca6bU)));
  h = _mm256_xor_si256(h, _mm256_srli_epi32(h, 13));
  h = _mm256_mullo_epi32(h, _mm256_set1_epi32(static_cast<int>(0xc2b2ae35U)));
  h = _mm256_xor_si256(h, _mm256_srli_epi32(h, 16));
  return h;
}

void minhash_avx2(const std::uint32_t* shingles, std::size_t n_shingles,
                  const std::uint32_t* seeds, std::uint32_t* out,
                  std::size_t n_perm) {
  std::size_t p = 0;
  for (; p + 8 <= n_perm; p += 8) {
    const __m256i seed =
        _mm256_loadu_si256(reinterpret_cast<const __m256i*>(seeds + p));
    __m256i mins = _mm256_set1_epi32(-1);
    for (std::size_t s = 0; s < n_shingles; ++s) {
      const __m256i x = _mm256_set1_epi32(static_cast<int>(shingles[s]));
      mins = _mm256_min_epu32(mins, fmix32_x8(_mm256_xor_si256(x, seed)));
    }
    _mm256_storeu_si256(reinterpret_cast<__m256i*>(out + p), mins);
  }
  for (; p < n_perm; ++p) {
    std::uint32_t m = std::numeric_limits<std::uint32_t>::max();
    for (std::size_t s = 0; s < n_shingles; ++s) {
      m = std::min(m, fmix32(shingles[s] ^ seeds[p]));
    }
    out[p] = m;
  }
}

std::size_t count_equal_avx2(const std::uint32_t* a, const std::uint32_t* b,
                             std::size_t n) {
  std::size_t c = 0;
  std::size_t i = 0;
  for (; i + 8 <= n; i += 8) {
    const __m256i eq = _mm256_cmpeq_epi32(
        _mm256_loadu_si256(reinterpret_cast<const __m256i*>(a + i)),
        _mm256_loadu_si256(reinterpret_cast<const __m256i*>(b + i)));
    c += static_cast<std::size_t>(
        __builtin_popcount(_mm256_movemask_ps(_mm256_castsi256_ps(eq))));
  }
  for (; i < n; ++i) c += a[i] == b[i];
  return c;
}

}  // namespace

const KernelTable* avx2_table() {
  static const KernelTable table{Isa::kAvx2,       dot_avx2,
                                 coverage_gain_avx2, max_update_avx2,
                                 minhash_avx2,     count_equal_avx2};
  return &table;
}

}  // namespace claimforge::simd::detail
