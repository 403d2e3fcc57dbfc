#include "verbgen/simd/kernels.hpp"

#include <immintrin.h>

namespace verbgen::simd::detail {

namespace {

inline __m256i tail_mask(std::size_t remaining) {
  const long long n = remaining >= 4 ? 4 : static_cast<long long>(remaining);
  return _mm256_set_epi64x(n > 3 ? -1 : 0, n > 2 ? -1 : 0, n > 1 ? -1 : 0, n > 0 ? -1 : 0);
}

inline double hsum(__m256d v) {
  const __m128d lo = _mm256_castpd256_pd128(v);
  const __m128d hi = _mm256_extractf128_pd(v, 1);
  const __m128d s = _mm_add_pd(lo, hi);
  return _mm_cvtsd_f64(_mm_add_sd(s, _mm_unpackhi_pd(s, s)));
}

double dot(const double* a, const double* b, std::size_t n) {
  __m256d s0 = _mm256_setzero_pd(), s1 = _mm256_setzero_pd();
  __m256d s2 = _mm256_setzero_pd(), s3 = _mm256_setzero_pd();
  std::size_t i = 0;
  for (; i + 16 <= n; i += 16) {
    s0 = _mm256_fmadd_pd(_mm256_loadu_pd(a + i), _mm256_loadu_pd(b + i), s0);
    s1 = _mm256_fmadd_pd(_mm256_loadu_pd(a + i + 4), _mm256_loadu_pd(b + i + 4), s1);
    s2 = _mm256_fmadd_pd(_mm256_loadu_pd(a + i + 8), _mm256_loadu_pd(b + i + 8), s2);
    s3 = _mm256_fmadd_pd(_mm256_loadu_pd(a + i + 12), _mm256_loadu_pd(b + i + 12), s3);
  }
  for (; i < n; i += 4) {
    const __m256i m = tail_mask(n - i);
    s0 = _mm256_fmadd_pd(_mm256_maskload_pd(a + i, m), _mm256_maskload_pd(b + i, m), s0);
  }
  return hsum(_mm256_add_pd(_mm256_add_pd(s0, s1), _mm256_add_pd(s2, s3)));
}

void axpy(double alpha, const double* x, double* y, std::size_t n) {
  const __m256d a = _mm256_set1_pd(alpha);
  std::size_t i = 0;
  for (; i + 8 <= n; i += 8) {
    _mm256_storeu_pd(y + i, _mm256_fmadd_pd(a, _mm256_loadu_pd(x + i), _mm256_loadu_pd(y + i)));
    _mm256_storeu_pd(y + i + 4, _mm256_fmadd_pd(a, _mm256_loadu_pd(x + i + 4), _mm256_loadu_pd(y + i + 4)));
  }
  for (; i < n; i += 4) {
    const __m256i m = tail_mask(n - i);
    _mm256_maskstore_pd(y + i, m, _mm256_fmadd_pd(a, _mm256_maskload_pd(x + i, m), _mm256_maskload_pd(y + i, m)));
  }
}

// Up to 4*NV outputs x 4 filters per pass.
template <std::size_t NV>
void conv_chunk(const double* in, std::size_t cs, std::size_t rs, std::size_t channels, const double* w,
                std::size_t n_out, double* out, std::size_t os, std::size_t rem) {
  __m256i m[NV];
  for (std::size_t v = 0; v < NV; ++v) m[v] = tail_mask(rem > v * 4 ? rem - v * 4 : 0);

  __m256d acc[kConvBlock][NV];
  for (auto& row : acc)
    for (auto& a : row) a = _mm256_setzero_pd();

  for (std::size_t c = 0; c < channels; ++c) {
    const double* base = in + c * cs;
    const double* wc = w + c * 9 * kConvBlock;
    for (std::size_t k = 0; k < 9; ++k) {
      const double* p = base + (k / 3) * rs + k % 3;
      __m256d x[NV];
      for (std::size_t v = 0; v < NV; ++v) x[v] = _mm256_maskload_pd(p + v * 4, m[v]);
      const double* wk = wc + k * kConvBlock;
      for (std::size_t o = 0; o < kConvBlock; ++o) {
        const __m256d wv = _mm256_broadcast_sd(wk + o);
        for (std::size_t v = 0; v < NV; ++v) acc[o][v] = _mm256_fmadd_pd(wv, x[v], acc[o][v]);
      }
    }
  }
  for (std::size_t o = 0; o < n_out; ++o) {
    double* dst = out + o * os;
    for (std::size_t v = 0; v < NV; ++v) {
      const __m256d cur = _mm256_maskload_pd(dst + v * 4, m[v]);
      _mm256_maskstore_pd(dst + v * 4, m[v], _mm256_add_pd(cur, acc[o][v]));
    }
  }
}

void conv3x3(const double* in, std::size_t cs, std::size_t rs, std::size_t channels, const double* w,
             std::size_t n_out, double* out, std::size_t os, std::size_t len) {
  for (std::size_t j0 = 0; j0 < len; j0 += 8) {
    const std::size_t rem = len - j0;
    if (rem > 4)
      conv_chunk<2>(in + j0, cs, rs, channels, w, n_out, out + j0, os, rem);
    else
      conv_chunk<1>(in + j0, cs, rs, channels, w, n_out, out + j0, os, rem);
  }
}

void corr3x3(const double* g, std::size_t gc, std::size_t gs, std::size_t n_g, const double* in, std::size_t is,
             std::size_t rows, std::size_t len, double* acc, std::size_t as) {
  for (std::size_t q = 0; q < n_g; ++q) {
    __m256d s[9];
    for (auto& v : s) v = _mm256_setzero_pd();
    for (std::size_t r = 0; r < rows; ++r) {
      const double* gr = g + q * gc + r * gs;
      const double* ir = in + r * is;
      for (std::size_t j = 0; j < len; j += 4) {
        const __m256i m = tail_mask(len - j);
        const __m256d gv = _mm256_maskload_pd(gr + j, m);
        for (std::size_t k = 0; k < 9; ++k)
          s[k] = _mm256_fmadd_pd(gv, _mm256_maskload_pd(ir + (k / 3) * is + k % 3 + j, m), s[k]);
      }
    }
    for (std::size_t k = 0; k < 9; ++k) acc[q * as + k] += hsum(s[k]);
  }
}

}  // namespace

const KernelTable* avx2_table() {
  static const KernelTable table{"avx2", dot, axpy, conv3x3, corr3x3};
  return &table;
}

}  // namespace verbgen::simd::detail
