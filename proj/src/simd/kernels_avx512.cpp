#include "verbgen/simd/kernels.hpp"

#include <immintrin.h>

namespace verbgen::simd::detail {

namespace {

inline __mmask8 tail_mask(std::size_t remaining) {
  return remaining >= 8 ? __mmask8(0xff) : static_cast<__mmask8>((1u << remaining) - 1u);
}

double dot(const double* a, const double* b, std::size_t n) {
  __m512d s0 = _mm512_setzero_pd(), s1 = _mm512_setzero_pd();
  __m512d s2 = _mm512_setzero_pd(), s3 = _mm512_setzero_pd();
  std::size_t i = 0;
  for (; i + 32 <= n; i += 32) {
    s0 = _mm512_fmadd_pd(_mm512_loadu_pd(a + i), _mm512_loadu_pd(b + i), s0);
    s1 = _mm512_fmadd_pd(_mm512_loadu_pd(a + i + 8), _mm512_loadu_pd(b + i + 8), s1);
    s2 = _mm512_fmadd_pd(_mm512_loadu_pd(a + i + 16), _mm512_loadu_pd(b + i + 16), s2);
    s3 = _mm512_fmadd_pd(_mm512_loadu_pd(a + i + 24), _mm512_loadu_pd(b + i + 24), s3);
  }
  for (; i < n; i += 8) {
    const __mmask8 m = tail_mask(n - i);
    s0 = _mm512_fmadd_pd(_mm512_maskz_loadu_pd(m, a + i), _mm512_maskz_loadu_pd(m, b + i), s0);
  }
  return _mm512_reduce_add_pd(_mm512_add_pd(_mm512_add_pd(s0, s1), _mm512_add_pd(s2, s3)));
}

void axpy(double alpha, const double* x, double* y, std::size_t n) {
  const __m512d a = _mm512_set1_pd(alpha);
  std::size_t i = 0;
  for (; i + 16 <= n; i += 16) {
    _mm512_storeu_pd(y + i, _mm512_fmadd_pd(a, _mm512_loadu_pd(x + i), _mm512_loadu_pd(y + i)));
    _mm512_storeu_pd(y + i + 8, _mm512_fmadd_pd(a, _mm512_loadu_pd(x + i + 8), _mm512_loadu_pd(y + i + 8)));
  }
  for (; i < n; i += 8) {
    const __mmask8 m = tail_mask(n - i);
    _mm512_mask_storeu_pd(y + i, m,
                          _mm512_fmadd_pd(a, _mm512_maskz_loadu_pd(m, x + i), _mm512_maskz_loadu_pd(m, y + i)));
  }
}

// Up to 8*NV outputs x 4 filters per pass.
template <std::size_t NV>
void conv_chunk(const double* in, std::size_t cs, std::size_t rs, std::size_t channels, const double* w,
                std::size_t n_out, double* out, std::size_t os, std::size_t rem) {
  __mmask8 m[NV];
  for (std::size_t v = 0; v < NV; ++v) m[v] = rem > v * 8 ? tail_mask(rem - v * 8) : __mmask8(0);

  __m512d acc[kConvBlock][NV];
  for (auto& row : acc)
    for (auto& a : row) a = _mm512_setzero_pd();

  for (std::size_t c = 0; c < channels; ++c) {
    const double* base = in + c * cs;
    const double* wc = w + c * 9 * kConvBlock;
    for (std::size_t k = 0; k < 9; ++k) {
      const double* p = base + (k / 3) * rs + k % 3;
      __m512d x[NV];
      for (std::size_t v = 0; v < NV; ++v) x[v] = _mm512_maskz_loadu_pd(m[v], p + v * 8);
      const double* wk = wc + k * kConvBlock;
      for (std::size_t o = 0; o < kConvBlock; ++o) {
        const __m512d wv = _mm512_set1_pd(wk[o]);
        for (std::size_t v = 0; v < NV; ++v) acc[o][v] = _mm512_fmadd_pd(wv, x[v], acc[o][v]);
      }
    }
  }
  for (std::size_t o = 0; o < n_out; ++o) {
    double* dst = out + o * os;
    for (std::size_t v = 0; v < NV; ++v) {
      const __m512d cur = _mm512_maskz_loadu_pd(m[v], dst + v * 8);
      _mm512_mask_storeu_pd(dst + v * 8, m[v], _mm512_add_pd(cur, acc[o][v]));
    }
  }
}

void conv3x3(const double* in, std::size_t cs, std::size_t rs, std::size_t channels, const double* w,
             std::size_t n_out, double* out, std::size_t os, std::size_t len) {
  for (std::size_t j0 = 0; j0 < len; j0 += 32) {
    const std::size_t rem = len - j0;
    const std::size_t nv = rem >= 32 ? 4 : (rem + 7) / 8;
    switch (nv) {
      case 1: conv_chunk<1>(in + j0, cs, rs, channels, w, n_out, out + j0, os, rem); break;
      case 2: conv_chunk<2>(in + j0, cs, rs, channels, w, n_out, out + j0, os, rem); break;
      case 3: conv_chunk<3>(in + j0, cs, rs, channels, w, n_out, out + j0, os, rem); break;
      default: conv_chunk<4>(in + j0, cs, rs, channels, w, n_out, out + j0, os, rem); break;
    }
  }
}

// NG gradient rows share each input load.
template <std::size_t NG>
void corr_rows(const double* g, std::size_t gc, std::size_t gs, const double* in, std::size_t is, std::size_t rows,
               std::size_t len, double* acc, std::size_t as) {
  __m512d s[NG][9];
  for (auto& row : s)
    for (auto& v : row) v = _mm512_setzero_pd();
  for (std::size_t r = 0; r < rows; ++r) {
    const double* ir = in + r * is;
    for (std::size_t j = 0; j < len; j += 8) {
      const __mmask8 m = tail_mask(len - j);
      __m512d gv[NG];
      for (std::size_t q = 0; q < NG; ++q) gv[q] = _mm512_maskz_loadu_pd(m, g + q * gc + r * gs + j);
      for (std::size_t k = 0; k < 9; ++k) {
        const __m512d pv = _mm512_maskz_loadu_pd(m, ir + (k / 3) * is + k % 3 + j);
        for (std::size_t q = 0; q < NG; ++q) s[q][k] = _mm512_fmadd_pd(gv[q], pv, s[q][k]);
      }
    }
  }
  for (std::size_t q = 0; q < NG; ++q)
    for (std::size_t k = 0; k < 9; ++k) acc[q * as + k] += _mm512_reduce_add_pd(s[q][k]);
}

void corr3x3(const double* g, std::size_t gc, std::size_t gs, std::size_t n_g, const double* in, std::size_t is,
             std::size_t rows, std::size_t len, double* acc, std::size_t as) {
  std::size_t q = 0;
  for (; q + 2 <= n_g; q += 2) corr_rows<2>(g + q * gc, gc, gs, in, is, rows, len, acc + q * as, as);
  if (q < n_g) corr_rows<1>(g + q * gc, gc, gs, in, is, rows, len, acc + q * as, as);
}

}  // namespace

const KernelTable* avx512_table() {
  static const KernelTable table{"avx512", dot, axpy, conv3x3, corr3x3};
  return &table;
}

}  // namespace verbgen::simd::detail
