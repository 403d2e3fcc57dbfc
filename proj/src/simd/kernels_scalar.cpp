#include "verbgen/simd/kernels.hpp"

namespace verbgen::simd::detail {

namespace {

double dot(const double* a, const double* b, std::size_t n) {
  double s = 0.0;
  for (std::size_t i = 0; i < n; ++i) s += a[i] * b[i];
  return s;
}

void axpy(double alpha, const double* x, double* y, std::size_t n) {
  for (std::size_t i = 0; i < n; ++i) y[i] += alpha * x[i];
}

void conv3x3(const double* in, std::size_t cs, std::size_t rs, std::size_t channels, const double* w,
             std::size_t n_out, double* out, std::size_t os, std::size_t len) {
  for (std::size_t o = 0; o < n_out; ++o) {
    double* dst = out + o * os;
    for (std::size_t j = 0; j < len; ++j) {
      double s = 0.0;
      for (std::size_t c = 0; c < channels; ++c)
        for (std::size_t k = 0; k < 9; ++k)
          s += w[(c * 9 + k) * kConvBlock + o] * in[c * cs + (k / 3) * rs + k % 3 + j];
      dst[j] += s;
    }
  }
}

void corr3x3(const double* g, std::size_t gc, std::size_t gs, std::size_t n_g, const double* in, std::size_t is,
             std::size_t rows, std::size_t len, double* acc, std::size_t as) {
  for (std::size_t q = 0; q < n_g; ++q)
    for (std::size_t k = 0; k < 9; ++k) {
      double s = 0.0;
      for (std::size_t r = 0; r < rows; ++r)
        for (std::size_t j = 0; j < len; ++j) s += g[q * gc + r * gs + j] * in[(r + k / 3) * is + k % 3 + j];
      acc[q * as + k] += s;
    }
}

}  // namespace

const KernelTable& scalar_table() {
  static const KernelTable table{"scalar", dot, axpy, conv3x3, corr3x3};
  return table;
}

}  // namespace verbgen::simd::detail
