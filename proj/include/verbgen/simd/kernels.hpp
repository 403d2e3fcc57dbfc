#pragma once

// Inner loops of the network, with one implementation per instruction set.
// The scalar table is the reference; vector tables must agree with it to
// rounding (see tests/test_simd.cpp). A table is picked once per process:
// the widest one the CPU supports, unless VERBGEN_SIMD=scalar|avx2|avx512
// asks for a specific one.

#include <cstddef>
#include <string_view>
#include <vector>

namespace verbgen::simd {

/// Output channels produced together by `conv3x3`.
inline constexpr std::size_t kConvBlock = 4;

struct KernelTable {
  const char* name;

  double (*dot)(const double* a, const double* b, std::size_t n);

  /// y[i] += alpha * x[i]
  void (*axpy)(double alpha, const double* x, double* y, std::size_t n);

  /// For o < n_out and j < len:
  ///   out[o*out_stride + j] += sum_{c<channels, k<9}
  ///       w[(c*9 + k)*kConvBlock + o] * in[c*channel_stride + (k/3)*row_stride + k%3 + j]
  /// `w` holds kConvBlock interleaved filters; n_out <= kConvBlock.
  void (*conv3x3)(const double* in, std::size_t channel_stride, std::size_t row_stride,
                  std::size_t channels, const double* w, std::size_t n_out, double* out,
                  std::size_t out_stride, std::size_t len);

  /// For q < n_g (n_g <= kConvBlock) and k < 9:
  ///   acc[q*acc_stride + k] += sum_{r<rows, j<len}
  ///       g[q*g_channel_stride + r*g_row_stride + j] * in[(r + k/3)*in_stride + k%3 + j]
  void (*corr3x3)(const double* g, std::size_t g_channel_stride, std::size_t g_row_stride, std::size_t n_g,
                  const double* in, std::size_t in_stride, std::size_t rows, std::size_t len, double* acc,
                  std::size_t acc_stride);
};

enum class Isa { Scalar, Avx2, Avx512 };

std::string_view to_string(Isa isa);

/// Table for `isa`, or nullptr when it is not compiled in or not supported here.
const KernelTable* kernel_table(Isa isa);

/// Every table usable on this machine, scalar first.
std::vector<Isa> available_isas();

/// The process-wide selection.
const KernelTable& kernels();
Isa active_isa();

namespace detail {
const KernelTable& scalar_table();
const KernelTable* avx2_table();
const KernelTable* avx512_table();
}  // namespace detail

}  // namespace verbgen::simd
