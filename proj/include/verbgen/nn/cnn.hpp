#pragma once

// Frame-stacked image classifier:
//   3T x H x W -> conv 3x3 (valid) -> relu -> maxpool 2x2/2
//              -> conv 3x3 (valid) -> relu -> maxpool 2x2/2
//              -> dense -> relu -> dense -> relu -> dense -> softmax
// Pooling keeps partial windows at the right and bottom edges, so odd sizes
// round up.
//
// Rendered backgrounds are exactly zero. The first convolution is only
// evaluated over each frame's non-zero bounding box (dilated by the kernel)
// and the remaining feature map is filled with its closed-form constant, so
// results match the dense computation up to summation order.

#include <cstddef>
#include <cstdint>
#include <span>
#include <vector>

#include "verbgen/nn/tensor.hpp"
#include "verbgen/simd/kernels.hpp"
#include "verbgen/verbs.hpp"

namespace verbgen::nn {

struct Architecture {
  int frames = 5;
  int height = 64;
  int width = 64;
  int conv1 = 32;
  int conv2 = 64;
  int dense1 = 64;
  int dense2 = 32;
  int classes = kNumVerbs;

  int in_channels() const { return 3 * frames; }
  int conv1_h() const { return height - 2; }
  int conv1_w() const { return width - 2; }
  int pool1_h() const { return (conv1_h() + 1) / 2; }
  int pool1_w() const { return (conv1_w() + 1) / 2; }
  int conv2_h() const { return pool1_h() - 2; }
  int conv2_w() const { return pool1_w() - 2; }
  int pool2_h() const { return (conv2_h() + 1) / 2; }
  int pool2_w() const { return (conv2_w() + 1) / 2; }
  int features() const { return conv2 * pool2_h() * pool2_w(); }

  /// Throws Error(ShapeMismatch) for degenerate or inconsistent shapes.
  void validate() const;

  bool operator==(const Architecture&) const = default;
};

struct ParamBlock {
  std::size_t offset = 0;
  std::size_t size = 0;
};

/// Where each weight and bias lives in the flat parameter vector.
/// Conv weights are [out][in][3][3]; dense weights are [out][in].
/// The conv blocks come first and are contiguous.
struct ParamLayout {
  ParamBlock conv1_w, conv1_b, conv2_w, conv2_b;
  ParamBlock dense1_w, dense1_b, dense2_w, dense2_b, dense3_w, dense3_b;
  std::size_t conv_total = 0;
  std::size_t total = 0;
};

ParamLayout param_layout(const Architecture& arch);

struct CnnModel {
  Architecture arch;
  std::vector<double> params;

  CnnModel() = default;
  /// All-zero parameters.
  explicit CnnModel(const Architecture& a);

  ParamLayout layout() const { return param_layout(arch); }
  std::span<double> block(const ParamBlock& b) { return {params.data() + b.offset, b.size}; }
  std::span<const double> block(const ParamBlock& b) const { return {params.data() + b.offset, b.size}; }
};

/// Same architecture and bit-identical parameters.
bool bitwise_equal(const CnnModel& a, const CnnModel& b);

/// Weights uniform in +-sqrt(6 / fan_in), biases zero.
CnnModel init_model(const Architecture& arch, std::uint64_t seed);

struct EvalOptions {
  /// Evaluate every position instead of the non-background region.
  bool full_region = false;
  /// Kernel table override; nullptr uses the process-wide selection.
  const simd::KernelTable* kernels = nullptr;
};

/// B x 3T x H x W -> B x classes probabilities.
Tensor forward(const CnnModel& model, const Tensor& batch, const EvalOptions& options = {});

/// Log-probabilities from the logits, exact where the probabilities underflow.
Tensor forward_log(const CnnModel& model, const Tensor& batch, const EvalOptions& options = {});

/// Mean over rows of -sum t log max(p, 1e-12). Targets must be one-hot.
double cross_entropy(const Tensor& probs, const Tensor& targets);

struct LossGrad {
  double loss = 0.0;
  /// d loss / d params, in `param_layout` order.
  std::vector<double> grad;
};

LossGrad backward(const CnnModel& model, const Tensor& batch, const Tensor& targets,
                  const EvalOptions& options = {});

}  // namespace verbgen::nn
