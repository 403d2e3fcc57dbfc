#pragma once

#include <span>
#include <vector>

#include "verbgen/nn/cnn.hpp"

namespace verbgen::nn::detail {

/// Inclusive row/column box; empty when r1 < r0.
struct Rect {
  int r0 = 0, r1 = -1, c0 = 0, c1 = -1;

  bool empty() const { return r1 < r0 || c1 < c0; }
  int rows() const { return r1 - r0 + 1; }
  int cols() const { return c1 - c0 + 1; }
  bool contains(int r, int c) const { return r >= r0 && r <= r1 && c >= c0 && c <= c1; }
};

/// Per-sample forward state needed by the backward pass.
struct Trace {
  std::vector<Rect> frame_rects;  // conv1 output coordinates
  Rect act1, actp1, ext1, act2;
  std::vector<double> pre1, p1, pre2, feat;
  std::vector<int> idx1, idx2;
};

struct Scratch {
  std::vector<double> g2, gpad, gp1, g1;
};

/// Reusable buffers for `run_batch`.
struct Workspace {
  std::vector<Trace> traces;
  std::vector<Scratch> scratch;
  std::vector<std::vector<double>> slots;
  std::vector<double> h1, h2, probs, log_probs, dz, gfeat;
};

class Engine {
 public:
  Engine(const CnnModel& model, const EvalOptions& options);

  void forward_trunk(const double* x, Trace& t) const;
  /// Adds one sample's conv gradients into `grad` (param layout, conv blocks only).
  void backward_trunk(const double* x, const Trace& t, const double* gfeat, Scratch& s, double* grad) const;

 private:
  const CnnModel& model_;
  Architecture a_;
  ParamLayout L_;
  const simd::KernelTable& k_;
  bool full_;
  int blocks1_, blocks2_, blocksT_;
  std::vector<double> pack1_;  // [frame][block][(c*9+k)*4+o]
  std::vector<double> pack2_;  // [block][(i*9+k)*4+o]
  std::vector<double> packT_;  // [block of conv1 channels][(o*9+k)*4+i], flipped
  std::vector<double> c2_;     // conv2 output over a constant input
  std::vector<double> wsum2_;  // [o][i] sum over the 3x3 kernel
};

/// Forward (and, when `grad` is given, backward) over a batch of planar inputs.
/// `targets` is B x classes. Returns the mean cross-entropy; probabilities are
/// left in `ws.probs` and their exact logarithms in `ws.log_probs`.
double run_batch(const CnnModel& model, std::span<const double* const> inputs, const double* targets,
                 Workspace& ws, std::vector<double>* grad, const EvalOptions& options);

}  // namespace verbgen::nn::detail
