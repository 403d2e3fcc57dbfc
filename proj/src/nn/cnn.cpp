#include "verbgen/nn/cnn.hpp"

#include <cmath>
#include <cstring>
#include <random>

#include "engine.hpp"
#include "verbgen/error.hpp"
#include "verbgen/seed.hpp"

namespace verbgen::nn {

void Architecture::validate() const {
  if (frames < 1) throw Error(ErrorCode::ShapeMismatch, "frames must be >= 1");
  if (conv1 < 1 || conv2 < 1 || dense1 < 1 || dense2 < 1)
    throw Error(ErrorCode::ShapeMismatch, "layer widths must be >= 1");
  if (classes != kNumVerbs)
    throw Error(ErrorCode::ShapeMismatch, "classifier must have " + std::to_string(kNumVerbs) + " outputs");
  if (height < 1 || width < 1 || conv2_h() < 1 || conv2_w() < 1)
    throw Error(ErrorCode::ShapeMismatch,
                "input " + std::to_string(height) + "x" + std::to_string(width) + " is too small for two 3x3 convolutions");
}

ParamLayout param_layout(const Architecture& a) {
  ParamLayout L;
  std::size_t at = 0;
  auto take = [&at](std::size_t n) {
    ParamBlock b{at, n};
    at += n;
    return b;
  };
  L.conv1_w = take(static_cast<std::size_t>(a.conv1) * a.in_channels() * 9);
  L.conv1_b = take(a.conv1);
  L.conv2_w = take(static_cast<std::size_t>(a.conv2) * a.conv1 * 9);
  L.conv2_b = take(a.conv2);
  L.conv_total = at;
  L.dense1_w = take(static_cast<std::size_t>(a.dense1) * a.features());
  L.dense1_b = take(a.dense1);
  L.dense2_w = take(static_cast<std::size_t>(a.dense2) * a.dense1);
  L.dense2_b = take(a.dense2);
  L.dense3_w = take(static_cast<std::size_t>(a.classes) * a.dense2);
  L.dense3_b = take(a.classes);
  L.total = at;
  return L;
}

CnnModel::CnnModel(const Architecture& a) : arch(a) {
  arch.validate();
  params.assign(param_layout(arch).total, 0.0);
}

bool bitwise_equal(const CnnModel& a, const CnnModel& b) {
  return a.arch == b.arch && a.params.size() == b.params.size() &&
         std::memcmp(a.params.data(), b.params.data(), a.params.size() * sizeof(double)) == 0;
}

CnnModel init_model(const Architecture& arch, std::uint64_t seed) {
  CnnModel m(arch);
  const ParamLayout L = m.layout();
  std::mt19937_64 rng(mix_seed(seed));
  auto fill = [&](const ParamBlock& w, std::size_t fan_in) {
    const double bound = std::sqrt(6.0 / static_cast<double>(fan_in));
    std::uniform_real_distribution<double> dist(-bound, bound);
    for (double& v : m.block(w)) v = dist(rng);
  };
  fill(L.conv1_w, static_cast<std::size_t>(arch.in_channels()) * 9);
  fill(L.conv2_w, static_cast<std::size_t>(arch.conv1) * 9);
  fill(L.dense1_w, arch.features());
  fill(L.dense2_w, arch.dense1);
  fill(L.dense3_w, arch.dense2);
  return m;
}

namespace {

void check_batch(const CnnModel& model, const Tensor& batch) {
  const Architecture& a = model.arch;
  a.validate();
  if (model.params.size() != param_layout(a).total)
    throw Error(ErrorCode::ShapeMismatch, "parameter count does not match the architecture");
  const bool ok = batch.rank() == 4 && batch.dim(1) == static_cast<std::size_t>(a.in_channels()) &&
                  batch.dim(2) == static_cast<std::size_t>(a.height) &&
                  batch.dim(3) == static_cast<std::size_t>(a.width) &&
                  batch.data.size() == batch.dim(0) * batch.dim(1) * batch.dim(2) * batch.dim(3);
  if (!ok)
    throw Error(ErrorCode::ShapeMismatch, "expected a B x " + std::to_string(a.in_channels()) + " x " +
                                              std::to_string(a.height) + " x " + std::to_string(a.width) + " batch");
  if (batch.dim(0) == 0) throw Error(ErrorCode::EmptyInput, "empty batch");
  check_finite(batch.data, "input");
}

std::vector<const double*> sample_pointers(const Tensor& batch) {
  const std::size_t stride = batch.dim(1) * batch.dim(2) * batch.dim(3);
  std::vector<const double*> out(batch.dim(0));
  for (std::size_t b = 0; b < out.size(); ++b) out[b] = batch.data.data() + b * stride;
  return out;
}

void check_targets(const Tensor& targets, std::size_t rows, std::size_t classes) {
  if (targets.rank() != 2 || targets.dim(0) != rows || targets.dim(1) != classes)
    throw Error(ErrorCode::ShapeMismatch, "targets must be " + std::to_string(rows) + " x " + std::to_string(classes));
  for (std::size_t r = 0; r < rows; ++r) {
    int ones = 0;
    for (std::size_t c = 0; c < classes; ++c) {
      const double t = targets.data[r * classes + c];
      if (t == 1.0)
        ++ones;
      else if (t != 0.0)
        ones = 2;
    }
    if (ones != 1) throw Error(ErrorCode::ShapeMismatch, "target row " + std::to_string(r) + " is not one-hot");
  }
}

}  // namespace

Tensor forward(const CnnModel& model, const Tensor& batch, const EvalOptions& options) {
  check_batch(model, batch);
  const auto inputs = sample_pointers(batch);
  detail::Workspace ws;
  detail::run_batch(model, inputs, nullptr, ws, nullptr, options);
  Tensor out({batch.dim(0), static_cast<std::size_t>(model.arch.classes)});
  out.data = std::move(ws.probs);
  return out;
}

Tensor forward_log(const CnnModel& model, const Tensor& batch, const EvalOptions& options) {
  check_batch(model, batch);
  const auto inputs = sample_pointers(batch);
  detail::Workspace ws;
  detail::run_batch(model, inputs, nullptr, ws, nullptr, options);
  Tensor out({batch.dim(0), static_cast<std::size_t>(model.arch.classes)});
  out.data = std::move(ws.log_probs);
  return out;
}

double cross_entropy(const Tensor& probs, const Tensor& targets) {
  if (probs.rank() != 2) throw Error(ErrorCode::ShapeMismatch, "probabilities must be B x classes");
  if (probs.dim(0) == 0) throw Error(ErrorCode::EmptyInput, "empty batch");
  check_targets(targets, probs.dim(0), probs.dim(1));
  check_finite(probs.data, "probabilities");
  double loss = 0.0;
  for (std::size_t i = 0; i < probs.size(); ++i)
    if (targets.data[i] != 0.0) loss -= std::log(std::max(probs.data[i], 1e-12));
  return loss / static_cast<double>(probs.dim(0));
}

LossGrad backward(const CnnModel& model, const Tensor& batch, const Tensor& targets, const EvalOptions& options) {
  check_batch(model, batch);
  check_targets(targets, batch.dim(0), model.arch.classes);
  const auto inputs = sample_pointers(batch);
  detail::Workspace ws;
  LossGrad out;
  out.loss = detail::run_batch(model, inputs, targets.data.data(), ws, &out.grad, options);
  check_finite(out.grad, "gradient");
  return out;
}

}  // namespace verbgen::nn
