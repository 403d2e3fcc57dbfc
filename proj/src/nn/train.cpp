#include "verbgen/nn/train.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <limits>
#include <numeric>
#include <random>

#include "engine.hpp"
#include "verbgen/error.hpp"
#include "verbgen/seed.hpp"

namespace verbgen::nn {

void SampleSet::add(std::span<const ImageRGB> imgs, int label, std::string id) {
  if (imgs.empty()) throw Error(ErrorCode::EmptySequence, "sample has no frames");
  if (empty() && pixels.empty()) {
    frames = static_cast<int>(imgs.size());
    height = imgs[0].height;
    width = imgs[0].width;
  }
  if (static_cast<int>(imgs.size()) != frames)
    throw Error(ErrorCode::ShapeMismatch, "sample " + id + " has " + std::to_string(imgs.size()) + " frames, expected " +
                                              std::to_string(frames));
  const std::size_t HW = static_cast<std::size_t>(height) * width;
  const std::size_t base = pixels.size();
  pixels.resize(base + sample_size());
  for (std::size_t f = 0; f < imgs.size(); ++f) {
    const ImageRGB& img = imgs[f];
    if (img.width != width || img.height != height)
      throw Error(ErrorCode::InvalidImageSize, "frame of " + id + " is " + std::to_string(img.width) + "x" +
                                                   std::to_string(img.height) + ", expected " + std::to_string(width) +
                                                   "x" + std::to_string(height));
    std::uint8_t* dst = pixels.data() + base + 3 * f * HW;
    for (std::size_t i = 0; i < HW; ++i)
      for (std::size_t c = 0; c < 3; ++c) dst[c * HW + i] = img.pixels[i * 3 + c];
  }
  labels.push_back(label);
  ids.push_back(std::move(id));
}

SampleSet SampleSet::subset(std::span<const std::size_t> indices) const {
  SampleSet out;
  out.frames = frames;
  out.height = height;
  out.width = width;
  out.pixels.reserve(indices.size() * sample_size());
  for (std::size_t i : indices) {
    if (i >= size()) throw Error(ErrorCode::InvalidArgument, "sample index out of range");
    out.pixels.insert(out.pixels.end(), sample(i), sample(i) + sample_size());
    out.labels.push_back(labels[i]);
    out.ids.push_back(ids[i]);
  }
  return out;
}

SampleSet load_samples(const DatasetManifest& manifest, std::span<const std::size_t> entries, int frames) {
  const std::vector<int> picks = sample_indices(frames);
  SampleSet set;
  set.frames = frames;
  set.height = manifest.size.height;
  set.width = manifest.size.width;
  std::vector<ImageRGB> imgs(picks.size());
  for (std::size_t i : entries) {
    const DatasetEntry& e = manifest.entries.at(i);
    if (!e.ok()) continue;
    for (std::size_t f = 0; f < picks.size(); ++f) imgs[f] = read_png(manifest.frame_path(e, picks[f]).string());
    set.add(imgs, class_index(e.verb), e.id);
  }
  return set;
}

nlohmann::json EpochMetrics::to_json() const {
  auto num = [](double v) { return std::isfinite(v) ? nlohmann::json(v) : nlohmann::json(nullptr); };
  return {{"epoch", epoch},
          {"train_loss", num(train_loss)},
          {"train_acc", num(train_acc)},
          {"val_loss", num(val_loss)},
          {"val_acc", num(val_acc)}};
}

namespace {

const std::array<double, 256>& byte_to_unit() {
  static const std::array<double, 256> lut = [] {
    std::array<double, 256> t{};
    for (int i = 0; i < 256; ++i) t[i] = i / 255.0;
    return t;
  }();
  return lut;
}

void check_shape(const SampleSet& s, const Architecture& a, const char* what) {
  if (s.empty()) return;
  if (s.frames != a.frames) throw Error(ErrorCode::ShapeMismatch, std::string(what) + " samples have the wrong frame count");
  if (s.height != a.height || s.width != a.width)
    throw Error(ErrorCode::InvalidImageSize, std::string(what) + " samples are " + std::to_string(s.width) + "x" +
                                                 std::to_string(s.height) + ", model expects " +
                                                 std::to_string(a.width) + "x" + std::to_string(a.height));
}

int argmax(const double* p, int n) { return static_cast<int>(std::max_element(p, p + n) - p); }

// Converts a batch of samples to planar doubles and builds one-hot targets.
struct BatchBuffers {
  std::vector<std::vector<double>> inputs;
  std::vector<const double*> ptrs;
  std::vector<double> targets;

  void fill(const SampleSet& set, std::span<const std::size_t> idx, int classes) {
    const auto& lut = byte_to_unit();
    const std::size_t n = set.sample_size();
    inputs.resize(std::max(inputs.size(), idx.size()));
    ptrs.resize(idx.size());
    targets.assign(idx.size() * classes, 0.0);
    for (std::size_t b = 0; b < idx.size(); ++b) {
      auto& buf = inputs[b];
      buf.resize(n);
      const std::uint8_t* src = set.sample(idx[b]);
      for (std::size_t i = 0; i < n; ++i) buf[i] = lut[src[i]];
      ptrs[b] = buf.data();
      targets[b * classes + set.labels[idx[b]]] = 1.0;
    }
  }
};

}  // namespace

TrainResult train(const SampleSet& train_set, const SampleSet& val_set, const Architecture& arch,
                  const TrainConfig& config, const EpochCallback& on_epoch) {
  arch.validate();
  if (train_set.empty()) throw Error(ErrorCode::EmptyInput, "training split is empty");
  check_shape(train_set, arch, "training");
  check_shape(val_set, arch, "validation");
  if (config.epochs < 0 || config.batch_size < 1)
    throw Error(ErrorCode::InvalidArgument, "epochs must be >= 0 and batch_size >= 1");

  TrainResult result{init_model(arch, config.seed), {}};
  AdamState adam;
  adam.lr = config.lr;
  adam.beta1 = config.beta1;
  adam.beta2 = config.beta2;
  adam.eps = config.eps;

  const int N = arch.classes;
  std::vector<std::size_t> order(train_set.size());
  detail::Workspace ws;
  BatchBuffers buffers;
  std::vector<double> grad;
  for (int epoch = 1; epoch <= config.epochs; ++epoch) {
    std::iota(order.begin(), order.end(), std::size_t{0});
    std::mt19937_64 rng(mix_seed(config.seed ^ mix_seed(static_cast<std::uint64_t>(epoch))));
    std::shuffle(order.begin(), order.end(), rng);

    double loss_sum = 0.0;
    std::size_t correct = 0;
    for (std::size_t start = 0; start < order.size(); start += config.batch_size) {
      const std::size_t end = std::min(order.size(), start + config.batch_size);
      const std::span<const std::size_t> idx(order.data() + start, end - start);
      buffers.fill(train_set, idx, N);
      const double loss = detail::run_batch(result.model, buffers.ptrs, buffers.targets.data(), ws, &grad, {});
      loss_sum += loss * static_cast<double>(idx.size());
      for (std::size_t b = 0; b < idx.size(); ++b)
        if (argmax(ws.probs.data() + b * N, N) == train_set.labels[idx[b]]) ++correct;
      adam_step(result.model, grad, adam);
    }
    check_finite(result.model.params, "parameters");

    EpochMetrics m;
    m.epoch = epoch;
    m.train_loss = loss_sum / static_cast<double>(order.size());
    m.train_acc = static_cast<double>(correct) / static_cast<double>(order.size());
    if (val_set.empty()) {
      m.val_loss = m.val_acc = std::numeric_limits<double>::quiet_NaN();
    } else {
      const Evaluation ev = evaluate(result.model, val_set, config.batch_size);
      m.val_loss = ev.loss;
      m.val_acc = ev.accuracy;
    }
    result.metrics.push_back(m);
    if (on_epoch) on_epoch(m);
  }
  return result;
}

Evaluation evaluate(const CnnModel& model, const SampleSet& samples, int batch_size) {
  if (samples.empty()) throw Error(ErrorCode::EmptyInput, "no samples to evaluate");
  model.arch.validate();
  check_shape(samples, model.arch, "evaluation");
  const int N = model.arch.classes;
  detail::Workspace ws;
  BatchBuffers buffers;
  Evaluation ev;
  std::vector<std::size_t> idx;
  std::size_t correct = 0;
  for (std::size_t start = 0; start < samples.size(); start += static_cast<std::size_t>(std::max(1, batch_size))) {
    const std::size_t end = std::min(samples.size(), start + static_cast<std::size_t>(std::max(1, batch_size)));
    idx.resize(end - start);
    std::iota(idx.begin(), idx.end(), start);
    buffers.fill(samples, idx, N);
    ev.loss += detail::run_batch(model, buffers.ptrs, buffers.targets.data(), ws, nullptr, {}) *
               static_cast<double>(idx.size());
    for (std::size_t b = 0; b < idx.size(); ++b) {
      const int pred = argmax(ws.probs.data() + b * N, N);
      ev.predicted.push_back(pred);
      if (pred == samples.labels[idx[b]]) ++correct;
    }
  }
  ev.loss /= static_cast<double>(samples.size());
  ev.accuracy = static_cast<double>(correct) / static_cast<double>(samples.size());
  return ev;
}

double evaluate_accuracy(const CnnModel& model, const SampleSet& samples) { return evaluate(model, samples).accuracy; }

std::array<double, kNumVerbs> predict(const CnnModel& model, std::span<const ImageRGB> frames) {
  const std::vector<std::vector<ImageRGB>> one{std::vector<ImageRGB>(frames.begin(), frames.end())};
  for (const auto& f : frames)
    if (f.width != model.arch.width || f.height != model.arch.height)
      throw Error(ErrorCode::InvalidImageSize, "frame size does not match the classifier input");
  const Tensor probs = forward(model, input_tensor(one));
  std::array<double, kNumVerbs> out{};
  std::copy_n(probs.data.begin(), kNumVerbs, out.begin());
  return out;
}

Verb predict_verb(const CnnModel& model, std::span<const ImageRGB> frames) {
  const auto p = predict(model, frames);
  return verb_from_index(argmax(p.data(), kNumVerbs));
}

}  // namespace verbgen::nn
