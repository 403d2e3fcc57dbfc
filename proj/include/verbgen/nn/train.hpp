#pragma once

#include <array>
#include <cstdint>
#include <functional>
#include <span>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "verbgen/dataset.hpp"
#include "verbgen/nn/adam.hpp"
#include "verbgen/nn/cnn.hpp"

namespace verbgen::nn {

/// Frame-stacked 8-bit samples kept in memory, planar [3T][H][W] per sample.
struct SampleSet {
  int frames = 0;
  int height = 0;
  int width = 0;
  std::vector<std::uint8_t> pixels;
  std::vector<int> labels;
  std::vector<std::string> ids;

  std::size_t size() const { return labels.size(); }
  bool empty() const { return labels.empty(); }
  std::size_t sample_size() const { return static_cast<std::size_t>(3 * frames) * height * width; }
  const std::uint8_t* sample(std::size_t i) const { return pixels.data() + i * sample_size(); }

  void add(std::span<const ImageRGB> frames, int label, std::string id);
  SampleSet subset(std::span<const std::size_t> indices) const;
};

/// Reads `frames` evenly spaced frames of every listed entry. Skipped entries
/// are ignored. Throws Error(InvalidImageSize) if a frame is not height x width.
SampleSet load_samples(const DatasetManifest& manifest, std::span<const std::size_t> entries, int frames);

struct TrainConfig {
  int epochs = 40;
  int batch_size = 32;
  double lr = 1e-3;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
  std::uint64_t seed = 0;
};

struct EpochMetrics {
  int epoch = 0;
  /// Mean mini-batch loss and accuracy seen during the epoch.
  double train_loss = 0.0;
  double train_acc = 0.0;
  /// NaN when there is no validation set.
  double val_loss = 0.0;
  double val_acc = 0.0;

  nlohmann::json to_json() const;
};

struct TrainResult {
  CnnModel model;
  std::vector<EpochMetrics> metrics;
};

using EpochCallback = std::function<void(const EpochMetrics&)>;

/// Deterministic for a given config: weights are initialized from the seed and
/// every epoch reshuffles with a seed derived from it.
TrainResult train(const SampleSet& train_set, const SampleSet& val_set, const Architecture& arch,
                  const TrainConfig& config, const EpochCallback& on_epoch = {});

struct Evaluation {
  double loss = 0.0;
  double accuracy = 0.0;
  std::vector<int> predicted;
};

/// Throws Error(EmptyInput) for an empty set.
Evaluation evaluate(const CnnModel& model, const SampleSet& samples, int batch_size = 32);
double evaluate_accuracy(const CnnModel& model, const SampleSet& samples);

std::array<double, kNumVerbs> predict(const CnnModel& model, std::span<const ImageRGB> frames);
Verb predict_verb(const CnnModel& model, std::span<const ImageRGB> frames);

void save_model(const CnnModel& model, const std::string& path);
CnnModel load_model(const std::string& path);

}  // namespace verbgen::nn
