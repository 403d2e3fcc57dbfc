#pragma once

#include <cstdint>
#include <span>
#include <vector>

#include "verbgen/nn/cnn.hpp"

namespace verbgen::nn {

struct AdamState {
  double lr = 1e-3;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
  std::int64_t step = 0;
  /// Sized on the first step.
  std::vector<double> m, v;
};

/// One bias-corrected Adam update of `params` in place.
void adam_step(std::span<double> params, std::span<const double> grad, AdamState& state);
void adam_step(CnnModel& model, std::span<const double> grad, AdamState& state);

}  // namespace verbgen::nn
