#pragma once

#include <cstddef>
#include <span>
#include <string_view>
#include <vector>

#include "verbgen/render.hpp"

namespace verbgen::nn {

/// Dense row-major array of doubles.
struct Tensor {
  std::vector<std::size_t> shape;
  std::vector<double> data;

  Tensor() = default;
  explicit Tensor(std::vector<std::size_t> dims, double fill = 0.0);

  std::size_t rank() const { return shape.size(); }
  std::size_t dim(std::size_t i) const { return shape.at(i); }
  std::size_t size() const { return data.size(); }
  double& operator[](std::size_t i) { return data[i]; }
  double operator[](std::size_t i) const { return data[i]; }

  bool operator==(const Tensor&) const = default;
};

/// Throws Error(NonFinite) naming `what` if any value is NaN or infinite.
void check_finite(std::span<const double> values, std::string_view what);

/// B x classes matrix with a 1 in each row's label column.
Tensor one_hot(std::span<const int> labels, int classes);

/// Channel-stacks each sample's frames into a B x 3T x H x W batch scaled to [0, 1].
Tensor input_tensor(std::span<const std::vector<ImageRGB>> samples);

}  // namespace verbgen::nn
