#include "verbgen/nn/tensor.hpp"

#include <cmath>
#include <functional>
#include <numeric>
#include <string>

#include "verbgen/error.hpp"

namespace verbgen::nn {

Tensor::Tensor(std::vector<std::size_t> dims, double fill)
    : shape(std::move(dims)),
      data(std::accumulate(shape.begin(), shape.end(), std::size_t{1}, std::multiplies<>()), fill) {}

void check_finite(std::span<const double> values, std::string_view what) {
  for (std::size_t i = 0; i < values.size(); ++i)
    if (!std::isfinite(values[i]))
      throw Error(ErrorCode::NonFinite, std::string(what) + " element " + std::to_string(i) + " is not finite");
}

Tensor one_hot(std::span<const int> labels, int classes) {
  Tensor t({labels.size(), static_cast<std::size_t>(classes)});
  for (std::size_t i = 0; i < labels.size(); ++i) {
    if (labels[i] < 0 || labels[i] >= classes)
      throw Error(ErrorCode::InvalidArgument, "label " + std::to_string(labels[i]) + " out of range");
    t.data[i * classes + labels[i]] = 1.0;
  }
  return t;
}

Tensor input_tensor(std::span<const std::vector<ImageRGB>> samples) {
  if (samples.empty() || samples[0].empty()) throw Error(ErrorCode::EmptyInput, "no samples");
  const std::size_t T = samples[0].size();
  const int H = samples[0][0].height, W = samples[0][0].width;
  const std::size_t HW = static_cast<std::size_t>(H) * W;
  Tensor t({samples.size(), 3 * T, static_cast<std::size_t>(H), static_cast<std::size_t>(W)});
  for (std::size_t b = 0; b < samples.size(); ++b) {
    if (samples[b].size() != T) throw Error(ErrorCode::ShapeMismatch, "samples differ in frame count");
    for (std::size_t f = 0; f < T; ++f) {
      const ImageRGB& img = samples[b][f];
      if (img.width != W || img.height != H) throw Error(ErrorCode::InvalidImageSize, "frames differ in size");
      double* dst = t.data.data() + (b * 3 * T + 3 * f) * HW;
      for (std::size_t i = 0; i < HW; ++i)
        for (std::size_t c = 0; c < 3; ++c) dst[c * HW + i] = img.pixels[i * 3 + c] / 255.0;
    }
  }
  return t;
}

}  // namespace verbgen::nn
