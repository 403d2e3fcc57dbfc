#include "verbgen/nn/adam.hpp"

#include <cmath>

#include "verbgen/error.hpp"

namespace verbgen::nn {

void adam_step(std::span<double> params, std::span<const double> grad, AdamState& s) {
  if (grad.size() != params.size())
    throw Error(ErrorCode::ShapeMismatch, "gradient has " + std::to_string(grad.size()) + " entries, expected " +
                                              std::to_string(params.size()));
  if (s.m.empty() && s.v.empty()) {
    s.m.assign(params.size(), 0.0);
    s.v.assign(params.size(), 0.0);
  }
  if (s.m.size() != params.size() || s.v.size() != params.size())
    throw Error(ErrorCode::ShapeMismatch, "optimizer state does not match the parameters");
  ++s.step;
  const double c1 = 1.0 - std::pow(s.beta1, static_cast<double>(s.step));
  const double c2 = 1.0 - std::pow(s.beta2, static_cast<double>(s.step));
  for (std::size_t i = 0; i < params.size(); ++i) {
    const double g = grad[i];
    s.m[i] = s.beta1 * s.m[i] + (1.0 - s.beta1) * g;
    s.v[i] = s.beta2 * s.v[i] + (1.0 - s.beta2) * g * g;
    const double mhat = s.m[i] / c1;
    const double vhat = s.v[i] / c2;
    params[i] -= s.lr * mhat / (std::sqrt(vhat) + s.eps);
  }
}

void adam_step(CnnModel& model, std::span<const double> grad, AdamState& state) {
  adam_step(std::span<double>(model.params), grad, state);
}

}  // namespace verbgen::nn
