#pragma once

// Independent reference for gradient checks: a direct-loop forward pass over
// the same parameter layout, central differences on top of it, and a random
// small-network generator.
//
// Central differences are only meaningful where the loss is smooth within +-h.
// A configuration is rejected when any perturbation flips a ReLU or moves a
// pooling argmax, since the difference quotient then straddles a kink.
//
// The reference forward pass runs in long double: with h = 1e-4 a double loss
// of about 3 leaves ~1e-12 of rounding in each quotient, which is the whole
// gradient for the smallest parameters.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <random>
#include <vector>

#include "verbgen/nn/cnn.hpp"

namespace oracle {

using verbgen::nn::Architecture;
using verbgen::nn::CnnModel;
using verbgen::nn::Tensor;
using Real = long double;

struct Pattern {
  std::vector<char> relu;
  std::vector<int> argmax;
  bool operator==(const Pattern&) const = default;
};

/// Valid 3x3 convolution over `in` (ch x h x w) with weights [out][ch][3][3].
inline std::vector<Real> conv(const std::vector<Real>& in, int ch, int h, int w, const double* W, const double* b,
                              int out) {
  const int oh = h - 2, ow = w - 2;
  std::vector<Real> o(static_cast<std::size_t>(out) * oh * ow);
  for (int f = 0; f < out; ++f)
    for (int y = 0; y < oh; ++y)
      for (int x = 0; x < ow; ++x) {
        Real s = b[f];
        for (int c = 0; c < ch; ++c)
          for (int ky = 0; ky < 3; ++ky)
            for (int kx = 0; kx < 3; ++kx)
              s += W[((f * ch + c) * 3 + ky) * 3 + kx] * in[(static_cast<std::size_t>(c) * h + y + ky) * w + x + kx];
        o[(static_cast<std::size_t>(f) * oh + y) * ow + x] = s;
      }
  return o;
}

inline void relu(std::vector<Real>& v, Pattern* p) {
  for (Real& x : v) {
    if (p) p->relu.push_back(x > 0.0L);
    x = std::max(x, 0.0L);
  }
}

/// 2x2 stride-2 max pool that keeps partial windows at the far edges.
inline std::vector<Real> pool(const std::vector<Real>& in, int ch, int h, int w, Pattern* p) {
  const int ph = (h + 1) / 2, pw = (w + 1) / 2;
  std::vector<Real> o(static_cast<std::size_t>(ch) * ph * pw);
  for (int c = 0; c < ch; ++c)
    for (int y = 0; y < ph; ++y)
      for (int x = 0; x < pw; ++x) {
        Real best = -INFINITY;
        int arg = -1;
        for (int dy = 0; dy < 2; ++dy)
          for (int dx = 0; dx < 2; ++dx) {
            const int yy = 2 * y + dy, xx = 2 * x + dx;
            if (yy >= h || xx >= w) continue;
            const Real v = in[(static_cast<std::size_t>(c) * h + yy) * w + xx];
            if (v > best) {
              best = v;
              arg = dy * 2 + dx;
            }
          }
        o[(static_cast<std::size_t>(c) * ph + y) * pw + x] = best;
        if (p) p->argmax.push_back(arg);
      }
  return o;
}

inline std::vector<Real> dense(const std::vector<Real>& in, const double* W, const double* b, int out) {
  std::vector<Real> o(static_cast<std::size_t>(out));
  for (int i = 0; i < out; ++i) {
    Real s = b[i];
    for (std::size_t j = 0; j < in.size(); ++j) s += W[i * in.size() + j] * in[j];
    o[static_cast<std::size_t>(i)] = s;
  }
  return o;
}

/// Mean cross-entropy of the batch; fills `pattern` when given.
inline Real loss_ext(const CnnModel& m, const Tensor& x, const std::vector<int>& labels, Pattern* pattern = nullptr) {
  const Architecture& a = m.arch;
  const auto L = m.layout();
  const double* P = m.params.data();
  const std::size_t B = x.dim(0), sample = x.size() / B;
  Real total = 0.0L;
  for (std::size_t b = 0; b < B; ++b) {
    std::vector<Real> in(x.data.begin() + static_cast<std::ptrdiff_t>(b * sample),
                           x.data.begin() + static_cast<std::ptrdiff_t>((b + 1) * sample));
    auto c1 = conv(in, a.in_channels(), a.height, a.width, P + L.conv1_w.offset, P + L.conv1_b.offset, a.conv1);
    relu(c1, pattern);
    auto p1 = pool(c1, a.conv1, a.conv1_h(), a.conv1_w(), pattern);
    auto c2 = conv(p1, a.conv1, a.pool1_h(), a.pool1_w(), P + L.conv2_w.offset, P + L.conv2_b.offset, a.conv2);
    relu(c2, pattern);
    auto f = pool(c2, a.conv2, a.conv2_h(), a.conv2_w(), pattern);
    auto h1 = dense(f, P + L.dense1_w.offset, P + L.dense1_b.offset, a.dense1);
    relu(h1, pattern);
    auto h2 = dense(h1, P + L.dense2_w.offset, P + L.dense2_b.offset, a.dense2);
    relu(h2, pattern);
    auto z = dense(h2, P + L.dense3_w.offset, P + L.dense3_b.offset, a.classes);
    const Real zmax = *std::max_element(z.begin(), z.end());
    Real se = 0.0L;
    for (Real v : z) se += std::exp(v - zmax);
    const Real p = std::exp(z[static_cast<std::size_t>(labels[b])] - zmax) / se;
    total += -std::log(std::max(p, 1e-12L));
  }
  return total / static_cast<Real>(B);
}

inline double loss(const CnnModel& m, const Tensor& x, const std::vector<int>& labels, Pattern* pattern = nullptr) {
  return static_cast<double>(loss_ext(m, x, labels, pattern));
}

struct Problem {
  CnnModel model;
  Tensor input;
  std::vector<int> labels;
};

/// Random 8x8 network with reduced widths, batch of 2. Each frame is either
/// fully random, a random rectangle on a zero background, or all zero.
inline Problem random_problem(std::mt19937_64& rng) {
  std::uniform_int_distribution<int> ui(0, 1000);
  Architecture a;
  a.frames = 1 + ui(rng) % 3;
  a.height = a.width = 8;
  a.conv1 = 2 + ui(rng) % 2;
  a.conv2 = 2 + ui(rng) % 2;
  a.dense1 = 4 + ui(rng) % 5;
  a.dense2 = 3 + ui(rng) % 4;
  Problem pr{CnnModel(a), Tensor({2, static_cast<std::size_t>(a.in_channels()), 8, 8}), {}};
  std::uniform_real_distribution<double> u(-0.5, 0.5), u01(0.0, 1.0);
  for (auto& p : pr.model.params) p = u(rng);
  for (int b = 0; b < 2; ++b)
    for (int f = 0; f < a.frames; ++f) {
      const int mode = ui(rng) % 3;
      const int r0 = ui(rng) % 8, r1 = std::min(7, r0 + ui(rng) % 4);
      const int c0 = ui(rng) % 8, c1 = std::min(7, c0 + ui(rng) % 4);
      for (int c = 0; c < 3; ++c)
        for (int y = 0; y < 8; ++y)
          for (int x = 0; x < 8; ++x) {
            double v = 0.0;
            if (mode == 0 || (mode == 1 && y >= r0 && y <= r1 && x >= c0 && x <= c1)) v = u01(rng);
            pr.input.data[((static_cast<std::size_t>(b) * a.in_channels() + 3 * f + c) * 8 + y) * 8 + x] = v;
          }
    }
  pr.labels = {ui(rng) % 15, ui(rng) % 15};
  return pr;
}

/// True when no parameter perturbation of +-h changes the activation pattern.
inline bool smooth_within(Problem& pr, double h) {
  Pattern base;
  loss(pr.model, pr.input, pr.labels, &base);
  for (double& p : pr.model.params) {
    const double p0 = p;
    for (double s : {h, -h}) {
      p = p0 + s;
      Pattern q;
      loss(pr.model, pr.input, pr.labels, &q);
      if (!(q == base)) {
        p = p0;
        return false;
      }
    }
    p = p0;
  }
  return true;
}

inline std::vector<double> central_differences(Problem& pr, double h) {
  std::vector<double> g(pr.model.params.size());
  for (std::size_t j = 0; j < g.size(); ++j) {
    double& p = pr.model.params[j];
    const double p0 = p;
    const double up = p0 + h, down = p0 - h;
    p = up;
    const Real lp = loss_ext(pr.model, pr.input, pr.labels);
    p = down;
    const Real lm = loss_ext(pr.model, pr.input, pr.labels);
    p = p0;
    // Divide by the step actually taken after rounding p0 +- h.
    g[j] = static_cast<double>((lp - lm) / (static_cast<Real>(up) - static_cast<Real>(down)));
  }
  return g;
}

inline double relative_error(double a, double n) {
  return std::abs(a - n) / std::max({std::abs(a), std::abs(n), 1e-8});
}

struct CheckResult {
  int configs = 0;
  int rejected = 0;
  std::size_t parameters = 0;
  double worst = 0.0;
  double worst_loss_gap = 0.0;
};

/// Runs `count` smooth configurations from a seeded stream against `analytic`
/// (loss + gradient of the implementation under test).
template <typename Analytic>
CheckResult check_gradients(int count, std::uint64_t seed, double h, Analytic analytic) {
  std::mt19937_64 rng(seed);
  CheckResult r;
  while (r.configs < count) {
    Problem pr = random_problem(rng);
    if (!smooth_within(pr, h)) {
      ++r.rejected;
      continue;
    }
    const auto [value, grad] = analytic(pr);
    const auto numeric = central_differences(pr, h);
    r.worst_loss_gap = std::max(r.worst_loss_gap, std::abs(value - loss(pr.model, pr.input, pr.labels)));
    for (std::size_t j = 0; j < numeric.size(); ++j) r.worst = std::max(r.worst, relative_error(grad[j], numeric[j]));
    r.parameters += numeric.size();
    ++r.configs;
  }
  return r;
}

}  // namespace oracle
