#include "engine.hpp"

#include <algorithm>
#include <cmath>

#include "verbgen/error.hpp"

namespace verbgen::nn::detail {

namespace {

constexpr std::size_t B4 = simd::kConvBlock;
constexpr std::size_t kDenseChunk = 1024;

Rect hull(const Rect& a, const Rect& b) {
  if (a.empty()) return b;
  if (b.empty()) return a;
  return {std::min(a.r0, b.r0), std::max(a.r1, b.r1), std::min(a.c0, b.c0), std::max(a.c1, b.c1)};
}

Rect nonzero_box(const double* frame, int h, int w) {
  const std::size_t hw = static_cast<std::size_t>(h) * w;
  Rect r{h, -1, w, -1};
  for (int y = 0; y < h; ++y) {
    const double* row = frame + static_cast<std::size_t>(y) * w;
    for (int x = 0; x < w; ++x)
      if (row[x] != 0.0 || row[hw + x] != 0.0 || row[2 * hw + x] != 0.0) {
        r.r0 = std::min(r.r0, y);
        r.r1 = std::max(r.r1, y);
        r.c0 = std::min(r.c0, x);
        r.c1 = std::max(r.c1, x);
      }
  }
  return r.r1 < 0 ? Rect{} : r;
}

// 2x2 stride-2 max pool with partial edge windows, fused with relu, over the
// windows in `region`. The first maximum in row-major window order wins ties.
void max_pool(const double* in, int channels, int h, int w, int ph, int pw, const Rect& region, double* out,
              int* idx) {
  for (int c = 0; c < channels; ++c) {
    const double* src = in + static_cast<std::size_t>(c) * h * w;
    for (int u = region.r0; u <= region.r1; ++u)
      for (int v = region.c0; v <= region.c1; ++v) {
        int best = 2 * u * w + 2 * v;
        for (int r = 2 * u; r < std::min(2 * u + 2, h); ++r)
          for (int q = 2 * v; q < std::min(2 * v + 2, w); ++q)
            if (src[r * w + q] > src[best]) best = r * w + q;
        const std::size_t o = (static_cast<std::size_t>(c) * ph + u) * pw + v;
        idx[o] = best;
        out[o] = std::max(0.0, src[best]);
      }
  }
}

inline double relu(double v) { return v > 0.0 ? v : 0.0; }

}  // namespace

Engine::Engine(const CnnModel& model, const EvalOptions& options)
    : model_(model),
      a_(model.arch),
      L_(param_layout(model.arch)),
      k_(options.kernels ? *options.kernels : simd::kernels()),
      full_(options.full_region) {
  const int cin = a_.in_channels();
  const int c1 = a_.conv1, c2 = a_.conv2;
  blocks1_ = (c1 + 3) / 4;
  blocks2_ = (c2 + 3) / 4;
  blocksT_ = blocks1_;
  const double* w1 = model.params.data() + L_.conv1_w.offset;
  const double* w2 = model.params.data() + L_.conv2_w.offset;
  const double* b1 = model.params.data() + L_.conv1_b.offset;
  const double* b2 = model.params.data() + L_.conv2_b.offset;

  const std::size_t per1 = 3 * 9 * B4;
  pack1_.assign(static_cast<std::size_t>(a_.frames) * blocks1_ * per1, 0.0);
  for (int f = 0; f < a_.frames; ++f)
    for (int b = 0; b < blocks1_; ++b) {
      double* dst = pack1_.data() + (static_cast<std::size_t>(f) * blocks1_ + b) * per1;
      for (std::size_t o = 0; o < B4; ++o) {
        const int oc = b * 4 + static_cast<int>(o);
        if (oc >= c1) break;
        for (int c = 0; c < 3; ++c)
          for (int k = 0; k < 9; ++k)
            dst[(c * 9 + k) * B4 + o] = w1[(static_cast<std::size_t>(oc) * cin + 3 * f + c) * 9 + k];
      }
    }

  const std::size_t per2 = static_cast<std::size_t>(c1) * 9 * B4;
  pack2_.assign(blocks2_ * per2, 0.0);
  for (int b = 0; b < blocks2_; ++b)
    for (std::size_t o = 0; o < B4; ++o) {
      const int oc = b * 4 + static_cast<int>(o);
      if (oc >= c2) break;
      for (int i = 0; i < c1; ++i)
        for (int k = 0; k < 9; ++k)
          pack2_[b * per2 + (i * 9 + k) * B4 + o] = w2[(static_cast<std::size_t>(oc) * c1 + i) * 9 + k];
    }

  const std::size_t perT = static_cast<std::size_t>(c2) * 9 * B4;
  packT_.assign(blocksT_ * perT, 0.0);
  for (int b = 0; b < blocksT_; ++b)
    for (std::size_t ii = 0; ii < B4; ++ii) {
      const int i = b * 4 + static_cast<int>(ii);
      if (i >= c1) break;
      for (int o = 0; o < c2; ++o)
        for (int k = 0; k < 9; ++k)
          packT_[b * perT + (o * 9 + k) * B4 + ii] = w2[(static_cast<std::size_t>(o) * c1 + i) * 9 + (8 - k)];
    }

  wsum2_.assign(static_cast<std::size_t>(c2) * c1, 0.0);
  c2_.assign(c2, 0.0);
  for (int o = 0; o < c2; ++o) {
    double s = b2[o];
    for (int i = 0; i < c1; ++i) {
      double ws = 0.0;
      for (int k = 0; k < 9; ++k) ws += w2[(static_cast<std::size_t>(o) * c1 + i) * 9 + k];
      wsum2_[static_cast<std::size_t>(o) * c1 + i] = ws;
      s += relu(b1[i]) * ws;
    }
    c2_[o] = s;
  }
}

void Engine::forward_trunk(const double* x, Trace& t) const {
  const int H = a_.height, W = a_.width;
  const int H1 = a_.conv1_h(), W1 = a_.conv1_w();
  const int P1h = a_.pool1_h(), P1w = a_.pool1_w();
  const int H2 = a_.conv2_h(), W2 = a_.conv2_w();
  const std::size_t HW = static_cast<std::size_t>(H) * W;
  const std::size_t H1W1 = static_cast<std::size_t>(H1) * W1;
  const std::size_t P1 = static_cast<std::size_t>(P1h) * P1w;
  const std::size_t H2W2 = static_cast<std::size_t>(H2) * W2;
  const int c1 = a_.conv1, c2 = a_.conv2;
  const double* b1 = model_.params.data() + L_.conv1_b.offset;
  const double* b2 = model_.params.data() + L_.conv2_b.offset;

  t.frame_rects.assign(a_.frames, Rect{});
  Rect act1;
  for (int f = 0; f < a_.frames; ++f) {
    const Rect in = full_ ? Rect{0, H - 1, 0, W - 1} : nonzero_box(x + 3 * f * HW, H, W);
    if (in.empty()) continue;
    const Rect out{std::max(0, in.r0 - 2), std::min(H1 - 1, in.r1), std::max(0, in.c0 - 2), std::min(W1 - 1, in.c1)};
    t.frame_rects[f] = out;
    act1 = hull(act1, out);
  }

  t.act1 = act1;
  t.actp1 = act1.empty() ? Rect{} : Rect{act1.r0 / 2, act1.r1 / 2, act1.c0 / 2, act1.c1 / 2};
  const Rect& ap = t.actp1;
  // conv1 positions read by the pool windows of the active box.
  t.ext1 = ap.empty() ? Rect{}
                      : Rect{2 * ap.r0, std::min(H1 - 1, 2 * ap.r1 + 1), 2 * ap.c0, std::min(W1 - 1, 2 * ap.c1 + 1)};
  t.act2 = ap.empty() ? Rect{}
                      : Rect{std::max(0, ap.r0 - 2), std::min(H2 - 1, ap.r1), std::max(0, ap.c0 - 2),
                             std::min(W2 - 1, ap.c1)};
  const Rect& E = t.ext1;

  // pre1 is only valid inside ext1; elsewhere it would equal b1.
  t.pre1.resize(c1 * H1W1);
  for (int o = 0; o < c1; ++o)
    for (int r = E.r0; r <= E.r1; ++r)
      std::fill_n(t.pre1.data() + o * H1W1 + static_cast<std::size_t>(r) * W1 + E.c0, E.cols(), b1[o]);
  const std::size_t per1 = 3 * 9 * B4;
  for (int f = 0; f < a_.frames; ++f) {
    const Rect& R = t.frame_rects[f];
    if (R.empty()) continue;
    for (int b = 0; b < blocks1_; ++b) {
      const double* w = pack1_.data() + (static_cast<std::size_t>(f) * blocks1_ + b) * per1;
      const std::size_t n_out = std::min<std::size_t>(B4, c1 - b * 4);
      for (int r = R.r0; r <= R.r1; ++r)
        k_.conv3x3(x + 3 * f * HW + static_cast<std::size_t>(r) * W + R.c0, HW, W, 3, w, n_out,
                   t.pre1.data() + b * 4 * H1W1 + static_cast<std::size_t>(r) * W1 + R.c0, H1W1, R.cols());
    }
  }

  t.p1.resize(c1 * P1);
  t.idx1.resize(c1 * P1);
  for (int o = 0; o < c1; ++o) std::fill_n(t.p1.data() + o * P1, P1, relu(b1[o]));
  max_pool(t.pre1.data(), c1, H1, W1, P1h, P1w, ap, t.p1.data(), t.idx1.data());

  const Rect& A2 = t.act2;

  t.pre2.resize(c2 * H2W2);
  for (int o = 0; o < c2; ++o) {
    double* m = t.pre2.data() + o * H2W2;
    std::fill_n(m, H2W2, c2_[o]);
    if (!A2.empty())
      for (int r = A2.r0; r <= A2.r1; ++r) std::fill_n(m + r * W2 + A2.c0, A2.cols(), b2[o]);
  }
  if (!A2.empty()) {
    const std::size_t per2 = static_cast<std::size_t>(c1) * 9 * B4;
    for (int b = 0; b < blocks2_; ++b) {
      const std::size_t n_out = std::min<std::size_t>(B4, c2 - b * 4);
      for (int r = A2.r0; r <= A2.r1; ++r)
        k_.conv3x3(t.p1.data() + static_cast<std::size_t>(r) * P1w + A2.c0, P1, P1w, c1, pack2_.data() + b * per2,
                   n_out, t.pre2.data() + b * 4 * H2W2 + static_cast<std::size_t>(r) * W2 + A2.c0, H2W2,
                   A2.cols());
    }
  }

  const std::size_t F = a_.features();
  t.feat.resize(F);
  t.idx2.resize(F);
  max_pool(t.pre2.data(), c2, H2, W2, a_.pool2_h(), a_.pool2_w(), Rect{0, a_.pool2_h() - 1, 0, a_.pool2_w() - 1},
           t.feat.data(), t.idx2.data());
}

void Engine::backward_trunk(const double* x, const Trace& t, const double* gfeat, Scratch& s,
                            double* grad) const {
  const int H = a_.height, W = a_.width;
  const int H1 = a_.conv1_h(), W1 = a_.conv1_w();
  const int P1h = a_.pool1_h(), P1w = a_.pool1_w();
  const int H2 = a_.conv2_h(), W2 = a_.conv2_w();
  const int P2 = a_.pool2_h() * a_.pool2_w();
  const std::size_t HW = static_cast<std::size_t>(H) * W;
  const std::size_t H1W1 = static_cast<std::size_t>(H1) * W1;
  const std::size_t P1 = static_cast<std::size_t>(P1h) * P1w;
  const std::size_t H2W2 = static_cast<std::size_t>(H2) * W2;
  const int cin = a_.in_channels(), c1 = a_.conv1, c2 = a_.conv2;
  const double* b1 = model_.params.data() + L_.conv1_b.offset;
  double* gW1 = grad + L_.conv1_w.offset;
  double* gb1 = grad + L_.conv1_b.offset;
  double* gW2 = grad + L_.conv2_w.offset;
  double* gb2 = grad + L_.conv2_b.offset;
  const Rect& A2 = t.act2;
  const Rect& AP = t.actp1;

  // Route through pool2 and relu2.
  s.g2.assign(c2 * H2W2, 0.0);
  for (int o = 0; o < c2; ++o)
    for (int n = 0; n < P2; ++n) {
      const std::size_t fi = static_cast<std::size_t>(o) * P2 + n;
      const std::size_t pos = o * H2W2 + t.idx2[fi];
      if (t.pre2[pos] > 0.0) s.g2[pos] += gfeat[fi];
    }

  std::vector<double> G2(c2, 0.0);
  for (int o = 0; o < c2; ++o) {
    const double* g = s.g2.data() + o * H2W2;
    double total = 0.0, outside = 0.0;
    for (int r = 0; r < H2; ++r)
      for (int q = 0; q < W2; ++q) {
        total += g[r * W2 + q];
        if (!A2.contains(r, q)) outside += g[r * W2 + q];
      }
    G2[o] = total;
    gb2[o] += total;
    // Outside the active box every conv2 window sees relu(b1).
    if (outside != 0.0)
      for (int i = 0; i < c1; ++i) {
        const double rb = relu(b1[i]);
        if (rb == 0.0) continue;
        double* gw = gW2 + (static_cast<std::size_t>(o) * c1 + i) * 9;
        for (int k = 0; k < 9; ++k) gw[k] += rb * outside;
      }
  }
  if (!A2.empty())
    for (int i = 0; i < c1; ++i)
      for (int o0 = 0; o0 < c2; o0 += static_cast<int>(B4))
        k_.corr3x3(s.g2.data() + o0 * H2W2 + static_cast<std::size_t>(A2.r0) * W2 + A2.c0, H2W2, W2,
                   std::min<std::size_t>(B4, c2 - o0),
                   t.p1.data() + i * P1 + static_cast<std::size_t>(A2.r0) * P1w + A2.c0, P1w, A2.rows(), A2.cols(),
                   gW2 + (static_cast<std::size_t>(o0) * c1 + i) * 9, static_cast<std::size_t>(c1) * 9);

  // Sum of d loss / d p1 over the whole map, per channel.
  std::vector<double> total1(c1, 0.0);
  for (int i = 0; i < c1; ++i) {
    double v = 0.0;
    for (int o = 0; o < c2; ++o) v += wsum2_[static_cast<std::size_t>(o) * c1 + i] * G2[o];
    total1[i] = v;
  }

  if (AP.empty()) {
    for (int i = 0; i < c1; ++i)
      if (b1[i] > 0.0) gb1[i] += total1[i];
    return;
  }

  // d loss / d p1 inside the active box: full correlation of g2 with flipped kernels.
  const int PW = W2 + 4;
  const std::size_t PHW = static_cast<std::size_t>(H2 + 4) * PW;
  s.gpad.assign(c2 * PHW, 0.0);
  for (int o = 0; o < c2; ++o)
    for (int r = 0; r < H2; ++r)
      std::copy_n(s.g2.data() + o * H2W2 + static_cast<std::size_t>(r) * W2, W2,
                  s.gpad.data() + o * PHW + static_cast<std::size_t>(r + 2) * PW + 2);
  s.gp1.assign(c1 * P1, 0.0);
  const std::size_t perT = static_cast<std::size_t>(c2) * 9 * B4;
  for (int b = 0; b < blocksT_; ++b) {
    const std::size_t n_out = std::min<std::size_t>(B4, c1 - b * 4);
    for (int r = AP.r0; r <= AP.r1; ++r)
      k_.conv3x3(s.gpad.data() + static_cast<std::size_t>(r) * PW + AP.c0, PHW, PW, c2, packT_.data() + b * perT,
                 n_out, s.gp1.data() + b * 4 * P1 + static_cast<std::size_t>(r) * P1w + AP.c0, P1, AP.cols());
  }

  // Route through pool1 and relu1. Windows outside the box hold b1 everywhere.
  const Rect& E = t.ext1;
  s.g1.resize(c1 * H1W1);
  for (int i = 0; i < c1; ++i)
    for (int r = E.r0; r <= E.r1; ++r) std::fill_n(s.g1.data() + i * H1W1 + static_cast<std::size_t>(r) * W1 + E.c0, E.cols(), 0.0);
  for (int i = 0; i < c1; ++i) {
    double inside = 0.0, routed = 0.0;
    for (int u = AP.r0; u <= AP.r1; ++u)
      for (int v = AP.c0; v <= AP.c1; ++v) {
        const std::size_t q = i * P1 + static_cast<std::size_t>(u) * P1w + v;
        const double g = s.gp1[q];
        inside += g;
        const std::size_t pos = i * H1W1 + t.idx1[q];
        if (t.pre1[pos] > 0.0) {
          s.g1[pos] += g;
          routed += g;
        }
      }
    gb1[i] += routed;
    if (b1[i] > 0.0) gb1[i] += total1[i] - inside;
  }

  for (int f = 0; f < a_.frames; ++f) {
    const Rect& R = t.frame_rects[f];
    if (R.empty()) continue;
    for (int c = 0; c < 3; ++c)
      for (int o0 = 0; o0 < c1; o0 += static_cast<int>(B4))
        k_.corr3x3(s.g1.data() + o0 * H1W1 + static_cast<std::size_t>(R.r0) * W1 + R.c0, H1W1, W1,
                   std::min<std::size_t>(B4, c1 - o0), x + (3 * f + c) * HW + static_cast<std::size_t>(R.r0) * W + R.c0,
                   W, R.rows(), R.cols(), gW1 + (static_cast<std::size_t>(o0) * cin + 3 * f + c) * 9,
                   static_cast<std::size_t>(cin) * 9);
  }
}

double run_batch(const CnnModel& model, std::span<const double* const> inputs, const double* targets,
                 Workspace& ws, std::vector<double>* grad, const EvalOptions& options) {
  const Architecture& a = model.arch;
  const ParamLayout L = param_layout(a);
  const auto B = static_cast<std::ptrdiff_t>(inputs.size());
  const std::size_t F = a.features();
  const int D1 = a.dense1, D2 = a.dense2, N = a.classes;
  const double* p = model.params.data();
  const auto& K = options.kernels ? *options.kernels : simd::kernels();

  Engine engine(model, options);
  ws.traces.resize(B);
#pragma omp parallel for schedule(dynamic)
  for (std::ptrdiff_t b = 0; b < B; ++b) engine.forward_trunk(inputs[b], ws.traces[b]);

  // dense1 is the one large matrix; walking it in feature chunks keeps the
  // weight and feature tiles cache resident across the batch.
  ws.h1.assign(B * D1, 0.0);
  ws.h2.assign(B * D2, 0.0);
  ws.probs.assign(B * N, 0.0);
  ws.log_probs.assign(B * N, 0.0);
  const double* W1d = p + L.dense1_w.offset;
  for (std::ptrdiff_t b = 0; b < B; ++b)
    for (int u = 0; u < D1; ++u) ws.h1[b * D1 + u] = p[L.dense1_b.offset + u];
  for (std::size_t j0 = 0; j0 < F; j0 += kDenseChunk) {
    const std::size_t len = std::min(kDenseChunk, F - j0);
    for (int u = 0; u < D1; ++u)
      for (std::ptrdiff_t b = 0; b < B; ++b)
        ws.h1[b * D1 + u] += K.dot(W1d + u * F + j0, ws.traces[b].feat.data() + j0, len);
  }
  for (double& v : ws.h1) v = relu(v);

  for (std::ptrdiff_t b = 0; b < B; ++b) {
    const double* h1 = ws.h1.data() + b * D1;
    double* h2 = ws.h2.data() + b * D2;
    double* z = ws.probs.data() + b * N;
    for (int u = 0; u < D2; ++u)
      h2[u] = relu(p[L.dense2_b.offset + u] + K.dot(p + L.dense2_w.offset + u * D1, h1, D1));
    for (int n = 0; n < N; ++n) z[n] = p[L.dense3_b.offset + n] + K.dot(p + L.dense3_w.offset + n * D2, h2, D2);
    for (int n = 0; n < N; ++n)
      if (!std::isfinite(z[n])) throw Error(ErrorCode::NonFinite, "non-finite logit");
    const double zmax = *std::max_element(z, z + N);
    double sum = 0.0;
    double* lz = ws.log_probs.data() + b * N;
    for (int n = 0; n < N; ++n) {
      lz[n] = z[n] - zmax;
      sum += (z[n] = std::exp(lz[n]));
    }
    const double log_sum = std::log(sum);
    for (int n = 0; n < N; ++n) {
      z[n] /= sum;
      lz[n] -= log_sum;
    }
  }
  if (!targets) return 0.0;

  double loss = 0.0;
  for (std::ptrdiff_t b = 0; b < B; ++b)
    for (int n = 0; n < N; ++n) {
      const double t = targets[b * N + n];
      if (t != 0.0) loss -= t * std::log(std::max(ws.probs[b * N + n], 1e-12));
    }
  loss /= static_cast<double>(B);
  if (!grad) return loss;

  grad->assign(L.total, 0.0);
  double* g = grad->data();
  ws.dz.resize(B * N);
  for (std::ptrdiff_t i = 0; i < B * N; ++i) ws.dz[i] = (ws.probs[i] - targets[i]) / static_cast<double>(B);

  // gz1 holds d loss / d dense1 pre-activation, zero where relu was inactive.
  std::vector<double> gz1(B * D1, 0.0), gh2(D2);
  for (std::ptrdiff_t b = 0; b < B; ++b) {
    const double* h1 = ws.h1.data() + b * D1;
    const double* h2 = ws.h2.data() + b * D2;
    const double* dz = ws.dz.data() + b * N;
    std::fill(gh2.begin(), gh2.end(), 0.0);
    for (int n = 0; n < N; ++n) {
      g[L.dense3_b.offset + n] += dz[n];
      K.axpy(dz[n], h2, g + L.dense3_w.offset + n * D2, D2);
      K.axpy(dz[n], p + L.dense3_w.offset + n * D2, gh2.data(), D2);
    }
    double* gh1 = gz1.data() + b * D1;
    for (int u = 0; u < D2; ++u) {
      if (h2[u] <= 0.0) continue;
      g[L.dense2_b.offset + u] += gh2[u];
      K.axpy(gh2[u], h1, g + L.dense2_w.offset + u * D1, D1);
      K.axpy(gh2[u], p + L.dense2_w.offset + u * D1, gh1, D1);
    }
    for (int u = 0; u < D1; ++u) {
      if (h1[u] <= 0.0) gh1[u] = 0.0;
      g[L.dense1_b.offset + u] += gh1[u];
    }
  }

  ws.gfeat.assign(B * F, 0.0);
  double* gW1d = g + L.dense1_w.offset;
  for (std::size_t j0 = 0; j0 < F; j0 += kDenseChunk) {
    const std::size_t len = std::min(kDenseChunk, F - j0);
    for (int u = 0; u < D1; ++u)
      for (std::ptrdiff_t b = 0; b < B; ++b) {
        const double gz = gz1[b * D1 + u];
        if (gz == 0.0) continue;
        K.axpy(gz, ws.traces[b].feat.data() + j0, gW1d + u * F + j0, len);
        K.axpy(gz, W1d + u * F + j0, ws.gfeat.data() + b * F + j0, len);
      }
  }

  ws.scratch.resize(B);
  ws.slots.resize(B);
#pragma omp parallel for schedule(dynamic)
  for (std::ptrdiff_t b = 0; b < B; ++b) {
    ws.slots[b].assign(L.conv_total, 0.0);
    engine.backward_trunk(inputs[b], ws.traces[b], ws.gfeat.data() + b * F, ws.scratch[b], ws.slots[b].data());
  }
  // Fixed-order reduction keeps results independent of the thread count.
  for (std::ptrdiff_t b = 0; b < B; ++b) K.axpy(1.0, ws.slots[b].data(), g, L.conv_total);
  return loss;
}

}  // namespace verbgen::nn::detail
