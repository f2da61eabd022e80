// echopick - multi-echo LiDAR denoising toolkit
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cmath>
#include <cstdint>
#include <string>
#include <vector>

#include "echopick/errors.hpp"
#include "echopick/neighbors.hpp"
#include "echopick/rng.hpp"

namespace echopick {

enum class Activation : std::uint8_t { kLeakyRelu = 0, kRelu = 1 };

// Shared architecture of the coordinate and correlation learners: a per-cell
// linear encoder over the neighbor features, a stack of residual blocks of
// two 3x3 grid convolutions (columns wrap, rows zero-pad), and a per-echo
// 1x1 head. widths[i] is the inner channel count of block i; block input and
// output stay at `channels` so the skip connection is a plain add.
struct NetworkConfig {
  int channels = 16;  // encoder output channels
  int residual_blocks = 3;
  std::vector<int> widths;  // per-block inner widths; empty means all = channels
  Activation activation = Activation::kLeakyRelu;
  int k = 5;
  int num_echoes = 2;
  std::uint64_t param_seed = 1;

  int feature_dim() const { return k * num_echoes * 3; }

  std::vector<int> effective_widths() const {
    if (widths.empty()) return std::vector<int>(residual_blocks, channels);
    if (static_cast<int>(widths.size()) != residual_blocks)
      throw ConfigError("widths list must match residual_blocks");
    return widths;
  }

  void check() const {
    if (channels < 1) throw ConfigError("channels must be >= 1");
    if (residual_blocks < 1) throw ConfigError("residual_blocks must be >= 1");
    if (k < 1 || num_echoes < 1) throw ConfigError("k and num_echoes must be >= 1");
    for (int w : effective_widths())
      if (w < 1) throw ConfigError("block widths must be >= 1");
  }

  // Config whose single-network parameter count lands at the full-scale
  // operating point (about 1.13M trainable scalars).
  static NetworkConfig paper_scale() {
    NetworkConfig cfg;
    cfg.channels = 144;
    cfg.residual_blocks = 3;
    cfg.k = 5;
    cfg.num_echoes = 2;
    return cfg;
  }
};

constexpr double kLeakySlope = 0.1;

inline std::size_t parameter_count(const NetworkConfig& cfg) {
  cfg.check();
  const std::size_t d = cfg.feature_dim();
  const std::size_t s = cfg.channels;
  std::size_t count = d * s + s;  // encoder map + bias
  for (int wb : cfg.effective_widths()) {
    count += 9 * s * wb + wb;  // block conv in
    count += 9 * wb * s + s;   // block conv out
  }
  count += s * cfg.num_echoes + cfg.num_echoes;  // head
  return count;
}

struct NamedTensor {
  std::string name;
  std::vector<int> shape;
  std::vector<double> value;
  std::vector<double> grad;

  std::size_t size() const { return value.size(); }
};

struct ParameterStore {
  std::vector<NamedTensor> tensors;

  std::size_t total_count() const {
    std::size_t n = 0;
    for (const auto& t : tensors) n += t.size();
    return n;
  }
  void zero_grads() {
    for (auto& t : tensors) std::fill(t.grad.begin(), t.grad.end(), 0.0);
  }
};

// Channel-major dense activation planes.
struct PlaneTensor {
  int channels = 0;
  int height = 0;
  int width = 0;
  std::vector<double> values;

  PlaneTensor() = default;
  PlaneTensor(int c, int h, int w)
      : channels(c), height(h), width(w),
        values(static_cast<std::size_t>(c) * h * w, 0.0) {}

  std::size_t plane() const { return static_cast<std::size_t>(height) * width; }
  double* channel(int c) { return values.data() + static_cast<std::size_t>(c) * plane(); }
  const double* channel(int c) const {
    return values.data() + static_cast<std::size_t>(c) * plane();
  }
  double& at(int c, int h, int w) { return values[(static_cast<std::size_t>(c) * height + h) * width + w]; }
  double at(int c, int h, int w) const {
    return values[(static_cast<std::size_t>(c) * height + h) * width + w];
  }
};

inline double softplus(double x) {
  if (x > 30.0) return x;
  if (x < -30.0) return std::exp(x);
  return std::log1p(std::exp(x));
}
inline double softplus_grad(double x) { return 1.0 / (1.0 + std::exp(-x)); }

namespace detail {

inline double activate(double x, Activation a) {
  if (a == Activation::kLeakyRelu) return x > 0.0 ? x : kLeakySlope * x;
  return x > 0.0 ? x : 0.0;
}
inline double activate_grad(double pre, Activation a) {
  if (a == Activation::kLeakyRelu) return pre > 0.0 ? 1.0 : kLeakySlope;
  return pre > 0.0 ? 1.0 : 0.0;
}

// 3x3 convolution over the grid; columns wrap around the azimuth seam, rows
// outside the grid contribute zero. Weight layout: [out][in][3][3].
inline void conv3x3_forward(const PlaneTensor& in, const std::vector<double>& weight,
                            const std::vector<double>& bias, PlaneTensor& out) {
  const int H = in.height, W = in.width;
  const int ci = in.channels, co = out.channels;
  std::vector<int> wm(W), wp(W);
  for (int w = 0; w < W; ++w) {
    wm[w] = (w - 1 + W) % W;
    wp[w] = (w + 1) % W;
  }
  for (int o = 0; o < co; ++o) {
    double* dst = out.channel(o);
    const std::size_t plane = in.plane();
    for (std::size_t p = 0; p < plane; ++p) dst[p] = bias[o];
    for (int i = 0; i < ci; ++i) {
      const double* src = in.channel(i);
      const double* kw = weight.data() + (static_cast<std::size_t>(o) * ci + i) * 9;
      for (int h = 0; h < H; ++h) {
        for (int dy = -1; dy <= 1; ++dy) {
          const int hh = h + dy;
          if (hh < 0 || hh >= H) continue;
          const double* row = src + static_cast<std::size_t>(hh) * W;
          double* orow = dst + static_cast<std::size_t>(h) * W;
          const double k0 = kw[(dy + 1) * 3 + 0];
          const double k1 = kw[(dy + 1) * 3 + 1];
          const double k2 = kw[(dy + 1) * 3 + 2];
          for (int w = 0; w < W; ++w)
            orow[w] += k0 * row[wm[w]] + k1 * row[w] + k2 * row[wp[w]];
        }
      }
    }
  }
}

// Adjoint of conv3x3_forward: scatters d_out into d_in and accumulates
// weight / bias gradients. d_in may be null when input gradients are not
// needed.
inline void conv3x3_backward(const PlaneTensor& in, const std::vector<double>& weight,
                             const PlaneTensor& d_out, PlaneTensor* d_in,
                             std::vector<double>& d_weight, std::vector<double>& d_bias) {
  const int H = in.height, W = in.width;
  const int ci = in.channels, co = d_out.channels;
  std::vector<int> wm(W), wp(W);
  for (int w = 0; w < W; ++w) {
    wm[w] = (w - 1 + W) % W;
    wp[w] = (w + 1) % W;
  }
  for (int o = 0; o < co; ++o) {
    const double* do_ = d_out.channel(o);
    double bacc = 0.0;
    for (std::size_t p = 0; p < d_out.plane(); ++p) bacc += do_[p];
    d_bias[o] += bacc;
    for (int i = 0; i < ci; ++i) {
      const double* src = in.channel(i);
      double* din = d_in ? d_in->channel(i) : nullptr;
      double* kg = d_weight.data() + (static_cast<std::size_t>(o) * ci + i) * 9;
      const double* kw = weight.data() + (static_cast<std::size_t>(o) * ci + i) * 9;
      for (int h = 0; h < H; ++h) {
        const double* grow = do_ + static_cast<std::size_t>(h) * W;
        for (int dy = -1; dy <= 1; ++dy) {
          const int hh = h + dy;
          if (hh < 0 || hh >= H) continue;
          const double* row = src + static_cast<std::size_t>(hh) * W;
          double* drow = din ? din + static_cast<std::size_t>(hh) * W : nullptr;
          double g0 = 0.0, g1 = 0.0, g2 = 0.0;
          const double k0 = kw[(dy + 1) * 3 + 0];
          const double k1 = kw[(dy + 1) * 3 + 1];
          const double k2 = kw[(dy + 1) * 3 + 2];
          for (int w = 0; w < W; ++w) {
            const double g = grow[w];
            g0 += g * row[wm[w]];
            g1 += g * row[w];
            g2 += g * row[wp[w]];
            if (drow) {
              drow[wm[w]] += k0 * g;
              drow[w] += k1 * g;
              drow[wp[w]] += k2 * g;
            }
          }
          kg[(dy + 1) * 3 + 0] += g0;
          kg[(dy + 1) * 3 + 1] += g1;
          kg[(dy + 1) * 3 + 2] += g2;
        }
      }
    }
  }
}

}  // namespace detail

// One learner network. Holds its parameters, runs forwards and accumulates
// exact reverse-mode gradients into the parameter store.
class Network {
 public:
  explicit Network(const NetworkConfig& cfg) : cfg_(cfg) {
    cfg_.check();
    widths_ = cfg_.effective_widths();
    const int d = cfg_.feature_dim();
    const int s = cfg_.channels;
    add_tensor("enc.w", {s, d});
    add_tensor("enc.b", {s});
    for (int b = 0; b < cfg_.residual_blocks; ++b) {
      const std::string prefix = "block" + std::to_string(b);
      add_tensor(prefix + ".in.w", {widths_[b], s, 3, 3});
      add_tensor(prefix + ".in.b", {widths_[b]});
      add_tensor(prefix + ".out.w", {s, widths_[b], 3, 3});
      add_tensor(prefix + ".out.b", {s});
    }
    add_tensor("head.w", {cfg_.num_echoes, s});
    add_tensor("head.b", {cfg_.num_echoes});
    init_parameters();
  }

  const NetworkConfig& config() const { return cfg_; }
  ParameterStore& params() { return params_; }
  const ParameterStore& params() const { return params_; }

  struct Cache {
    PlaneTensor enc_pre;
    PlaneTensor enc_act;
    std::vector<PlaneTensor> block_in;   // input of each block (aliases previous output)
    std::vector<PlaneTensor> t1_pre;
    std::vector<PlaneTensor> a1;
    std::vector<PlaneTensor> sum_pre;
    PlaneTensor trunk_out;
  };

  // Raw head output per echo channel; nonnegativity maps (softplus for the
  // coordinate learner) are applied by the caller.
  PlaneTensor forward(const FeatureTensor& features, Cache* cache = nullptr) const {
    if (features.dim() != cfg_.feature_dim() || features.echoes != cfg_.num_echoes)
      throw ShapeError("feature tensor does not match network config");
    const int H = features.height, W = features.width;
    const int s = cfg_.channels;
    const int d = cfg_.feature_dim();

    Cache local;
    Cache& c = cache ? *cache : local;

    c.enc_pre = PlaneTensor(s, H, W);
    c.enc_act = PlaneTensor(s, H, W);
    const std::vector<double>& ew = tensor("enc.w").value;
    const std::vector<double>& eb = tensor("enc.b").value;
    for (int h = 0; h < H; ++h)
      for (int w = 0; w < W; ++w) {
        const double* x = features.values.data() + features.cell_base(h, w);
        for (int o = 0; o < s; ++o) {
          const double* row = ew.data() + static_cast<std::size_t>(o) * d;
          double acc = eb[o];
          for (int i = 0; i < d; ++i) acc += row[i] * x[i];
          c.enc_pre.at(o, h, w) = acc;
          c.enc_act.at(o, h, w) = detail::activate(acc, cfg_.activation);
        }
      }

    c.block_in.assign(cfg_.residual_blocks, PlaneTensor());
    c.t1_pre.assign(cfg_.residual_blocks, PlaneTensor());
    c.a1.assign(cfg_.residual_blocks, PlaneTensor());
    c.sum_pre.assign(cfg_.residual_blocks, PlaneTensor());

    PlaneTensor x = c.enc_act;
    for (int b = 0; b < cfg_.residual_blocks; ++b) {
      const std::string prefix = "block" + std::to_string(b);
      c.block_in[b] = x;
      PlaneTensor t1(widths_[b], H, W);
      detail::conv3x3_forward(x, tensor(prefix + ".in.w").value, tensor(prefix + ".in.b").value,
                              t1);
      c.t1_pre[b] = t1;
      PlaneTensor a1 = t1;
      for (double& v : a1.values) v = detail::activate(v, cfg_.activation);
      c.a1[b] = a1;
      PlaneTensor t2(s, H, W);
      detail::conv3x3_forward(a1, tensor(prefix + ".out.w").value, tensor(prefix + ".out.b").value,
                              t2);
      for (std::size_t i = 0; i < t2.values.size(); ++i) t2.values[i] += x.values[i];
      c.sum_pre[b] = t2;
      x = t2;
      for (double& v : x.values) v = detail::activate(v, cfg_.activation);
    }
    c.trunk_out = x;

    PlaneTensor out(cfg_.num_echoes, H, W);
    const std::vector<double>& hw_ = tensor("head.w").value;
    const std::vector<double>& hb = tensor("head.b").value;
    for (int e = 0; e < cfg_.num_echoes; ++e) {
      double* dst = out.channel(e);
      for (std::size_t p = 0; p < out.plane(); ++p) dst[p] = hb[e];
      for (int i = 0; i < s; ++i) {
        const double wv = hw_[static_cast<std::size_t>(e) * s + i];
        const double* src = x.channel(i);
        for (std::size_t p = 0; p < out.plane(); ++p) dst[p] += wv * src[p];
      }
    }
    return out;
  }

  // Accumulates parameter gradients for d(loss)/d(head output) = d_out.
  void backward(const FeatureTensor& features, const Cache& c, const PlaneTensor& d_out) {
    const int H = features.height, W = features.width;
    const int s = cfg_.channels;
    const int d = cfg_.feature_dim();
    const std::size_t plane = static_cast<std::size_t>(H) * W;

    // Head.
    PlaneTensor dx(s, H, W);
    {
      NamedTensor& hw_ = tensor("head.w");
      NamedTensor& hb = tensor("head.b");
      for (int e = 0; e < cfg_.num_echoes; ++e) {
        const double* g = d_out.channel(e);
        double bacc = 0.0;
        for (std::size_t p = 0; p < plane; ++p) bacc += g[p];
        hb.grad[e] += bacc;
        for (int i = 0; i < s; ++i) {
          const double* src = c.trunk_out.channel(i);
          double* dsti = dx.channel(i);
          const double wv = hw_.value[static_cast<std::size_t>(e) * s + i];
          double wacc = 0.0;
          for (std::size_t p = 0; p < plane; ++p) {
            wacc += g[p] * src[p];
            dsti[p] += wv * g[p];
          }
          hw_.grad[static_cast<std::size_t>(e) * s + i] += wacc;
        }
      }
    }

    // Residual blocks in reverse.
    for (int b = cfg_.residual_blocks - 1; b >= 0; --b) {
      const std::string prefix = "block" + std::to_string(b);
      // through the post-sum activation
      for (std::size_t i = 0; i < dx.values.size(); ++i)
        dx.values[i] *= detail::activate_grad(c.sum_pre[b].values[i], cfg_.activation);
      // dx is now the gradient at the sum node: flows to conv-out and skip.
      PlaneTensor da1(widths_[b], H, W);
      detail::conv3x3_backward(c.a1[b], tensor(prefix + ".out.w").value, dx, &da1,
                               tensor(prefix + ".out.w").grad, tensor(prefix + ".out.b").grad);
      for (std::size_t i = 0; i < da1.values.size(); ++i)
        da1.values[i] *= detail::activate_grad(c.t1_pre[b].values[i], cfg_.activation);
      detail::conv3x3_backward(c.block_in[b], tensor(prefix + ".in.w").value, da1, &dx,
                               tensor(prefix + ".in.w").grad, tensor(prefix + ".in.b").grad);
      // dx accumulated the skip path already (it was the sum-node gradient)
      // plus the conv-in scatter above.
    }

    // Encoder.
    {
      NamedTensor& ew = tensor("enc.w");
      NamedTensor& eb = tensor("enc.b");
      for (int h = 0; h < H; ++h)
        for (int w = 0; w < W; ++w) {
          const double* x = features.values.data() + features.cell_base(h, w);
          for (int o = 0; o < s; ++o) {
            const double g =
                dx.at(o, h, w) * detail::activate_grad(c.enc_pre.at(o, h, w), cfg_.activation);
            eb.grad[o] += g;
            double* row = ew.grad.data() + static_cast<std::size_t>(o) * d;
            for (int i = 0; i < d; ++i) row[i] += g * x[i];
          }
        }
    }
  }

  NamedTensor& tensor(const std::string& name) {
    for (auto& t : params_.tensors)
      if (t.name == name) return t;
    throw ShapeError("unknown tensor " + name);
  }
  const NamedTensor& tensor(const std::string& name) const {
    for (const auto& t : params_.tensors)
      if (t.name == name) return t;
    throw ShapeError("unknown tensor " + name);
  }

 private:
  void add_tensor(const std::string& name, const std::vector<int>& shape) {
    NamedTensor t;
    t.name = name;
    t.shape = shape;
    std::size_t n = 1;
    for (int s : shape) n *= static_cast<std::size_t>(s);
    t.value.assign(n, 0.0);
    t.grad.assign(n, 0.0);
    params_.tensors.push_back(std::move(t));
  }

  // Uniform fan-in scaled init for weights, zero biases. The draw order is
  // fixed by the tensor registration order, so a seed pins every parameter.
  void init_parameters() {
    Rng rng(cfg_.param_seed);
    for (auto& t : params_.tensors) {
      const bool is_bias = t.shape.size() == 1;
      if (is_bias) continue;
      std::size_t fan_in = 1;
      for (std::size_t i = 1; i < t.shape.size(); ++i) fan_in *= static_cast<std::size_t>(t.shape[i]);
      const double bound = std::sqrt(1.0 / static_cast<double>(fan_in));
      for (double& v : t.value) v = rng.uniform(-bound, bound);
    }
  }

  NetworkConfig cfg_;
  std::vector<int> widths_;
  ParameterStore params_;
};

}  // namespace echopick
