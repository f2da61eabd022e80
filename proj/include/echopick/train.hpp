// echopick - multi-echo LiDAR denoising toolkit
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cmath>
#include <cstdint>
#include <string>
#include <vector>

#include "echopick/csr.hpp"
#include "echopick/errors.hpp"
#include "echopick/net.hpp"
#include "echopick/neighbors.hpp"
#include "echopick/rng.hpp"
#include "echopick/types.hpp"

namespace echopick {

struct TrainConfig {
  double learning_rate = 0.01;
  double lr_decay = 0.99;  // multiplied onto the rate after every epoch
  double momentum = 0.9;
  int epochs = 30;
  double lambda = 5.0;     // coordinate-error weight in the loss
  double rho = 0.5;        // blind-spot fraction of valid echoes
  std::uint64_t seed = 1;

  void check() const {
    if (!(learning_rate > 0.0) || !(lr_decay > 0.0) || !(momentum >= 0.0))
      throw ConfigError("learning_rate, lr_decay must be > 0 and momentum >= 0");
    if (epochs < 1) throw ConfigError("epochs must be >= 1");
    if (!(lambda > 0.0)) throw ConfigError("lambda must be > 0");
    if (!(rho > 0.0 && rho <= 1.0)) throw ConfigError("rho must be in (0,1]");
  }
};

// Joint score output of the two learners, (h, w, e)-indexed. cor is the
// correlation learner's raw score (higher = less predictable, i.e. noisier);
// coo is the coordinate learner's predicted range in meters.
struct ScoreMap {
  Grid3<double> cor;
  Grid3<double> coo;
};

using BlindSpotMask = Grid3<std::uint8_t>;

// Bernoulli(rho) over valid echoes; invalid echoes are never masked. Redraws
// whole masks until at least one echo is selected, which keeps the result
// deterministic for a given rng state while honoring the non-empty-subset
// precondition of the loss.
inline BlindSpotMask sample_blind_spot_mask(const MultiEchoOrderedCloud& cloud, double rho,
                                            Rng& rng) {
  if (!(rho > 0.0 && rho <= 1.0)) throw ConfigError("rho must be in (0,1]");
  BlindSpotMask mask(cloud.height(), cloud.width(), cloud.num_echoes(), 0);
  bool has_valid = false;
  for (int h = 0; h < cloud.height(); ++h)
    for (int w = 0; w < cloud.width(); ++w)
      for (int e = 0; e < cloud.num_echoes(); ++e)
        if (cloud.valid(h, w, e)) has_valid = true;
  if (!has_valid) throw EmptySubset("cloud has no valid echoes to mask");
  for (;;) {
    bool any = false;
    for (int h = 0; h < cloud.height(); ++h)
      for (int w = 0; w < cloud.width(); ++w)
        for (int e = 0; e < cloud.num_echoes(); ++e) {
          if (!cloud.valid(h, w, e)) continue;
          const bool on = rng.bernoulli(rho);
          mask.at(h, w, e) = on ? 1 : 0;
          any = any || on;
        }
    if (any) return mask;
  }
}

namespace detail {

inline double ceil_meters(double r) { return std::max(1.0, std::ceil(r)); }

constexpr double kExpLo = 1e-6;
constexpr double kExpHi = 1e6;

inline double clamped_exp(double x, bool* clamped) {
  const double e = std::exp(x);
  if (e < kExpLo) {
    *clamped = true;
    return kExpLo;
  }
  if (e > kExpHi) {
    *clamped = true;
    return kExpHi;
  }
  *clamped = false;
  return e;
}

}  // namespace detail

// Per-point training objective, averaged over the masked subset:
//   lambda * |coo - r| / (ceil(r) * exp(cor))  +  cor  +  xi
// ceil(r) rounds the range up to whole meters (floor 1 m) and exp(cor) is
// clamped to [1e-6, 1e6]. Throws EmptySubset when the mask selects nothing.
inline double loss_value(const Grid3<double>& o_coo, const Grid3<double>& o_cor,
                         const MultiEchoOrderedCloud& cloud, const BlindSpotMask& mask,
                         const Grid3<double>& xi, double lambda) {
  if (!o_coo.same_shape(cloud.height(), cloud.width(), cloud.num_echoes()) ||
      !o_cor.same_shape(cloud.height(), cloud.width(), cloud.num_echoes()) ||
      !mask.same_shape(cloud.height(), cloud.width(), cloud.num_echoes()) ||
      !xi.same_shape(cloud.height(), cloud.width(), cloud.num_echoes()))
    throw ShapeError("loss inputs must share the cloud shape");
  double sum = 0.0;
  std::size_t n = 0;
  for (int h = 0; h < cloud.height(); ++h)
    for (int w = 0; w < cloud.width(); ++w)
      for (int e = 0; e < cloud.num_echoes(); ++e) {
        if (!mask.at(h, w, e) || !cloud.valid(h, w, e)) continue;
        const double r = cloud.range_of(h, w, e);
        bool clamped;
        const double ex = detail::clamped_exp(o_cor.at(h, w, e), &clamped);
        sum += lambda * std::fabs(o_coo.at(h, w, e) - r) / (detail::ceil_meters(r) * ex) +
               o_cor.at(h, w, e) + xi.at(h, w, e);
        ++n;
      }
  if (n == 0) throw EmptySubset("blind-spot mask selects no valid echo");
  return sum / static_cast<double>(n);
}

// Loss plus d(loss)/d(o_coo) and the direct part of d(loss)/d(o_cor); the
// CSR contribution to d(o_cor) is accumulated separately through
// csr_zscore_backward with coefficient 1/n.
struct LossGrads {
  double value = 0.0;
  std::size_t count = 0;
  Grid3<double> d_coo;
  Grid3<double> d_cor;
};

inline LossGrads loss_with_grads(const Grid3<double>& o_coo, const Grid3<double>& o_cor,
                                 const MultiEchoOrderedCloud& cloud, const BlindSpotMask& mask,
                                 const Grid3<double>& xi, double lambda) {
  LossGrads out;
  out.d_coo = Grid3<double>(cloud.height(), cloud.width(), cloud.num_echoes(), 0.0);
  out.d_cor = Grid3<double>(cloud.height(), cloud.width(), cloud.num_echoes(), 0.0);
  double sum = 0.0;
  std::size_t n = 0;
  for (int h = 0; h < cloud.height(); ++h)
    for (int w = 0; w < cloud.width(); ++w)
      for (int e = 0; e < cloud.num_echoes(); ++e) {
        if (!mask.at(h, w, e) || !cloud.valid(h, w, e)) continue;
        ++n;
        const double r = cloud.range_of(h, w, e);
        const double cm = detail::ceil_meters(r);
        bool clamped;
        const double ex = detail::clamped_exp(o_cor.at(h, w, e), &clamped);
        const double diff = o_coo.at(h, w, e) - r;
        const double err_term = lambda * std::fabs(diff) / (cm * ex);
        sum += err_term + o_cor.at(h, w, e) + xi.at(h, w, e);
        const double sgn = diff > 0.0 ? 1.0 : (diff < 0.0 ? -1.0 : 0.0);
        out.d_coo.at(h, w, e) = lambda * sgn / (cm * ex);
        out.d_cor.at(h, w, e) = (clamped ? 0.0 : -err_term) + 1.0;
      }
  if (n == 0) throw EmptySubset("blind-spot mask selects no valid echo");
  out.count = n;
  out.value = sum / static_cast<double>(n);
  const double inv = 1.0 / static_cast<double>(n);
  for (double& v : out.d_coo.values) v *= inv;
  for (double& v : out.d_cor.values) v *= inv;
  return out;
}

// Layout adapters between the network's echo-major planes and the cloud's
// (h, w, e) grids.
inline Grid3<double> planes_to_grid(const PlaneTensor& planes) {
  Grid3<double> grid(planes.height, planes.width, planes.channels, 0.0);
  for (int e = 0; e < planes.channels; ++e)
    for (int h = 0; h < planes.height; ++h)
      for (int w = 0; w < planes.width; ++w) grid.at(h, w, e) = planes.at(e, h, w);
  return grid;
}

inline PlaneTensor grid_to_planes(const Grid3<double>& grid) {
  PlaneTensor planes(grid.echoes, grid.height, grid.width);
  for (int e = 0; e < grid.echoes; ++e)
    for (int h = 0; h < grid.height; ++h)
      for (int w = 0; w < grid.width; ++w) planes.at(e, h, w) = grid.at(h, w, e);
  return planes;
}

struct EpochLog {
  int epoch = 0;        // 1-based
  double mean_loss = 0.0;
  double learning_rate = 0.0;
};

struct TrainResult {
  NetworkConfig net_cfg;
  EncoderConfig enc_cfg;
  ParameterStore coordinate;
  ParameterStore correlation;
  std::vector<EpochLog> log;
};

// Joint trainer for the coordinate and correlation learners. Per-scan
// neighbor features, characteristics and CSR selections are parameter-free,
// so they are computed once up front; only the blind-spot gather is redone
// per step because the mask resamples every scan visit.
class Trainer {
 public:
  Trainer(std::vector<MultiEchoOrderedCloud> dataset, const NetworkConfig& net_cfg,
          const TrainConfig& train_cfg, const EncoderConfig& enc_cfg, const CsrConfig& csr_cfg)
      : dataset_(std::move(dataset)),
        train_cfg_(train_cfg),
        enc_cfg_(enc_cfg),
        csr_cfg_(csr_cfg),
        coordinate_(derived_cfg(net_cfg, 0x636f6full)),
        correlation_(derived_cfg(net_cfg, 0x636f72ull)) {
    train_cfg_.check();
    enc_cfg_.check();
    csr_cfg_.check();
    if (dataset_.empty()) throw ConfigError("training dataset is empty");
    for (const auto& cloud : dataset_) {
      if (cloud.num_echoes() != coordinate_.config().num_echoes)
        throw ShapeError("cloud echo count differs from network config");
      ScanCache cache;
      cache.field = gather_neighbors(cloud, enc_cfg_);
      cache.features = encode_features(cloud, cache.field);
      const Grid3<double> nn = nearest_distance(cloud, cache.field, enc_cfg_);
      cache.csr_sel = select_characteristic_neighbors(characteristics_map(cloud, nn), csr_cfg_);
      caches_.push_back(std::move(cache));
    }
  }

  TrainResult run() {
    momentum_init();
    std::vector<EpochLog> log;
    double lr = train_cfg_.learning_rate;
    for (int epoch = 1; epoch <= train_cfg_.epochs; ++epoch) {
      double loss_sum = 0.0;
      for (std::size_t s = 0; s < dataset_.size(); ++s) {
        Rng rng(substream_seed(train_cfg_.seed, static_cast<std::uint64_t>(epoch), s));
        const BlindSpotMask mask = sample_blind_spot_mask(dataset_[s], train_cfg_.rho, rng);
        const double scan_loss = step(s, mask, lr);
        if (!std::isfinite(scan_loss))
          throw DivergenceError("loss became non-finite at epoch " + std::to_string(epoch));
        loss_sum += scan_loss;
      }
      log.push_back({epoch, loss_sum / static_cast<double>(dataset_.size()), lr});
      lr *= train_cfg_.lr_decay;
    }
    TrainResult result;
    result.net_cfg = coordinate_.config();
    result.enc_cfg = enc_cfg_;
    result.coordinate = coordinate_.params();
    result.correlation = correlation_.params();
    result.log = std::move(log);
    return result;
  }

  // Evaluates the full objective for one scan and, when lr > 0, applies one
  // SGD-with-momentum update.
  double step(std::size_t scan, const BlindSpotMask& mask, double lr) {
    const double loss = evaluate(scan, mask, lr > 0.0);
    if (lr > 0.0) {
      momentum_update(coordinate_, vel_coo_, lr);
      momentum_update(correlation_, vel_cor_, lr);
    }
    return loss;
  }

  // Loss only, no gradients, no update; used by finite-difference checks.
  double scan_loss(std::size_t scan, const BlindSpotMask& mask) {
    return evaluate(scan, mask, false);
  }

  // Loss with gradients accumulated in both parameter stores, no update.
  double scan_loss_with_grads(std::size_t scan, const BlindSpotMask& mask) {
    return evaluate(scan, mask, true);
  }

  Network& coordinate_net() { return coordinate_; }
  Network& correlation_net() { return correlation_; }

 private:
  struct ScanCache {
    NeighborField field;
    FeatureTensor features;
    CsrSelection csr_sel;
  };

  double evaluate(std::size_t scan, const BlindSpotMask& mask, bool want_grads) {
    const MultiEchoOrderedCloud& cloud = dataset_[scan];
    const ScanCache& cache = caches_[scan];

    const NeighborField masked_field = gather_neighbors(cloud, enc_cfg_, &mask);
    const FeatureTensor masked_features = encode_features(cloud, masked_field);

    Network::Cache coo_cache, cor_cache;
    const PlaneTensor coo_pre = coordinate_.forward(masked_features, &coo_cache);
    const PlaneTensor cor_out = correlation_.forward(cache.features, &cor_cache);

    Grid3<double> o_coo(cloud.height(), cloud.width(), cloud.num_echoes(), 0.0);
    for (int e = 0; e < cloud.num_echoes(); ++e)
      for (int h = 0; h < cloud.height(); ++h)
        for (int w = 0; w < cloud.width(); ++w)
          o_coo.at(h, w, e) = softplus(coo_pre.at(e, h, w));
    const Grid3<double> o_cor = planes_to_grid(cor_out);

    const Grid3<double> xi = csr_zscore(cache.csr_sel, o_cor, csr_cfg_);
    LossGrads lg = loss_with_grads(o_coo, o_cor, cloud, mask, xi, train_cfg_.lambda);
    if (!want_grads) return lg.value;

    // The mask doubles as the CSR query indicator: only masked (hence valid)
    // echoes contribute Xi terms to the objective.
    csr_zscore_backward(cache.csr_sel, o_cor, csr_cfg_, mask,
                        1.0 / static_cast<double>(lg.count), lg.d_cor);

    PlaneTensor d_coo_pre(cloud.num_echoes(), cloud.height(), cloud.width());
    for (int e = 0; e < cloud.num_echoes(); ++e)
      for (int h = 0; h < cloud.height(); ++h)
        for (int w = 0; w < cloud.width(); ++w)
          d_coo_pre.at(e, h, w) = lg.d_coo.at(h, w, e) * softplus_grad(coo_pre.at(e, h, w));
    const PlaneTensor d_cor = grid_to_planes(lg.d_cor);

    coordinate_.params().zero_grads();
    correlation_.params().zero_grads();
    coordinate_.backward(masked_features, coo_cache, d_coo_pre);
    correlation_.backward(cache.features, cor_cache, d_cor);
    return lg.value;
  }

  static NetworkConfig derived_cfg(NetworkConfig cfg, std::uint64_t salt) {
    cfg.param_seed = substream_seed(cfg.param_seed, salt);
    return cfg;
  }

  void momentum_init() {
    vel_coo_.clear();
    vel_cor_.clear();
    for (const auto& t : coordinate_.params().tensors) vel_coo_.emplace_back(t.size(), 0.0);
    for (const auto& t : correlation_.params().tensors) vel_cor_.emplace_back(t.size(), 0.0);
  }

  void momentum_update(Network& net, std::vector<std::vector<double>>& vel, double lr) {
    auto& tensors = net.params().tensors;
    for (std::size_t t = 0; t < tensors.size(); ++t) {
      auto& value = tensors[t].value;
      const auto& grad = tensors[t].grad;
      auto& v = vel[t];
      for (std::size_t i = 0; i < value.size(); ++i) {
        v[i] = train_cfg_.momentum * v[i] + grad[i];
        value[i] -= lr * v[i];
      }
    }
  }

  std::vector<MultiEchoOrderedCloud> dataset_;
  TrainConfig train_cfg_;
  EncoderConfig enc_cfg_;
  CsrConfig csr_cfg_;
  Network coordinate_;
  Network correlation_;
  std::vector<ScanCache> caches_;
  std::vector<std::vector<double>> vel_coo_;
  std::vector<std::vector<double>> vel_cor_;
};

inline TrainResult train(std::vector<MultiEchoOrderedCloud> dataset, const NetworkConfig& net_cfg,
                         const TrainConfig& train_cfg, const EncoderConfig& enc_cfg,
                         const CsrConfig& csr_cfg) {
  Trainer trainer(std::move(dataset), net_cfg, train_cfg, enc_cfg, csr_cfg);
  return trainer.run();
}

}  // namespace echopick
