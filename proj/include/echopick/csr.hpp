// echopick - multi-echo LiDAR denoising toolkit
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <vector>

#include "echopick/errors.hpp"
#include "echopick/types.hpp"

namespace echopick {

// Per-echo characteristics used by the similarity regularizer:
//   intensity_m2 = intensity_raw * range^2   (range-compensated reflectance)
//   sparsity     = nearest-neighbor distance / range
// Entries are defined only where the cloud is valid.
struct CharacteristicsMap {
  Grid3<double> intensity_m2;
  Grid3<double> sparsity;
  Grid3<std::uint8_t> valid;
};

struct CsrConfig {
  int k_csr = 9;
  double eps = 1e-6;      // stabilizer added to the neighborhood std deviation
  double clamp = 1e3;     // upper bound on the penalty

  void check() const {
    if (k_csr < 2) throw ConfigError("k_csr must be >= 2");
    if (!(eps > 0.0)) throw ConfigError("csr eps must be > 0");
    if (!(clamp > 0.0)) throw ConfigError("csr clamp must be > 0");
  }
};

inline CharacteristicsMap characteristics_map(const MultiEchoOrderedCloud& cloud,
                                              const Grid3<double>& nn_dist) {
  if (!nn_dist.same_shape(cloud.height(), cloud.width(), cloud.num_echoes()))
    throw ShapeError("nearest-distance grid shape differs from cloud");
  CharacteristicsMap map;
  map.intensity_m2 = Grid3<double>(cloud.height(), cloud.width(), cloud.num_echoes(), 0.0);
  map.sparsity = Grid3<double>(cloud.height(), cloud.width(), cloud.num_echoes(), 0.0);
  map.valid = Grid3<std::uint8_t>(cloud.height(), cloud.width(), cloud.num_echoes(), 0);
  for (int h = 0; h < cloud.height(); ++h)
    for (int w = 0; w < cloud.width(); ++w)
      for (int e = 0; e < cloud.num_echoes(); ++e) {
        if (!cloud.valid(h, w, e)) continue;
        const double r = cloud.range_of(h, w, e);
        if (!(r > 0.0)) throw DegenerateRange("valid echo with zero range");
        map.intensity_m2.at(h, w, e) = static_cast<double>(cloud.at(h, w, e).intensity_raw) * r * r;
        map.sparsity.at(h, w, e) = nn_dist.at(h, w, e) / r;
        map.valid.at(h, w, e) = 1;
      }
  return map;
}

// Frozen characteristic-space neighbor selection plus the flat index
// bookkeeping shared by the penalty and its gradient.
struct CsrSelection {
  int height = 0, width = 0, echoes = 0, k = 0;
  std::vector<std::size_t> queries;     // flat (h,w,e) indices of valid echoes
  std::vector<std::size_t> neighbors;   // queries.size() * k flat indices
  bool active = false;                  // false when too few valid echoes
};

// Picks, for every valid echo, the k_csr nearest other valid echoes in the
// per-channel standardized (intensity, sparsity) plane. Standardizing each
// channel over the scan (population statistics) makes the selection
// invariant to a positive rescale of either channel. Distance ties break on
// flat cell index.
inline CsrSelection select_characteristic_neighbors(const CharacteristicsMap& map,
                                                    const CsrConfig& cfg) {
  cfg.check();
  CsrSelection sel;
  sel.height = map.valid.height;
  sel.width = map.valid.width;
  sel.echoes = map.valid.echoes;
  sel.k = cfg.k_csr;

  for (std::size_t i = 0; i < map.valid.values.size(); ++i)
    if (map.valid.values[i]) sel.queries.push_back(i);
  const std::size_t n = sel.queries.size();
  if (n < static_cast<std::size_t>(cfg.k_csr) + 1) return sel;  // penalty defined as all-zero
  sel.active = true;

  // Standardize both channels over the scan's valid echoes.
  std::vector<double> ci(n), cs(n);
  double mi = 0.0, ms = 0.0;
  for (std::size_t q = 0; q < n; ++q) {
    ci[q] = map.intensity_m2.values[sel.queries[q]];
    cs[q] = map.sparsity.values[sel.queries[q]];
    mi += ci[q];
    ms += cs[q];
  }
  mi /= static_cast<double>(n);
  ms /= static_cast<double>(n);
  double vi = 0.0, vs = 0.0;
  for (std::size_t q = 0; q < n; ++q) {
    vi += (ci[q] - mi) * (ci[q] - mi);
    vs += (cs[q] - ms) * (cs[q] - ms);
  }
  const double si = std::sqrt(vi / static_cast<double>(n));
  const double ss = std::sqrt(vs / static_cast<double>(n));
  for (std::size_t q = 0; q < n; ++q) {
    ci[q] = si > 0.0 ? (ci[q] - mi) / si : 0.0;
    cs[q] = ss > 0.0 ? (cs[q] - ms) / ss : 0.0;
  }

  sel.neighbors.resize(n * cfg.k_csr);
  struct Entry {
    double d2;
    std::size_t flat;
  };
  std::vector<Entry> order(n - 1);
  for (std::size_t q = 0; q < n; ++q) {
    std::size_t m = 0;
    for (std::size_t j = 0; j < n; ++j) {
      if (j == q) continue;
      const double di = ci[j] - ci[q];
      const double ds = cs[j] - cs[q];
      order[m++] = {di * di + ds * ds, sel.queries[j]};
    }
    auto cmp = [](const Entry& a, const Entry& b) {
      if (a.d2 != b.d2) return a.d2 < b.d2;
      return a.flat < b.flat;
    };
    std::nth_element(order.begin(), order.begin() + cfg.k_csr, order.end(), cmp);
    std::sort(order.begin(), order.begin() + cfg.k_csr, cmp);
    for (int j = 0; j < cfg.k_csr; ++j)
      sel.neighbors[q * cfg.k_csr + j] = order[j].flat;
  }
  return sel;
}

// Z-score penalty over a frozen selection: per query q with neighbor scores
// Phi, Xi_q = |score_q - mean(Phi)| / (popstd(Phi) + eps), clamped from
// above. Queries outside the selection keep Xi = 0.
inline Grid3<double> csr_zscore(const CsrSelection& sel, const Grid3<double>& scores,
                                const CsrConfig& cfg) {
  cfg.check();
  if (!scores.same_shape(sel.height, sel.width, sel.echoes))
    throw ShapeError("score grid shape differs from selection");
  Grid3<double> penalty(sel.height, sel.width, sel.echoes, 0.0);
  if (!sel.active) return penalty;
  const double inv_k = 1.0 / static_cast<double>(sel.k);
  for (std::size_t q = 0; q < sel.queries.size(); ++q) {
    double mean = 0.0;
    for (int j = 0; j < sel.k; ++j) mean += scores.values[sel.neighbors[q * sel.k + j]];
    mean *= inv_k;
    double var = 0.0;
    for (int j = 0; j < sel.k; ++j) {
      const double d = scores.values[sel.neighbors[q * sel.k + j]] - mean;
      var += d * d;
    }
    const double sd = std::sqrt(var * inv_k);
    const double xi = std::fabs(scores.values[sel.queries[q]] - mean) / (sd + cfg.eps);
    penalty.values[sel.queries[q]] = std::min(xi, cfg.clamp);
  }
  return penalty;
}

// One-call form: builds the selection and evaluates the penalty.
inline Grid3<double> csr_penalty(const CharacteristicsMap& map, const Grid3<double>& scores,
                                 const CsrConfig& cfg) {
  return csr_zscore(select_characteristic_neighbors(map, cfg), scores, cfg);
}

// Accumulates d(sum Xi)/d(scores) for the subset of queries marked in
// `count_query`, scaled by coeff. Gradients flow through the query score and
// the neighborhood mean / std but not through the frozen selection; clamped
// queries contribute zero.
inline void csr_zscore_backward(const CsrSelection& sel, const Grid3<double>& scores,
                                const CsrConfig& cfg, const Grid3<std::uint8_t>& count_query,
                                double coeff, Grid3<double>& grad) {
  if (!sel.active) return;
  if (!grad.same_shape(sel.height, sel.width, sel.echoes))
    throw ShapeError("gradient grid shape differs from selection");
  const double inv_k = 1.0 / static_cast<double>(sel.k);
  for (std::size_t q = 0; q < sel.queries.size(); ++q) {
    const std::size_t qflat = sel.queries[q];
    if (!count_query.values[qflat]) continue;
    double mean = 0.0;
    for (int j = 0; j < sel.k; ++j) mean += scores.values[sel.neighbors[q * sel.k + j]];
    mean *= inv_k;
    double var = 0.0;
    for (int j = 0; j < sel.k; ++j) {
      const double d = scores.values[sel.neighbors[q * sel.k + j]] - mean;
      var += d * d;
    }
    const double sd = std::sqrt(var * inv_k);
    const double denom = sd + cfg.eps;
    const double diff = scores.values[qflat] - mean;
    const double xi = std::fabs(diff) / denom;
    if (xi >= cfg.clamp) continue;  // flat region of the clamp
    const double sgn = diff > 0.0 ? 1.0 : (diff < 0.0 ? -1.0 : 0.0);
    grad.values[qflat] += coeff * sgn / denom;
    for (int j = 0; j < sel.k; ++j) {
      const std::size_t nflat = sel.neighbors[q * sel.k + j];
      double g = -sgn * inv_k / denom;
      if (sd > 0.0) {
        const double dsd = (scores.values[nflat] - mean) * inv_k / sd;
        g -= std::fabs(diff) * dsd / (denom * denom);
      }
      grad.values[nflat] += coeff * g;
    }
  }
}

}  // namespace echopick
