// echopick - multi-echo LiDAR denoising toolkit
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <vector>

#include "echopick/errors.hpp"
#include "echopick/types.hpp"

namespace echopick {

enum class NeighborMode : std::uint8_t { kKnn = 0, kGridNeighbors = 1 };

// Window-bounded neighbor search configuration. Every echo query gathers up
// to k valid strongest-echo points from a window of grid cells centered on
// the query: columns wrap around the azimuth seam, rows outside the grid are
// dropped. In knn mode candidates beyond cutoff_radius (3D Euclidean meters)
// are excluded and the k nearest survive; grid_neighbors mode instead takes
// the window cells in raster order, ignoring 3D distance (ablation
// semantics).
struct EncoderConfig {
  int k = 5;
  double cutoff_radius = 2.0;  // meters
  int window_rows = 9;
  int window_cols = 9;
  NeighborMode mode = NeighborMode::kKnn;

  void check() const {
    if (k < 1) throw ConfigError("k must be >= 1");
    if (!(cutoff_radius > 0.0)) throw ConfigError("cutoff_radius must be > 0");
    if (window_rows < 1 || window_cols < 1 || window_rows % 2 == 0 || window_cols % 2 == 0)
      throw ConfigError("window extents must be odd and >= 1");
  }
};

struct NeighborSlot {
  std::int32_t cell = -1;   // flat h*W + w index into the strongest echo plane
  double dist = 0.0;        // 3D Euclidean distance query -> neighbor
  double nb_range = 0.0;    // neighbor range, meters
  double d_theta = 0.0;     // query theta - neighbor theta, wrapped to (-pi, pi]
  double d_phi = 0.0;       // query phi - neighbor phi
  bool present = false;
  bool self_match = false;  // the slot is the query's own strongest-echo record
};

// Per-query neighbor slots for every cell-echo of a cloud. Slot storage is
// (h, w, e)-major, then neighbor rank.
struct NeighborField {
  int height = 0;
  int width = 0;
  int echoes = 0;
  int k = 0;
  std::vector<NeighborSlot> slots;

  NeighborField() = default;
  NeighborField(int h, int w, int e, int k_)
      : height(h), width(w), echoes(e), k(k_),
        slots(static_cast<std::size_t>(h) * w * e * k_) {}

  std::size_t base(int h, int w, int e) const {
    return ((static_cast<std::size_t>(h) * width + w) * echoes + e) * k;
  }
  const NeighborSlot& slot(int h, int w, int e, int j) const { return slots[base(h, w, e) + j]; }
  NeighborSlot& slot(int h, int w, int e, int j) { return slots[base(h, w, e) + j]; }
};

// Encoded per-cell feature block consumed by the networks. Layout within a
// cell is echo-major, then neighbor rank, then (neighbor range, d_theta,
// d_phi); absent slots hold zeros with a cleared presence flag.
struct FeatureTensor {
  int height = 0;
  int width = 0;
  int echoes = 0;
  int k = 0;
  std::vector<double> values;        // (h*W + w) * dim() + offset
  std::vector<std::uint8_t> present; // (h*W + w) * echoes * k + e*k + j

  FeatureTensor() = default;
  FeatureTensor(int h, int w, int e, int k_)
      : height(h), width(w), echoes(e), k(k_),
        values(static_cast<std::size_t>(h) * w * e * k_ * 3, 0.0),
        present(static_cast<std::size_t>(h) * w * e * k_, 0) {}

  int dim() const { return echoes * k * 3; }
  std::size_t cell_base(int h, int w) const {
    return (static_cast<std::size_t>(h) * width + w) * dim();
  }
  std::size_t value_index(int h, int w, int e, int j, int c) const {
    return cell_base(h, w) + (static_cast<std::size_t>(e) * k + j) * 3 + c;
  }
  std::size_t present_index(int h, int w, int e, int j) const {
    return (static_cast<std::size_t>(h) * width + w) * echoes * k +
           static_cast<std::size_t>(e) * k + j;
  }
};

namespace detail {

struct Candidate {
  double dist;
  int h;
  int w;

  // Distance ties break on (row, col) so results are reproducible and match
  // the brute-force oracle ordering.
  bool operator<(const Candidate& o) const {
    if (dist != o.dist) return dist < o.dist;
    if (h != o.h) return h < o.h;
    return w < o.w;
  }
};

inline double euclid(const PointRecord& a, const PointRecord& b) {
  const double dx = static_cast<double>(a.x) - b.x;
  const double dy = static_cast<double>(a.y) - b.y;
  const double dz = static_cast<double>(a.z) - b.z;
  return std::sqrt(dx * dx + dy * dy + dz * dz);
}

// Fills one query's slots from a sorted candidate list.
inline void fill_slots(NeighborField& field, const MultiEchoOrderedCloud& cloud, int h, int w,
                       int e, const std::vector<Candidate>& picked) {
  const double q_theta = cloud.theta(h, w);
  const double q_phi = cloud.phi(h, w);
  for (std::size_t j = 0; j < picked.size(); ++j) {
    NeighborSlot& s = field.slot(h, w, e, static_cast<int>(j));
    const Candidate& c = picked[j];
    s.cell = static_cast<std::int32_t>(c.h * cloud.width() + c.w);
    s.dist = c.dist;
    s.nb_range = cloud.range_of(c.h, c.w, 0);
    s.d_theta = wrap_angle(q_theta - cloud.theta(c.h, c.w));
    s.d_phi = q_phi - cloud.phi(c.h, c.w);
    s.present = true;
    s.self_match = (e == 0 && c.h == h && c.w == w);
  }
}

}  // namespace detail

// Gathers, for every valid echo query, its neighbor slots from the strongest
// echo plane. Invalid queries get all-absent slots. exclude, when non-null,
// removes the flagged strongest-echo records from the candidate pool (used
// by blind-spot training); excluded queries then rank candidates purely by
// angular offset from the query's cell so the hidden record cannot steer its
// own neighbor selection.
inline NeighborField gather_neighbors(const MultiEchoOrderedCloud& cloud, const EncoderConfig& cfg,
                                      const Grid3<std::uint8_t>* exclude = nullptr) {
  cfg.check();
  if (exclude && !exclude->same_shape(cloud.height(), cloud.width(), cloud.num_echoes()))
    throw ShapeError("exclusion mask shape differs from cloud");

  const int H = cloud.height();
  const int W = cloud.width();
  const int Ne = cloud.num_echoes();
  const int rr = cfg.window_rows / 2;
  const int rc = cfg.window_cols / 2;

  NeighborField field(H, W, Ne, cfg.k);
  std::vector<detail::Candidate> candidates;
  candidates.reserve(static_cast<std::size_t>(cfg.window_rows) * cfg.window_cols);

  auto candidate_available = [&](int ch, int cw) {
    if (!cloud.valid(ch, cw, 0)) return false;
    if (exclude && exclude->at(ch, cw, 0)) return false;
    return true;
  };

  for (int h = 0; h < H; ++h) {
    for (int w = 0; w < W; ++w) {
      for (int e = 0; e < Ne; ++e) {
        if (!cloud.valid(h, w, e)) continue;
        const PointRecord& query = cloud.at(h, w, e);
        const bool query_hidden = exclude && exclude->at(h, w, e);

        candidates.clear();
        if (cfg.mode == NeighborMode::kGridNeighbors && !query_hidden) {
          // Raster order over the window, no distance filtering.
          for (int dr = -rr; dr <= rr; ++dr) {
            const int ch = h + dr;
            if (ch < 0 || ch >= H) continue;
            for (int dc = -rc; dc <= rc; ++dc) {
              int cw = (w + dc) % W;
              if (cw < 0) cw += W;
              if (!candidate_available(ch, cw)) continue;
              if (static_cast<int>(candidates.size()) >= cfg.k) break;
              candidates.push_back({detail::euclid(query, cloud.at(ch, cw, 0)), ch, cw});
            }
            if (static_cast<int>(candidates.size()) >= cfg.k) break;
          }
        } else {
          for (int dr = -rr; dr <= rr; ++dr) {
            const int ch = h + dr;
            if (ch < 0 || ch >= H) continue;
            for (int dc = -rc; dc <= rc; ++dc) {
              int cw = (w + dc) % W;
              if (cw < 0) cw += W;
              if (!candidate_available(ch, cw)) continue;
              double d;
              if (query_hidden) {
                const double dt = wrap_angle(static_cast<double>(cloud.theta(h, w)) -
                                             cloud.theta(ch, cw));
                const double dp = static_cast<double>(cloud.phi(h, w)) - cloud.phi(ch, cw);
                d = std::sqrt(dt * dt + dp * dp);
              } else {
                d = detail::euclid(query, cloud.at(ch, cw, 0));
                if (!(d < cfg.cutoff_radius)) continue;
              }
              candidates.push_back({d, ch, cw});
            }
          }
          if (static_cast<int>(candidates.size()) > cfg.k) {
            std::nth_element(candidates.begin(), candidates.begin() + cfg.k, candidates.end());
            candidates.resize(cfg.k);
          }
          std::sort(candidates.begin(), candidates.end());
        }
        detail::fill_slots(field, cloud, h, w, e, candidates);
      }
    }
  }
  return field;
}

// Lays the neighbor slots out as the dense feature tensor of the trainable
// encoder: per present slot (neighbor range, theta_query - theta_neighbor,
// phi_query - phi_neighbor).
inline FeatureTensor encode_features(const MultiEchoOrderedCloud& cloud,
                                     const NeighborField& field) {
  if (field.height != cloud.height() || field.width != cloud.width() ||
      field.echoes != cloud.num_echoes())
    throw ShapeError("neighbor field shape differs from cloud");
  FeatureTensor features(field.height, field.width, field.echoes, field.k);
  for (int h = 0; h < field.height; ++h)
    for (int w = 0; w < field.width; ++w)
      for (int e = 0; e < field.echoes; ++e)
        for (int j = 0; j < field.k; ++j) {
          const NeighborSlot& s = field.slot(h, w, e, j);
          if (!s.present) continue;
          features.values[features.value_index(h, w, e, j, 0)] = s.nb_range;
          features.values[features.value_index(h, w, e, j, 1)] = s.d_theta;
          features.values[features.value_index(h, w, e, j, 2)] = s.d_phi;
          features.present[features.present_index(h, w, e, j)] = 1;
        }
  return features;
}

// Distance to the nearest non-self neighbor per query; cutoff_radius stands
// in when a query has no such neighbor. Invalid queries report 0.
inline Grid3<double> nearest_distance(const MultiEchoOrderedCloud& cloud,
                                      const NeighborField& field, const EncoderConfig& cfg) {
  if (field.height != cloud.height() || field.width != cloud.width() ||
      field.echoes != cloud.num_echoes())
    throw ShapeError("neighbor field shape differs from cloud");
  Grid3<double> out(field.height, field.width, field.echoes, 0.0);
  for (int h = 0; h < field.height; ++h)
    for (int w = 0; w < field.width; ++w)
      for (int e = 0; e < field.echoes; ++e) {
        if (!cloud.valid(h, w, e)) continue;
        double best = std::numeric_limits<double>::infinity();
        for (int j = 0; j < field.k; ++j) {
          const NeighborSlot& s = field.slot(h, w, e, j);
          if (!s.present || s.self_match) continue;
          best = std::min(best, s.dist);
        }
        out.at(h, w, e) = std::isfinite(best) ? best : cfg.cutoff_radius;
      }
  return out;
}

}  // namespace echopick
