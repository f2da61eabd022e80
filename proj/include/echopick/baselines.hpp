// echopick - multi-echo LiDAR denoising toolkit
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cmath>
#include <cstdint>

#include "echopick/errors.hpp"
#include "echopick/inference.hpp"
#include "echopick/types.hpp"

namespace echopick {

// Dynamic radius outlier removal. A strongest-echo point is noise when fewer
// than min_neighbors other strongest-echo points fall within the dynamic
// radius SR = max(sr_min, beta * alpha * range), searched over a grid
// window. alpha = 0 derives the horizontal angular resolution 2*pi/W from
// the cloud.
struct DrorConfig {
  double alpha = 0.0;       // radians; 0 = derive from grid width
  double beta = 3.0;
  int min_neighbors = 3;
  int window_rows = 9;
  int window_cols = 9;
  double sr_min = 0.04;     // meters

  void check() const {
    if (alpha < 0.0) throw ConfigError("alpha must be >= 0");
    if (!(beta > 0.0)) throw ConfigError("beta must be > 0");
    if (min_neighbors < 1) throw ConfigError("min_neighbors must be >= 1");
    if (window_rows < 1 || window_cols < 1 || window_rows % 2 == 0 || window_cols % 2 == 0)
      throw ConfigError("window extents must be odd and >= 1");
    if (sr_min < 0.0) throw ConfigError("sr_min must be >= 0");
  }
};

struct LiorConfig {
  double intensity_threshold = 10.0;  // range-normalized intensity units (m^2)
  double ror_radius = 0.6;            // meters
  int ror_min_neighbors = 3;
  int window_rows = 9;
  int window_cols = 9;

  void check() const {
    if (!(intensity_threshold > 0.0)) throw ConfigError("intensity_threshold must be > 0");
    if (!(ror_radius > 0.0)) throw ConfigError("ror_radius must be > 0");
    if (ror_min_neighbors < 1) throw ConfigError("ror_min_neighbors must be >= 1");
    if (window_rows < 1 || window_cols < 1 || window_rows % 2 == 0 || window_cols % 2 == 0)
      throw ConfigError("window extents must be odd and >= 1");
  }
};

namespace detail {

// Counts valid strongest-echo points within `radius` of `query`, searched in
// the window around (h, w); the record at (skip_h, skip_w) echo 0 is
// excluded (pass -1 to keep everything).
inline int count_strongest_within(const MultiEchoOrderedCloud& cloud, const PointRecord& query,
                                  int h, int w, int window_rows, int window_cols, double radius,
                                  int skip_h, int skip_w) {
  const int rr = window_rows / 2;
  const int rc = window_cols / 2;
  const int H = cloud.height();
  const int W = cloud.width();
  int count = 0;
  for (int dr = -rr; dr <= rr; ++dr) {
    const int ch = h + dr;
    if (ch < 0 || ch >= H) continue;
    for (int dc = -rc; dc <= rc; ++dc) {
      int cw = (w + dc) % W;
      if (cw < 0) cw += W;
      if (ch == skip_h && cw == skip_w) continue;
      if (!cloud.valid(ch, cw, 0)) continue;
      if (euclid(query, cloud.at(ch, cw, 0)) < radius) ++count;
    }
  }
  return count;
}

}  // namespace detail

// true = noise, per strongest-echo point; invalid cells stay false.
inline Grid3<std::uint8_t> dror(const MultiEchoOrderedCloud& cloud, const DrorConfig& cfg) {
  cfg.check();
  const double alpha = cfg.alpha > 0.0 ? cfg.alpha : 2.0 * M_PI / cloud.width();
  Grid3<std::uint8_t> noise(cloud.height(), cloud.width(), 1, 0);
  for (int h = 0; h < cloud.height(); ++h)
    for (int w = 0; w < cloud.width(); ++w) {
      if (!cloud.valid(h, w, 0)) continue;
      const PointRecord& p = cloud.at(h, w, 0);
      const double sr = std::max(cfg.sr_min, cfg.beta * alpha * p.range());
      const int count = detail::count_strongest_within(cloud, p, h, w, cfg.window_rows,
                                                       cfg.window_cols, sr, h, w);
      noise.at(h, w, 0) = count < cfg.min_neighbors ? 1 : 0;
    }
  return noise;
}

// Low-intensity outlier removal: a point is noise only when its
// range-normalized intensity falls below the threshold AND the fixed-radius
// neighbor count marks it an outlier. Bright points pass regardless of
// isolation.
inline Grid3<std::uint8_t> lior(const MultiEchoOrderedCloud& cloud, const LiorConfig& cfg) {
  cfg.check();
  Grid3<std::uint8_t> noise(cloud.height(), cloud.width(), 1, 0);
  for (int h = 0; h < cloud.height(); ++h)
    for (int w = 0; w < cloud.width(); ++w) {
      if (!cloud.valid(h, w, 0)) continue;
      const PointRecord& p = cloud.at(h, w, 0);
      const double r = p.range();
      const double intensity_norm = static_cast<double>(p.intensity_raw) * r * r;
      if (intensity_norm >= cfg.intensity_threshold) continue;
      const int count = detail::count_strongest_within(cloud, p, h, w, cfg.window_rows,
                                                       cfg.window_cols, cfg.ror_radius, h, w);
      noise.at(h, w, 0) = count < cfg.ror_min_neighbors ? 1 : 0;
    }
  return noise;
}

// Multi-echo DROR: every echo is scored against the strongest-echo cloud
// with the dynamic radius of its own range, giving a binary
// inlier/outlier score per echo, and the echo group is then classified with
// the usual VS/PS/DI rules (T = inlier, B = lowest inlier echo index, D =
// range gap to the strongest beyond min_substitute_gap).
inline Grid3<EchoClass> medror(const MultiEchoOrderedCloud& cloud, const DrorConfig& cfg,
                               double min_substitute_gap) {
  cfg.check();
  if (!(min_substitute_gap > 0.0)) throw ConfigError("min_substitute_gap must be > 0");
  const double alpha = cfg.alpha > 0.0 ? cfg.alpha : 2.0 * M_PI / cloud.width();
  Grid3<EchoClass> classes(cloud.height(), cloud.width(), cloud.num_echoes(), EchoClass::DI);
  for (int h = 0; h < cloud.height(); ++h)
    for (int w = 0; w < cloud.width(); ++w) {
      if (!cloud.valid(h, w, 0)) continue;
      auto inlier = [&](int e) {
        const PointRecord& p = cloud.at(h, w, e);
        const double sr = std::max(cfg.sr_min, cfg.beta * alpha * p.range());
        // Echo 0 is itself part of the reference cloud and must not count
        // itself; alternative echoes are not in the reference.
        const int skip = e == 0 ? h : -1;
        const int count = detail::count_strongest_within(cloud, p, h, w, cfg.window_rows,
                                                         cfg.window_cols, sr, skip,
                                                         e == 0 ? w : -1);
        return count >= cfg.min_neighbors;
      };
      if (inlier(0)) {
        classes.at(h, w, 0) = EchoClass::VS;
        continue;
      }
      const double r0 = cloud.range_of(h, w, 0);
      for (int e = 1; e < cloud.num_echoes(); ++e) {
        if (!cloud.valid(h, w, e)) continue;
        if (!(std::fabs(cloud.range_of(h, w, e) - r0) > min_substitute_gap)) continue;
        if (inlier(e)) {
          classes.at(h, w, e) = EchoClass::PS;
          break;  // binary scores tie; the lowest echo index wins
        }
      }
    }
  return classes;
}

}  // namespace echopick
