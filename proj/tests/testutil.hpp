// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cmath>
#include <string>
#include <vector>

#include "echopick/projection.hpp"
#include "echopick/rng.hpp"
#include "echopick/types.hpp"

namespace echopick::test {

// Random invariant-satisfying cloud: every occupied cell carries a point
// roughly along its nominal beam direction, echo 1 (when present) is a
// farther return with lower intensity.
inline MultiEchoOrderedCloud random_cloud(std::uint64_t seed, int height = 16, int width = 64,
                                          int echoes = 2, double occupancy = 0.8,
                                          double second_echo_rate = 0.4) {
  Rng rng(seed);
  ProjectionConfig grid;
  grid.height = height;
  grid.width = width;
  CloudBuilder builder(height, width, echoes);
  for (int h = 0; h < height; ++h)
    for (int w = 0; w < width; ++w) {
      const double theta = grid.center_theta(w);
      const double phi = grid.center_phi(h);
      builder.set_angles(h, w, static_cast<float>(theta), static_cast<float>(phi));
      if (!rng.bernoulli(occupancy)) continue;
      const double dx = std::cos(phi) * std::cos(theta);
      const double dy = std::cos(phi) * std::sin(theta);
      const double dz = std::sin(phi);
      const double r0 = rng.uniform(2.0, 30.0);
      PointRecord rec;
      rec.x = static_cast<float>(r0 * dx);
      rec.y = static_cast<float>(r0 * dy);
      rec.z = static_cast<float>(r0 * dz);
      rec.intensity_raw = static_cast<float>(rng.uniform(0.2, 1.0));
      rec.valid = true;
      builder.set_record(h, w, 0, rec);
      if (echoes > 1 && rng.bernoulli(second_echo_rate)) {
        const double r1 = r0 + rng.uniform(0.5, 8.0);
        PointRecord alt;
        alt.x = static_cast<float>(r1 * dx);
        alt.y = static_cast<float>(r1 * dy);
        alt.z = static_cast<float>(r1 * dz);
        alt.intensity_raw = static_cast<float>(rec.intensity_raw * rng.uniform(0.1, 0.999));
        alt.valid = true;
        builder.set_record(h, w, 1, alt);
      }
    }
  return builder.build();
}

// Single-cell-per-point colinear cloud along +x, one row. Ranges given per
// column; zero range leaves the cell empty.
inline MultiEchoOrderedCloud colinear_cloud(const std::vector<double>& ranges) {
  CloudBuilder builder(1, static_cast<int>(ranges.size()), 1);
  for (std::size_t w = 0; w < ranges.size(); ++w) {
    builder.set_angles(0, static_cast<int>(w), 0.0f, 0.0f);
    if (ranges[w] <= 0.0) continue;
    PointRecord rec;
    rec.x = static_cast<float>(ranges[w]);
    rec.intensity_raw = 0.5f;
    rec.valid = true;
    builder.set_record(0, static_cast<int>(w), 0, rec);
  }
  return builder.build();
}

inline std::string temp_dir(const std::string& name) {
  const std::string path = std::string("/tmp/echopick_test_") + name;
  std::string cmd = "rm -rf " + path + " && mkdir -p " + path;
  if (std::system(cmd.c_str()) != 0) throw std::runtime_error("temp dir setup failed");
  return path;
}

}  // namespace echopick::test
