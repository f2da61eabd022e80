// echopick - multi-echo LiDAR denoising toolkit
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <limits>
#include <map>
#include <optional>
#include <vector>

#include "echopick/errors.hpp"
#include "echopick/types.hpp"

namespace echopick {

enum class EchoKind : std::uint8_t { kStrongest = 0, kSecondStrongest = 1, kLast = 2 };

struct RawEcho {
  float x = 0.0f;
  float y = 0.0f;
  float z = 0.0f;
  float intensity_raw = 0.0f;
  std::int64_t pulse_id = 0;
  EchoKind kind = EchoKind::kStrongest;

  double range() const {
    return std::sqrt(static_cast<double>(x) * x + static_cast<double>(y) * y +
                     static_cast<double>(z) * z);
  }
};

using RawEchoList = std::vector<RawEcho>;

struct ProjectionConfig {
  int height = 16;
  int width = 128;
  double fov_up = 10.0 * M_PI / 180.0;    // radians
  double fov_down = -20.0 * M_PI / 180.0; // radians

  void check() const {
    if (height < 1 || width < 1) throw ConfigError("projection grid must be >= 1x1");
    if (!(fov_up > fov_down)) throw ConfigError("fov_up must exceed fov_down");
  }

  // Grid mapping. theta in (-pi, pi], phi in radians.
  int row_of(double phi) const {
    const double t = 1.0 - (phi - fov_down) / (fov_up - fov_down);
    int h = static_cast<int>(std::floor(t * height));
    return std::clamp(h, 0, height - 1);
  }
  int col_of(double theta) const {
    int w = static_cast<int>(std::floor((1.0 - theta / M_PI) * 0.5 * width));
    w %= width;
    if (w < 0) w += width;
    return w;
  }

  // Nominal beam angles at a cell center; used for unoccupied cells and for
  // synthetic beam casting.
  double center_theta(int w) const {
    return M_PI * (1.0 - 2.0 * (w + 0.5) / width);
  }
  double center_phi(int h) const {
    return fov_down + (1.0 - (h + 0.5) / height) * (fov_up - fov_down);
  }
};

// Builds the 2-slot echo group of a pulse from the sensor's strongest /
// second strongest / last returns. The last echo backs slot 1 unless it is
// coordinate-identical to the strongest (within tol meters per axis), in
// which case the second strongest substitutes. No distinct alternative
// leaves slot 1 empty.
inline std::array<std::optional<RawEcho>, 2> assemble_2p5(
    const RawEcho& strongest, const std::optional<RawEcho>& second,
    const std::optional<RawEcho>& last, double tol = 1e-6) {
  auto same_coords = [tol](const RawEcho& a, const RawEcho& b) {
    return std::fabs(static_cast<double>(a.x) - b.x) <= tol &&
           std::fabs(static_cast<double>(a.y) - b.y) <= tol &&
           std::fabs(static_cast<double>(a.z) - b.z) <= tol;
  };
  std::array<std::optional<RawEcho>, 2> group;
  group[0] = strongest;
  if (last && !same_coords(*last, strongest)) {
    group[1] = *last;
  } else if (second && !same_coords(*second, strongest)) {
    group[1] = *second;
  }
  return group;
}

// Spherical projection of an unordered multi-echo point list onto the
// ordered grid. Echo groups are keyed by pulse_id; a group's cell comes from
// its strongest echo's direction, and slots are filled by descending
// intensity (ties keep the lower echo-kind rank). Distinct pulses colliding
// in one cell resolve to the pulse with the smaller strongest-echo range.
//
// num_echoes 0 sizes the echo dimension from the largest group.
inline MultiEchoOrderedCloud project(const RawEchoList& points, const ProjectionConfig& cfg,
                                     int num_echoes = 0) {
  cfg.check();
  if (num_echoes < 0) throw ConfigError("num_echoes must be >= 0");

  std::map<std::int64_t, std::vector<RawEcho>> pulses;
  for (const RawEcho& p : points) {
    if (!std::isfinite(p.x) || !std::isfinite(p.y) || !std::isfinite(p.z))
      throw InvariantError("non-finite coordinates in raw echo list");
    if (!(p.range() > 0.0)) throw InvariantError("raw echo with zero range");
    auto& group = pulses[p.pulse_id];
    for (const RawEcho& q : group)
      if (q.kind == p.kind)
        throw InvariantError("duplicate echo kind within pulse " + std::to_string(p.pulse_id));
    group.push_back(p);
  }

  int slots = num_echoes;
  if (slots == 0) {
    slots = 1;
    for (const auto& [id, group] : pulses)
      slots = std::max(slots, static_cast<int>(group.size()));
  }

  CloudBuilder builder(cfg.height, cfg.width, slots);
  for (int h = 0; h < cfg.height; ++h)
    for (int w = 0; w < cfg.width; ++w)
      builder.set_angles(h, w, static_cast<float>(cfg.center_theta(w)),
                         static_cast<float>(cfg.center_phi(h)));

  // Winner per cell for the nearer-pulse collision rule. std::map iteration
  // visits pulses in ascending pulse_id, which makes tie handling (first
  // placed wins) deterministic.
  std::vector<double> winner_range(static_cast<std::size_t>(cfg.height) * cfg.width,
                                   std::numeric_limits<double>::infinity());

  for (const auto& [id, group_in] : pulses) {
    std::vector<RawEcho> group = group_in;
    std::stable_sort(group.begin(), group.end(), [](const RawEcho& a, const RawEcho& b) {
      if (a.intensity_raw != b.intensity_raw) return a.intensity_raw > b.intensity_raw;
      return static_cast<int>(a.kind) < static_cast<int>(b.kind);
    });
    const RawEcho& strongest = group.front();
    const double theta = std::atan2(static_cast<double>(strongest.y), strongest.x);
    const double r = strongest.range();
    const double phi = std::asin(std::clamp(static_cast<double>(strongest.z) / r, -1.0, 1.0));
    const int h = cfg.row_of(phi);
    const int w = cfg.col_of(theta);

    const std::size_t cell = static_cast<std::size_t>(h) * cfg.width + w;
    if (r >= winner_range[cell]) continue;
    winner_range[cell] = r;

    for (int e = 0; e < slots; ++e) builder.record(h, w, e) = PointRecord{};
    int slot = 0;
    for (const RawEcho& echo : group) {
      if (slot >= slots) break;
      PointRecord rec;
      rec.x = echo.x;
      rec.y = echo.y;
      rec.z = echo.z;
      rec.intensity_raw = echo.intensity_raw;
      rec.valid = true;
      bool duplicate = false;
      for (int e2 = 0; e2 < slot; ++e2)
        if (builder.record(h, w, e2).same_bytes(rec)) duplicate = true;
      if (duplicate) continue;
      builder.set_record(h, w, slot, rec);
      builder.set_angles(h, w, static_cast<float>(theta), static_cast<float>(phi));
      ++slot;
    }
  }
  return builder.build();
}

}  // namespace echopick
