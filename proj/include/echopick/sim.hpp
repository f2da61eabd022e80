// echopick - multi-echo LiDAR denoising toolkit
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <fstream>
#include <limits>
#include <map>
#include <optional>
#include <sstream>
#include <string>
#include <variant>
#include <vector>

#include "echopick/errors.hpp"
#include "echopick/projection.hpp"
#include "echopick/rng.hpp"
#include "echopick/types.hpp"

namespace echopick {

// Analytic scene primitives. The sensor sits at the origin; the ground is an
// infinite z = const plane below it.
struct BoxSpec {
  double cx = 0, cy = 0, cz = 0;   // center
  double sx = 1, sy = 1, sz = 1;   // full extents
  double reflectivity = 0.5;
};

struct CylinderSpec {
  double cx = 0, cy = 0;           // vertical axis
  double z0 = -2, z1 = 2;
  double radius = 0.2;
  double reflectivity = 0.5;
};

struct SceneSpec {
  int height = 16;
  int width = 128;
  double fov_up = 10.0 * M_PI / 180.0;
  double fov_down = -20.0 * M_PI / 180.0;
  double max_range = 60.0;
  bool ground_enabled = true;
  double ground_z = -1.7;
  double ground_reflectivity = 0.35;
  double intensity_jitter = 0.1;  // intensity_raw = reflectivity / (1 + U[0, jitter])
  std::vector<BoxSpec> boxes;
  std::vector<CylinderSpec> cylinders;

  ProjectionConfig grid() const {
    ProjectionConfig cfg;
    cfg.height = height;
    cfg.width = width;
    cfg.fov_up = fov_up;
    cfg.fov_down = fov_down;
    return cfg;
  }

  void check() const {
    grid().check();
    if (!(max_range > 0.0)) throw ConfigError("max_range must be > 0");
    if (intensity_jitter < 0.0) throw ConfigError("intensity_jitter must be >= 0");
    auto check_refl = [](double r) {
      if (!(r > 0.0 && r <= 1.0)) throw ConfigError("reflectivity must be in (0,1]");
    };
    check_refl(ground_reflectivity);
    for (const auto& b : boxes) {
      check_refl(b.reflectivity);
      if (!(b.sx > 0 && b.sy > 0 && b.sz > 0)) throw ConfigError("box extents must be > 0");
      if (std::hypot(b.cx, b.cy, b.cz) > max_range)
        throw ConfigError("box center beyond max_range");
    }
    for (const auto& c : cylinders) {
      check_refl(c.reflectivity);
      if (!(c.radius > 0) || !(c.z1 > c.z0)) throw ConfigError("bad cylinder geometry");
      if (std::hypot(c.cx, c.cy) > max_range)
        throw ConfigError("cylinder axis beyond max_range");
    }
  }
};

namespace detail {

struct Hit {
  double t = std::numeric_limits<double>::infinity();
  double reflectivity = 0.0;
};

inline void hit_ground(const SceneSpec& spec, double dx, double dy, double dz, Hit& best) {
  if (!spec.ground_enabled || dz >= 0.0) return;
  const double t = spec.ground_z / dz;
  if (t > 0.0 && t < best.t) best = {t, spec.ground_reflectivity};
}

inline void hit_box(const BoxSpec& b, double dx, double dy, double dz, Hit& best) {
  // Slab test from the origin.
  double tmin = 0.0, tmax = std::numeric_limits<double>::infinity();
  const double o[3] = {0, 0, 0};
  const double d[3] = {dx, dy, dz};
  const double lo[3] = {b.cx - b.sx / 2, b.cy - b.sy / 2, b.cz - b.sz / 2};
  const double hi[3] = {b.cx + b.sx / 2, b.cy + b.sy / 2, b.cz + b.sz / 2};
  for (int a = 0; a < 3; ++a) {
    if (d[a] == 0.0) {
      if (o[a] < lo[a] || o[a] > hi[a]) return;
      continue;
    }
    double t0 = (lo[a] - o[a]) / d[a];
    double t1 = (hi[a] - o[a]) / d[a];
    if (t0 > t1) std::swap(t0, t1);
    tmin = std::max(tmin, t0);
    tmax = std::min(tmax, t1);
    if (tmin > tmax) return;
  }
  if (tmin > 1e-9 && tmin < best.t) best = {tmin, b.reflectivity};
}

inline void hit_cylinder(const CylinderSpec& c, double dx, double dy, double dz, Hit& best) {
  // Infinite-cylinder quadratic in the xy plane, clipped to [z0, z1]; end
  // caps are not modeled.
  const double a = dx * dx + dy * dy;
  if (a == 0.0) return;
  const double bq = -2.0 * (dx * c.cx + dy * c.cy);
  const double cq = c.cx * c.cx + c.cy * c.cy - c.radius * c.radius;
  const double disc = bq * bq - 4.0 * a * cq;
  if (disc < 0.0) return;
  const double sq = std::sqrt(disc);
  for (double t : {(-bq - sq) / (2 * a), (-bq + sq) / (2 * a)}) {
    if (t <= 1e-9 || t >= best.t) continue;
    const double z = t * dz;
    if (z < c.z0 || z > c.z1) continue;
    best = {t, c.reflectivity};
    return;  // the smaller root is tried first
  }
}

}  // namespace detail

struct GeneratedScan {
  MultiEchoOrderedCloud cloud;
  LabelGrid labels;
};

// Casts one beam per grid cell through the analytic scene. Hits become valid
// single-echo records labeled valid_object; misses stay empty.
inline GeneratedScan raycast_scene(const SceneSpec& spec, std::uint64_t seed) {
  spec.check();
  const ProjectionConfig grid = spec.grid();
  CloudBuilder builder(spec.height, spec.width, 1);
  LabelGrid labels(spec.height, spec.width, 1, PointLabel::kEmpty);
  for (int h = 0; h < spec.height; ++h) {
    const double phi = grid.center_phi(h);
    for (int w = 0; w < spec.width; ++w) {
      const double theta = grid.center_theta(w);
      const double dx = std::cos(phi) * std::cos(theta);
      const double dy = std::cos(phi) * std::sin(theta);
      const double dz = std::sin(phi);
      builder.set_angles(h, w, static_cast<float>(theta), static_cast<float>(phi));

      detail::Hit best;
      detail::hit_ground(spec, dx, dy, dz, best);
      for (const auto& b : spec.boxes) detail::hit_box(b, dx, dy, dz, best);
      for (const auto& c : spec.cylinders) detail::hit_cylinder(c, dx, dy, dz, best);
      if (!(best.t < spec.max_range)) continue;

      Rng rng(substream_seed(seed, static_cast<std::uint64_t>(h), static_cast<std::uint64_t>(w)));
      PointRecord rec;
      rec.x = static_cast<float>(best.t * dx);
      rec.y = static_cast<float>(best.t * dy);
      rec.z = static_cast<float>(best.t * dz);
      rec.intensity_raw =
          static_cast<float>(best.reflectivity / (1.0 + rng.uniform(0.0, spec.intensity_jitter)));
      rec.valid = true;
      builder.set_record(h, w, 0, rec);
      labels.at(h, w, 0) = PointLabel::kValidObject;
    }
  }
  return {builder.build(), labels};
}

enum class SnowSeverity : std::uint8_t { kLight = 0, kMedium = 1, kHeavy = 2 };

inline const char* severity_name(SnowSeverity s) {
  switch (s) {
    case SnowSeverity::kLight: return "light";
    case SnowSeverity::kMedium: return "medium";
    case SnowSeverity::kHeavy: return "heavy";
  }
  return "?";
}

inline double severity_corruption_probability(SnowSeverity s) {
  switch (s) {
    case SnowSeverity::kLight: return 0.02;
    case SnowSeverity::kMedium: return 0.06;
    case SnowSeverity::kHeavy: return 0.12;
  }
  return 0.0;
}

// Snowfall injection model. A corrupted beam gains a particle return drawn
// uniformly from [1 m, min(0.8 * r_true, particle_max_range)] along the
// beam, with raw intensity uniform on [0, particle_max_intensity]. Particles
// sit in front of the surface they occlude, and particle_max_range keeps
// them concentrated near the sensor where airborne returns are actually
// detectable, so heavy severities produce loose clumps rather than uniform
// dust.
struct SnowSpec {
  SnowSeverity severity = SnowSeverity::kMedium;
  double corruption_probability = -1.0;    // < 0 = derive from severity
  double particle_max_range = 3.0;         // meters
  double particle_max_intensity = 1.0;     // raw units
  double occlusion_drop = 0.15;            // P(true return lost | particle fired)

  double effective_corruption() const {
    return corruption_probability >= 0.0 ? corruption_probability
                                         : severity_corruption_probability(severity);
  }

  void check() const {
    const double pc = effective_corruption();
    if (!(pc >= 0.0 && pc <= 1.0)) throw ConfigError("corruption probability must be in [0,1]");
    if (!(particle_max_range > 1.0)) throw ConfigError("particle_max_range must exceed 1 m");
    if (!(particle_max_intensity > 0.0 && particle_max_intensity <= 1.0))
      throw ConfigError("particle_max_intensity must be in (0,1]");
    if (!(occlusion_drop >= 0.0 && occlusion_drop <= 1.0))
      throw ConfigError("occlusion_drop must be in [0,1]");
  }
};

// Injects snowfall into a clear single-echo scan.
//
// Single-echo output: the particle replaces the true return. Multi-echo
// output (Ne = 2): the particle takes slot 0 -- near particles return the
// stronger received signal -- and the true return survives at slot 1 unless
// occlusion_drop removes it. When both echoes survive, the particle's stored
// raw intensity is lifted to at least the true return's so the
// strongest-first slot ordering of the cloud holds; its range-normalized
// intensity stays low either way because the particle is much nearer.
// Beams whose true range is at most 1.25 m have no room for a particle in
// front and pass through unchanged.
inline GeneratedScan inject_snow(const MultiEchoOrderedCloud& clean, const LabelGrid& clean_labels,
                                 const SnowSpec& spec, bool multi_echo, std::uint64_t seed) {
  spec.check();
  if (clean.num_echoes() != 1) throw ModeError("inject_snow expects a single-echo input cloud");
  validate_labels(clean, clean_labels);
  const double pc = spec.effective_corruption();
  const int out_echoes = multi_echo ? 2 : 1;

  CloudBuilder builder(clean.height(), clean.width(), out_echoes);
  LabelGrid labels(clean.height(), clean.width(), out_echoes, PointLabel::kEmpty);

  for (int h = 0; h < clean.height(); ++h)
    for (int w = 0; w < clean.width(); ++w) {
      builder.set_angles(h, w, clean.theta(h, w), clean.phi(h, w));
      if (!clean.valid(h, w, 0)) continue;
      const PointRecord& truth = clean.at(h, w, 0);
      const double r_true = truth.range();
      const double r_hi = std::min(0.8 * r_true, spec.particle_max_range);

      Rng rng(substream_seed(seed, static_cast<std::uint64_t>(h), static_cast<std::uint64_t>(w)));
      const bool corrupted = r_hi > 1.0 && rng.bernoulli(pc);
      if (!corrupted) {
        builder.set_record(h, w, 0, truth);
        labels.at(h, w, 0) = clean_labels.at(h, w, 0);
        continue;
      }

      const double rp = rng.uniform(1.0, r_hi);
      const double scale = rp / r_true;
      PointRecord particle;
      particle.x = static_cast<float>(truth.x * scale);
      particle.y = static_cast<float>(truth.y * scale);
      particle.z = static_cast<float>(truth.z * scale);
      particle.intensity_raw = static_cast<float>(rng.uniform(0.0, spec.particle_max_intensity));
      particle.valid = true;

      const bool drop_true = rng.bernoulli(spec.occlusion_drop);
      if (multi_echo && !drop_true) {
        if (particle.intensity_raw < truth.intensity_raw)
          particle.intensity_raw = truth.intensity_raw;
        builder.set_record(h, w, 0, particle);
        builder.set_record(h, w, 1, truth);
        labels.at(h, w, 0) = PointLabel::kNoiseParticle;
        labels.at(h, w, 1) = clean_labels.at(h, w, 0);
      } else {
        builder.set_record(h, w, 0, particle);
        labels.at(h, w, 0) = PointLabel::kNoiseParticle;
      }
    }
  return {builder.build(), labels};
}

// Randomized desk-scale traffic-ish scene: ground plane, a few walls, boxes
// and poles spread over the range budget.
inline SceneSpec random_scene(std::uint64_t seed, int height = 16, int width = 128) {
  Rng rng(substream_seed(seed, 0x5ce11eull));
  SceneSpec spec;
  spec.height = height;
  spec.width = width;
  spec.ground_z = -1.7;
  spec.ground_reflectivity = rng.uniform(0.25, 0.45);

  const int n_walls = 1 + static_cast<int>(rng.below(3));
  for (int i = 0; i < n_walls; ++i) {
    BoxSpec wall;
    const double dist = rng.uniform(8.0, 40.0);
    const double angle = rng.uniform(0.0, 2.0 * M_PI);
    wall.cx = dist * std::cos(angle);
    wall.cy = dist * std::sin(angle);
    const bool facing_x = std::fabs(std::cos(angle)) > std::fabs(std::sin(angle));
    wall.sx = facing_x ? 0.3 : rng.uniform(6.0, 20.0);
    wall.sy = facing_x ? rng.uniform(6.0, 20.0) : 0.3;
    wall.sz = rng.uniform(2.5, 5.0);
    wall.cz = spec.ground_z + wall.sz / 2;
    wall.reflectivity = rng.uniform(0.3, 0.9);
    spec.boxes.push_back(wall);
  }
  const int n_boxes = 4 + static_cast<int>(rng.below(6));
  for (int i = 0; i < n_boxes; ++i) {
    BoxSpec box;
    const double dist = rng.uniform(4.0, 32.0);
    const double angle = rng.uniform(0.0, 2.0 * M_PI);
    box.cx = dist * std::cos(angle);
    box.cy = dist * std::sin(angle);
    box.sx = rng.uniform(0.6, 4.0);
    box.sy = rng.uniform(0.6, 4.0);
    box.sz = rng.uniform(0.8, 2.2);
    box.cz = spec.ground_z + box.sz / 2;
    box.reflectivity = rng.uniform(0.2, 0.9);
    spec.boxes.push_back(box);
  }
  const int n_poles = 2 + static_cast<int>(rng.below(5));
  for (int i = 0; i < n_poles; ++i) {
    CylinderSpec pole;
    const double dist = rng.uniform(3.0, 28.0);
    const double angle = rng.uniform(0.0, 2.0 * M_PI);
    pole.cx = dist * std::cos(angle);
    pole.cy = dist * std::sin(angle);
    pole.radius = rng.uniform(0.06, 0.3);
    pole.z0 = spec.ground_z;
    pole.z1 = spec.ground_z + rng.uniform(2.0, 5.0);
    pole.reflectivity = rng.uniform(0.3, 0.8);
    spec.cylinders.push_back(pole);
  }
  return spec;
}

// Plain-text scene files: "key = value" lines grouped under [section]
// headers. Sections: one [sensor], optional [ground], repeated [box] /
// [cylinder] / [wall]. Values are whitespace-separated numbers. '#' starts
// a comment.
inline SceneSpec parse_scene_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open scene file " + path);
  SceneSpec spec;
  spec.ground_enabled = false;

  std::string section;
  std::optional<BoxSpec> box;
  std::optional<CylinderSpec> cyl;
  bool wall_mode = false;

  auto flush = [&]() {
    if (box) {
      spec.boxes.push_back(*box);
      box.reset();
    }
    if (cyl) {
      spec.cylinders.push_back(*cyl);
      cyl.reset();
    }
    wall_mode = false;
  };

  std::string line;
  int lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    const std::size_t hash = line.find('#');
    if (hash != std::string::npos) line.resize(hash);
    std::size_t a = line.find_first_not_of(" \t\r");
    if (a == std::string::npos) continue;
    std::size_t b = line.find_last_not_of(" \t\r");
    line = line.substr(a, b - a + 1);

    if (line.front() == '[') {
      if (line.back() != ']')
        throw FormatError(path + ":" + std::to_string(lineno) + ": unterminated section header");
      flush();
      section = line.substr(1, line.size() - 2);
      if (section == "box" || section == "wall") {
        box = BoxSpec{};
        wall_mode = section == "wall";
      } else if (section == "cylinder") {
        cyl = CylinderSpec{};
      } else if (section == "ground") {
        spec.ground_enabled = true;
      } else if (section != "sensor") {
        throw FormatError(path + ":" + std::to_string(lineno) + ": unknown section [" + section +
                          "]");
      }
      continue;
    }

    const std::size_t eq = line.find('=');
    if (eq == std::string::npos)
      throw FormatError(path + ":" + std::to_string(lineno) + ": expected key = value");
    std::string key = line.substr(0, eq);
    key.erase(key.find_last_not_of(" \t") + 1);
    std::istringstream values(line.substr(eq + 1));
    auto num = [&]() {
      double v;
      if (!(values >> v))
        throw FormatError(path + ":" + std::to_string(lineno) + ": expected a number for " + key);
      return v;
    };

    if (section == "sensor") {
      if (key == "height") spec.height = static_cast<int>(num());
      else if (key == "width") spec.width = static_cast<int>(num());
      else if (key == "fov_up_deg") spec.fov_up = num() * M_PI / 180.0;
      else if (key == "fov_down_deg") spec.fov_down = num() * M_PI / 180.0;
      else if (key == "max_range") spec.max_range = num();
      else if (key == "intensity_jitter") spec.intensity_jitter = num();
      else throw FormatError(path + ":" + std::to_string(lineno) + ": unknown sensor key " + key);
    } else if (section == "ground") {
      if (key == "z") spec.ground_z = num();
      else if (key == "reflectivity") spec.ground_reflectivity = num();
      else throw FormatError(path + ":" + std::to_string(lineno) + ": unknown ground key " + key);
    } else if (box) {
      if (key == "center") {
        box->cx = num();
        box->cy = num();
        box->cz = num();
      } else if (key == "size") {
        box->sx = num();
        box->sy = num();
        box->sz = num();
        if (wall_mode) box->sx = std::max(box->sx, 0.05);
      } else if (key == "reflectivity") {
        box->reflectivity = num();
      } else {
        throw FormatError(path + ":" + std::to_string(lineno) + ": unknown box key " + key);
      }
    } else if (cyl) {
      if (key == "center") {
        cyl->cx = num();
        cyl->cy = num();
      } else if (key == "z_range") {
        cyl->z0 = num();
        cyl->z1 = num();
      } else if (key == "radius") {
        cyl->radius = num();
      } else if (key == "reflectivity") {
        cyl->reflectivity = num();
      } else {
        throw FormatError(path + ":" + std::to_string(lineno) + ": unknown cylinder key " + key);
      }
    } else {
      throw FormatError(path + ":" + std::to_string(lineno) + ": key outside any section");
    }
  }
  flush();
  spec.check();
  return spec;
}

}  // namespace echopick
