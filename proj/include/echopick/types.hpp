// echopick - multi-echo LiDAR denoising toolkit
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cmath>
#include <cstdint>
#include <cstring>
#include <string>
#include <vector>

#include "echopick/errors.hpp"

namespace echopick {

// One echo return in a grid cell. Invalid cells keep all numeric fields at
// zero so a record can be compared bytewise without worrying about stale
// payloads.
struct PointRecord {
  float x = 0.0f;
  float y = 0.0f;
  float z = 0.0f;
  float intensity_raw = 0.0f;  // received intensity as reported, in [0,1]
  bool valid = false;

  double range() const {
    return std::sqrt(static_cast<double>(x) * x + static_cast<double>(y) * y +
                     static_cast<double>(z) * z);
  }

  bool same_bytes(const PointRecord& o) const {
    return std::memcmp(&x, &o.x, sizeof(float)) == 0 &&
           std::memcmp(&y, &o.y, sizeof(float)) == 0 &&
           std::memcmp(&z, &o.z, sizeof(float)) == 0 &&
           std::memcmp(&intensity_raw, &o.intensity_raw, sizeof(float)) == 0;
  }
};

inline bool operator==(const PointRecord& a, const PointRecord& b) {
  return a.valid == b.valid && a.same_bytes(b);
}
inline bool operator!=(const PointRecord& a, const PointRecord& b) { return !(a == b); }

// Ground-truth class per cell-echo.
enum class PointLabel : std::uint8_t {
  kEmpty = 0,
  kValidObject = 1,
  kNoiseParticle = 2,
  kArtifact = 3,
};

// Inference-time echo classification. VS = valid strongest echo, PS =
// potential substitute recovered from an alternative echo, DI = discarded.
enum class EchoClass : std::uint8_t { VS = 0, PS = 1, DI = 2 };

// Dense H x W x E grid used for labels, scores, classes and masks.
template <typename T>
struct Grid3 {
  int height = 0;
  int width = 0;
  int echoes = 0;
  std::vector<T> values;

  Grid3() = default;
  Grid3(int h, int w, int e, T fill = T{})
      : height(h), width(w), echoes(e),
        values(static_cast<std::size_t>(h) * w * e, fill) {}

  std::size_t index(int h, int w, int e) const {
    return (static_cast<std::size_t>(h) * width + w) * echoes + e;
  }
  T& at(int h, int w, int e) { return values[index(h, w, e)]; }
  const T& at(int h, int w, int e) const { return values[index(h, w, e)]; }

  bool same_shape(int h, int w, int e) const {
    return height == h && width == w && echoes == e;
  }
  std::size_t size() const { return values.size(); }
};

using LabelGrid = Grid3<PointLabel>;

// Ordered multi-echo point cloud: an H x W grid of echo groups. All echoes
// of a group share the pulse direction (theta, phi); slot 0 holds the
// strongest echo. Immutable once built; construct through CloudBuilder.
class MultiEchoOrderedCloud {
 public:
  MultiEchoOrderedCloud() = default;

  int height() const { return height_; }
  int width() const { return width_; }
  int num_echoes() const { return echoes_; }
  std::size_t cell_count() const {
    return static_cast<std::size_t>(height_) * width_ * echoes_;
  }

  const PointRecord& at(int h, int w, int e) const {
    check_bounds(h, w, e);
    return records_[record_index(h, w, e)];
  }
  bool valid(int h, int w, int e) const { return at(h, w, e).valid; }

  float theta(int h, int w) const {
    check_bounds(h, w, 0);
    return theta_[angle_index(h, w)];
  }
  float phi(int h, int w) const {
    check_bounds(h, w, 0);
    return phi_[angle_index(h, w)];
  }

  // Euclidean norm of the record coordinates; 0 for invalid cells.
  double range_of(int h, int w, int e) const { return at(h, w, e).range(); }

  bool operator==(const MultiEchoOrderedCloud& o) const {
    if (height_ != o.height_ || width_ != o.width_ || echoes_ != o.echoes_) return false;
    for (std::size_t i = 0; i < records_.size(); ++i)
      if (records_[i] != o.records_[i]) return false;
    for (std::size_t i = 0; i < theta_.size(); ++i) {
      if (std::memcmp(&theta_[i], &o.theta_[i], sizeof(float)) != 0) return false;
      if (std::memcmp(&phi_[i], &o.phi_[i], sizeof(float)) != 0) return false;
    }
    return true;
  }
  bool operator!=(const MultiEchoOrderedCloud& o) const { return !(*this == o); }

  std::size_t record_index(int h, int w, int e) const {
    return (static_cast<std::size_t>(h) * width_ + w) * echoes_ + e;
  }
  std::size_t angle_index(int h, int w) const {
    return static_cast<std::size_t>(h) * width_ + w;
  }

 private:
  friend class CloudBuilder;

  void check_bounds(int h, int w, int e) const {
    if (h < 0 || h >= height_ || w < 0 || w >= width_ || e < 0 || e >= echoes_)
      throw IndexError("cell (" + std::to_string(h) + "," + std::to_string(w) + "," +
                       std::to_string(e) + ") outside " + std::to_string(height_) + "x" +
                       std::to_string(width_) + "x" + std::to_string(echoes_));
  }

  int height_ = 0;
  int width_ = 0;
  int echoes_ = 0;
  std::vector<PointRecord> records_;
  std::vector<float> theta_;
  std::vector<float> phi_;
};

// Mutable staging area for cloud construction. build() validates every
// cloud invariant and hands out the immutable result.
class CloudBuilder {
 public:
  CloudBuilder(int height, int width, int num_echoes) {
    if (height < 1 || width < 1 || num_echoes < 1)
      throw ConfigError("cloud dimensions must be >= 1");
    cloud_.height_ = height;
    cloud_.width_ = width;
    cloud_.echoes_ = num_echoes;
    cloud_.records_.assign(static_cast<std::size_t>(height) * width * num_echoes, PointRecord{});
    cloud_.theta_.assign(static_cast<std::size_t>(height) * width, 0.0f);
    cloud_.phi_.assign(static_cast<std::size_t>(height) * width, 0.0f);
  }

  void set_record(int h, int w, int e, const PointRecord& rec) {
    cloud_.check_bounds(h, w, e);
    cloud_.records_[cloud_.record_index(h, w, e)] = rec;
  }
  void set_angles(int h, int w, float theta, float phi) {
    cloud_.check_bounds(h, w, 0);
    cloud_.theta_[cloud_.angle_index(h, w)] = theta;
    cloud_.phi_[cloud_.angle_index(h, w)] = phi;
  }

  PointRecord& record(int h, int w, int e) {
    cloud_.check_bounds(h, w, e);
    return cloud_.records_[cloud_.record_index(h, w, e)];
  }

  int height() const { return cloud_.height_; }
  int width() const { return cloud_.width_; }
  int num_echoes() const { return cloud_.echoes_; }

  // Validates and returns the finished cloud. The builder is left empty.
  MultiEchoOrderedCloud build() {
    validate(cloud_);
    MultiEchoOrderedCloud out;
    std::swap(out, cloud_);
    return out;
  }

  // Invariants checked:
  //  - valid records have positive finite range and intensity_raw in [0,1];
  //    invalid records are all-zero
  //  - valid echoes of a group occupy a prefix of the slots
  //  - slot 0 has maximal intensity_raw among the group's valid echoes
  //  - no two valid echoes of a group are byte-identical
  static void validate(const MultiEchoOrderedCloud& c) {
    for (int h = 0; h < c.height_; ++h) {
      for (int w = 0; w < c.width_; ++w) {
        bool seen_invalid = false;
        for (int e = 0; e < c.echoes_; ++e) {
          const PointRecord& r = c.records_[c.record_index(h, w, e)];
          const std::string where =
              " at (" + std::to_string(h) + "," + std::to_string(w) + "," + std::to_string(e) + ")";
          if (!r.valid) {
            seen_invalid = true;
            if (r.x != 0.0f || r.y != 0.0f || r.z != 0.0f || r.intensity_raw != 0.0f)
              throw InvariantError("invalid record has nonzero fields" + where);
            continue;
          }
          if (seen_invalid)
            throw InvariantError("valid echo after an invalid slot" + where);
          if (!(r.range() > 0.0) || !std::isfinite(r.range()))
            throw InvariantError("valid record needs positive finite range" + where);
          if (!(r.intensity_raw >= 0.0f && r.intensity_raw <= 1.0f))
            throw InvariantError("intensity_raw outside [0,1]" + where);
          const PointRecord& strongest = c.records_[c.record_index(h, w, 0)];
          if (e > 0 && r.intensity_raw > strongest.intensity_raw)
            throw InvariantError("slot 0 is not the strongest echo" + where);
          for (int e2 = 0; e2 < e; ++e2) {
            const PointRecord& prev = c.records_[c.record_index(h, w, e2)];
            if (prev.valid && prev.same_bytes(r))
              throw InvariantError("byte-identical echoes in one group" + where);
          }
        }
      }
    }
  }

 private:
  MultiEchoOrderedCloud cloud_;
};

// Checks that a label grid matches a cloud: same shape, and label is kEmpty
// exactly where the record is invalid.
inline void validate_labels(const MultiEchoOrderedCloud& cloud, const LabelGrid& labels) {
  if (!labels.same_shape(cloud.height(), cloud.width(), cloud.num_echoes()))
    throw AlignmentError("label grid shape differs from cloud");
  for (int h = 0; h < cloud.height(); ++h)
    for (int w = 0; w < cloud.width(); ++w)
      for (int e = 0; e < cloud.num_echoes(); ++e) {
        const bool empty = labels.at(h, w, e) == PointLabel::kEmpty;
        if (empty == cloud.valid(h, w, e))
          throw AlignmentError("label emptiness disagrees with record validity at (" +
                               std::to_string(h) + "," + std::to_string(w) + "," +
                               std::to_string(e) + ")");
      }
}

// Wraps an angle to (-pi, pi].
inline double wrap_angle(double a) {
  double r = std::remainder(a, 2.0 * M_PI);
  if (r <= -M_PI) r += 2.0 * M_PI;
  return r;
}

}  // namespace echopick
