// echopick - multi-echo LiDAR denoising toolkit
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cmath>
#include <cstdint>
#include <vector>

#include "echopick/errors.hpp"
#include "echopick/net.hpp"
#include "echopick/neighbors.hpp"
#include "echopick/train.hpp"
#include "echopick/types.hpp"

namespace echopick {

struct InferenceConfig {
  double score_threshold = 0.0;  // T_n: an echo passes when score <= threshold
  double min_substitute_gap = 0.05;  // meters; range difference to strongest for PS

  void check() const {
    if (!(min_substitute_gap > 0.0)) throw ConfigError("min_substitute_gap must be > 0");
  }
};

// Turns correlation scores into per-echo classes. Lower score = more
// predictable = more likely a real surface, so "passes the threshold" means
// score <= T_n. Per group: a passing strongest echo is VS; otherwise the
// best-scoring passing alternative whose range differs from the strongest by
// more than the gap becomes PS (ties to the lower echo index). Everything
// else, including every invalid slot, is DI.
inline Grid3<EchoClass> classify_echoes(const Grid3<double>& scores,
                                        const MultiEchoOrderedCloud& cloud,
                                        const InferenceConfig& cfg) {
  cfg.check();
  if (!scores.same_shape(cloud.height(), cloud.width(), cloud.num_echoes()))
    throw ShapeError("score grid shape differs from cloud");
  Grid3<EchoClass> classes(cloud.height(), cloud.width(), cloud.num_echoes(), EchoClass::DI);
  for (int h = 0; h < cloud.height(); ++h)
    for (int w = 0; w < cloud.width(); ++w) {
      if (!cloud.valid(h, w, 0)) continue;
      if (scores.at(h, w, 0) <= cfg.score_threshold) {
        classes.at(h, w, 0) = EchoClass::VS;
        continue;
      }
      const double r0 = cloud.range_of(h, w, 0);
      int best = -1;
      for (int e = 1; e < cloud.num_echoes(); ++e) {
        if (!cloud.valid(h, w, e)) continue;
        if (!(scores.at(h, w, e) <= cfg.score_threshold)) continue;
        if (!(std::fabs(cloud.range_of(h, w, e) - r0) > cfg.min_substitute_gap)) continue;
        if (best < 0 || scores.at(h, w, e) < scores.at(h, w, best)) best = e;
      }
      if (best >= 0) classes.at(h, w, best) = EchoClass::PS;
    }
  return classes;
}

// Final single-echo cloud plus bookkeeping: which surviving points came from
// an alternative echo.
struct DenoisedCloud {
  MultiEchoOrderedCloud cloud;            // Ne = 1
  Grid3<std::uint8_t> substitute;         // H x W x 1, set where a PS echo survived
};

// Keeps, per group, the VS echo if present, else the PS echo, else leaves
// the cell empty. Survivors are copied bit for bit; the method never
// synthesizes coordinates.
inline DenoisedCloud assemble_output(const MultiEchoOrderedCloud& cloud,
                                     const Grid3<EchoClass>& classes) {
  if (!classes.same_shape(cloud.height(), cloud.width(), cloud.num_echoes()))
    throw ShapeError("class grid shape differs from cloud");
  CloudBuilder builder(cloud.height(), cloud.width(), 1);
  DenoisedCloud out;
  out.substitute = Grid3<std::uint8_t>(cloud.height(), cloud.width(), 1, 0);
  for (int h = 0; h < cloud.height(); ++h)
    for (int w = 0; w < cloud.width(); ++w) {
      builder.set_angles(h, w, cloud.theta(h, w), cloud.phi(h, w));
      for (int e = 0; e < cloud.num_echoes(); ++e) {
        const EchoClass c = classes.at(h, w, e);
        if (c == EchoClass::DI) continue;
        builder.set_record(h, w, 0, cloud.at(h, w, e));
        if (c == EchoClass::PS) out.substitute.at(h, w, 0) = 1;
        break;  // at most one non-DI echo per group
      }
    }
  out.cloud = builder.build();
  return out;
}

struct DenoiseResult {
  DenoisedCloud output;
  Grid3<double> scores;          // correlation learner output per echo
  Grid3<EchoClass> classes;
};

// End-to-end inference on one scan: encode neighbors, run the correlation
// learner (no blind spots), classify, assemble.
inline DenoiseResult denoise_scan(const MultiEchoOrderedCloud& cloud, const Network& correlation,
                                  const EncoderConfig& enc_cfg, const InferenceConfig& inf_cfg) {
  const NeighborField field = gather_neighbors(cloud, enc_cfg);
  const FeatureTensor features = encode_features(cloud, field);
  const PlaneTensor raw = correlation.forward(features);
  DenoiseResult result;
  result.scores = planes_to_grid(raw);
  result.classes = classify_echoes(result.scores, cloud, inf_cfg);
  result.output = assemble_output(cloud, result.classes);
  return result;
}

// Class grids travel in ".mel" files with 1 = kept strongest, 4 = kept
// substitute, 0 = discarded or empty.
inline Grid3<std::uint8_t> classes_to_bytes(const Grid3<EchoClass>& classes) {
  Grid3<std::uint8_t> bytes(classes.height, classes.width, classes.echoes, 0);
  for (std::size_t i = 0; i < classes.values.size(); ++i) {
    switch (classes.values[i]) {
      case EchoClass::VS: bytes.values[i] = 1; break;
      case EchoClass::PS: bytes.values[i] = 4; break;
      case EchoClass::DI: bytes.values[i] = 0; break;
    }
  }
  return bytes;
}

}  // namespace echopick
