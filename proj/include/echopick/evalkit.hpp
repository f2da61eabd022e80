// echopick - multi-echo LiDAR denoising toolkit
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdint>
#include <cstdio>
#include <functional>
#include <string>
#include <vector>

#include "echopick/errors.hpp"
#include "echopick/io.hpp"
#include "echopick/types.hpp"

namespace echopick {

// Confusion counts for the noise class: a positive is a noise_particle
// echo, a positive prediction is a removal decision.
struct ConfusionCounts {
  std::uint64_t tp = 0;  // noise removed
  std::uint64_t fp = 0;  // real point removed
  std::uint64_t fn = 0;  // noise kept
  std::uint64_t tn = 0;  // real point kept

  ConfusionCounts& operator+=(const ConfusionCounts& o) {
    tp += o.tp;
    fp += o.fp;
    fn += o.fn;
    tn += o.tn;
    return *this;
  }
  std::uint64_t total() const { return tp + fp + fn + tn; }
};

inline double iou(const ConfusionCounts& c) {
  const std::uint64_t denom = c.tp + c.fp + c.fn;
  if (denom == 0) throw UndefinedMetric("IoU denominator is zero");
  return static_cast<double>(c.tp) / static_cast<double>(denom);
}

// IoU of the complementary (kept/valid) class.
inline double iou_valid(const ConfusionCounts& c) {
  const std::uint64_t denom = c.tn + c.fp + c.fn;
  if (denom == 0) throw UndefinedMetric("valid-class IoU denominator is zero");
  return static_cast<double>(c.tn) / static_cast<double>(denom);
}

inline double precision(const ConfusionCounts& c) {
  const std::uint64_t denom = c.tp + c.fp;
  return denom == 0 ? 0.0 : static_cast<double>(c.tp) / static_cast<double>(denom);
}

inline double recall(const ConfusionCounts& c) {
  const std::uint64_t denom = c.tp + c.fn;
  return denom == 0 ? 0.0 : static_cast<double>(c.tp) / static_cast<double>(denom);
}

// Accumulates confusion counts for one scan. `removed` marks per-echo
// removal decisions; labels provide the ground truth, with empty cells
// skipped. Artifact labels count as non-noise.
inline ConfusionCounts evaluate_scan(const Grid3<std::uint8_t>& removed, const LabelGrid& labels) {
  if (!removed.same_shape(labels.height, labels.width, labels.echoes))
    throw AlignmentError("prediction grid shape differs from labels");
  ConfusionCounts counts;
  for (std::size_t i = 0; i < labels.values.size(); ++i) {
    const PointLabel label = labels.values[i];
    if (label == PointLabel::kEmpty) continue;
    const bool noise = label == PointLabel::kNoiseParticle;
    const bool out = removed.values[i] != 0;
    if (noise && out) ++counts.tp;
    else if (!noise && out) ++counts.fp;
    else if (noise && !out) ++counts.fn;
    else ++counts.tn;
  }
  return counts;
}

// Maps a prediction ".mel" byte grid (1 = kept strongest, 4 = kept
// substitute, everything else = removed) to removal decisions on cells the
// truth marks occupied.
inline Grid3<std::uint8_t> removal_from_prediction_bytes(const Grid3<std::uint8_t>& pred) {
  Grid3<std::uint8_t> removed(pred.height, pred.width, pred.echoes, 0);
  for (std::size_t i = 0; i < pred.values.size(); ++i)
    removed.values[i] = (pred.values[i] == 1 || pred.values[i] == 4) ? 0 : 1;
  return removed;
}

struct RuntimeStats {
  double median_ms = 0.0;
  double p95_ms = 0.0;
  int measured_scans = 0;
};

// Wall-clock per-scan statistics for `runner` over a dataset; the first
// `warmup` scans are timed but excluded from the stats.
inline RuntimeStats benchmark(const std::function<void(std::size_t)>& runner,
                              std::size_t num_scans, int warmup = 3) {
  if (num_scans == 0) throw DataError("benchmark dataset is empty");
  std::vector<double> times;
  for (std::size_t i = 0; i < num_scans; ++i) {
    const auto t0 = std::chrono::steady_clock::now();
    runner(i);
    const auto t1 = std::chrono::steady_clock::now();
    const double ms = std::chrono::duration<double, std::milli>(t1 - t0).count();
    if (static_cast<int>(i) >= warmup) times.push_back(ms);
  }
  if (times.empty()) throw DataError("benchmark needs more scans than the warm-up run");
  std::sort(times.begin(), times.end());
  RuntimeStats stats;
  stats.measured_scans = static_cast<int>(times.size());
  const std::size_t n = times.size();
  stats.median_ms = n % 2 == 1 ? times[n / 2] : 0.5 * (times[n / 2 - 1] + times[n / 2]);
  const std::size_t p95_idx =
      static_cast<std::size_t>(std::ceil(0.95 * static_cast<double>(n))) - 1;
  stats.p95_ms = times[std::min(p95_idx, n - 1)];
  return stats;
}

// Area under the ROC curve for score-ranked noise detection (noise =
// positive, higher score = more suspicious). Exact Mann-Whitney statistic
// with tie correction.
inline double roc_auc(std::vector<std::pair<double, bool>> scored) {
  std::size_t pos = 0, neg = 0;
  for (const auto& [s, is_pos] : scored) (is_pos ? pos : neg) += 1;
  if (pos == 0 || neg == 0) throw UndefinedMetric("ROC-AUC needs both classes");
  std::sort(scored.begin(), scored.end(),
            [](const auto& a, const auto& b) { return a.first < b.first; });
  double rank_sum_pos = 0.0;
  std::size_t i = 0;
  while (i < scored.size()) {
    std::size_t j = i;
    while (j < scored.size() && scored[j].first == scored[i].first) ++j;
    const double mean_rank = 0.5 * (static_cast<double>(i + 1) + static_cast<double>(j));
    for (std::size_t t = i; t < j; ++t)
      if (scored[t].second) rank_sum_pos += mean_rank;
    i = j;
  }
  const double u = rank_sum_pos - static_cast<double>(pos) * (pos + 1) / 2.0;
  return u / (static_cast<double>(pos) * static_cast<double>(neg));
}

// One row of the evaluation report.
struct EvalEntry {
  std::string severity;
  std::string method;
  int scans = 0;
  ConfusionCounts counts;
  double mean_scan_iou = 0.0;  // mean of per-scan noise IoU, scans with a
                               // defined IoU only
  double median_runtime_ms = 0.0;
  double p95_runtime_ms = 0.0;
  std::uint64_t param_count = 0;
};

struct EvalReport {
  std::vector<EvalEntry> entries;
};

inline std::string csv_header() {
  return "severity,method,scans,tp,fp,fn,tn,iou_noise,iou_valid,precision,recall,"
         "mean_scan_iou,median_runtime_ms,p95_runtime_ms,param_count";
}

inline std::string to_csv_row(const EvalEntry& e) {
  char buf[512];
  const double iou_n = (e.counts.tp + e.counts.fp + e.counts.fn) ? iou(e.counts) : 0.0;
  const double iou_v = (e.counts.tn + e.counts.fp + e.counts.fn) ? iou_valid(e.counts) : 0.0;
  std::snprintf(buf, sizeof buf,
                "%s,%s,%d,%llu,%llu,%llu,%llu,%.17g,%.17g,%.17g,%.17g,%.17g,%.17g,%.17g,%llu",
                e.severity.c_str(), e.method.c_str(), e.scans,
                static_cast<unsigned long long>(e.counts.tp),
                static_cast<unsigned long long>(e.counts.fp),
                static_cast<unsigned long long>(e.counts.fn),
                static_cast<unsigned long long>(e.counts.tn), iou_n, iou_v, precision(e.counts),
                recall(e.counts), e.mean_scan_iou, e.median_runtime_ms, e.p95_runtime_ms,
                static_cast<unsigned long long>(e.param_count));
  return buf;
}

inline void write_report_csv(const std::string& path, const EvalReport& report) {
  std::string out = csv_header() + "\n";
  for (const EvalEntry& e : report.entries) out += to_csv_row(e) + "\n";
  detail::spit(path, out);
}

inline EvalReport read_report_csv(const std::string& path) {
  const std::string data = detail::slurp(path);
  EvalReport report;
  std::size_t pos = 0;
  bool header = true;
  while (pos < data.size()) {
    std::size_t eol = data.find('\n', pos);
    if (eol == std::string::npos) eol = data.size();
    const std::string line = data.substr(pos, eol - pos);
    pos = eol + 1;
    if (line.empty()) continue;
    if (header) {
      if (line != csv_header()) throw FormatError("bad report header in " + path);
      header = false;
      continue;
    }
    EvalEntry e;
    char severity[64] = {0};
    char method[64] = {0};
    unsigned long long tp, fp, fn, tn, params;
    double iou_n, iou_v, prec, rec;
    if (std::sscanf(line.c_str(),
                    "%63[^,],%63[^,],%d,%llu,%llu,%llu,%llu,%lf,%lf,%lf,%lf,%lf,%lf,%lf,%llu",
                    severity, method, &e.scans, &tp, &fp, &fn, &tn, &iou_n, &iou_v, &prec, &rec,
                    &e.mean_scan_iou, &e.median_runtime_ms, &e.p95_runtime_ms, &params) != 15)
      throw FormatError("bad report row in " + path);
    e.severity = severity;
    e.method = method;
    e.counts = {tp, fp, fn, tn};
    e.param_count = params;
    report.entries.push_back(e);
  }
  if (header) throw FormatError("empty report " + path);
  return report;
}

// Binary PGM (P5) export of one echo slot of a score grid. Finite scores at
// occupied cells map linearly onto [1, 255]; empty cells render black.
inline void write_score_pgm(const std::string& path, const Grid3<double>& scores,
                            const Grid3<std::uint8_t>& occupied, int echo) {
  if (!occupied.same_shape(scores.height, scores.width, scores.echoes))
    throw AlignmentError("occupancy grid shape differs from scores");
  if (echo < 0 || echo >= scores.echoes) throw IndexError("echo slot out of range");
  double lo = std::numeric_limits<double>::infinity();
  double hi = -std::numeric_limits<double>::infinity();
  for (int h = 0; h < scores.height; ++h)
    for (int w = 0; w < scores.width; ++w)
      if (occupied.at(h, w, echo)) {
        lo = std::min(lo, scores.at(h, w, echo));
        hi = std::max(hi, scores.at(h, w, echo));
      }
  std::string out = "P5\n" + std::to_string(scores.width) + " " + std::to_string(scores.height) +
                    "\n255\n";
  for (int h = 0; h < scores.height; ++h)
    for (int w = 0; w < scores.width; ++w) {
      unsigned char gray = 0;
      if (occupied.at(h, w, echo)) {
        if (hi > lo) {
          const double t = (scores.at(h, w, echo) - lo) / (hi - lo);
          gray = static_cast<unsigned char>(1 + std::lround(254.0 * t));
        } else {
          gray = 128;
        }
      }
      out.push_back(static_cast<char>(gray));
    }
  detail::spit(path, out);
}

// PGM export of a class grid: VS white, PS mid gray, DI/empty black.
inline void write_class_pgm(const std::string& path, const Grid3<EchoClass>& classes, int echo) {
  if (echo < 0 || echo >= classes.echoes) throw IndexError("echo slot out of range");
  std::string out = "P5\n" + std::to_string(classes.width) + " " +
                    std::to_string(classes.height) + "\n255\n";
  for (int h = 0; h < classes.height; ++h)
    for (int w = 0; w < classes.width; ++w) {
      unsigned char gray = 0;
      switch (classes.at(h, w, echo)) {
        case EchoClass::VS: gray = 255; break;
        case EchoClass::PS: gray = 128; break;
        case EchoClass::DI: gray = 0; break;
      }
      out.push_back(static_cast<char>(gray));
    }
  detail::spit(path, out);
}

}  // namespace echopick
