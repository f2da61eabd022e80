// echopick - multi-echo LiDAR denoising toolkit
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <stdexcept>
#include <string>

namespace echopick {

// Error taxonomy. The CLI maps ConfigError to exit code 2 and the
// data-dependent errors to exit code 3.

struct IoError : std::runtime_error {
  explicit IoError(const std::string& msg) : std::runtime_error("io error: " + msg) {}
};

struct FormatError : std::runtime_error {
  explicit FormatError(const std::string& msg) : std::runtime_error("format error: " + msg) {}
};

struct InvariantError : std::runtime_error {
  explicit InvariantError(const std::string& msg) : std::runtime_error("invariant violated: " + msg) {}
};

struct ConfigError : std::runtime_error {
  explicit ConfigError(const std::string& msg) : std::runtime_error("config error: " + msg) {}
};

struct IndexError : std::out_of_range {
  explicit IndexError(const std::string& msg) : std::out_of_range("index error: " + msg) {}
};

struct ShapeError : std::runtime_error {
  explicit ShapeError(const std::string& msg) : std::runtime_error("shape mismatch: " + msg) {}
};

struct DegenerateRange : std::runtime_error {
  explicit DegenerateRange(const std::string& msg) : std::runtime_error("degenerate range: " + msg) {}
};

struct EmptySubset : std::runtime_error {
  explicit EmptySubset(const std::string& msg) : std::runtime_error("empty subset: " + msg) {}
};

struct DivergenceError : std::runtime_error {
  explicit DivergenceError(const std::string& msg) : std::runtime_error("divergence: " + msg) {}
};

struct UndefinedMetric : std::runtime_error {
  explicit UndefinedMetric(const std::string& msg) : std::runtime_error("undefined metric: " + msg) {}
};

struct AlignmentError : std::runtime_error {
  explicit AlignmentError(const std::string& msg) : std::runtime_error("alignment error: " + msg) {}
};

struct ModeError : std::runtime_error {
  explicit ModeError(const std::string& msg) : std::runtime_error("mode error: " + msg) {}
};

struct DataError : std::runtime_error {
  explicit DataError(const std::string& msg) : std::runtime_error("data error: " + msg) {}
};

}  // namespace echopick
