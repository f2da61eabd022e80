// echopick - multi-echo LiDAR denoising toolkit
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstdint>
#include <cstring>
#include <fstream>
#include <string>
#include <vector>

#include "echopick/errors.hpp"
#include "echopick/types.hpp"

namespace echopick {

// Binary interchange formats, little-endian throughout.
//
// ".meoc" ordered cloud:
//   magic "MEOC" | version u32 = 1 | H u32 | W u32 | Ne u32
//   H*W*Ne records in (h, w, e) row-major order:
//     x f32 | y f32 | z f32 | intensity_raw f32 | valid u8 | 3 zero bytes
//   H*W angle pairs in (h, w) row-major order: theta f32 | phi f32
//
// ".mel" label / class grid: same header, then one u8 per cell-echo.
//   Ground truth uses 0=empty 1=valid_object 2=noise_particle 3=artifact.
//   Prediction files reuse the channel with 1=kept strongest, 4=kept
//   substitute, 0=discarded or empty.
//
// The fixed record stride keeps round trips bit-exact and files scannable
// without parsing state.

namespace detail {

constexpr char kCloudMagic[4] = {'M', 'E', 'O', 'C'};
constexpr std::uint32_t kFormatVersion = 1;
constexpr std::size_t kRecordBytes = 20;
constexpr std::size_t kHeaderBytes = 4 + 4 + 12;
constexpr std::uint64_t kMaxCells = 1ull << 31;

inline void put_u32(std::string& out, std::uint32_t v) {
  for (int i = 0; i < 4; ++i) out.push_back(static_cast<char>((v >> (8 * i)) & 0xff));
}
inline void put_f32(std::string& out, float v) {
  std::uint32_t bits;
  std::memcpy(&bits, &v, 4);
  put_u32(out, bits);
}
inline std::uint32_t get_u32(const unsigned char* p) {
  return static_cast<std::uint32_t>(p[0]) | (static_cast<std::uint32_t>(p[1]) << 8) |
         (static_cast<std::uint32_t>(p[2]) << 16) | (static_cast<std::uint32_t>(p[3]) << 24);
}
inline float get_f32(const unsigned char* p) {
  std::uint32_t bits = get_u32(p);
  float v;
  std::memcpy(&v, &bits, 4);
  return v;
}

inline std::string slurp(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open " + path);
  std::string data((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
  if (!in.good() && !in.eof()) throw IoError("read failed on " + path);
  return data;
}

inline void spit(const std::string& path, const std::string& data) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw IoError("cannot open " + path + " for writing");
  out.write(data.data(), static_cast<std::streamsize>(data.size()));
  out.flush();
  if (!out.good()) throw IoError("write failed on " + path);
}

struct Header {
  std::uint32_t h, w, e;
};

inline Header parse_header(const std::string& data, const std::string& path) {
  if (data.size() < kHeaderBytes) throw FormatError("truncated header in " + path);
  if (std::memcmp(data.data(), kCloudMagic, 4) != 0)
    throw FormatError("bad magic in " + path);
  const auto* p = reinterpret_cast<const unsigned char*>(data.data());
  const std::uint32_t version = get_u32(p + 4);
  if (version != kFormatVersion)
    throw FormatError("unsupported version " + std::to_string(version) + " in " + path);
  Header hd{get_u32(p + 8), get_u32(p + 12), get_u32(p + 16)};
  if (hd.h < 1 || hd.w < 1 || hd.e < 1)
    throw FormatError("declared sizes must be >= 1 in " + path);
  if (static_cast<std::uint64_t>(hd.h) * hd.w * hd.e > kMaxCells)
    throw FormatError("declared sizes too large in " + path);
  return hd;
}

inline std::string encode_header(std::uint32_t h, std::uint32_t w, std::uint32_t e) {
  std::string out;
  out.append(kCloudMagic, 4);
  put_u32(out, kFormatVersion);
  put_u32(out, h);
  put_u32(out, w);
  put_u32(out, e);
  return out;
}

}  // namespace detail

inline void write_cloud(const MultiEchoOrderedCloud& cloud, const std::string& path) {
  std::string out = detail::encode_header(cloud.height(), cloud.width(), cloud.num_echoes());
  out.reserve(detail::kHeaderBytes + cloud.cell_count() * detail::kRecordBytes +
              static_cast<std::size_t>(cloud.height()) * cloud.width() * 8);
  for (int h = 0; h < cloud.height(); ++h)
    for (int w = 0; w < cloud.width(); ++w)
      for (int e = 0; e < cloud.num_echoes(); ++e) {
        const PointRecord& r = cloud.at(h, w, e);
        detail::put_f32(out, r.x);
        detail::put_f32(out, r.y);
        detail::put_f32(out, r.z);
        detail::put_f32(out, r.intensity_raw);
        out.push_back(r.valid ? 1 : 0);
        out.append(3, '\0');
      }
  for (int h = 0; h < cloud.height(); ++h)
    for (int w = 0; w < cloud.width(); ++w) {
      detail::put_f32(out, cloud.theta(h, w));
      detail::put_f32(out, cloud.phi(h, w));
    }
  detail::spit(path, out);
}

inline MultiEchoOrderedCloud read_cloud(const std::string& path) {
  const std::string data = detail::slurp(path);
  const detail::Header hd = detail::parse_header(data, path);
  const std::size_t cells = static_cast<std::size_t>(hd.h) * hd.w * hd.e;
  const std::size_t expect = detail::kHeaderBytes + cells * detail::kRecordBytes +
                             static_cast<std::size_t>(hd.h) * hd.w * 8;
  if (data.size() != expect)
    throw FormatError("size mismatch in " + path + ": expected " + std::to_string(expect) +
                      " bytes, got " + std::to_string(data.size()));

  CloudBuilder builder(static_cast<int>(hd.h), static_cast<int>(hd.w), static_cast<int>(hd.e));
  const auto* p = reinterpret_cast<const unsigned char*>(data.data()) + detail::kHeaderBytes;
  for (std::uint32_t h = 0; h < hd.h; ++h)
    for (std::uint32_t w = 0; w < hd.w; ++w)
      for (std::uint32_t e = 0; e < hd.e; ++e) {
        PointRecord r;
        r.x = detail::get_f32(p);
        r.y = detail::get_f32(p + 4);
        r.z = detail::get_f32(p + 8);
        r.intensity_raw = detail::get_f32(p + 12);
        if (p[16] > 1) throw FormatError("valid flag must be 0 or 1 in " + path);
        r.valid = p[16] == 1;
        p += detail::kRecordBytes;
        builder.set_record(static_cast<int>(h), static_cast<int>(w), static_cast<int>(e), r);
      }
  for (std::uint32_t h = 0; h < hd.h; ++h)
    for (std::uint32_t w = 0; w < hd.w; ++w) {
      builder.set_angles(static_cast<int>(h), static_cast<int>(w), detail::get_f32(p),
                         detail::get_f32(p + 4));
      p += 8;
    }
  return builder.build();  // throws InvariantError on bad echo ordering etc.
}

// Label / class grids share the cloud header.
inline void write_labels(const Grid3<std::uint8_t>& grid, const std::string& path) {
  std::string out = detail::encode_header(grid.height, grid.width, grid.echoes);
  out.reserve(out.size() + grid.size());
  for (std::uint8_t v : grid.values) out.push_back(static_cast<char>(v));
  detail::spit(path, out);
}

inline void write_labels(const LabelGrid& labels, const std::string& path) {
  Grid3<std::uint8_t> raw(labels.height, labels.width, labels.echoes);
  for (std::size_t i = 0; i < labels.values.size(); ++i)
    raw.values[i] = static_cast<std::uint8_t>(labels.values[i]);
  write_labels(raw, path);
}

inline Grid3<std::uint8_t> read_label_bytes(const std::string& path) {
  const std::string data = detail::slurp(path);
  const detail::Header hd = detail::parse_header(data, path);
  const std::size_t cells = static_cast<std::size_t>(hd.h) * hd.w * hd.e;
  if (data.size() != detail::kHeaderBytes + cells)
    throw FormatError("size mismatch in " + path);
  Grid3<std::uint8_t> grid(static_cast<int>(hd.h), static_cast<int>(hd.w), static_cast<int>(hd.e));
  const auto* p = reinterpret_cast<const unsigned char*>(data.data()) + detail::kHeaderBytes;
  for (std::size_t i = 0; i < cells; ++i) {
    if (p[i] > 4) throw FormatError("label value " + std::to_string(p[i]) + " out of range in " + path);
    grid.values[i] = p[i];
  }
  return grid;
}

inline LabelGrid read_labels(const std::string& path) {
  Grid3<std::uint8_t> raw = read_label_bytes(path);
  LabelGrid labels(raw.height, raw.width, raw.echoes);
  for (std::size_t i = 0; i < raw.values.size(); ++i) {
    if (raw.values[i] > 3)
      throw FormatError("ground-truth label value " + std::to_string(raw.values[i]) +
                        " out of range in " + path);
    labels.values[i] = static_cast<PointLabel>(raw.values[i]);
  }
  return labels;
}

}  // namespace echopick
