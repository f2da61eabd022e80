// echopick - multi-echo LiDAR denoising toolkit
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstdint>
#include <cstring>
#include <string>

#include "echopick/errors.hpp"
#include "echopick/io.hpp"
#include "echopick/net.hpp"
#include "echopick/neighbors.hpp"
#include "echopick/train.hpp"

namespace echopick {

// ".smed" checkpoint, little-endian:
//   magic "SMED" | version u32 = 1
//   network config: channels u32 | residual_blocks u32 | widths u32 x blocks
//                   | activation u32 | k u32 | num_echoes u32 | param_seed u64
//   encoder config: k u32 | cutoff_radius f32 | window_rows u32
//                   | window_cols u32 | mode u32
//   two tensor sections (coordinate learner, then correlation learner):
//     tensor_count u32, then per tensor:
//       name_len u32 | name bytes | ndim u32 | dims u32... | data f32 x n

namespace detail {

constexpr char kCheckpointMagic[4] = {'S', 'M', 'E', 'D'};

inline void put_u64(std::string& out, std::uint64_t v) {
  for (int i = 0; i < 8; ++i) out.push_back(static_cast<char>((v >> (8 * i)) & 0xff));
}

struct Reader {
  const unsigned char* p;
  const unsigned char* end;
  std::string path;

  void need(std::size_t n) const {
    if (static_cast<std::size_t>(end - p) < n) throw FormatError("truncated checkpoint " + path);
  }
  std::uint32_t u32() {
    need(4);
    std::uint32_t v = get_u32(p);
    p += 4;
    return v;
  }
  std::uint64_t u64() {
    need(8);
    std::uint64_t v = 0;
    for (int i = 0; i < 8; ++i) v |= static_cast<std::uint64_t>(p[i]) << (8 * i);
    p += 8;
    return v;
  }
  float f32() {
    need(4);
    float v = get_f32(p);
    p += 4;
    return v;
  }
  std::string bytes(std::size_t n) {
    need(n);
    std::string s(reinterpret_cast<const char*>(p), n);
    p += n;
    return s;
  }
};

inline void write_store(std::string& out, const ParameterStore& store) {
  put_u32(out, static_cast<std::uint32_t>(store.tensors.size()));
  for (const auto& t : store.tensors) {
    put_u32(out, static_cast<std::uint32_t>(t.name.size()));
    out.append(t.name);
    put_u32(out, static_cast<std::uint32_t>(t.shape.size()));
    for (int d : t.shape) put_u32(out, static_cast<std::uint32_t>(d));
    for (double v : t.value) put_f32(out, static_cast<float>(v));
  }
}

inline void read_store(Reader& r, ParameterStore& store) {
  const std::uint32_t count = r.u32();
  if (count != store.tensors.size())
    throw FormatError("tensor count mismatch in " + r.path);
  for (auto& t : store.tensors) {
    const std::uint32_t name_len = r.u32();
    const std::string name = r.bytes(name_len);
    if (name != t.name) throw FormatError("unexpected tensor " + name + " in " + r.path);
    const std::uint32_t ndim = r.u32();
    if (ndim != t.shape.size()) throw FormatError("tensor rank mismatch in " + r.path);
    for (std::size_t i = 0; i < t.shape.size(); ++i)
      if (r.u32() != static_cast<std::uint32_t>(t.shape[i]))
        throw FormatError("tensor shape mismatch in " + r.path);
    for (double& v : t.value) v = static_cast<double>(r.f32());
  }
}

}  // namespace detail

struct Checkpoint {
  NetworkConfig net_cfg;
  EncoderConfig enc_cfg;
  ParameterStore coordinate;
  ParameterStore correlation;
};

inline void write_checkpoint(const std::string& path, const NetworkConfig& net_cfg,
                             const EncoderConfig& enc_cfg, const ParameterStore& coordinate,
                             const ParameterStore& correlation) {
  std::string out;
  out.append(detail::kCheckpointMagic, 4);
  detail::put_u32(out, 1);
  detail::put_u32(out, static_cast<std::uint32_t>(net_cfg.channels));
  detail::put_u32(out, static_cast<std::uint32_t>(net_cfg.residual_blocks));
  for (int w : net_cfg.effective_widths()) detail::put_u32(out, static_cast<std::uint32_t>(w));
  detail::put_u32(out, static_cast<std::uint32_t>(net_cfg.activation));
  detail::put_u32(out, static_cast<std::uint32_t>(net_cfg.k));
  detail::put_u32(out, static_cast<std::uint32_t>(net_cfg.num_echoes));
  detail::put_u64(out, net_cfg.param_seed);
  detail::put_u32(out, static_cast<std::uint32_t>(enc_cfg.k));
  detail::put_f32(out, static_cast<float>(enc_cfg.cutoff_radius));
  detail::put_u32(out, static_cast<std::uint32_t>(enc_cfg.window_rows));
  detail::put_u32(out, static_cast<std::uint32_t>(enc_cfg.window_cols));
  detail::put_u32(out, static_cast<std::uint32_t>(enc_cfg.mode));
  detail::write_store(out, coordinate);
  detail::write_store(out, correlation);
  detail::spit(path, out);
}

inline void write_checkpoint(const std::string& path, const TrainResult& result) {
  write_checkpoint(path, result.net_cfg, result.enc_cfg, result.coordinate, result.correlation);
}

inline Checkpoint read_checkpoint(const std::string& path) {
  const std::string data = detail::slurp(path);
  detail::Reader r{reinterpret_cast<const unsigned char*>(data.data()),
                   reinterpret_cast<const unsigned char*>(data.data()) + data.size(), path};
  r.need(8);
  if (std::memcmp(r.p, detail::kCheckpointMagic, 4) != 0)
    throw FormatError("bad magic in " + path);
  r.p += 4;
  const std::uint32_t version = r.u32();
  if (version != 1) throw FormatError("unsupported checkpoint version in " + path);

  Checkpoint ck;
  ck.net_cfg.channels = static_cast<int>(r.u32());
  ck.net_cfg.residual_blocks = static_cast<int>(r.u32());
  ck.net_cfg.widths.resize(ck.net_cfg.residual_blocks);
  for (int& w : ck.net_cfg.widths) w = static_cast<int>(r.u32());
  ck.net_cfg.activation = static_cast<Activation>(r.u32());
  ck.net_cfg.k = static_cast<int>(r.u32());
  ck.net_cfg.num_echoes = static_cast<int>(r.u32());
  ck.net_cfg.param_seed = r.u64();
  ck.enc_cfg.k = static_cast<int>(r.u32());
  ck.enc_cfg.cutoff_radius = static_cast<double>(r.f32());
  ck.enc_cfg.window_rows = static_cast<int>(r.u32());
  ck.enc_cfg.window_cols = static_cast<int>(r.u32());
  ck.enc_cfg.mode = static_cast<NeighborMode>(r.u32());
  ck.net_cfg.check();
  ck.enc_cfg.check();

  Network coo(ck.net_cfg), cor(ck.net_cfg);
  ck.coordinate = coo.params();
  ck.correlation = cor.params();
  detail::read_store(r, ck.coordinate);
  detail::read_store(r, ck.correlation);
  if (r.p != r.end) throw FormatError("trailing bytes in " + path);
  return ck;
}

// Loss-history CSV: "epoch,mean_loss,lr" with one row per epoch.
inline void write_loss_log(const std::string& path, const std::vector<EpochLog>& log) {
  std::string out = "epoch,mean_loss,lr\n";
  char buf[96];
  for (const EpochLog& entry : log) {
    std::snprintf(buf, sizeof buf, "%d,%.17g,%.17g\n", entry.epoch, entry.mean_loss,
                  entry.learning_rate);
    out.append(buf);
  }
  detail::spit(path, out);
}

inline std::vector<EpochLog> read_loss_log(const std::string& path) {
  const std::string data = detail::slurp(path);
  std::vector<EpochLog> log;
  std::size_t pos = 0;
  bool header = true;
  while (pos < data.size()) {
    std::size_t eol = data.find('\n', pos);
    if (eol == std::string::npos) eol = data.size();
    const std::string line = data.substr(pos, eol - pos);
    pos = eol + 1;
    if (line.empty()) continue;
    if (header) {
      if (line != "epoch,mean_loss,lr") throw FormatError("bad loss-log header in " + path);
      header = false;
      continue;
    }
    EpochLog entry;
    if (std::sscanf(line.c_str(), "%d,%lf,%lf", &entry.epoch, &entry.mean_loss,
                    &entry.learning_rate) != 3)
      throw FormatError("bad loss-log row in " + path);
    log.push_back(entry);
  }
  if (header) throw FormatError("empty loss log " + path);
  return log;
}

}  // namespace echopick
