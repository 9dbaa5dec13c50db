#pragma once

#include <array>
#include <bit>
#include <cstdint>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <iterator>
#include <optional>
#include <string>
#include <vector>

#include <zlib.h>

#include "memgan/error.hpp"
#include "memgan/gan.hpp"

namespace memgan {

// Layout (all integers little-endian, doubles as IEEE-754 bit patterns):
//   "MGANCKPT" | u32 version | u32 section count
//   per section: u32 tag | u64 length | payload | u32 CRC-32 of payload
// Sections: DEVC (device), META (counters, streams, loss history),
// NETG / NETD (topology, crossbar cells and weight accumulator of the
// generator / discriminator).

inline constexpr std::array<char, 8> kCheckpointMagic = {'M', 'G', 'A', 'N', 'C', 'K', 'P', 'T'};
inline constexpr std::uint32_t kCheckpointVersion = 1;

namespace ckpt {

constexpr std::uint32_t tag(const char (&s)[5]) {
  return std::uint32_t(std::uint8_t(s[0])) | std::uint32_t(std::uint8_t(s[1])) << 8 |
         std::uint32_t(std::uint8_t(s[2])) << 16 | std::uint32_t(std::uint8_t(s[3])) << 24;
}

class Writer {
 public:
  void u8(std::uint8_t v) { bytes_.push_back(v); }
  void u32(std::uint32_t v) {
    for (int i = 0; i < 4; ++i) bytes_.push_back(std::uint8_t(v >> (8 * i)));
  }
  void u64(std::uint64_t v) {
    for (int i = 0; i < 8; ++i) bytes_.push_back(std::uint8_t(v >> (8 * i)));
  }
  void f64(double v) { u64(std::bit_cast<std::uint64_t>(v)); }
  void shape(const Shape& s) {
    u64(s.size());
    for (auto d : s) u64(d);
  }
  void raw(const std::vector<std::uint8_t>& b) { bytes_.insert(bytes_.end(), b.begin(), b.end()); }
  std::vector<std::uint8_t>& bytes() { return bytes_; }

 private:
  std::vector<std::uint8_t> bytes_;
};

class Reader {
 public:
  Reader(const std::uint8_t* data, std::size_t size) : data_(data), size_(size) {}

  std::uint8_t u8() { return *take(1); }
  std::uint32_t u32() {
    const auto* p = take(4);
    std::uint32_t v = 0;
    for (int i = 0; i < 4; ++i) v |= std::uint32_t(p[i]) << (8 * i);
    return v;
  }
  std::uint64_t u64() {
    const auto* p = take(8);
    std::uint64_t v = 0;
    for (int i = 0; i < 8; ++i) v |= std::uint64_t(p[i]) << (8 * i);
    return v;
  }
  double f64() { return std::bit_cast<double>(u64()); }
  Shape shape() {
    Shape s(checked_count(u64(), 8));
    for (auto& d : s) d = u64();
    return s;
  }
  const std::uint8_t* take(std::size_t n) {
    if (n > size_ - pos_) throw Error(ErrorCategory::format, "truncated checkpoint");
    const auto* p = data_ + pos_;
    pos_ += n;
    return p;
  }
  /// Guards element counts read from the file against the bytes left.
  std::size_t checked_count(std::uint64_t n, std::size_t element_bytes) const {
    if (n > (size_ - pos_) / element_bytes) throw Error(ErrorCategory::format, "truncated checkpoint");
    return static_cast<std::size_t>(n);
  }
  bool done() const { return pos_ == size_; }

 private:
  const std::uint8_t* data_;
  std::size_t size_;
  std::size_t pos_ = 0;
};

inline std::uint32_t crc(const std::vector<std::uint8_t>& b) {
  return static_cast<std::uint32_t>(::crc32(0L, b.data(), static_cast<uInt>(b.size())));
}

inline void write_device(Writer& w, const DeviceSpec& d) {
  w.f64(d.r_on);
  w.f64(d.r_off);
  w.f64(d.v_threshold);
  w.f64(d.v_write);
  w.f64(d.t_write);
  w.u64(d.n_levels);
}

inline DeviceSpec read_device(Reader& r) {
  DeviceSpec d;
  d.r_on = r.f64();
  d.r_off = r.f64();
  d.v_threshold = r.f64();
  d.v_write = r.f64();
  d.t_write = r.f64();
  d.n_levels = r.u64();
  return d;
}

inline void write_network(Writer& w, const Network& net) {
  const auto& topo = net.topology();
  w.u8(static_cast<std::uint8_t>(topo.role));
  w.u64(topo.layers.size());
  for (const auto& l : topo.layers) {
    w.u8(static_cast<std::uint8_t>(l.kind));
    w.u64(l.kernel_h);
    w.u64(l.kernel_w);
    w.u64(l.filters);
    w.u64(l.stride);
    w.u64(l.padding);
    w.u64(l.output_padding);
    w.f64(l.level);
    w.u8(l.bias ? 1 : 0);
    w.shape(l.in_shape);
    w.shape(l.out_shape);
  }
  w.u64(net.crossbars().size());
  for (const auto& x : net.crossbars()) {
    w.u64(x.rows());
    w.u64(x.cols());
    w.f64(x.w_max());
    w.f64(x.g_load());
    w.u8(x.quantized() ? 1 : 0);
    w.f64(x.variability().sigma_pct);
    w.u64(x.variability().seed);
    for (double g : x.g_mag_data()) w.f64(g);
    for (auto s : x.sign_data()) w.u8(static_cast<std::uint8_t>(s));
  }
}

inline Network read_network(Reader& r, const DeviceSpec& device) {
  NetworkTopology topo;
  const auto role = r.u8();
  if (role > 1) throw Error(ErrorCategory::format, "checkpoint: bad network role");
  topo.role = static_cast<NetworkRole>(role);
  const std::size_t n_layers = r.checked_count(r.u64(), 1);
  for (std::size_t i = 0; i < n_layers; ++i) {
    LayerDesc l;
    const auto kind = r.u8();
    if (kind > static_cast<std::uint8_t>(LayerKind::dropout)) throw Error(ErrorCategory::format, "checkpoint: bad layer kind");
    l.kind = static_cast<LayerKind>(kind);
    l.kernel_h = r.u64();
    l.kernel_w = r.u64();
    l.filters = r.u64();
    l.stride = r.u64();
    l.padding = r.u64();
    l.output_padding = r.u64();
    l.level = r.f64();
    l.bias = r.u8() != 0;
    l.in_shape = r.shape();
    l.out_shape = r.shape();
    topo.layers.push_back(std::move(l));
  }
  const std::size_t n_xbars = r.checked_count(r.u64(), 1);
  if (n_xbars != topo.crossbar_layers()) throw Error(ErrorCategory::format, "checkpoint: crossbar count mismatch");
  struct Cells {
    std::size_t rows, cols;
    double w_max, g_load;
    bool quantized;
    VariabilityModel var;
    std::vector<double> g;
    std::vector<std::int8_t> sign;
  };
  std::vector<Cells> cells;
  std::vector<double> scales;
  for (std::size_t k = 0; k < n_xbars; ++k) {
    Cells c;
    c.rows = r.u64();
    c.cols = r.u64();
    c.w_max = r.f64();
    c.g_load = r.f64();
    c.quantized = r.u8() != 0;
    c.var.sigma_pct = r.f64();
    c.var.seed = r.u64();
    const std::size_t n = r.checked_count(c.rows * c.cols, 9);
    c.g.resize(n);
    for (double& g : c.g) g = r.f64();
    c.sign.resize(n);
    for (auto& s : c.sign) s = static_cast<std::int8_t>(r.u8());
    scales.push_back(c.w_max);
    cells.push_back(std::move(c));
  }
  Network net(topo, device, scales);
  for (std::size_t k = 0; k < n_xbars; ++k) {
    auto& c = cells[k];
    auto& x = net.crossbars()[k];
    if (x.rows() != c.rows || x.cols() != c.cols) throw Error(ErrorCategory::format, "checkpoint: crossbar shape mismatch");
    x = CrossbarArray(device, c.rows, c.cols, c.w_max, c.quantized, c.var, c.g_load);
    x.set_cells(std::move(c.g), std::move(c.sign));
  }
  return net;
}

inline void write_accumulator(Writer& w, const WeightAccumulator& acc) {
  w.u64(acc.size());
  for (const auto& m : acc)
    for (double v : m.data()) w.f64(v);
}

inline WeightAccumulator read_accumulator(Reader& r, const Network& net) {
  if (r.u64() != net.crossbars().size()) throw Error(ErrorCategory::format, "checkpoint: accumulator count mismatch");
  WeightAccumulator acc;
  for (const auto& x : net.crossbars()) {
    Matrix m(x.rows(), r.checked_count(x.cols(), 1) ? x.cols() : 0);
    r.checked_count(m.size(), 8);
    for (double& v : m.data()) v = r.f64();
    acc.push_back(std::move(m));
  }
  return acc;
}

}  // namespace ckpt

/// Serializes a training state to bytes.
inline std::vector<std::uint8_t> encode_checkpoint(const TrainState& state) {
  using namespace ckpt;
  std::vector<std::pair<std::uint32_t, std::vector<std::uint8_t>>> sections;

  Writer dev;
  write_device(dev, state.generator.device());
  sections.emplace_back(tag("DEVC"), std::move(dev.bytes()));

  Writer meta;
  meta.u64(state.epoch);
  meta.u64(state.update_events);
  for (const Stream* s : {&state.streams.latent, &state.streams.leakage, &state.streams.dropout, &state.streams.shuffle}) {
    meta.u64(s->seed());
    meta.u64(s->counter());
  }
  meta.u64(state.history.size());
  for (const auto& h : state.history) {
    meta.u64(h.epoch);
    meta.f64(h.d_loss);
    meta.f64(h.g_loss);
  }
  sections.emplace_back(tag("META"), std::move(meta.bytes()));

  Writer g, d;
  write_network(g, state.generator);
  write_accumulator(g, state.generator_weights);
  write_network(d, state.discriminator);
  write_accumulator(d, state.discriminator_weights);
  sections.emplace_back(tag("NETG"), std::move(g.bytes()));
  sections.emplace_back(tag("NETD"), std::move(d.bytes()));

  Writer out;
  for (char c : kCheckpointMagic) out.u8(static_cast<std::uint8_t>(c));
  out.u32(kCheckpointVersion);
  out.u32(static_cast<std::uint32_t>(sections.size()));
  for (const auto& [t, payload] : sections) {
    out.u32(t);
    out.u64(payload.size());
    out.raw(payload);
    out.u32(crc(payload));
  }
  return std::move(out.bytes());
}

/// Parses checkpoint bytes. With `expected_device`, a stored device that
/// differs fails with "spec mismatch".
inline TrainState decode_checkpoint(const std::vector<std::uint8_t>& bytes,
                                    const std::optional<DeviceSpec>& expected_device = std::nullopt) {
  using namespace ckpt;
  Reader r(bytes.data(), bytes.size());
  if (bytes.size() < kCheckpointMagic.size() || std::memcmp(bytes.data(), kCheckpointMagic.data(), kCheckpointMagic.size()))
    throw Error(ErrorCategory::format, "bad checkpoint magic");
  r.take(kCheckpointMagic.size());
  const auto version = r.u32();
  if (version != kCheckpointVersion)
    throw Error(ErrorCategory::format, "checkpoint version mismatch: file " + std::to_string(version) + ", expected " +
                                           std::to_string(kCheckpointVersion));
  const auto n_sections = r.u32();

  std::vector<std::pair<std::uint32_t, std::vector<std::uint8_t>>> sections;
  for (std::uint32_t i = 0; i < n_sections; ++i) {
    const auto t = r.u32();
    const std::size_t len = r.checked_count(r.u64(), 1);
    const auto* p = r.take(len);
    std::vector<std::uint8_t> payload(p, p + len);
    if (r.u32() != crc(payload)) throw Error(ErrorCategory::format, "checkpoint checksum failure");
    sections.emplace_back(t, std::move(payload));
  }
  if (!r.done()) throw Error(ErrorCategory::format, "trailing bytes after checkpoint");

  const auto section = [&](std::uint32_t t) -> const std::vector<std::uint8_t>& {
    for (const auto& [st, payload] : sections)
      if (st == t) return payload;
    throw Error(ErrorCategory::format, "checkpoint: missing section");
  };

  const auto& dev_bytes = section(tag("DEVC"));
  Reader dr(dev_bytes.data(), dev_bytes.size());
  const DeviceSpec device = read_device(dr);
  validate(device);
  if (expected_device && !(*expected_device == device)) throw Error(ErrorCategory::config, "spec mismatch");

  TrainState state;
  const auto& meta = section(tag("META"));
  Reader mr(meta.data(), meta.size());
  state.epoch = mr.u64();
  state.update_events = mr.u64();
  for (Stream* s : {&state.streams.latent, &state.streams.leakage, &state.streams.dropout, &state.streams.shuffle}) {
    const auto seed = mr.u64();
    const auto counter = mr.u64();
    *s = Stream(seed, counter);
  }
  const std::size_t n_hist = mr.checked_count(mr.u64(), 24);
  for (std::size_t i = 0; i < n_hist; ++i) {
    EpochLoss h;
    h.epoch = mr.u64();
    h.d_loss = mr.f64();
    h.g_loss = mr.f64();
    state.history.push_back(h);
  }

  const auto& g = section(tag("NETG"));
  Reader gr(g.data(), g.size());
  state.generator = read_network(gr, device);
  state.generator_weights = read_accumulator(gr, state.generator);
  const auto& d = section(tag("NETD"));
  Reader drd(d.data(), d.size());
  state.discriminator = read_network(drd, device);
  state.discriminator_weights = read_accumulator(drd, state.discriminator);
  return state;
}

inline void save_checkpoint(const TrainState& state, const std::filesystem::path& path) {
  const auto bytes = encode_checkpoint(state);
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error(ErrorCategory::io, "cannot write checkpoint " + path.string());
  out.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
  if (!out) throw Error(ErrorCategory::io, "failed writing checkpoint " + path.string());
}

inline TrainState load_checkpoint(const std::filesystem::path& path,
                                  const std::optional<DeviceSpec>& expected_device = std::nullopt) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(ErrorCategory::io, "cannot open checkpoint " + path.string());
  const std::vector<std::uint8_t> bytes{std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
  return decode_checkpoint(bytes, expected_device);
}

}  // namespace memgan
