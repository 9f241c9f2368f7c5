// Copyright 2026 The FarNet Authors
// SPDX-License-Identifier: Apache-2.0

#include "farnet/checkpoint.hpp"

#include <algorithm>
#include <bit>
#include <cstring>
#include <fstream>
#include <iterator>

#include "farnet/errors.hpp"

namespace farnet {

namespace {

constexpr char kMagic[4] = {'F', 'A', 'R', 'N'};

class Writer {
 public:
  void bytes(const void* p, std::size_t n) {
    const auto* b = static_cast<const std::uint8_t*>(p);
    out_.insert(out_.end(), b, b + n);
  }
  void u8(std::uint8_t v) { out_.push_back(v); }
  void u32(std::uint32_t v) {
    for (int i = 0; i < 4; ++i) out_.push_back(static_cast<std::uint8_t>(v >> (8 * i)));
  }
  void u64(std::uint64_t v) {
    for (int i = 0; i < 8; ++i) out_.push_back(static_cast<std::uint8_t>(v >> (8 * i)));
  }
  void f64(double v) { u64(std::bit_cast<std::uint64_t>(v)); }
  void f64s(const std::vector<double>& v) {
    for (double x : v) f64(x);
  }
  void string(const std::string& s, bool wide) {
    if (wide) {
      u64(s.size());
    } else {
      u32(static_cast<std::uint32_t>(s.size()));
    }
    bytes(s.data(), s.size());
  }
  std::vector<std::uint8_t> take() { return std::move(out_); }

 private:
  std::vector<std::uint8_t> out_;
};

class Reader {
 public:
  explicit Reader(const std::vector<std::uint8_t>& in) : in_(in) {}
  const std::uint8_t* take(std::size_t n, const char* what) {
    if (n > in_.size() - pos_) throw CheckpointError(std::string("checkpoint truncated reading ") + what);
    const auto* p = in_.data() + pos_;
    pos_ += n;
    return p;
  }
  std::uint8_t u8(const char* what) { return *take(1, what); }
  std::uint32_t u32(const char* what) {
    const auto* p = take(4, what);
    std::uint32_t v = 0;
    for (int i = 0; i < 4; ++i) v |= static_cast<std::uint32_t>(p[i]) << (8 * i);
    return v;
  }
  std::uint64_t u64(const char* what) {
    const auto* p = take(8, what);
    std::uint64_t v = 0;
    for (int i = 0; i < 8; ++i) v |= static_cast<std::uint64_t>(p[i]) << (8 * i);
    return v;
  }
  double f64(const char* what) { return std::bit_cast<double>(u64(what)); }
  std::vector<double> f64s(std::size_t n, const char* what) {
    if (n > (in_.size() - pos_) / 8) throw CheckpointError(std::string("checkpoint truncated reading ") + what);
    std::vector<double> v(n);
    for (auto& x : v) x = f64(what);
    return v;
  }
  std::string string(std::uint64_t n, const char* what) {
    const auto* p = take(n, what);
    return {reinterpret_cast<const char*>(p), n};
  }
  bool done() const { return pos_ == in_.size(); }

 private:
  const std::vector<std::uint8_t>& in_;
  std::size_t pos_ = 0;
};

}  // namespace

std::vector<std::uint8_t> Checkpoint::serialize() const {
  Writer w;
  w.bytes(kMagic, 4);
  w.u32(kFormatVersion);
  w.string(config_text, true);
  w.u64(parameters.size());
  for (const auto& p : parameters) {
    if (shape_size(p.shape) != p.values.size()) {
      throw CheckpointError("parameter " + p.name + ": shape " + shape_string(p.shape) + " does not match " +
                            std::to_string(p.values.size()) + " values");
    }
    w.string(p.name, false);
    w.u32(static_cast<std::uint32_t>(p.shape.size()));
    for (auto d : p.shape) w.u64(d);
    w.f64s(p.values);
  }
  if (optimizer.first_moment.size() != optimizer.second_moment.size()) {
    throw CheckpointError("optimizer moment lists differ in length");
  }
  w.u64(optimizer.step);
  w.u64(optimizer.first_moment.size());
  for (std::size_t i = 0; i < optimizer.first_moment.size(); ++i) {
    const auto& m = optimizer.first_moment[i];
    const auto& v = optimizer.second_moment[i];
    if (m.size() != v.size()) throw CheckpointError("optimizer moments differ in size");
    w.u64(m.size());
    w.f64s(m);
    w.f64s(v);
  }
  w.u64(epoch);
  w.u64(rng_seed);
  w.u64(rng_counter);
  w.u8(stats_initialized ? 1 : 0);
  w.f64(running_stats.mean);
  w.f64(running_stats.stddev);
  return w.take();
}

Checkpoint Checkpoint::deserialize(const std::vector<std::uint8_t>& bytes) {
  Reader r(bytes);
  if (std::memcmp(r.take(4, "magic"), kMagic, 4) != 0) throw CheckpointError("not a checkpoint: bad magic");
  const auto version = r.u32("format version");
  if (version != kFormatVersion) {
    throw CheckpointError("unsupported checkpoint version " + std::to_string(version) + " (expected " +
                          std::to_string(kFormatVersion) + ")");
  }
  Checkpoint c;
  c.config_text = r.string(r.u64("config length"), "config");
  const auto count = r.u64("parameter count");
  for (std::uint64_t i = 0; i < count; ++i) {
    NamedArray p;
    p.name = r.string(r.u32("name length"), "parameter name");
    const auto rank = r.u32("rank");
    for (std::uint32_t d = 0; d < rank; ++d) p.shape.push_back(r.u64("dims"));
    if (rank == 0 || std::find(p.shape.begin(), p.shape.end(), 0) != p.shape.end()) {
      throw CheckpointError("parameter " + p.name + ": invalid shape " + shape_string(p.shape));
    }
    p.values = r.f64s(shape_size(p.shape), "parameter values");
    c.parameters.push_back(std::move(p));
  }
  c.optimizer.step = r.u64("optimizer step");
  const auto slots = r.u64("optimizer slot count");
  for (std::uint64_t i = 0; i < slots; ++i) {
    const auto n = r.u64("moment size");
    c.optimizer.first_moment.push_back(r.f64s(n, "first moment"));
    c.optimizer.second_moment.push_back(r.f64s(n, "second moment"));
  }
  c.epoch = r.u64("epoch");
  c.rng_seed = r.u64("rng seed");
  c.rng_counter = r.u64("rng counter");
  const auto flag = r.u8("stats flag");
  if (flag > 1) throw CheckpointError("invalid running-stats flag");
  c.stats_initialized = flag == 1;
  c.running_stats.mean = r.f64("stats mean");
  c.running_stats.stddev = r.f64("stats stddev");
  if (!r.done()) throw CheckpointError("trailing bytes after checkpoint payload");
  return c;
}

void Checkpoint::save(const std::filesystem::path& path) const {
  const auto bytes = serialize();
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw CheckpointError("cannot write checkpoint: " + path.string());
  out.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
  if (!out) throw CheckpointError("failed writing checkpoint: " + path.string());
}

Checkpoint Checkpoint::load(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw CheckpointError("cannot open checkpoint: " + path.string());
  std::vector<std::uint8_t> bytes((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
  return deserialize(bytes);
}

std::vector<NamedArray> Checkpoint::capture(const NamedParameters& params) {
  std::vector<NamedArray> out;
  out.reserve(params.size());
  for (const auto& [name, t] : params) {
    out.push_back({name, t.shape(), std::vector<double>(t.data().begin(), t.data().end())});
  }
  return out;
}

void Checkpoint::restore_parameters(const NamedParameters& params) const {
  if (params.size() != parameters.size()) {
    throw CheckpointError("checkpoint holds " + std::to_string(parameters.size()) + " parameters, model has " +
                          std::to_string(params.size()));
  }
  for (std::size_t i = 0; i < params.size(); ++i) {
    const auto& [name, t] = params[i];
    const auto& saved = parameters[i];
    if (saved.name != name) throw CheckpointError("parameter " + std::to_string(i) + ": expected " + name + ", found " + saved.name);
    if (saved.shape != t.shape()) {
      throw CheckpointError("parameter " + name + ": shape " + shape_string(saved.shape) + " vs model " +
                            shape_string(t.shape()));
    }
    Tensor handle = t;
    std::copy(saved.values.begin(), saved.values.end(), handle.data().begin());
  }
}

}  // namespace farnet
