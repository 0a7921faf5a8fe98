// Copyright 2026 The t2v Authors. All Rights Reserved.
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#ifndef T2V_CHECKPOINT_HPP
#define T2V_CHECKPOINT_HPP

#include <bit>
#include <cstdint>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>
#include <vector>

#include "t2v/errors.hpp"
#include "t2v/optimizer.hpp"
#include "t2v/tensor.hpp"

namespace t2v {

// Binary layout, all integers little-endian:
//
//   "T2VCKPT1"                     8-byte magic
//   u32 format version (1)
//   u64 epochs completed
//   u64 config hash (FNV-1a of the config JSON)
//   str config JSON
//   u32 count, then named tensors  model parameters
//   u64 optimizer step
//   u32 count, then named tensors  optimizer slots ("m/<p>", "v/<p>", "slow/<p>")
//   f64 best validation metric, u64 best epoch
//   str generator state
//
// str = u32 byte length + UTF-8 bytes
// named tensor = str name, u32 rank, u64 dims[rank], f64 values[prod(dims)]

inline constexpr char kCheckpointMagic[8] = {'T', '2', 'V', 'C', 'K', 'P', 'T', '1'};

struct NamedTensor {
  std::string name;
  Tensor<double> value;
  friend bool operator==(const NamedTensor&, const NamedTensor&) = default;
};

struct Checkpoint {
  std::uint64_t epoch = 0;
  std::uint64_t config_hash = 0;
  std::string config_json;
  std::vector<NamedTensor> params;
  std::uint64_t optimizer_step = 0;
  std::vector<NamedTensor> optimizer;
  double best_metric = -1.0;
  std::uint64_t best_epoch = 0;
  std::string rng_state;

  const Tensor<double>* find_param(const std::string& name) const {
    for (const auto& p : params)
      if (p.name == name) return &p.value;
    return nullptr;
  }
};

inline std::uint64_t fnv1a64(std::string_view s) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char c : s) {
    h ^= c;
    h *= 0x100000001b3ULL;
  }
  return h;
}

namespace detail {

class ByteWriter {
 public:
  void u32(std::uint32_t v) { put(v, 4); }
  void u64(std::uint64_t v) { put(v, 8); }
  void f64(double v) { put(std::bit_cast<std::uint64_t>(v), 8); }
  void raw(const char* p, std::size_t n) { buf_.append(p, n); }
  void str(const std::string& s) {
    u32(static_cast<std::uint32_t>(s.size()));
    buf_ += s;
  }
  void tensor(const NamedTensor& t) {
    str(t.name);
    u32(static_cast<std::uint32_t>(t.value.rank()));
    for (auto d : t.value.shape()) u64(d);
    for (double v : t.value.values()) f64(v);
  }
  const std::string& bytes() const { return buf_; }

 private:
  void put(std::uint64_t v, int n) {
    for (int i = 0; i < n; ++i) buf_.push_back(static_cast<char>((v >> (8 * i)) & 0xff));
  }
  std::string buf_;
};

class ByteReader {
 public:
  explicit ByteReader(std::string data) : data_(std::move(data)) {}
  std::uint32_t u32() { return static_cast<std::uint32_t>(get(4)); }
  std::uint64_t u64() { return get(8); }
  double f64() { return std::bit_cast<double>(get(8)); }
  std::string raw(std::size_t n) {
    need(n);
    std::string s = data_.substr(pos_, n);
    pos_ += n;
    return s;
  }
  std::string str() { return raw(u32()); }
  NamedTensor tensor() {
    NamedTensor t;
    t.name = str();
    const std::uint32_t rank = u32();
    if (rank > 8) throw DataError("checkpoint: implausible tensor rank for '" + t.name + "'");
    Shape shape(rank);
    for (auto& d : shape) d = u64();
    const std::size_t n = shape_numel(shape);
    need(n * 8);
    std::vector<double> vals(n);
    for (auto& v : vals) v = f64();
    t.value = Tensor<double>(std::move(shape), std::move(vals));
    return t;
  }
  bool at_end() const { return pos_ == data_.size(); }

 private:
  void need(std::size_t n) const {
    if (pos_ + n > data_.size()) throw DataError("checkpoint: truncated file");
  }
  std::uint64_t get(int n) {
    need(static_cast<std::size_t>(n));
    std::uint64_t v = 0;
    for (int i = 0; i < n; ++i) v |= std::uint64_t(static_cast<unsigned char>(data_[pos_ + i])) << (8 * i);
    pos_ += static_cast<std::size_t>(n);
    return v;
  }
  std::string data_;
  std::size_t pos_ = 0;
};

}  // namespace detail

inline std::string serialize_checkpoint(const Checkpoint& c) {
  detail::ByteWriter w;
  w.raw(kCheckpointMagic, sizeof kCheckpointMagic);
  w.u32(1);
  w.u64(c.epoch);
  w.u64(c.config_hash);
  w.str(c.config_json);
  w.u32(static_cast<std::uint32_t>(c.params.size()));
  for (const auto& t : c.params) w.tensor(t);
  w.u64(c.optimizer_step);
  w.u32(static_cast<std::uint32_t>(c.optimizer.size()));
  for (const auto& t : c.optimizer) w.tensor(t);
  w.f64(c.best_metric);
  w.u64(c.best_epoch);
  w.str(c.rng_state);
  return w.bytes();
}

inline Checkpoint deserialize_checkpoint(std::string bytes) {
  detail::ByteReader r(std::move(bytes));
  if (r.raw(sizeof kCheckpointMagic) != std::string(kCheckpointMagic, sizeof kCheckpointMagic))
    throw DataError("not a checkpoint: bad magic");
  const auto version = r.u32();
  if (version != 1) throw DataError("unsupported checkpoint version " + std::to_string(version));
  Checkpoint c;
  c.epoch = r.u64();
  c.config_hash = r.u64();
  c.config_json = r.str();
  if (fnv1a64(c.config_json) != c.config_hash) throw DataError("checkpoint: config hash mismatch");
  for (std::uint32_t n = r.u32(); n > 0; --n) c.params.push_back(r.tensor());
  c.optimizer_step = r.u64();
  for (std::uint32_t n = r.u32(); n > 0; --n) c.optimizer.push_back(r.tensor());
  c.best_metric = r.f64();
  c.best_epoch = r.u64();
  c.rng_state = r.str();
  if (!r.at_end()) throw DataError("checkpoint: trailing bytes");
  return c;
}

inline void save_checkpoint(const Checkpoint& c, const std::filesystem::path& path) {
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  const std::string bytes = serialize_checkpoint(c);
  std::ofstream os(path, std::ios::binary | std::ios::trunc);
  if (!os) throw DataError("cannot write checkpoint: " + path.string());
  os.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
  if (!os) throw DataError("failed writing checkpoint: " + path.string());
}

inline Checkpoint load_checkpoint(const std::filesystem::path& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw DataError("cannot open checkpoint: " + path.string());
  std::ostringstream ss;
  ss << is.rdbuf();
  return deserialize_checkpoint(ss.str());
}

template <class Real>
std::vector<NamedTensor> export_params(const ParameterSet<Real>& ps) {
  std::vector<NamedTensor> out;
  for (const auto& p : ps) out.push_back({p->name(), p->value().template cast<double>()});
  return out;
}

template <class Real>
void import_params(ParameterSet<Real>& ps, const std::vector<NamedTensor>& tensors) {
  if (tensors.size() != ps.size())
    throw DataError("checkpoint holds " + std::to_string(tensors.size()) + " tensors, model has " +
                    std::to_string(ps.size()));
  for (const auto& t : tensors) {
    if (!ps.contains(t.name)) throw DataError("checkpoint tensor '" + t.name + "' is not a model parameter");
    auto& dst = ps.at(t.name).value();
    if (dst.shape() != t.value.shape())
      throw DataError("checkpoint tensor '" + t.name + "' has shape " + shape_str(t.value.shape()) +
                      ", model expects " + shape_str(dst.shape()));
    dst = t.value.template cast<Real>();
  }
}

template <class Real>
std::vector<NamedTensor> export_optimizer(const Ranger<Real>& opt) {
  std::vector<NamedTensor> out;
  for (const char* kind : {"m", "v", "slow"}) {
    for (const auto& [name, slot] : opt.slots()) {
      const auto& t = kind[0] == 'm' ? slot.m : kind[0] == 'v' ? slot.v : slot.slow;
      out.push_back({std::string(kind) + "/" + name, t.template cast<double>()});
    }
  }
  return out;
}

template <class Real>
void import_optimizer(Ranger<Real>& opt, std::uint64_t step, const std::vector<NamedTensor>& tensors) {
  opt.slots().clear();
  opt.set_step_count(step);
  for (const auto& t : tensors) {
    const auto slash = t.name.find('/');
    if (slash == std::string::npos) throw DataError("bad optimizer slot name '" + t.name + "'");
    const std::string kind = t.name.substr(0, slash), param = t.name.substr(slash + 1);
    auto& slot = opt.slots()[param];
    if (kind == "m") slot.m = t.value.template cast<Real>();
    else if (kind == "v") slot.v = t.value.template cast<Real>();
    else if (kind == "slow") slot.slow = t.value.template cast<Real>();
    else throw DataError("bad optimizer slot kind '" + kind + "'");
  }
}

}  // namespace t2v

#endif  // T2V_CHECKPOINT_HPP
