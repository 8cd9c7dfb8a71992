// SPDX-License-Identifier: Apache-2.0
// Copyright 2026 The FDNet Authors

#include "fdnet/checkpoint.hpp"

#include <bit>
#include <cstring>
#include <fstream>
#include <sstream>

namespace fdnet {
namespace {

static_assert(std::endian::native == std::endian::little,
              "checkpoint encoding assumes a little-endian host");

class Writer {
 public:
  template <typename V>
  void pod(V v) {
    char buf[sizeof(V)];
    std::memcpy(buf, &v, sizeof(V));
    out_.append(buf, sizeof(V));
  }
  void bytes(std::string_view s) { out_.append(s); }
  void str(std::string_view s) {
    pod<uint32_t>(static_cast<uint32_t>(s.size()));
    bytes(s);
  }
  void tensors(const std::vector<TensorRecord>& recs) {
    pod<uint32_t>(static_cast<uint32_t>(recs.size()));
    for (const auto& r : recs) {
      str(r.name);
      pod<uint32_t>(static_cast<uint32_t>(r.shape.size()));
      for (int64_t d : r.shape) pod<int64_t>(d);
      if (static_cast<int64_t>(r.data.size()) != shape_numel(r.shape)) {
        throw ShapeError("tensor record " + r.name + " has inconsistent size");
      }
      out_.append(reinterpret_cast<const char*>(r.data.data()), r.data.size() * sizeof(float));
    }
  }
  std::string take() { return std::move(out_); }

 private:
  std::string out_;
};

class Reader {
 public:
  explicit Reader(std::string_view in) : in_(in) {}

  template <typename V>
  V pod() {
    need(sizeof(V));
    V v;
    std::memcpy(&v, in_.data() + pos_, sizeof(V));
    pos_ += sizeof(V);
    return v;
  }
  std::string_view bytes(size_t n) {
    need(n);
    auto s = in_.substr(pos_, n);
    pos_ += n;
    return s;
  }
  std::string str() { return std::string(bytes(pod<uint32_t>())); }
  std::vector<TensorRecord> tensors() {
    const auto count = pod<uint32_t>();
    std::vector<TensorRecord> recs;
    recs.reserve(count);
    for (uint32_t i = 0; i < count; ++i) {
      TensorRecord r;
      r.name = str();
      const auto rank = pod<uint32_t>();
      if (rank > 8) throw IOError("checkpoint: implausible tensor rank");
      for (uint32_t d = 0; d < rank; ++d) {
        const auto dim = pod<int64_t>();
        if (dim < 0) throw IOError("checkpoint: negative dimension");
        r.shape.push_back(dim);
      }
      const auto n = static_cast<size_t>(shape_numel(r.shape));
      auto raw = bytes(n * sizeof(float));
      r.data.resize(n);
      std::memcpy(r.data.data(), raw.data(), raw.size());
      recs.push_back(std::move(r));
    }
    return recs;
  }
  bool done() const { return pos_ == in_.size(); }

 private:
  void need(size_t n) const {
    if (in_.size() - pos_ < n) throw IOError("checkpoint: truncated data");
  }
  std::string_view in_;
  size_t pos_ = 0;
};

}  // namespace

std::string serialize_checkpoint(const Checkpoint& ckpt) {
  Writer w;
  w.bytes(kCheckpointMagic);
  w.pod<uint32_t>(ckpt.format_version);
  w.pod<uint64_t>(ckpt.config_json.size());
  w.bytes(ckpt.config_json);
  w.pod<int64_t>(ckpt.epoch);
  w.pod<int64_t>(ckpt.optimizer_step);
  w.tensors(ckpt.parameters);
  w.tensors(ckpt.adam_m);
  w.tensors(ckpt.adam_v);
  w.pod<uint32_t>(static_cast<uint32_t>(ckpt.history.size()));
  for (const auto& h : ckpt.history) {
    w.pod<int64_t>(h.epoch);
    w.pod<int64_t>(h.step);
    w.pod<double>(h.lr);
    w.pod<double>(h.loss);
  }
  return w.take();
}

Checkpoint parse_checkpoint(std::string_view bytes) {
  Reader r(bytes);
  if (r.bytes(kCheckpointMagic.size()) != kCheckpointMagic) {
    throw IOError("not an FDNet checkpoint (bad magic)");
  }
  Checkpoint ckpt;
  ckpt.format_version = r.pod<uint32_t>();
  if (ckpt.format_version != kCheckpointFormatVersion) {
    throw IOError("unsupported checkpoint format version " +
                  std::to_string(ckpt.format_version));
  }
  const auto cfg_len = r.pod<uint64_t>();
  ckpt.config_json = std::string(r.bytes(static_cast<size_t>(cfg_len)));
  ckpt.epoch = r.pod<int64_t>();
  ckpt.optimizer_step = r.pod<int64_t>();
  ckpt.parameters = r.tensors();
  ckpt.adam_m = r.tensors();
  ckpt.adam_v = r.tensors();
  const auto n = r.pod<uint32_t>();
  for (uint32_t i = 0; i < n; ++i) {
    EpochRecord h;
    h.epoch = r.pod<int64_t>();
    h.step = r.pod<int64_t>();
    h.lr = r.pod<double>();
    h.loss = r.pod<double>();
    ckpt.history.push_back(h);
  }
  if (!r.done()) throw IOError("checkpoint: trailing bytes");
  return ckpt;
}

void save_checkpoint(const Checkpoint& ckpt, const std::filesystem::path& path) {
  const std::string bytes = serialize_checkpoint(ckpt);
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw IOError("cannot write checkpoint " + path.string());
  out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
  if (!out) throw IOError("failed writing checkpoint " + path.string());
}

Checkpoint load_checkpoint(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IOError("cannot read checkpoint " + path.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  try {
    return parse_checkpoint(ss.str());
  } catch (const IOError& e) {
    throw IOError(path.string() + ": " + e.what());
  }
}

template <typename T>
std::vector<TensorRecord> snapshot_parameters(const ParameterStore<T>& store) {
  std::vector<TensorRecord> out;
  out.reserve(store.entries().size());
  for (const auto& e : store.entries()) {
    const auto& v = e.var.value();
    TensorRecord r{e.name, v.shape(), {}};
    r.data.resize(static_cast<size_t>(v.numel()));
    for (int64_t i = 0; i < v.numel(); ++i) r.data[static_cast<size_t>(i)] = static_cast<float>(v[i]);
    out.push_back(std::move(r));
  }
  return out;
}

template <typename T>
void restore_parameters(ParameterStore<T>& store, const std::vector<TensorRecord>& records,
                        std::string_view prefix) {
  for (const auto& e : store.entries()) {
    if (!e.name.starts_with(prefix)) continue;
    const TensorRecord* match = nullptr;
    for (const auto& r : records) {
      if (r.name == e.name) {
        match = &r;
        break;
      }
    }
    if (match == nullptr) throw WeightLoadError("weights missing parameter " + e.name);
    if (match->shape != e.var.shape()) {
      throw WeightLoadError("shape mismatch for " + e.name + ": file " +
                            shape_str(match->shape) + ", model " + shape_str(e.var.shape()));
    }
    Var<T> v = e.var;
    auto& dst = v.mutable_value();
    for (int64_t i = 0; i < dst.numel(); ++i) dst[i] = static_cast<T>(match->data[static_cast<size_t>(i)]);
  }
}

template std::vector<TensorRecord> snapshot_parameters<float>(const ParameterStore<float>&);
template std::vector<TensorRecord> snapshot_parameters<double>(const ParameterStore<double>&);
template void restore_parameters<float>(ParameterStore<float>&, const std::vector<TensorRecord>&,
                                        std::string_view);
template void restore_parameters<double>(ParameterStore<double>&,
                                         const std::vector<TensorRecord>&, std::string_view);

}  // namespace fdnet
