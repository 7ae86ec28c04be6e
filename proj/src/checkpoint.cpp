/*
 * Copyright 2026 The rmamba Authors
 *
 * Licensed under the Apache License, Version 2.0 (the "License");
 * you may not use this file except in compliance with the License.
 * You may obtain a copy of the License at
 *
 *    http://www.apache.org/licenses/LICENSE-2.0
 *
 * Unless required by applicable law or agreed to in writing, software
 * distributed under the License is distributed on an "AS IS" BASIS,
 * WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
 * See the License for the specific language governing permissions and
 * limitations under the License.
 */

#include "rmamba/checkpoint.hpp"

#include <zlib.h>

#include <bit>
#include <cstring>
#include <fstream>
#include <iterator>
#include <sstream>

#include "rmamba/data.hpp"

namespace rmamba {

static_assert(std::endian::native == std::endian::little,
              "checkpoint encoding assumes a little-endian host");

namespace {

class Writer {
 public:
  template <typename T>
  void put(const T& v) {
    const auto* p = reinterpret_cast<const char*>(&v);
    buf_.append(p, sizeof(T));
  }
  void put_bytes(const void* p, std::size_t n) { buf_.append(static_cast<const char*>(p), n); }
  void put_string(const std::string& s) {
    put(static_cast<std::uint32_t>(s.size()));
    buf_.append(s);
  }
  void put_array(const Tensor<float>::Array& a) {
    put_bytes(a.data(), static_cast<std::size_t>(a.size()) * sizeof(float));
  }
  std::string& bytes() { return buf_; }

 private:
  std::string buf_;
};

class Reader {
 public:
  Reader(const std::string& buf, std::size_t end, std::string origin)
      : buf_(buf), end_(end), origin_(std::move(origin)) {}

  template <typename T>
  T get() {
    T v;
    std::memcpy(&v, take(sizeof(T)), sizeof(T));
    return v;
  }
  std::string get_string() {
    const auto n = get<std::uint32_t>();
    return std::string(take(n), n);
  }
  void get_array(Tensor<float>::Array& a, Index n) {
    a.resize(n);
    std::memcpy(a.data(), take(static_cast<std::size_t>(n) * sizeof(float)),
                static_cast<std::size_t>(n) * sizeof(float));
  }
  bool done() const { return pos_ == end_; }

 private:
  const char* take(std::size_t n) {
    if (n > end_ - pos_) throw IoError(origin_ + ": truncated checkpoint");
    const char* p = buf_.data() + pos_;
    pos_ += n;
    return p;
  }

  const std::string& buf_;
  std::size_t pos_ = 0;
  std::size_t end_;
  std::string origin_;
};

std::uint32_t crc_of(const std::string& bytes, std::size_t n) {
  uLong crc = crc32(0L, Z_NULL, 0);
  std::size_t pos = 0;
  while (pos < n) {
    const auto chunk = static_cast<uInt>(std::min<std::size_t>(n - pos, 1u << 30));
    crc = crc32(crc, reinterpret_cast<const Bytef*>(bytes.data() + pos), chunk);
    pos += chunk;
  }
  return static_cast<std::uint32_t>(crc);
}

struct Decoded {
  ModelConfig config;
  std::vector<std::pair<std::string, Tensor<float>>> params;
  std::optional<AdamState<float>> optimizer;
};

Decoded decode(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open checkpoint " + path.string());
  const std::string bytes((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
  const std::string origin = path.string();
  if (bytes.size() < sizeof(kCheckpointMagic) + 8 ||
      std::memcmp(bytes.data(), kCheckpointMagic, sizeof(kCheckpointMagic)) != 0) {
    throw IoError(origin + ": not a checkpoint");
  }
  const std::size_t body = bytes.size() - sizeof(std::uint32_t);
  std::uint32_t stored;
  std::memcpy(&stored, bytes.data() + body, sizeof(stored));
  if (crc_of(bytes, body) != stored) throw IoError(origin + ": checksum mismatch");

  Reader r(bytes, body, origin);
  r.get<std::array<char, sizeof(kCheckpointMagic)>>();
  const auto version = r.get<std::uint32_t>();
  if (version != kCheckpointVersion) {
    throw IoError(origin + ": unsupported checkpoint version " + std::to_string(version));
  }
  Decoded d;
  d.config = parse_model_config(r.get_string());
  const auto n = r.get<std::uint32_t>();
  for (std::uint32_t i = 0; i < n; ++i) {
    std::string name = r.get_string();
    const auto nd = r.get<std::uint32_t>();
    Shape shape;
    for (std::uint32_t k = 0; k < nd; ++k) shape.push_back(static_cast<Index>(r.get<std::uint64_t>()));
    Tensor<float>::Array data;
    r.get_array(data, numel(shape));
    d.params.emplace_back(std::move(name), Tensor<float>(shape, std::move(data)));
  }
  if (r.get<std::uint8_t>() != 0) {
    AdamState<float> st;
    st.step = r.get<std::int64_t>();
    st.beta1 = r.get<double>();
    st.beta2 = r.get<double>();
    st.eps = r.get<double>();
    for (const auto& [name, t] : d.params) {
      st.m.emplace_back();
      st.v.emplace_back();
      r.get_array(st.m.back(), t.size());
      r.get_array(st.v.back(), t.size());
    }
    d.optimizer = std::move(st);
  }
  if (!r.done()) throw IoError(origin + ": trailing bytes in checkpoint");
  return d;
}

void assign(const Decoded& d, Model<float>& model, const std::string& origin) {
  const auto& params = model.parameters();
  if (d.params.size() != params.size()) {
    throw ConfigError(origin + ": checkpoint has " + std::to_string(d.params.size()) +
                      " parameters, model has " + std::to_string(params.size()));
  }
  for (const auto& [name, t] : d.params) {
    const Tensor<float>* dst = model.find(name);
    if (dst == nullptr) throw ConfigError(origin + ": model has no parameter " + name);
    if (dst->shape() != t.shape()) {
      throw ConfigError(origin + ": parameter " + name + " is " + to_string(t.shape()) +
                        " in the checkpoint, " + to_string(dst->shape()) + " in the model");
    }
  }
  for (const auto& [name, t] : d.params) {
    Tensor<float> dst = *model.find(name);
    dst.mutable_data() = t.data();
  }
}

// The optimizer moments are stored in checkpoint order; reorder to the
// model's parameter order.
AdamState<float> reorder(const Decoded& d, const Model<float>& model) {
  AdamState<float> st = *d.optimizer;
  AdamState<float> out = st;
  out.m.clear();
  out.v.clear();
  for (const auto& p : model.parameters()) {
    for (std::size_t i = 0; i < d.params.size(); ++i) {
      if (d.params[i].first == p.name) {
        out.m.push_back(st.m[i]);
        out.v.push_back(st.v[i]);
      }
    }
  }
  return out;
}

}  // namespace

void save_checkpoint(const std::filesystem::path& path, const Model<float>& model,
                     const AdamState<float>* optimizer) {
  const auto& params = model.parameters();
  Writer w;
  w.put_bytes(kCheckpointMagic, sizeof(kCheckpointMagic));
  w.put(kCheckpointVersion);
  w.put_string(serialize(model.config()));
  w.put(static_cast<std::uint32_t>(params.size()));
  for (const auto& p : params) {
    w.put_string(p.name);
    w.put(static_cast<std::uint32_t>(p.tensor.ndim()));
    for (Index e : p.tensor.shape()) w.put(static_cast<std::uint64_t>(e));
    w.put_array(p.tensor.data());
  }
  const bool with_opt = optimizer != nullptr && optimizer->m.size() == params.size();
  w.put(static_cast<std::uint8_t>(with_opt ? 1 : 0));
  if (with_opt) {
    w.put(optimizer->step);
    w.put(optimizer->beta1);
    w.put(optimizer->beta2);
    w.put(optimizer->eps);
    for (std::size_t i = 0; i < params.size(); ++i) {
      w.put_array(optimizer->m[i]);
      w.put_array(optimizer->v[i]);
    }
  }
  w.put(crc_of(w.bytes(), w.bytes().size()));
  write_file_atomic(path, w.bytes());
}

Checkpoint load_checkpoint(const std::filesystem::path& path) {
  Decoded d = decode(path);
  Model<float> model(d.config);
  assign(d, model, path.string());
  Checkpoint c{d.config, std::move(model), std::nullopt};
  if (d.optimizer) c.optimizer = reorder(d, c.model);
  return c;
}

void load_into(const std::filesystem::path& path, Model<float>& model,
               AdamState<float>* optimizer) {
  Decoded d = decode(path);
  if (!(d.config == model.config())) {
    throw ConfigError(path.string() + ": checkpoint config\n" + serialize(d.config) +
                      "does not match model config\n" + serialize(model.config()));
  }
  assign(d, model, path.string());
  if (optimizer != nullptr && d.optimizer) *optimizer = reorder(d, model);
}

}  // namespace rmamba
