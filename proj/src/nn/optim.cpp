// Copyright 2026 The unifl Authors
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

#include "unifl/nn/optim.hpp"

#include <cmath>
#include <set>

#include "unifl/error.hpp"
#include "util.hpp"

namespace unifl::nn {

void Adam::step(const std::vector<Parameter*>& params, double lr) {
  double scale = 1.0;
  if (config_.clip_grad_norm > 0.0) {
    double sq = 0.0;
    for (const Parameter* p : params)
      if (p->trainable && !p->frozen)
        for (double g : p->grad.data()) sq += g * g;
    const double norm = std::sqrt(sq);
    if (norm > config_.clip_grad_norm) scale = config_.clip_grad_norm / norm;
  }

  ++state_.step;
  const double t = static_cast<double>(state_.step);
  const double c1 = 1.0 - std::pow(config_.beta1, t);
  const double c2 = 1.0 - std::pow(config_.beta2, t);
  for (Parameter* p : params) {
    if (!p->trainable || p->frozen) continue;
    require_shape(p->value.shape(), p->grad.shape(), "optimizer step");
    auto [mi, m_new] = state_.first.try_emplace(p->name, p->value.shape());
    auto [vi, v_new] = state_.second.try_emplace(p->name, p->value.shape());
    Tensor& m = mi->second;
    Tensor& v = vi->second;
    require_shape(m.shape(), p->value.shape(), "optimizer state");
    for (std::size_t i = 0; i < p->value.numel(); ++i) {
      const double g = p->grad[i] * scale + config_.weight_decay * p->value[i];
      m[i] = config_.beta1 * m[i] + (1.0 - config_.beta1) * g;
      v[i] = config_.beta2 * v[i] + (1.0 - config_.beta2) * g * g;
      const double mhat = m[i] / c1;
      const double vhat = v[i] / c2;
      p->value[i] -= lr * mhat / (std::sqrt(vhat) + config_.epsilon);
    }
  }
}

namespace {

constexpr std::uint32_t kAdamMagic = 0x4D444155;        // "UADM"
constexpr std::uint32_t kCheckpointMagic = 0x4B434E55;  // "UNCK"

void put_string(std::string& buf, std::string_view s) {
  detail::put_u32(buf, static_cast<std::uint32_t>(s.size()));
  buf.append(s);
}

std::string get_string(std::string_view buf, std::size_t& pos) {
  const std::uint32_t n = detail::get_u32(buf, pos);
  if (pos + n > buf.size()) throw Error("unexpected end of binary data");
  std::string s(buf.substr(pos, n));
  pos += n;
  return s;
}

void put_shape(std::string& buf, const Shape& s) {
  for (int d : {s.n, s.c, s.h, s.w}) detail::put_u32(buf, static_cast<std::uint32_t>(d));
}

Shape get_shape(std::string_view buf, std::size_t& pos) {
  Shape s;
  for (int* d : {&s.n, &s.c, &s.h, &s.w}) {
    const std::uint32_t v = detail::get_u32(buf, pos);
    if (v > (1u << 24)) throw Error("tensor dimension out of range");
    *d = static_cast<int>(v);
  }
  if (s.numel() > (std::size_t{1} << 28)) throw Error("tensor too large");
  return s;
}

void put_tensor_map(std::string& buf, const std::map<std::string, Tensor>& m) {
  detail::put_u32(buf, static_cast<std::uint32_t>(m.size()));
  for (const auto& [name, t] : m) {
    put_string(buf, name);
    put_shape(buf, t.shape());
    for (double v : t.data()) detail::put_f64(buf, v);
  }
}

std::map<std::string, Tensor> get_tensor_map(std::string_view buf, std::size_t& pos) {
  std::map<std::string, Tensor> m;
  const std::uint32_t count = detail::get_u32(buf, pos);
  for (std::uint32_t i = 0; i < count; ++i) {
    std::string name = get_string(buf, pos);
    Tensor t(get_shape(buf, pos));
    for (auto& v : t.data()) v = detail::get_f64(buf, pos);
    m.emplace(std::move(name), std::move(t));
  }
  return m;
}

}  // namespace

std::string encode_adam_state(const AdamState& state) {
  std::string buf;
  detail::put_u32(buf, kAdamMagic);
  detail::put_u64(buf, static_cast<std::uint64_t>(state.step));
  put_tensor_map(buf, state.first);
  put_tensor_map(buf, state.second);
  return buf;
}

AdamState decode_adam_state(std::string_view bytes) {
  std::size_t pos = 0;
  if (detail::get_u32(bytes, pos) != kAdamMagic) throw Error("not an optimizer state file");
  AdamState s;
  s.step = static_cast<std::int64_t>(detail::get_u64(bytes, pos));
  s.first = get_tensor_map(bytes, pos);
  s.second = get_tensor_map(bytes, pos);
  if (pos != bytes.size()) throw Error("trailing bytes after optimizer state");
  return s;
}

// ---------------------------------------------------------------------------

Checkpoint make_checkpoint(const ParameterStore& store, std::string metadata) {
  Checkpoint c;
  c.metadata = std::move(metadata);
  for (const Parameter* p : store.all()) {
    CheckpointEntry e{p->name, p->value.shape(), {}};
    e.values.reserve(p->value.numel());
    for (double v : p->value.data()) e.values.push_back(static_cast<float>(v));
    c.entries.push_back(std::move(e));
  }
  return c;
}

std::string encode_checkpoint(const Checkpoint& ckpt) {
  std::string buf;
  detail::put_u32(buf, kCheckpointMagic);
  detail::put_u32(buf, kCheckpointVersion);
  put_string(buf, ckpt.metadata);
  detail::put_u32(buf, static_cast<std::uint32_t>(ckpt.entries.size()));
  for (const auto& e : ckpt.entries) {
    if (e.values.size() != e.shape.numel()) throw ShapeError("checkpoint entry '" + e.name + "' has wrong value count");
    put_string(buf, e.name);
    put_shape(buf, e.shape);
    for (float v : e.values) detail::put_f32(buf, v);
  }
  return buf;
}

Checkpoint decode_checkpoint(std::string_view bytes) {
  std::size_t pos = 0;
  if (detail::get_u32(bytes, pos) != kCheckpointMagic) throw Error("not a checkpoint file (bad magic)");
  const std::uint32_t version = detail::get_u32(bytes, pos);
  if (version != kCheckpointVersion) throw Error("unsupported checkpoint version " + std::to_string(version));
  Checkpoint c;
  c.metadata = get_string(bytes, pos);
  const std::uint32_t count = detail::get_u32(bytes, pos);
  for (std::uint32_t i = 0; i < count; ++i) {
    CheckpointEntry e;
    e.name = get_string(bytes, pos);
    e.shape = get_shape(bytes, pos);
    e.values.resize(e.shape.numel());
    for (auto& v : e.values) v = detail::get_f32(bytes, pos);
    c.entries.push_back(std::move(e));
  }
  if (pos != bytes.size()) throw Error("trailing bytes after checkpoint");
  return c;
}

void save_checkpoint(const std::string& path, const Checkpoint& ckpt) {
  detail::write_text_file(path, encode_checkpoint(ckpt));
}

Checkpoint load_checkpoint(const std::string& path) { return decode_checkpoint(detail::read_text_file(path)); }

void restore_checkpoint(const Checkpoint& ckpt, ParameterStore& store) {
  std::set<std::string> seen;
  for (const auto& e : ckpt.entries) {
    Parameter* p = store.find(e.name);
    if (!p) throw Error("checkpoint tensor '" + e.name + "' does not exist in the model");
    if (!(p->value.shape() == e.shape))
      throw ShapeError("checkpoint tensor '" + e.name + "' has shape " + e.shape.str() + ", model expects " +
                       p->value.shape().str());
    for (std::size_t i = 0; i < e.values.size(); ++i) p->value[i] = e.values[i];
    seen.insert(e.name);
  }
  for (const Parameter* p : store.all())
    if (!seen.count(p->name)) throw Error("checkpoint is missing tensor '" + p->name + "'");
}

}  // namespace unifl::nn
