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

#pragma once

#include <cstdint>
#include <map>
#include <string>
#include <string_view>
#include <vector>

#include "unifl/nn/tape.hpp"

namespace unifl::nn {

struct AdamConfig {
  double beta1 = 0.9;
  double beta2 = 0.999;
  double epsilon = 1e-8;
  double weight_decay = 0.0;   // L2 term added to the gradient; 0 disables
  double clip_grad_norm = 0.0;  // global norm clip; 0 disables
};

struct AdamState {
  std::int64_t step = 0;
  std::map<std::string, Tensor> first;   // keyed by parameter name
  std::map<std::string, Tensor> second;

  friend bool operator==(const AdamState&, const AdamState&) = default;
};

/// Bias-corrected adaptive moment update. Frozen and non-trainable parameters are skipped.
class Adam {
 public:
  explicit Adam(AdamConfig config = {}) : config_(config) {}

  void step(const std::vector<Parameter*>& params, double lr);

  const AdamConfig& config() const { return config_; }
  const AdamState& state() const { return state_; }
  void set_state(AdamState state) { state_ = std::move(state); }

 private:
  AdamConfig config_;
  AdamState state_;
};

/// Little-endian binary with 64-bit floats so a resumed run continues bit-exactly.
std::string encode_adam_state(const AdamState& state);
AdamState decode_adam_state(std::string_view bytes);

// ---------------------------------------------------------------------------
// Checkpoint container: magic, version, metadata text, then named tensors
// (name, 4 dims, little-endian float32 values).

inline constexpr std::uint32_t kCheckpointVersion = 1;

struct CheckpointEntry {
  std::string name;
  Shape shape;
  std::vector<float> values;
};

struct Checkpoint {
  std::string metadata;  // key=value lines
  std::vector<CheckpointEntry> entries;
};

Checkpoint make_checkpoint(const ParameterStore& store, std::string metadata = {});
std::string encode_checkpoint(const Checkpoint& ckpt);
Checkpoint decode_checkpoint(std::string_view bytes);
void save_checkpoint(const std::string& path, const Checkpoint& ckpt);
Checkpoint load_checkpoint(const std::string& path);
/// Copies every entry into the store. Throws on unknown names, missing names or shape mismatch.
void restore_checkpoint(const Checkpoint& ckpt, ParameterStore& store);

}  // namespace unifl::nn
