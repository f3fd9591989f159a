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

#include <array>
#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "unifl/heatmap.hpp"
#include "unifl/image.hpp"
#include "unifl/nn/tape.hpp"

namespace unifl::nn {

struct StageConfig {
  int width = 8;
  int depth = 1;
  int reduction = 1;           // key/value spatial reduction for attention
  int downsample = 2;          // resolution factor relative to the previous stage (patch stride for stage 1)
  int structure_channels = 4;  // channels of the structure branch
  int image_channels = 4;      // channels of the refined-image branch
};

struct NetworkConfig {
  int input_size = 64;
  int in_channels = 1;
  std::array<StageConfig, 4> stages{{{8, 1, 8, 4, 4, 4}, {16, 1, 4, 2, 4, 4}, {32, 1, 2, 2, 8, 8}, {64, 1, 1, 2, 8, 8}}};
  int heads = 1;
  int mlp_ratio = 1;
  int ca_reduction = 4;
  int decoder_channels = 16;
  int planes = kUnifiedCount;
  bool fgsa = true;
  bool inject_before_attention = true;  // otherwise the prompt enters before the feed-forward sublayer
  double hf_sigma = 20.0;
  std::uint64_t seed = 1;

  int prompt_width(int stage) const;
  /// Token grid side of a stage for the configured input size.
  int grid(int stage) const;
  /// Throws Error on inconsistent settings.
  void validate() const;
};

// ---------------------------------------------------------------------------
// Building blocks. Each block holds pointers into a ParameterStore.

struct ConvParams {
  Parameter* weight = nullptr;
  Parameter* bias = nullptr;  // may be null
  int stride = 1;
  int pad = 0;
  int groups = 1;
};

struct NormParams {
  Parameter* gamma = nullptr;
  Parameter* beta = nullptr;
  Parameter* running_mean = nullptr;  // batch norm only
  Parameter* running_var = nullptr;
};

/// Convolution, batch normalization, rectifier.
struct RefineParams {
  ConvParams conv;
  NormParams bn;
};

/// Spatial average pooling followed by a per-position linear map.
struct PoolLinearParams {
  int pool = 1;
  ConvParams linear;
};

struct ChannelAttentionParams {
  ConvParams reduce;
  ConvParams expand;
};

struct StageRegularizerParams {
  ChannelAttentionParams attention;
  ConvParams shared_mlp;
};

ConvParams make_conv(ParameterStore& store, const std::string& name, int in, int out, int k, int stride, int pad,
                     int groups = 1, bool bias = true);
NormParams make_batch_norm(ParameterStore& store, const std::string& name, int channels);
NormParams make_layer_norm(ParameterStore& store, const std::string& name, int channels);
RefineParams make_refine(ParameterStore& store, const std::string& name, int in, int out, int k, int stride);
PoolLinearParams make_pool_linear(ParameterStore& store, const std::string& name, int in, int out, int pool);
StageRegularizerParams make_stage_regularizer(ParameterStore& store, const std::string& name, int channels,
                                              int reduction);

Tape::Var apply_conv(Tape& tape, Tape::Var x, const ConvParams& p);
Tape::Var apply_layer_norm(Tape& tape, Tape::Var x, const NormParams& p);

/// Structure branch step: next structure features from the previous ones (or the high-frequency image).
Tape::Var refine_structure(Tape& tape, Tape::Var prev, const RefineParams& p, bool training);
/// Image branch step: pooled to the stage grid, then a per-position linear map.
Tape::Var refine_image(Tape& tape, Tape::Var prev, const PoolLinearParams& p);
/// Concat(fpa, fs).
Tape::Var build_prompt(Tape& tape, Tape::Var fs, Tape::Var fpa);
/// Concat(prompt, layer input).
Tape::Var inject(Tape& tape, Tape::Var prompt, Tape::Var layer_input);
/// layer MLP ∘ GELU ∘ shared MLP ∘ channel attention. Output width is the layer MLP's output width.
Tape::Var regularize(Tape& tape, Tape::Var injected, const StageRegularizerParams& stage, const ConvParams& layer_mlp);

// ---------------------------------------------------------------------------

struct LayerParams {
  std::optional<ConvParams> layer_mlp;  // present when FGSA is on
  NormParams attn_norm;
  ConvParams q, k, v, proj;
  std::optional<NormParams> kv_norm;  // present when reduction > 1
  NormParams ffn_norm;
  ConvParams fc1, dwconv, fc2;
};

struct StageParams {
  ConvParams embed;  // patch embedding or downsample
  NormParams embed_norm;
  std::optional<RefineParams> structure;
  std::optional<PoolLinearParams> image;
  std::optional<StageRegularizerParams> regularizer;
  std::vector<LayerParams> layers;
  NormParams out_norm;
};

/// Encoder-decoder producing `planes` heatmaps on the stage-1 grid.
class Network {
 public:
  explicit Network(const NetworkConfig& config);
  Network(const Network&) = delete;
  Network& operator=(const Network&) = delete;

  const NetworkConfig& config() const { return config_; }
  ParameterStore& params() { return store_; }
  const ParameterStore& params() const { return store_; }

  /// image and hf are (n, in_channels, S, S). Records the pass for backward().
  Tensor forward(const Tensor& image, const Tensor& hf, bool training);
  /// Propagates d(loss)/d(output) into every parameter gradient (accumulating).
  void backward(const Tensor& output_grad);
  bool has_recording() const { return tape_.has_value(); }
  /// Drops the recorded pass.
  void clear_recording() { tape_.reset(); }

  Shape output_shape(int batch) const;

  /// Routes rectifier and max-pool decisions of later forward passes through `pattern`
  /// (null detaches). Used by gradient checks.
  void set_kink_pattern(KinkPattern* pattern) { pattern_ = pattern; }

 private:
  NetworkConfig config_;
  ParameterStore store_;
  std::array<StageParams, 4> stages_;
  std::vector<ConvParams> decoder_proj_;
  ConvParams fuse_;
  NormParams fuse_bn_;
  ConvParams head_;
  std::optional<Tape> tape_;
  KinkPattern* pattern_ = nullptr;
  Tape::Var out_{};
};

/// Batch tensor from images scaled by 1/255. All images must share size and channel count.
Tensor images_to_tensor(const std::vector<const Image*>& images);
/// High-frequency counterparts, scaled by 1/255.
Tensor hf_to_tensor(const std::vector<const Image*>& images, double sigma);
/// One HeatmapStack per batch entry (all planes present).
std::vector<HeatmapStack> to_heatmaps(const Tensor& output, int stride);
/// Inverse of to_heatmaps for gradients.
Tensor from_heatmaps(const std::vector<HeatmapStack>& stacks);

}  // namespace unifl::nn
