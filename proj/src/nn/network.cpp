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

#include "unifl/nn/network.hpp"

#include <algorithm>

#include "unifl/error.hpp"
#include "unifl/frequency.hpp"

namespace unifl::nn {

namespace {

constexpr double kInitBound = 0.05;

Shape vec(int c) { return {1, c, 1, 1}; }

std::string stage_name(int i) { return "stage" + std::to_string(i + 1); }

}  // namespace

int NetworkConfig::prompt_width(int stage) const {
  if (!fgsa) return 0;
  const auto& s = stages[static_cast<std::size_t>(stage)];
  return s.structure_channels + s.image_channels;
}

int NetworkConfig::grid(int stage) const {
  int g = input_size;
  for (int i = 0; i <= stage; ++i) g /= stages[static_cast<std::size_t>(i)].downsample;
  return g;
}

void NetworkConfig::validate() const {
  if (in_channels < 1) throw Error("network: in_channels must be positive");
  if (heads < 1 || mlp_ratio < 1 || ca_reduction < 1 || decoder_channels < 1 || planes < 1)
    throw Error("network: heads, mlp_ratio, ca_reduction, decoder_channels and planes must be positive");
  int g = input_size;
  for (int i = 0; i < 4; ++i) {
    const auto& s = stages[static_cast<std::size_t>(i)];
    if (s.width < 1 || s.depth < 1 || s.reduction < 1 || s.downsample < 2)
      throw Error("network: " + stage_name(i) + " has a non-positive width/depth/reduction or downsample < 2");
    if (g % s.downsample) throw Error("network: input size " + std::to_string(input_size) + " is not divisible down to " + stage_name(i));
    g /= s.downsample;
    if (g % s.reduction) throw Error("network: " + stage_name(i) + " grid not divisible by its reduction ratio");
    if (s.width % heads) throw Error("network: " + stage_name(i) + " width not divisible by head count");
    if (fgsa && (s.structure_channels < 1 || s.image_channels < 1))
      throw Error("network: " + stage_name(i) + " needs positive prompt channels when FGSA is enabled");
  }
  if (hf_sigma <= 0) throw Error("network: hf_sigma must be positive");
}

// ---------------------------------------------------------------------------

ConvParams make_conv(ParameterStore& store, const std::string& name, int in, int out, int k, int stride, int pad,
                     int groups, bool bias) {
  ConvParams p;
  p.weight = &store.add_uniform(name + ".weight", {out, in / groups, k, k}, kInitBound);
  if (bias) p.bias = &store.add(name + ".bias", vec(out));
  p.stride = stride;
  p.pad = pad;
  p.groups = groups;
  return p;
}

NormParams make_batch_norm(ParameterStore& store, const std::string& name, int channels) {
  NormParams p = make_layer_norm(store, name, channels);
  p.running_mean = &store.add(name + ".running_mean", vec(channels), 0.0, false);
  p.running_var = &store.add(name + ".running_var", vec(channels), 1.0, false);
  return p;
}

NormParams make_layer_norm(ParameterStore& store, const std::string& name, int channels) {
  NormParams p;
  p.gamma = &store.add(name + ".gamma", vec(channels), 1.0);
  p.beta = &store.add(name + ".beta", vec(channels));
  return p;
}

RefineParams make_refine(ParameterStore& store, const std::string& name, int in, int out, int k, int stride) {
  // No bias: batch normalization follows immediately.
  return {make_conv(store, name + ".conv", in, out, k, stride, k / 2, 1, false), make_batch_norm(store, name + ".bn", out)};
}

PoolLinearParams make_pool_linear(ParameterStore& store, const std::string& name, int in, int out, int pool) {
  return {pool, make_conv(store, name + ".linear", in, out, 1, 1, 0)};
}

StageRegularizerParams make_stage_regularizer(ParameterStore& store, const std::string& name, int channels,
                                              int reduction) {
  const int hidden = std::max(1, channels / reduction);
  StageRegularizerParams p;
  p.attention.reduce = make_conv(store, name + ".ca.reduce", channels, hidden, 1, 1, 0);
  p.attention.expand = make_conv(store, name + ".ca.expand", hidden, channels, 1, 1, 0);
  p.shared_mlp = make_conv(store, name + ".shared_mlp", channels, channels, 1, 1, 0);
  return p;
}

Tape::Var apply_conv(Tape& tape, Tape::Var x, const ConvParams& p) {
  const Tape::Var w = tape.param(*p.weight);
  if (p.bias) {
    const Tape::Var b = tape.param(*p.bias);
    return tape.conv2d(x, w, &b, p.stride, p.pad, p.groups);
  }
  return tape.conv2d(x, w, nullptr, p.stride, p.pad, p.groups);
}

Tape::Var apply_layer_norm(Tape& tape, Tape::Var x, const NormParams& p) {
  return tape.layer_norm(x, tape.param(*p.gamma), tape.param(*p.beta));
}

Tape::Var refine_structure(Tape& tape, Tape::Var prev, const RefineParams& p, bool training) {
  const Tape::Var y = apply_conv(tape, prev, p.conv);
  const Tape::Var n = tape.batch_norm(y, tape.param(*p.bn.gamma), tape.param(*p.bn.beta), *p.bn.running_mean,
                                      *p.bn.running_var, training);
  return tape.relu(n);
}

Tape::Var refine_image(Tape& tape, Tape::Var prev, const PoolLinearParams& p) {
  return apply_conv(tape, tape.avg_pool(prev, p.pool), p.linear);
}

Tape::Var build_prompt(Tape& tape, Tape::Var fs, Tape::Var fpa) { return tape.concat(fpa, fs); }

Tape::Var inject(Tape& tape, Tape::Var prompt, Tape::Var layer_input) { return tape.concat(prompt, layer_input); }

Tape::Var regularize(Tape& tape, Tape::Var injected, const StageRegularizerParams& stage, const ConvParams& layer_mlp) {
  const int channels = tape.shape(injected).c;
  if (stage.shared_mlp.weight->value.shape().c != channels)
    throw ShapeError("regularize: input has " + std::to_string(channels) + " channels, stage expects " +
                     std::to_string(stage.shared_mlp.weight->value.shape().c));
  auto bottleneck = [&](Tape::Var pooled) {
    return apply_conv(tape, tape.relu(apply_conv(tape, pooled, stage.attention.reduce)), stage.attention.expand);
  };
  const Tape::Var gate =
      tape.sigmoid(tape.add(bottleneck(tape.global_avg_pool(injected)), bottleneck(tape.global_max_pool(injected))));
  const Tape::Var attended = tape.scale_channels(injected, gate);
  const Tape::Var shared = tape.gelu(apply_conv(tape, attended, stage.shared_mlp));
  return apply_conv(tape, shared, layer_mlp);
}

// ---------------------------------------------------------------------------

Network::Network(const NetworkConfig& config) : config_(config) {
  config_.validate();
  store_.reseed(config_.seed);
  int prev_width = config_.in_channels;
  int prev_structure = config_.in_channels;
  int prev_image = config_.in_channels;
  for (int i = 0; i < 4; ++i) {
    const auto& sc = config_.stages[static_cast<std::size_t>(i)];
    const std::string name = stage_name(i);
    StageParams& st = stages_[static_cast<std::size_t>(i)];
    const int ds = sc.downsample;
    // Stage 1 uses an overlapping patch embedding; later stages a non-overlapping merge.
    if (i == 0)
      st.embed = make_conv(store_, name + ".embed", prev_width, sc.width, 2 * ds - 1, ds, ds - 1);
    else
      st.embed = make_conv(store_, name + ".embed", prev_width, sc.width, ds, ds, 0);
    st.embed_norm = make_layer_norm(store_, name + ".embed_norm", sc.width);

    const int pw = config_.prompt_width(i);
    if (pw > 0) {
      st.structure = make_refine(store_, name + ".structure", prev_structure, sc.structure_channels, 2 * ds - 1, ds);
      st.image = make_pool_linear(store_, name + ".image", prev_image, sc.image_channels, ds);
      st.regularizer = make_stage_regularizer(store_, name + ".regularizer", pw + sc.width, config_.ca_reduction);
      prev_structure = sc.structure_channels;
      prev_image = sc.image_channels;
    }

    for (int j = 0; j < sc.depth; ++j) {
      const std::string ln = name + ".layer" + std::to_string(j + 1);
      LayerParams lp;
      if (pw > 0) lp.layer_mlp = make_conv(store_, ln + ".mlp", pw + sc.width, sc.width, 1, 1, 0);
      lp.attn_norm = make_layer_norm(store_, ln + ".attn_norm", sc.width);
      lp.q = make_conv(store_, ln + ".q", sc.width, sc.width, 1, 1, 0);
      // A key bias shifts every score of a query equally; softmax cancels it.
      lp.k = make_conv(store_, ln + ".k", sc.width, sc.width, 1, 1, 0, 1, false);
      lp.v = make_conv(store_, ln + ".v", sc.width, sc.width, 1, 1, 0);
      lp.proj = make_conv(store_, ln + ".proj", sc.width, sc.width, 1, 1, 0);
      if (sc.reduction > 1) lp.kv_norm = make_layer_norm(store_, ln + ".kv_norm", sc.width);
      const int hidden = sc.width * config_.mlp_ratio;
      lp.ffn_norm = make_layer_norm(store_, ln + ".ffn_norm", sc.width);
      lp.fc1 = make_conv(store_, ln + ".fc1", sc.width, hidden, 1, 1, 0);
      lp.dwconv = make_conv(store_, ln + ".dwconv", hidden, hidden, 3, 1, 1, hidden);
      lp.fc2 = make_conv(store_, ln + ".fc2", hidden, sc.width, 1, 1, 0);
      st.layers.push_back(std::move(lp));
    }
    st.out_norm = make_layer_norm(store_, name + ".out_norm", sc.width);
    prev_width = sc.width;
  }
  const int d = config_.decoder_channels;
  for (int i = 0; i < 4; ++i)
    decoder_proj_.push_back(make_conv(store_, "decoder.proj" + std::to_string(i + 1),
                                      config_.stages[static_cast<std::size_t>(i)].width, d, 1, 1, 0, 1, false));
  fuse_ = make_conv(store_, "decoder.fuse", 4 * d, d, 1, 1, 0, 1, false);
  fuse_bn_ = make_batch_norm(store_, "decoder.fuse_bn", d);
  head_ = make_conv(store_, "decoder.head", d, config_.planes, 1, 1, 0);
}

Shape Network::output_shape(int batch) const {
  const int g = config_.grid(0);
  return {batch, config_.planes, g, g};
}

Tensor Network::forward(const Tensor& image, const Tensor& hf, bool training) {
  const Shape expect{image.shape().n, config_.in_channels, config_.input_size, config_.input_size};
  if (image.shape().n < 1) throw ShapeError("network: empty batch");
  require_shape(image.shape(), expect, "network image input");
  require_shape(hf.shape(), expect, "network high-frequency input");

  tape_.emplace();
  Tape& t = *tape_;
  t.set_kink_pattern(pattern_);
  Tape::Var x = t.input(image);
  Tape::Var fs{}, fpa{};
  if (config_.fgsa) {
    fs = t.input(hf);
    fpa = x;
  }
  std::array<Tape::Var, 4> outs{};
  for (int i = 0; i < 4; ++i) {
    const auto& sc = config_.stages[static_cast<std::size_t>(i)];
    const StageParams& st = stages_[static_cast<std::size_t>(i)];
    x = apply_layer_norm(t, apply_conv(t, x, st.embed), st.embed_norm);

    Tape::Var prompt{};
    if (st.regularizer) {
      fs = refine_structure(t, fs, *st.structure, training);
      fpa = refine_image(t, fpa, *st.image);
      prompt = build_prompt(t, fs, fpa);
    }
    for (const auto& lp : st.layers) {
      if (st.regularizer && config_.inject_before_attention)
        x = regularize(t, inject(t, prompt, x), *st.regularizer, *lp.layer_mlp);

      const Tape::Var h = apply_layer_norm(t, x, lp.attn_norm);
      Tape::Var kv = h;
      if (lp.kv_norm) kv = apply_layer_norm(t, t.avg_pool(h, sc.reduction), *lp.kv_norm);
      const Tape::Var a = t.attention(apply_conv(t, h, lp.q), apply_conv(t, kv, lp.k), apply_conv(t, kv, lp.v),
                                      config_.heads);
      x = t.add(x, apply_conv(t, a, lp.proj));

      if (st.regularizer && !config_.inject_before_attention)
        x = regularize(t, inject(t, prompt, x), *st.regularizer, *lp.layer_mlp);

      const Tape::Var f = apply_layer_norm(t, x, lp.ffn_norm);
      const Tape::Var mixed = apply_conv(t, t.gelu(apply_conv(t, apply_conv(t, f, lp.fc1), lp.dwconv)), lp.fc2);
      x = t.add(x, mixed);
    }
    x = apply_layer_norm(t, x, st.out_norm);
    outs[static_cast<std::size_t>(i)] = x;
  }

  const int g = config_.grid(0);
  Tape::Var cat{};
  for (int i = 0; i < 4; ++i) {
    const Tape::Var p = t.upsample_bilinear(apply_conv(t, outs[static_cast<std::size_t>(i)], decoder_proj_[static_cast<std::size_t>(i)]), g, g);
    cat = i == 0 ? p : t.concat(cat, p);
  }
  const Tape::Var fused = t.gelu(t.batch_norm(apply_conv(t, cat, fuse_), t.param(*fuse_bn_.gamma),
                                              t.param(*fuse_bn_.beta), *fuse_bn_.running_mean,
                                              *fuse_bn_.running_var, training));
  out_ = t.sigmoid(apply_conv(t, fused, head_));
  return t.value(out_);
}

void Network::backward(const Tensor& output_grad) {
  if (!tape_) throw Error("network backward called without a recorded forward pass");
  tape_->backward(out_, output_grad);
}

// ---------------------------------------------------------------------------

namespace {

Tensor stack_images(const std::vector<const Image*>& images, const auto& plane_of) {
  if (images.empty()) throw ShapeError("empty image batch");
  const int c = images.front()->channel_count(), h = images.front()->height(), w = images.front()->width();
  Tensor out({static_cast<int>(images.size()), c, h, w});
  for (std::size_t n = 0; n < images.size(); ++n) {
    const Image& img = *images[n];
    if (img.channel_count() != c || img.height() != h || img.width() != w)
      throw ShapeError("image batch entries differ in size or channel count");
    for (int ch = 0; ch < c; ++ch) {
      const ImagePlane plane = plane_of(img.channels[static_cast<std::size_t>(ch)]);
      for (int r = 0; r < h; ++r)
        for (int col = 0; col < w; ++col) out.at(static_cast<int>(n), ch, r, col) = plane.at(r, col) / 255.0;
    }
  }
  return out;
}

}  // namespace

Tensor images_to_tensor(const std::vector<const Image*>& images) {
  return stack_images(images, [](const ImagePlane& p) { return p; });
}

Tensor hf_to_tensor(const std::vector<const Image*>& images, double sigma) {
  return stack_images(images, [sigma](const ImagePlane& p) { return extract_hf(p, sigma); });
}

std::vector<HeatmapStack> to_heatmaps(const Tensor& output, int stride) {
  const Shape s = output.shape();
  std::vector<HeatmapStack> out;
  for (int n = 0; n < s.n; ++n) {
    HeatmapStack hs = HeatmapStack::zeros(s.c, s.h, s.w, stride);
    for (int c = 0; c < s.c; ++c) {
      auto& plane = hs.planes[static_cast<std::size_t>(c)];
      for (int r = 0; r < s.h; ++r)
        for (int col = 0; col < s.w; ++col) plane.at(r, col) = output.at(n, c, r, col);
    }
    hs.present.assign(static_cast<std::size_t>(s.c), true);
    out.push_back(std::move(hs));
  }
  return out;
}

Tensor from_heatmaps(const std::vector<HeatmapStack>& stacks) {
  if (stacks.empty()) throw ShapeError("from_heatmaps: empty input");
  const auto& f = stacks.front();
  Tensor out({static_cast<int>(stacks.size()), f.plane_count(), f.height, f.width});
  for (std::size_t n = 0; n < stacks.size(); ++n) {
    const auto& hs = stacks[n];
    if (hs.plane_count() != f.plane_count() || hs.height != f.height || hs.width != f.width)
      throw ShapeError("from_heatmaps: stacks differ in shape");
    for (int c = 0; c < hs.plane_count(); ++c)
      for (int r = 0; r < hs.height; ++r)
        for (int col = 0; col < hs.width; ++col)
          out.at(static_cast<int>(n), c, r, col) = hs.planes[static_cast<std::size_t>(c)].at(r, col);
  }
  return out;
}

}  // namespace unifl::nn
