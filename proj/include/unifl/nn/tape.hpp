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
#include <deque>
#include <functional>
#include <memory>
#include <random>
#include <string>
#include <vector>

#include "unifl/nn/tensor.hpp"

namespace unifl::nn {

/// A named trainable tensor (or a non-trainable buffer such as a running mean).
struct Parameter {
  std::string name;
  Tensor value;
  Tensor grad;
  bool trainable = true;
  bool frozen = false;  // receives no gradient
};

/// Owns parameters in creation order; addresses stay stable.
class ParameterStore {
 public:
  Parameter& add(const std::string& name, Shape shape, double fill = 0.0, bool trainable = true);
  /// Uniform in [-bound, bound] from the store's seeded generator.
  Parameter& add_uniform(const std::string& name, Shape shape, double bound);

  void reseed(std::uint64_t seed) { rng_.seed(seed); }
  Parameter* find(const std::string& name);
  const Parameter* find(const std::string& name) const;
  std::vector<Parameter*> all();
  std::vector<const Parameter*> all() const;
  std::vector<Parameter*> trainable();
  std::size_t trainable_count() const;  // scalar count
  void zero_grad();
  /// Marks every parameter whose name starts with `prefix`.
  void set_frozen(const std::string& prefix, bool frozen);

 private:
  std::deque<Parameter> params_;
  std::mt19937_64 rng_{1};
};

/// Branch decisions of the piecewise-linear ops (rectifier masks, max-pool positions) in
/// execution order. In replay mode a tape reuses them instead of deciding afresh, which
/// makes the forward pass a smooth function near the recorded point.
struct KinkPattern {
  enum class Mode { Record, Replay };
  Mode mode = Mode::Record;
  std::vector<std::vector<int>> decisions;
  std::size_t cursor = 0;

  void start(Mode m) {
    mode = m;
    cursor = 0;
    if (m == Mode::Record) decisions.clear();
  }
};

/// Reverse-mode recording of one forward pass. Values are computed eagerly; backward()
/// replays the recorded pullbacks in reverse and accumulates into Parameter::grad.
class Tape {
 public:
  struct Var {
    int id = -1;
  };

  /// Optional; must outlive the tape's forward calls.
  void set_kink_pattern(KinkPattern* pattern) { pattern_ = pattern; }

  Var input(Tensor value, bool requires_grad = false);
  Var param(Parameter& p);

  const Tensor& value(Var v) const { return nodes_[static_cast<std::size_t>(v.id)].value; }
  const Shape& shape(Var v) const { return value(v).shape(); }
  /// Gradient of an input created with requires_grad, valid after backward().
  const Tensor& grad(Var v) const { return nodes_[static_cast<std::size_t>(v.id)].grad; }

  /// Seeds d(out) with `seed` and propagates to every node that needs a gradient.
  void backward(Var out, const Tensor& seed);
  std::size_t size() const { return nodes_.size(); }

  // ---- operations --------------------------------------------------------
  /// Grouped 2-D convolution; weight (out, in/groups, k, k), optional bias (1, out, 1, 1).
  Var conv2d(Var x, Var weight, const Var* bias, int stride, int pad, int groups = 1);
  /// Batch normalization over (n, h, w). In training mode uses batch statistics and
  /// updates the running buffers with `momentum`.
  Var batch_norm(Var x, Var gamma, Var beta, Parameter& running_mean, Parameter& running_var, bool training,
                 double momentum = 0.1, double eps = 1e-5);
  /// Normalization over channels at every spatial position.
  Var layer_norm(Var x, Var gamma, Var beta, double eps = 1e-5);
  Var relu(Var x);
  Var gelu(Var x);
  Var sigmoid(Var x);
  Var add(Var a, Var b);
  /// x * gate with gate shaped (n, c, 1, 1).
  Var scale_channels(Var x, Var gate);
  Var global_avg_pool(Var x);
  Var global_max_pool(Var x);
  /// Non-overlapping k x k average pooling.
  Var avg_pool(Var x, int k);
  Var concat(Var a, Var b);
  /// Softmax attention with `heads` heads. q is (n, c, hq, wq); k and v are (n, c, hk, wk).
  Var attention(Var q, Var k, Var v, int heads = 1);
  /// Bilinear resize with half-pixel centers.
  Var upsample_bilinear(Var x, int out_h, int out_w);

 private:
  struct Node {
    Tensor value;
    Tensor grad;
    bool needs_grad = false;
    Parameter* param = nullptr;
    std::function<void()> pullback;
  };

  Var push(Tensor value, bool needs_grad, std::function<void()> pullback = {});
  bool needs(Var v) const { return nodes_[static_cast<std::size_t>(v.id)].needs_grad; }
  Tensor& g(Var v) { return nodes_[static_cast<std::size_t>(v.id)].grad; }
  const Tensor& val(Var v) const { return nodes_[static_cast<std::size_t>(v.id)].value; }

  /// Records `computed` or returns the replayed decisions for the next piecewise op.
  std::vector<int> decide(std::vector<int> computed);

  std::deque<Node> nodes_;
  KinkPattern* pattern_ = nullptr;
};

}  // namespace unifl::nn
