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

#include <algorithm>
#include <cstddef>
#include <span>
#include <string>
#include <vector>

namespace unifl::nn {

struct Shape {
  int n = 0;
  int c = 0;
  int h = 0;
  int w = 0;

  std::size_t numel() const {
    return static_cast<std::size_t>(n) * static_cast<std::size_t>(c) * static_cast<std::size_t>(h) *
           static_cast<std::size_t>(w);
  }
  std::string str() const;
  friend bool operator==(const Shape&, const Shape&) = default;
};

/// Dense NCHW tensor of doubles. Weights use (out, in, kh, kw); vectors use (1, c, 1, 1).
class Tensor {
 public:
  Tensor() = default;
  explicit Tensor(Shape shape, double fill = 0.0) : shape_(shape), data_(shape.numel(), fill) {}

  const Shape& shape() const { return shape_; }
  std::size_t numel() const { return data_.size(); }

  double& at(int n, int c, int h, int w) { return data_[offset(n, c, h, w)]; }
  double at(int n, int c, int h, int w) const { return data_[offset(n, c, h, w)]; }
  double& operator[](std::size_t i) { return data_[i]; }
  double operator[](std::size_t i) const { return data_[i]; }

  std::span<double> data() { return data_; }
  std::span<const double> data() const { return data_; }

  void fill(double v) { std::fill(data_.begin(), data_.end(), v); }
  /// Adds `other` elementwise; shapes must match.
  void accumulate(const Tensor& other);

  friend bool operator==(const Tensor&, const Tensor&) = default;

 private:
  std::size_t offset(int n, int c, int h, int w) const {
    return ((static_cast<std::size_t>(n) * static_cast<std::size_t>(shape_.c) + static_cast<std::size_t>(c)) *
                static_cast<std::size_t>(shape_.h) +
            static_cast<std::size_t>(h)) *
               static_cast<std::size_t>(shape_.w) +
           static_cast<std::size_t>(w);
  }

  Shape shape_;
  std::vector<double> data_;
};

/// Throws ShapeError with `what` unless a == b.
void require_shape(const Shape& a, const Shape& b, const char* what);

/// Channel-axis concatenation [a, b].
Tensor concat_channels(const Tensor& a, const Tensor& b);
/// Channels [begin, end) of x.
Tensor slice_channels(const Tensor& x, int begin, int end);

}  // namespace unifl::nn
