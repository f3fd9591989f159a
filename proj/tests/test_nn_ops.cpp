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

#include <doctest.h>

#include "nn_check.hpp"
#include "unifl/error.hpp"

using namespace unifl;
using nn::Shape;
using nn::Tape;
using Vars = std::vector<Tape::Var>;

namespace {

std::mt19937_64& rng() {
  static std::mt19937_64 r(2024);
  return r;
}

nn::Tensor rnd(Shape s, double scale = 1.0) { return test::random_tensor(s, rng(), scale); }

}  // namespace

TEST_CASE("conv2d gradients, plain, strided and grouped") {
  CHECK(test::max_input_grad_error({rnd({2, 3, 6, 6}), rnd({4, 3, 3, 3}), rnd({1, 4, 1, 1})},
                                   [](Tape& t, const Vars& v) { return t.conv2d(v[0], v[1], &v[2], 1, 1); }) < 1e-6);
  CHECK(test::max_input_grad_error({rnd({1, 2, 8, 8}), rnd({3, 2, 7, 7})},
                                   [](Tape& t, const Vars& v) { return t.conv2d(v[0], v[1], nullptr, 4, 3); }) < 1e-6);
  CHECK(test::max_input_grad_error({rnd({1, 4, 5, 5}), rnd({4, 1, 3, 3})},
                                   [](Tape& t, const Vars& v) { return t.conv2d(v[0], v[1], nullptr, 1, 1, 4); }) < 1e-6);
}

TEST_CASE("normalization gradients") {
  nn::Parameter rm{"rm", nn::Tensor({1, 3, 1, 1}), {}, false}, rv{"rv", nn::Tensor({1, 3, 1, 1}, 1.0), {}, false};
  CHECK(test::max_input_grad_error({rnd({2, 3, 4, 4}), rnd({1, 3, 1, 1}), rnd({1, 3, 1, 1})},
                                   [&](Tape& t, const Vars& v) { return t.batch_norm(v[0], v[1], v[2], rm, rv, true); }) < 1e-5);
  CHECK(test::max_input_grad_error({rnd({2, 3, 4, 4}), rnd({1, 3, 1, 1}), rnd({1, 3, 1, 1})},
                                   [&](Tape& t, const Vars& v) { return t.batch_norm(v[0], v[1], v[2], rm, rv, false); }) < 1e-6);
  CHECK(test::max_input_grad_error({rnd({2, 5, 3, 3}), rnd({1, 5, 1, 1}), rnd({1, 5, 1, 1})},
                                   [](Tape& t, const Vars& v) { return t.layer_norm(v[0], v[1], v[2]); }, 11, 1e-5) < 1e-5);
}

TEST_CASE("pointwise, pooling and attention gradients") {
  CHECK(test::max_input_grad_error({rnd({1, 3, 4, 4})}, [](Tape& t, const Vars& v) { return t.gelu(v[0]); }) < 1e-6);
  CHECK(test::max_input_grad_error({rnd({1, 3, 4, 4})}, [](Tape& t, const Vars& v) { return t.sigmoid(v[0]); }) < 1e-6);
  CHECK(test::max_input_grad_error({rnd({1, 3, 4, 4})}, [](Tape& t, const Vars& v) { return t.relu(v[0]); }) < 1e-6);
  CHECK(test::max_input_grad_error({rnd({2, 3, 4, 4}), rnd({2, 3, 1, 1})},
                                   [](Tape& t, const Vars& v) { return t.scale_channels(v[0], v[1]); }) < 1e-6);
  CHECK(test::max_input_grad_error({rnd({2, 3, 4, 4})}, [](Tape& t, const Vars& v) { return t.global_avg_pool(v[0]); }) < 1e-6);
  CHECK(test::max_input_grad_error({rnd({2, 3, 4, 4})}, [](Tape& t, const Vars& v) { return t.global_max_pool(v[0]); }) < 1e-6);
  CHECK(test::max_input_grad_error({rnd({2, 3, 4, 4})}, [](Tape& t, const Vars& v) { return t.avg_pool(v[0], 2); }) < 1e-6);
  CHECK(test::max_input_grad_error({rnd({1, 2, 2, 3}), rnd({1, 3, 2, 3})}, [](Tape& t, const Vars& v) { return t.concat(v[0], v[1]); }) < 1e-6);
  CHECK(test::max_input_grad_error({rnd({1, 2, 3, 3})}, [](Tape& t, const Vars& v) { return t.upsample_bilinear(v[0], 8, 8); }) < 1e-6);
  CHECK(test::max_input_grad_error({rnd({2, 4, 3, 3}), rnd({2, 4, 2, 2}), rnd({2, 4, 2, 2})},
                                   [](Tape& t, const Vars& v) { return t.attention(v[0], v[1], v[2], 2); }) < 1e-6);
}

TEST_CASE("shape errors are reported") {
  Tape t;
  auto a = t.input(nn::Tensor({1, 2, 4, 4}));
  auto b = t.input(nn::Tensor({1, 2, 3, 3}));
  CHECK_THROWS_AS(t.add(a, b), ShapeError);
  CHECK_THROWS_AS(t.concat(a, b), ShapeError);
  CHECK_THROWS_AS(t.avg_pool(a, 3), ShapeError);
  auto w = t.input(nn::Tensor({3, 5, 3, 3}));
  CHECK_THROWS_AS(t.conv2d(a, w, nullptr, 1, 1), ShapeError);
}
