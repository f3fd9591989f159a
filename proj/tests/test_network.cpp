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

#include <cmath>
#include <random>

#include "nn_check.hpp"
#include "unifl/error.hpp"
#include "unifl/nn/network.hpp"

using namespace unifl;
using nn::Shape;
using nn::Tape;
using nn::Tensor;

namespace {

Tensor rnd(Shape s, std::uint64_t seed, double scale = 1.0) {
  std::mt19937_64 rng(seed);
  return test::random_tensor(s, rng, scale);
}

double gelu(double x) { return 0.5 * x * (1.0 + std::erf(x / std::sqrt(2.0))); }

nn::NetworkConfig small_config(bool fgsa = true) {
  nn::NetworkConfig c;
  c.input_size = 32;
  c.stages = {{{4, 1, 2, 4, 2, 2}, {8, 1, 2, 2, 2, 2}, {8, 1, 1, 2, 2, 2}, {8, 1, 1, 2, 2, 2}}};
  c.decoder_channels = 4;
  c.planes = 6;
  c.fgsa = fgsa;
  return c;
}

bool all_zero(const Tensor& t) {
  for (double v : t.data())
    if (v != 0.0) return false;
  return true;
}

}  // namespace

TEST_CASE("structure refinement") {
  nn::ParameterStore store;
  const nn::RefineParams p = nn::make_refine(store, "s", 2, 3, 3, 2);
  Tape t;
  const Tape::Var y = nn::refine_structure(t, t.input(rnd({1, 2, 8, 8}, 1)), p, true);
  CHECK(t.shape(y) == Shape{1, 3, 4, 4});
  for (double v : t.value(y).data()) CHECK(v >= 0.0);

  nn::ParameterStore fresh;
  const nn::RefineParams identity_norm = nn::make_refine(fresh, "s", 2, 3, 3, 2);
  Tape z;
  const Tape::Var yz = nn::refine_structure(z, z.input(Tensor({1, 2, 8, 8})), identity_norm, false);
  CHECK(all_zero(z.value(yz)));

  CHECK(test::max_input_grad_error({rnd({1, 2, 8, 8}, 2)},
                                   [&](Tape& tp, const std::vector<Tape::Var>& v) { return nn::refine_structure(tp, v[0], p, true); },
                                   11, 1e-4, true) < 1e-3);
  CHECK(test::max_param_grad_error(store, rnd({1, 2, 8, 8}, 3),
                                   [&](Tape& tp, Tape::Var x) { return nn::refine_structure(tp, x, p, true); }, 12, 1e-4) < 1e-3);
}

TEST_CASE("image refinement") {
  nn::ParameterStore store;
  const nn::PoolLinearParams p = nn::make_pool_linear(store, "i", 2, 3, 2);
  Tape t;
  const Tape::Var y = nn::refine_image(t, t.input(rnd({1, 2, 8, 8}, 1)), p);
  CHECK(t.shape(y) == Shape{1, 3, 4, 4});

  nn::ParameterStore zero_store;
  const nn::PoolLinearParams zp = nn::make_pool_linear(zero_store, "i", 2, 3, 2);
  zp.linear.weight->value.fill(0.0);
  Tape z;
  CHECK(all_zero(z.value(nn::refine_image(z, z.input(rnd({1, 2, 8, 8}, 4)), zp))));

  CHECK(test::max_input_grad_error({rnd({1, 2, 8, 8}, 2)},
                                   [&](Tape& tp, const std::vector<Tape::Var>& v) { return nn::refine_image(tp, v[0], p); },
                                   11, 1e-4) < 1e-3);
  CHECK(test::max_param_grad_error(store, rnd({1, 2, 8, 8}, 3),
                                   [&](Tape& tp, Tape::Var x) { return nn::refine_image(tp, x, p); }, 12, 1e-4) < 1e-3);
}

TEST_CASE("prompt construction and injection concatenate in order") {
  Tape t;
  const Tensor fs = rnd({2, 4, 3, 3}, 1), fpa = rnd({2, 4, 3, 3}, 2), x = rnd({2, 5, 3, 3}, 3);
  const Tape::Var prompt = nn::build_prompt(t, t.input(fs), t.input(fpa));
  CHECK(t.shape(prompt) == Shape{2, 8, 3, 3});
  CHECK(nn::slice_channels(t.value(prompt), 0, 4) == fpa);
  CHECK(nn::slice_channels(t.value(prompt), 4, 8) == fs);

  const Tape::Var inj = nn::inject(t, prompt, t.input(x));
  CHECK(t.shape(inj) == Shape{2, 13, 3, 3});
  CHECK(nn::slice_channels(t.value(inj), 0, 8) == t.value(prompt));
  CHECK(nn::slice_channels(t.value(inj), 8, 13) == x);

  CHECK_THROWS_AS(nn::build_prompt(t, t.input(fs), t.input(Tensor({2, 4, 2, 3}))), ShapeError);
  CHECK_THROWS_AS(nn::inject(t, prompt, t.input(Tensor({1, 5, 3, 3}))), ShapeError);
}

TEST_CASE("structure regularization") {
  nn::ParameterStore store;
  const nn::StageRegularizerParams stage = nn::make_stage_regularizer(store, "r", 8, 4);
  const nn::ConvParams layer = nn::make_conv(store, "m", 8, 4, 1, 1, 0);
  Tape t;
  const Tape::Var y = nn::regularize(t, t.input(rnd({1, 8, 4, 4}, 1)), stage, layer);
  CHECK(t.shape(y) == Shape{1, 4, 4, 4});
  CHECK_THROWS_AS(nn::regularize(t, t.input(Tensor({1, 6, 4, 4})), stage, layer), ShapeError);

  CHECK(test::max_input_grad_error({rnd({1, 8, 4, 4}, 2)},
                                   [&](Tape& tp, const std::vector<Tape::Var>& v) { return nn::regularize(tp, v[0], stage, layer); },
                                   11, 1e-4, true) < 1e-3);
  CHECK(test::max_param_grad_error(store, rnd({1, 8, 4, 4}, 3),
                                   [&](Tape& tp, Tape::Var x) { return nn::regularize(tp, x, stage, layer); }, 12, 1e-4) < 1e-3);

  SUBCASE("open gate and identity shared map") {
    stage.attention.reduce.weight->value.fill(0.0);
    stage.attention.expand.weight->value.fill(0.0);
    stage.attention.expand.bias->value.fill(40.0);  // sigmoid(80) rounds to 1
    stage.shared_mlp.weight->value.fill(0.0);
    for (int c = 0; c < 8; ++c) stage.shared_mlp.weight->value.at(c, c, 0, 0) = 1.0;
    const Tensor x = rnd({1, 8, 4, 4}, 5);
    Tape d;
    const Tensor& out = d.value(nn::regularize(d, d.input(x), stage, layer));
    const Tensor& w = layer.weight->value;
    for (int o = 0; o < 4; ++o)
      for (int r = 0; r < 4; ++r)
        for (int c = 0; c < 4; ++c) {
          double expect = layer.bias->value.at(0, o, 0, 0);
          for (int i = 0; i < 8; ++i) expect += w.at(o, i, 0, 0) * gelu(x.at(0, i, r, c));
          CHECK(out.at(0, o, r, c) == doctest::Approx(expect).epsilon(1e-13));
        }
  }
}

TEST_CASE("network shapes and determinism") {
  const nn::NetworkConfig cfg;  // desk-scale defaults
  nn::Network net(cfg);
  for (int i = 0; i < 4; ++i) CHECK(cfg.grid(i) == 16 >> i);
  const Tensor img = rnd({2, 1, 64, 64}, 1, 0.5), hf = rnd({2, 1, 64, 64}, 2, 0.1);
  const Tensor a = net.forward(img, hf, true);
  CHECK(a.shape() == Shape{2, 124, 16, 16});
  CHECK(net.output_shape(2) == a.shape());
  for (double v : a.data()) {
    CHECK(v > 0.0);
    CHECK(v < 1.0);
  }
  CHECK(net.forward(img, hf, true) == a);
  nn::Network twin(cfg);
  CHECK(twin.forward(img, hf, true) == a);
  CHECK_THROWS_AS(net.forward(rnd({2, 1, 32, 32}, 3), hf, true), ShapeError);

  const auto heatmaps = nn::to_heatmaps(a, 4);
  REQUIRE(heatmaps.size() == 2);
  CHECK(heatmaps[1].plane_count() == 124);
  CHECK(nn::from_heatmaps(heatmaps) == a);
}

TEST_CASE("disabling the structure path severs the high-frequency input") {
  nn::NetworkConfig cfg;
  cfg.fgsa = false;
  CHECK(cfg.prompt_width(0) == 0);
  nn::Network plain(cfg);
  const Tensor img = rnd({2, 1, 64, 64}, 1, 0.5);
  const Tensor a = plain.forward(img, rnd({2, 1, 64, 64}, 2), true);
  const Tensor b = plain.forward(img, rnd({2, 1, 64, 64}, 3), true);
  CHECK(a == b);
  for (const nn::Parameter* p : plain.params().all()) {
    CHECK(p->name.find(".structure") == std::string::npos);
    CHECK(p->name.find(".regularizer") == std::string::npos);
  }

  nn::Network full(nn::NetworkConfig{});
  CHECK_FALSE(full.forward(img, rnd({2, 1, 64, 64}, 2), true) == full.forward(img, rnd({2, 1, 64, 64}, 3), true));
}

TEST_CASE("injection point flag") {
  nn::NetworkConfig cfg = small_config();
  nn::Network before(cfg);
  cfg.inject_before_attention = false;
  nn::Network after(cfg);
  const Tensor img = rnd({1, 1, 32, 32}, 1), hf = rnd({1, 1, 32, 32}, 2);
  CHECK(before.params().trainable_count() == after.params().trainable_count());
  CHECK_FALSE(before.forward(img, hf, false) == after.forward(img, hf, false));
}

TEST_CASE("backward contracts") {
  nn::Network net(small_config());
  const Tensor img = rnd({2, 1, 32, 32}, 1), hf = rnd({2, 1, 32, 32}, 2);
  CHECK_THROWS_AS(net.backward(Tensor(net.output_shape(2))), Error);

  SUBCASE("zero upstream gradient") {
    net.forward(img, hf, true);
    net.params().zero_grad();
    net.backward(Tensor(net.output_shape(2)));
    for (const nn::Parameter* p : net.params().all()) CHECK(all_zero(p->grad));
  }
  SUBCASE("frozen group") {
    net.params().set_frozen("stage2.", true);
    net.forward(img, hf, true);
    net.params().zero_grad();
    net.backward(rnd(net.output_shape(2), 7));
    bool others = false;
    for (const nn::Parameter* p : net.params().all()) {
      if (p->name.rfind("stage2.", 0) == 0)
        CHECK(all_zero(p->grad));
      else if (p->trainable && !all_zero(p->grad))
        others = true;
    }
    CHECK(others);
  }
}

TEST_CASE("batch order does not couple samples in evaluation") {
  nn::Network net(small_config());
  const Tensor img = rnd({3, 1, 32, 32}, 1), hf = rnd({3, 1, 32, 32}, 2);
  const Tensor out = net.forward(img, hf, false);
  const int perm[3] = {2, 0, 1};
  Tensor pimg(img.shape()), phf(hf.shape());
  const std::size_t per = static_cast<std::size_t>(32 * 32);
  for (int n = 0; n < 3; ++n)
    for (std::size_t i = 0; i < per; ++i) {
      pimg[static_cast<std::size_t>(n) * per + i] = img[static_cast<std::size_t>(perm[n]) * per + i];
      phf[static_cast<std::size_t>(n) * per + i] = hf[static_cast<std::size_t>(perm[n]) * per + i];
    }
  const Tensor pout = net.forward(pimg, phf, false);
  const std::size_t plane = out.numel() / 3;
  for (int n = 0; n < 3; ++n)
    for (std::size_t i = 0; i < plane; ++i)
      CHECK(pout[static_cast<std::size_t>(n) * plane + i] == doctest::Approx(out[static_cast<std::size_t>(perm[n]) * plane + i]).epsilon(1e-12));
}

TEST_CASE("configuration validation") {
  nn::NetworkConfig c;
  c.input_size = 60;
  CHECK_THROWS_AS(c.validate(), Error);
  c = nn::NetworkConfig{};
  c.stages[1].reduction = 3;
  CHECK_THROWS_AS(c.validate(), Error);
  c = nn::NetworkConfig{};
  c.heads = 3;
  CHECK_THROWS_AS(c.validate(), Error);
  CHECK_NOTHROW(nn::NetworkConfig{}.validate());
}
