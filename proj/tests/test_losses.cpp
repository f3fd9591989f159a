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

#include <algorithm>
#include <cmath>
#include <random>

#include "fixtures.hpp"
#include "unifl/error.hpp"
#include "unifl/losses.hpp"

using namespace unifl;

namespace {

// Scalar reference for the piecewise loss, written directly from its definition.
double reference_awing(double y, double y_hat, double omega = 14, double theta = 0.5, double alpha = 2.1,
                       double eps = 1) {
  const double d = std::abs(y - y_hat);
  if (d < theta) return omega * std::log(1.0 + std::pow(d / eps, alpha - y));
  const double r = std::pow(theta / eps, alpha - y);
  const double a = omega / (1.0 + r) * (alpha - y) * std::pow(theta / eps, alpha - y - 1.0) / eps;
  const double c = theta * a - omega * std::log(1.0 + r);
  return a * d - c;
}

double nonlinear_branch(double y, double delta, const AWingParams& p) {
  return p.omega * std::log1p(std::pow(delta / p.epsilon, p.alpha - y));
}

double contribution_ratio(const LossBreakdown& b, const ProtocolTable& t) {
  double four = 0.0, one = 0.0;
  for (int p = 0; p < kUnifiedCount; ++p) {
    const double c = b.per_unified_landmark[static_cast<std::size_t>(p)].contribution;
    if (t.count({p}) == 4) four += c;
    if (t.count({p}) == 1) one += c;
  }
  return four / one;
}

std::vector<HeatmapStack> zero_predictions(const std::vector<LossTarget>& targets) {
  std::vector<HeatmapStack> preds;
  for (const auto& t : targets)
    preds.push_back(HeatmapStack::zeros(t.heatmaps.plane_count(), t.heatmaps.height, t.heatmaps.width, t.heatmaps.stride));
  return preds;
}

std::vector<HeatmapStack> exact_predictions(const std::vector<LossTarget>& targets) {
  std::vector<HeatmapStack> preds;
  for (const auto& t : targets) preds.push_back(t.heatmaps);
  return preds;
}

}  // namespace

TEST_CASE("pixel loss values") {
  const AWingParams p;
  CHECK(awing_pixel(0.3, 0.3) == 0.0);
  CHECK(awing_pixel(0.0, 0.5) == doctest::Approx(14.0 * std::log(1.0 + std::pow(0.5, 2.1))).epsilon(1e-14));
  CHECK(awing_pixel(0.0, 0.5) == doctest::Approx(2.9352).epsilon(1e-4));
  CHECK(awing_pixel(1.0, 0.6) == doctest::Approx(14.0 * std::log(1.0 + std::pow(0.4, 1.1))).epsilon(1e-14));
  std::mt19937_64 rng(5);
  std::uniform_real_distribution<double> uy(0.0, 1.0), ud(-1.5, 1.5);
  for (int i = 0; i < 200; ++i) {
    const double y = uy(rng), yh = y + ud(rng);
    CHECK(awing_pixel(y, yh, p) == doctest::Approx(reference_awing(y, yh)).epsilon(1e-12));
    CHECK(awing_pixel(y, yh, p) >= 0.0);
  }
}

TEST_CASE("branches agree at the threshold") {
  const AWingParams p;
  for (double y : {0.0, 0.25, 0.5, 0.75, 1.0}) {
    const auto k = p.coefficients(y);
    CHECK(std::abs(nonlinear_branch(y, p.theta, p) - (k.a * p.theta - k.c)) < 1e-9);
  }
}

TEST_CASE("pixel loss gradient") {
  CHECK(awing_pixel_grad(0.4, 0.4) == 0.0);
  const AWingParams p;
  CHECK(awing_pixel_grad(0.0, 0.9) == doctest::Approx(p.coefficients(0.0).a));
  CHECK(awing_pixel_grad(0.2, -0.7) == doctest::Approx(-p.coefficients(0.2).a));
  const double h = 1e-6;
  const double fd = (awing_pixel(0.0, 0.3 + h) - awing_pixel(0.0, 0.3 - h)) / (2 * h);
  CHECK(std::abs(fd - awing_pixel_grad(0.0, 0.3)) / std::abs(fd) < 1e-6);

  std::mt19937_64 rng(9);
  std::uniform_real_distribution<double> uy(0.0, 1.0), ud(-1.2, 1.2);
  int checked = 0;
  while (checked < 100) {
    const double y = uy(rng), d = ud(rng);
    if (std::abs(std::abs(d) - p.theta) < 1e-4 || std::abs(d) < 1e-3) continue;
    const double yh = y + d;
    const double num = (awing_pixel(y, yh + h) - awing_pixel(y, yh - h)) / (2 * h);
    const double ana = awing_pixel_grad(y, yh);
    CHECK(std::abs(num - ana) / std::max(std::abs(num), std::abs(ana)) < 1e-5);
    ++checked;
  }
}

TEST_CASE("landmark loss") {
  const ImagePlane gt(2, 2, std::vector<double>{1, 0, 0, 0});
  const ImagePlane zero(2, 2);
  const double expected = (reference_awing(1, 0) + 3 * reference_awing(0, 0)) / 4.0;
  CHECK(fmb_landmark_loss(zero, gt, 1.0) == doctest::Approx(expected).epsilon(1e-14));
  CHECK(fmb_landmark_loss(gt, gt, 1.0) == 0.0);
  CHECK(fmb_landmark_loss(zero, gt, 0.5) == doctest::Approx(0.5 * fmb_landmark_loss(zero, gt, 1.0)).epsilon(1e-15));
  CHECK_THROWS_AS(fmb_landmark_loss(ImagePlane(2, 3), gt, 1.0), ShapeError);
}

TEST_CASE("batch loss matches a direct triple loop") {
  const ProtocolTable& t = ProtocolTable::standard();
  std::mt19937_64 rng(21);
  auto targets = test::random_targets(t, 2, 32, rng);  // 8 samples, 8x8 planes
  targets[2].heatmaps.present[static_cast<std::size_t>(t.map_forward(DatasetId::WFLW, 5).index)] = false;
  std::vector<HeatmapStack> preds = zero_predictions(targets);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  for (auto& s : preds)
    for (auto& pl : s.planes)
      for (auto& v : pl.data()) v = u(rng);
  const WeightTable w = build_weight_table(t, Beta(0.9));

  const LossBreakdown b = fmb_batch_loss(targets, preds, t, w);

  double total = 0.0;
  std::array<double, kDatasetCount> per{};
  const double n = static_cast<double>(targets.size());
  for (std::size_t s = 0; s < targets.size(); ++s) {
    const auto& m = t.datasets()[t.slot(targets[s].dataset)];
    int visible = 0;
    for (int j = 0; j < m.size; ++j) visible += targets[s].heatmaps.present[static_cast<std::size_t>(m.forward[static_cast<std::size_t>(j)])];
    double sample = 0.0;
    for (int j = 0; j < m.size; ++j) {
      const auto p = static_cast<std::size_t>(m.forward[static_cast<std::size_t>(j)]);
      if (!targets[s].heatmaps.present[p]) continue;
      double sum = 0.0;
      const auto& g = targets[s].heatmaps.planes[p];
      for (std::size_t i = 0; i < g.size(); ++i) sum += awing_pixel(g.data()[i], preds[s].planes[p].data()[i]);
      sample += w.weight[p] * (sum / static_cast<double>(g.size()));
    }
    const double term = sample / visible / n;
    total += term;
    per[static_cast<std::size_t>(targets[s].dataset)] += term;
  }
  CHECK(b.total == total);
  CHECK(b.per_dataset == per);
  CHECK(b.samples == 8);

  double from_landmarks = 0.0, from_datasets = 0.0;
  for (const auto& st : b.per_unified_landmark) from_landmarks += st.contribution;
  for (double v : b.per_dataset) from_datasets += v;
  CHECK(std::abs(from_landmarks - b.total) <= 1e-10 * b.total);
  CHECK(std::abs(from_datasets - b.total) <= 1e-10 * b.total);
}

TEST_CASE("batch loss gradient matches finite differences") {
  const ProtocolTable& t = ProtocolTable::standard();
  std::mt19937_64 rng(4);
  auto targets = test::random_targets(t, 1, 16, rng);
  auto preds = zero_predictions(targets);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  for (auto& s : preds)
    for (auto& pl : s.planes)
      for (auto& v : pl.data()) v = u(rng);
  const WeightTable w = build_weight_table(t, Beta(0.9));
  std::vector<HeatmapStack> grads;
  fmb_batch_loss(targets, preds, t, w, {}, &grads);
  const double h = 1e-6;
  for (std::size_t s = 0; s < targets.size(); ++s) {
    const auto p = static_cast<std::size_t>(t.map_forward(targets[s].dataset, 0).index);
    for (std::size_t i = 0; i < 4; ++i) {
      double& v = preds[s].planes[p].data()[i];
      const double orig = v;
      v = orig + h;
      const double up = fmb_batch_loss(targets, preds, t, w).total;
      v = orig - h;
      const double down = fmb_batch_loss(targets, preds, t, w).total;
      v = orig;
      const double num = (up - down) / (2 * h);
      const double ana = grads[s].planes[p].data()[i];
      CHECK(std::abs(num - ana) <= 1e-6 * std::max(std::abs(ana), 1e-6));
    }
  }
}

TEST_CASE("batch loss edge cases") {
  const ProtocolTable& t = ProtocolTable::standard();
  std::mt19937_64 rng(8);
  const auto targets = test::random_targets(t, 2, 32, rng);
  const WeightTable w = build_weight_table(t, Beta(0.9));

  SUBCASE("perfect predictions") { CHECK(fmb_batch_loss(targets, exact_predictions(targets), t, w).total == 0.0); }

  SUBCASE("mislocated landmark in one AFLW sample") {
    auto preds = exact_predictions(targets);
    const auto p = static_cast<std::size_t>(t.map_forward(DatasetId::AFLW, 3).index);
    auto& plane = preds[0].planes[p];
    std::reverse(plane.data().begin(), plane.data().end());
    const LossBreakdown b = fmb_batch_loss(targets, preds, t, w);
    CHECK(b.dataset_loss(DatasetId::AFLW) > 0.0);
    CHECK(b.dataset_loss(DatasetId::WFLW) == 0.0);
    CHECK(b.dataset_loss(DatasetId::COFW) == 0.0);
    CHECK(b.dataset_loss(DatasetId::T300W) == 0.0);
    const double expected = w.weight[p] * fmb_landmark_loss(plane, targets[0].heatmaps.planes[p], 1.0) / 19.0 / 8.0;
    CHECK(b.total == doctest::Approx(expected).epsilon(1e-14));
  }

  SUBCASE("zero beta gives the unweighted aggregate") {
    const auto preds = zero_predictions(targets);
    const LossBreakdown b = fmb_batch_loss(targets, preds, t, build_weight_table(t, Beta(0.0)));
    double plain = 0.0;
    for (std::size_t s = 0; s < targets.size(); ++s) {
      const auto& m = t.datasets()[t.slot(targets[s].dataset)];
      double sum = 0.0;
      for (int j : m.forward)
        sum += fmb_landmark_loss(preds[s].planes[static_cast<std::size_t>(j)], targets[s].heatmaps.planes[static_cast<std::size_t>(j)], 1.0);
      plain += sum / m.size / static_cast<double>(targets.size());
    }
    CHECK(b.total == doctest::Approx(plain).epsilon(1e-13));
  }

  SUBCASE("missing plane") {
    auto preds = zero_predictions(targets);
    preds[3].planes.pop_back();
    preds[3].present.pop_back();
    CHECK_THROWS_AS(fmb_batch_loss(targets, preds, t, w), Error);
  }
}

TEST_CASE("shared landmarks lose weight as beta grows") {
  const ProtocolTable& t = ProtocolTable::standard();
  std::mt19937_64 rng(12);
  const auto targets = test::random_targets(t, 2, 32, rng);
  const auto preds = zero_predictions(targets);
  double previous = 1e300;
  for (double beta : {0.0, 0.3, 0.6, 0.9, 0.999}) {
    const double r = contribution_ratio(fmb_batch_loss(targets, preds, t, build_weight_table(t, Beta(beta))), t);
    CHECK(r <= previous);
    previous = r;
  }
}
