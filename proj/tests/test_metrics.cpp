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
#include <vector>

#include "unifl/error.hpp"
#include "unifl/metrics.hpp"

using namespace unifl;

namespace {

LandmarkSet points(std::vector<Point> pts) { return LandmarkSet::all_visible(std::nullopt, std::move(pts)); }

LandmarkSet random_face(DatasetId ds, int n, std::mt19937_64& rng, double spread) {
  std::uniform_real_distribution<double> u(0.0, spread);
  std::vector<Point> pts(static_cast<std::size_t>(n));
  for (auto& p : pts) p = {u(rng), u(rng)};
  LandmarkSet s = LandmarkSet::all_visible(ds, std::move(pts));
  s.box = bounding_box(s);
  return s;
}

}  // namespace

TEST_CASE("normalized mean error hand cases") {
  const LandmarkSet gt = points({{0, 0}, {10, 10}});
  CHECK(nme(gt, gt, 10.0) == 0.0);
  CHECK(nme(gt, points({{3, 0}, {10, 14}}), 10.0) == 0.35);
  CHECK(nme(points({{1, 1}}), points({{4, 5}}), 5.0) == 1.0);

  LandmarkSet hidden = points({{0, 0}, {10, 10}, {5, 5}});
  hidden.visible[2] = false;
  CHECK(nme(hidden, points({{3, 0}, {10, 14}, {500, 500}}), 10.0) == 0.35);

  CHECK_THROWS_AS(nme(gt, points({{0, 0}}), 10.0), Error);
  CHECK_THROWS_AS(nme(gt, gt, 0.0), Error);
}

TEST_CASE("normalizers") {
  std::vector<Point> pts(68, Point{50, 50});
  pts[36] = {30, 40};
  pts[45] = {70, 40};
  LandmarkSet s = LandmarkSet::all_visible(DatasetId::T300W, pts);
  CHECK(normalizer(s, NormalizationRule::inter_ocular(DatasetId::T300W)) == 40.0);
  s.box = Box{0, 0, 16, 4};
  CHECK(normalizer(s, NormalizationRule::face_size()) == 8.0);
  CHECK(NormalizationRule::standard_for(DatasetId::AFLW).kind == NormalizationKind::FaceSize);
  CHECK(NormalizationRule::standard_for(DatasetId::COFW).kind == NormalizationKind::InterOcular);

  LandmarkSet degenerate = LandmarkSet::all_visible(DatasetId::T300W, std::vector<Point>(68, Point{1, 1}));
  CHECK_THROWS_AS(normalizer(degenerate, NormalizationRule::inter_ocular(DatasetId::T300W)), Error);
  CHECK_THROWS_AS(normalizer(degenerate, NormalizationRule::face_size()), Error);  // no box
}

TEST_CASE("failure rate") {
  const std::vector<double> v{0.05, 0.12, 0.20};
  CHECK(failure_rate(v, 0.10) == 2.0 / 3.0);
  CHECK(failure_rate(std::vector<double>{0.01, 0.02}) == 0.0);
  CHECK(failure_rate(std::vector<double>{0.3, 0.5}) == 1.0);
  CHECK(failure_rate(std::vector<double>{0.10}) == 0.0);  // strictly greater
  CHECK_THROWS_AS(failure_rate(std::vector<double>{}), Error);

  std::mt19937_64 rng(2);
  std::uniform_real_distribution<double> u(0.0, 0.2);
  std::vector<double> many(50);
  for (double& x : many) x = u(rng);
  const double fr = failure_rate(many);
  for (int k = 0; k < 10; ++k) {
    std::shuffle(many.begin(), many.end(), rng);
    CHECK(failure_rate(many) == fr);
  }
}

TEST_CASE("scale invariance") {
  std::mt19937_64 rng(6);
  for (DatasetId ds : {DatasetId::T300W, DatasetId::WFLW, DatasetId::COFW, DatasetId::AFLW}) {
    const int n = ds == DatasetId::T300W ? 68 : ds == DatasetId::WFLW ? 98 : ds == DatasetId::COFW ? 29 : 19;
    const LandmarkSet gt = random_face(ds, n, rng, 100), pred = random_face(ds, n, rng, 100);
    const NormalizationRule rule = NormalizationRule::standard_for(ds);
    const double base = nme(gt, pred, rule);
    for (double s : {0.01, 0.5, 3.0, 250.0}) {
      LandmarkSet g2 = gt, p2 = pred;
      for (auto& p : g2.coords) p = {p.x * s, p.y * s};
      for (auto& p : p2.coords) p = {p.x * s, p.y * s};
      g2.box = Box{gt.box->x_min * s, gt.box->y_min * s, gt.box->x_max * s, gt.box->y_max * s};
      CHECK(std::abs(nme(g2, p2, rule) - base) < 1e-12);
    }
  }
}

TEST_CASE("batch evaluation equals a per-landmark loop") {
  std::mt19937_64 rng(7);
  std::vector<LandmarkSet> gts, preds;
  for (int k = 0; k < 12; ++k) {
    gts.push_back(random_face(DatasetId::COFW, 29, rng, 60));
    preds.push_back(random_face(DatasetId::COFW, 29, rng, 60));
    gts.back().visible[static_cast<std::size_t>(k)] = false;
  }
  const NormalizationRule rule = NormalizationRule::inter_ocular(DatasetId::COFW);
  const EvaluationSummary s = evaluate(gts, preds, rule);
  double mean = 0.0;
  for (std::size_t k = 0; k < gts.size(); ++k) {
    const double d = normalizer(gts[k], rule);
    double sum = 0.0;
    int n = 0;
    for (std::size_t i = 0; i < 29; ++i) {
      if (!gts[k].visible[i]) continue;
      sum += std::hypot(gts[k].coords[i].x - preds[k].coords[i].x, gts[k].coords[i].y - preds[k].coords[i].y) / d;
      ++n;
    }
    CHECK(s.per_image[k] == sum / n);
    mean += sum / n;
  }
  CHECK(s.mean_nme == mean / 12.0);
  CHECK(s.failure_rate == failure_rate(s.per_image));
}
