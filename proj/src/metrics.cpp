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

#include "unifl/metrics.hpp"

#include <cmath>
#include <numeric>

#include "unifl/error.hpp"

namespace unifl {

NormalizationRule NormalizationRule::inter_ocular(DatasetId ds) {
  switch (ds) {
    case DatasetId::T300W: return {NormalizationKind::InterOcular, {36}, {45}};
    case DatasetId::WFLW: return {NormalizationKind::InterOcular, {60}, {72}};
    case DatasetId::COFW: return {NormalizationKind::InterOcular, {8}, {11}};
    case DatasetId::AFLW: return {NormalizationKind::InterOcular, {6}, {11}};
  }
  throw Error("unknown dataset");
}

NormalizationRule NormalizationRule::inter_pupil(DatasetId ds) {
  switch (ds) {
    case DatasetId::T300W: return {NormalizationKind::InterPupil, {36, 37, 38, 39, 40, 41}, {42, 43, 44, 45, 46, 47}};
    case DatasetId::WFLW: return {NormalizationKind::InterPupil, {96}, {97}};
    case DatasetId::COFW: return {NormalizationKind::InterPupil, {16}, {17}};
    case DatasetId::AFLW: return {NormalizationKind::InterPupil, {7}, {10}};
  }
  throw Error("unknown dataset");
}

NormalizationRule NormalizationRule::face_size() { return {NormalizationKind::FaceSize, {}, {}}; }

NormalizationRule NormalizationRule::standard_for(DatasetId ds) {
  return ds == DatasetId::AFLW ? face_size() : inter_ocular(ds);
}

namespace {

Point anchor(const LandmarkSet& gt, const std::vector<int>& idx) {
  if (idx.empty()) throw Error("empty normalization anchor");
  Point p{};
  for (int i : idx) {
    if (i < 0 || static_cast<std::size_t>(i) >= gt.size()) throw Error("normalization anchor out of range");
    p.x += gt.coords[static_cast<std::size_t>(i)].x;
    p.y += gt.coords[static_cast<std::size_t>(i)].y;
  }
  return {p.x / static_cast<double>(idx.size()), p.y / static_cast<double>(idx.size())};
}

}  // namespace

double normalizer(const LandmarkSet& gt, const NormalizationRule& rule) {
  double d = 0.0;
  if (rule.kind == NormalizationKind::FaceSize) {
    if (!gt.box) throw Error("face-size normalization needs a ground-truth box");
    d = std::sqrt(gt.box->width() * gt.box->height());
  } else {
    const Point a = anchor(gt, rule.anchor_a), b = anchor(gt, rule.anchor_b);
    d = std::hypot(a.x - b.x, a.y - b.y);
  }
  if (!(d > 0.0)) throw Error("normalizing distance is zero");
  return d;
}

double nme(const LandmarkSet& gt, const LandmarkSet& pred, double d) {
  if (gt.size() != pred.size()) throw Error("landmark count mismatch between ground truth and prediction");
  if (!(d > 0.0)) throw Error("normalizing distance is zero");
  double sum = 0.0;
  int n = 0;
  for (std::size_t i = 0; i < gt.size(); ++i) {
    if (!gt.visible.empty() && !gt.visible[i]) continue;
    sum += std::hypot(gt.coords[i].x - pred.coords[i].x, gt.coords[i].y - pred.coords[i].y) / d;
    ++n;
  }
  if (n == 0) throw Error("no visible landmarks to evaluate");
  return sum / n;
}

double nme(const LandmarkSet& gt, const LandmarkSet& pred, const NormalizationRule& rule) {
  return nme(gt, pred, normalizer(gt, rule));
}

double failure_rate(std::span<const double> per_image_nmes, double tau) {
  if (per_image_nmes.empty()) throw Error("failure rate of an empty list");
  if (!(tau > 0.0)) throw Error("failure threshold must be positive");
  std::size_t failed = 0;
  for (double v : per_image_nmes)
    if (v > tau) ++failed;
  return static_cast<double>(failed) / static_cast<double>(per_image_nmes.size());
}

EvaluationSummary evaluate(std::span<const LandmarkSet> gts, std::span<const LandmarkSet> preds,
                           const NormalizationRule& rule, double tau) {
  if (gts.size() != preds.size()) throw Error("ground truth and prediction lists differ in length");
  EvaluationSummary s;
  s.per_image.reserve(gts.size());
  for (std::size_t i = 0; i < gts.size(); ++i) s.per_image.push_back(nme(gts[i], preds[i], rule));
  s.mean_nme = std::accumulate(s.per_image.begin(), s.per_image.end(), 0.0) / static_cast<double>(s.per_image.size());
  s.failure_rate = failure_rate(s.per_image, tau);
  return s;
}

}  // namespace unifl
