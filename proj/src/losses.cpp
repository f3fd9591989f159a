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

#include "unifl/losses.hpp"

#include <cmath>

#include "unifl/error.hpp"

namespace unifl {

AWingParams::Coefficients AWingParams::coefficients(double y) const {
  const double p = alpha - y;
  const double r = theta / epsilon;
  const double rp = std::pow(r, p);
  const double a = omega * (1.0 / (1.0 + rp)) * p * std::pow(r, p - 1.0) * (1.0 / epsilon);
  const double c = theta * a - omega * std::log1p(rp);
  return {a, c};
}

double awing_pixel(double y, double y_hat, const AWingParams& params) {
  const double delta = std::abs(y - y_hat);
  if (delta < params.theta) return params.omega * std::log1p(std::pow(delta / params.epsilon, params.alpha - y));
  const auto k = params.coefficients(y);
  return k.a * delta - k.c;
}

double awing_pixel_grad(double y, double y_hat, const AWingParams& params) {
  const double diff = y_hat - y;
  const double delta = std::abs(diff);
  if (delta == 0.0) return 0.0;
  const double sign = diff > 0 ? 1.0 : -1.0;
  if (delta < params.theta) {
    const double p = params.alpha - y;
    const double u = delta / params.epsilon;
    const double up = std::pow(u, p);
    // d/d delta of omega * ln(1 + u^p) = omega * p * u^(p-1) / (eps * (1 + u^p))
    return sign * params.omega * p * (up / u) / (params.epsilon * (1.0 + up));
  }
  return sign * params.coefficients(y).a;
}

double fmb_landmark_loss(const ImagePlane& pred, const ImagePlane& gt, double weight, const AWingParams& params) {
  if (pred.height() != gt.height() || pred.width() != gt.width())
    throw ShapeError("prediction and ground-truth planes differ in size");
  if (gt.empty()) throw ShapeError("empty heatmap plane");
  double sum = 0.0;
  for (std::size_t i = 0; i < gt.size(); ++i) sum += awing_pixel(gt.data()[i], pred.data()[i], params);
  return weight * (sum / static_cast<double>(gt.size()));
}

LossBreakdown fmb_batch_loss(std::span<const LossTarget> targets, std::span<const HeatmapStack> preds,
                             const ProtocolTable& table, const WeightTable& weights, const AWingParams& params,
                             std::vector<HeatmapStack>* grads) {
  if (targets.size() != preds.size()) throw Error("one prediction stack per sample is required");
  if (targets.empty()) throw Error("empty mini-batch");
  const int k = table.unified_count();
  if (static_cast<int>(weights.weight.size()) != k) throw Error("weight table does not match the protocol");

  LossBreakdown out;
  out.samples = static_cast<int>(targets.size());
  out.per_unified_landmark.assign(static_cast<std::size_t>(k), {});

  if (grads) {
    grads->clear();
    grads->reserve(preds.size());
  }

  for (std::size_t s = 0; s < targets.size(); ++s) {
    const auto& tgt = targets[s];
    const auto& pred = preds[s];
    const std::size_t slot = table.slot(tgt.dataset);
    const auto& mapping = table.datasets()[slot];
    if (tgt.heatmaps.plane_count() != k) throw Error("ground-truth stack must hold one plane per unified id");
    if (pred.plane_count() != k)
      throw Error("missing plane: prediction stack " + std::to_string(s) + " has " +
                  std::to_string(pred.plane_count()) + " planes, expected " + std::to_string(k));

    if (grads) grads->push_back(HeatmapStack::zeros(k, pred.height, pred.width, pred.stride));

    int visible = 0;
    for (int j = 0; j < mapping.size; ++j)
      if (tgt.heatmaps.present[static_cast<std::size_t>(mapping.forward[static_cast<std::size_t>(j)])]) ++visible;
    if (visible == 0) continue;
    const double n = static_cast<double>(targets.size());
    const double nx = static_cast<double>(visible);

    double sample_total = 0.0;
    for (int j = 0; j < mapping.size; ++j) {
      const auto p = static_cast<std::size_t>(mapping.forward[static_cast<std::size_t>(j)]);
      if (!tgt.heatmaps.present[p]) continue;
      const auto& gt_plane = tgt.heatmaps.planes[p];
      const auto& pr_plane = pred.planes[p];
      const double w = weights.weight[p];
      const double raw = fmb_landmark_loss(pr_plane, gt_plane, 1.0, params);
      const double weighted = w * raw;

      auto& st = out.per_unified_landmark[p];
      st.raw_sum += raw;
      st.weighted_sum += weighted;
      st.contribution += weighted / nx / n;
      st.pixel_count += static_cast<long>(gt_plane.size());
      st.occurrences += 1;
      sample_total += weighted;

      if (grads) {
        auto& g = (*grads)[s].planes[p];
        const double gscale = w / static_cast<double>(gt_plane.size()) / nx / n;
        for (std::size_t i = 0; i < gt_plane.size(); ++i)
          g.data()[i] = gscale * awing_pixel_grad(gt_plane.data()[i], pr_plane.data()[i], params);
        (*grads)[s].present[p] = true;
      }
    }
    const double term = sample_total / nx / n;
    out.per_dataset[static_cast<std::size_t>(tgt.dataset)] += term;
    out.total += term;
  }
  return out;
}

}  // namespace unifl
