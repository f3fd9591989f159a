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
#include <span>
#include <vector>

#include "unifl/capacity.hpp"
#include "unifl/heatmap.hpp"
#include "unifl/protocol.hpp"

namespace unifl {

/// Adaptive Wing loss constants. A and C depend on the ground-truth pixel value y
/// and are produced by coefficients().
struct AWingParams {
  double omega = 14.0;
  double theta = 0.5;
  double alpha = 2.1;
  double epsilon = 1.0;

  struct Coefficients {
    double a;
    double c;
  };
  /// A = omega / (1 + (theta/eps)^(alpha-y)) * (alpha-y) * (theta/eps)^(alpha-y-1) / eps
  /// C = theta*A - omega * ln(1 + (theta/eps)^(alpha-y))
  Coefficients coefficients(double y) const;
};

/// Per-pixel loss between ground truth y and prediction y_hat.
double awing_pixel(double y, double y_hat, const AWingParams& params = {});
/// d awing_pixel / d y_hat. At |y - y_hat| == theta the linear branch is used.
double awing_pixel_grad(double y, double y_hat, const AWingParams& params = {});

/// weight * mean over pixels of awing_pixel(gt, pred).
double fmb_landmark_loss(const ImagePlane& pred, const ImagePlane& gt, double weight,
                         const AWingParams& params = {});

/// Ground-truth heatmaps for one sample in a mini-batch.
struct LossTarget {
  DatasetId dataset;
  HeatmapStack heatmaps;  // one plane per unified id; `present` marks visible landmarks
};

struct LandmarkLossStats {
  double raw_sum = 0.0;       // sum of unweighted per-landmark losses
  double weighted_sum = 0.0;  // sum of weighted per-landmark losses
  double contribution = 0.0;  // share of `total` (weighted / (n * N_X) summed)
  long pixel_count = 0;
  int occurrences = 0;
};

struct LossBreakdown {
  double total = 0.0;
  int samples = 0;
  std::array<double, kDatasetCount> per_dataset{};  // sums to total
  std::vector<LandmarkLossStats> per_unified_landmark;

  double dataset_loss(DatasetId ds) const { return per_dataset[static_cast<std::size_t>(ds)]; }
};

/// Balanced mini-batch loss:
///   total = (1/n) * sum over samples s of (sum over visible landmarks j of w_p * L_j) / N_s
/// where n is the batch size, N_s the visible landmark count of sample s and w_p the
/// inverse effective capacity of the unified landmark f(j).
/// If `grads` is non-null it receives d total / d preds, shaped like `preds`.
LossBreakdown fmb_batch_loss(std::span<const LossTarget> targets, std::span<const HeatmapStack> preds,
                             const ProtocolTable& table, const WeightTable& weights,
                             const AWingParams& params = {}, std::vector<HeatmapStack>* grads = nullptr);

}  // namespace unifl
