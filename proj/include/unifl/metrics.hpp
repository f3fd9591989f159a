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

#include <span>
#include <vector>

#include "unifl/landmarks.hpp"

namespace unifl {

inline constexpr double kDefaultFailureThreshold = 0.10;

enum class NormalizationKind {
  InterOcular,  // distance between the outer eye corners
  InterPupil,   // distance between the eye centers
  FaceSize,     // sqrt(box width * box height) of the ground-truth face box
};

/// How the normalizing distance d is derived from a ground-truth landmark set.
/// Each anchor is the mean of a group of landmark indices.
struct NormalizationRule {
  NormalizationKind kind = NormalizationKind::InterOcular;
  std::vector<int> anchor_a;
  std::vector<int> anchor_b;

  static NormalizationRule inter_ocular(DatasetId ds);
  static NormalizationRule inter_pupil(DatasetId ds);
  static NormalizationRule face_size();
  /// The normalization each dataset is conventionally reported with.
  static NormalizationRule standard_for(DatasetId ds);
};

/// Resolves d for one ground-truth set. Throws when it is not strictly positive.
double normalizer(const LandmarkSet& gt, const NormalizationRule& rule);

/// Mean Euclidean error over landmarks visible in `gt`, divided by d.
double nme(const LandmarkSet& gt, const LandmarkSet& pred, double d);
double nme(const LandmarkSet& gt, const LandmarkSet& pred, const NormalizationRule& rule);

/// Fraction of per-image NMEs strictly greater than tau.
double failure_rate(std::span<const double> per_image_nmes, double tau = kDefaultFailureThreshold);

struct EvaluationSummary {
  std::vector<double> per_image;
  double mean_nme = 0.0;
  double failure_rate = 0.0;
};

EvaluationSummary evaluate(std::span<const LandmarkSet> gts, std::span<const LandmarkSet> preds,
                           const NormalizationRule& rule, double tau = kDefaultFailureThreshold);

}  // namespace unifl
