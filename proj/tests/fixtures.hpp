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

#include <random>
#include <vector>

#include "unifl/heatmap.hpp"
#include "unifl/losses.hpp"
#include "unifl/protocol.hpp"

namespace unifl::test {

/// Uniform landmark coordinates inside a square image of side `size`.
inline LandmarkSet random_landmarks(const ProtocolTable& table, DatasetId ds, double size, std::mt19937_64& rng) {
  std::uniform_real_distribution<double> u(0.0, size);
  std::vector<Point> pts(static_cast<std::size_t>(table.dataset_landmarks(ds)));
  for (auto& p : pts) p = {u(rng), u(rng)};
  return LandmarkSet::all_visible(ds, std::move(pts));
}

/// `per_dataset` targets per dataset in AFLW, WFLW, COFW, 300W order on an image of side `size`.
inline std::vector<LossTarget> random_targets(const ProtocolTable& table, int per_dataset, int size,
                                              std::mt19937_64& rng) {
  std::vector<LossTarget> out;
  const auto geom = HeatmapGeometry::for_input(size, size);
  for (DatasetId ds : kAllDatasets)
    for (int k = 0; k < per_dataset; ++k) out.push_back({ds, encode(random_landmarks(table, ds, size, rng), table, geom)});
  return out;
}

}  // namespace unifl::test
