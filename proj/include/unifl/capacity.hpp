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

#include <vector>

#include "unifl/protocol.hpp"

namespace unifl {

/// Redundancy ratio in [0, 1). Shared by every landmark.
class Beta {
 public:
  explicit Beta(double value);
  double value() const { return value_; }

 private:
  double value_;
};

/// Values at or above this are evaluated through the closed-form limit.
inline constexpr double kBetaLimitThreshold = 1.0 - 1e-9;

/// Effective sample capacity of n overlapping samples: (1 - beta^n) / (1 - beta),
/// i.e. 1 + beta + ... + beta^(n-1). Throws for n < 1.
double effective_capacity(Beta beta, int n);

/// beta -> 1 limit of effective_capacity, which is n itself.
double capacity_limit(int n);

/// Per-unified-landmark capacities and inverse-capacity loss weights.
struct WeightTable {
  double beta = 0.0;
  bool limit = false;  // built with beta -> 1 semantics
  std::vector<double> capacity;
  std::vector<double> weight;

  double weight_of(UnifiedLandmarkId p) const { return weight.at(static_cast<std::size_t>(p.index)); }
};

WeightTable build_weight_table(const ProtocolTable& table, Beta beta);
/// Weight table in the beta -> 1 limit: weight = 1 / count(p).
WeightTable build_limit_weight_table(const ProtocolTable& table);

}  // namespace unifl
