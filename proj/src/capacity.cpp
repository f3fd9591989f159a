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

#include "unifl/capacity.hpp"

#include <string>

#include "unifl/error.hpp"

namespace unifl {

Beta::Beta(double value) : value_(value) {
  if (!(value >= 0.0 && value < 1.0)) throw Error("beta must lie in [0, 1), got " + std::to_string(value));
}

double effective_capacity(Beta beta, int n) {
  if (n < 1) throw Error("effective capacity needs n >= 1");
  const double b = beta.value();
  if (b >= kBetaLimitThreshold) return capacity_limit(n);
  // Horner form of (1 - b^n) / (1 - b); keeps E_n = 1 + b * E_(n-1) bit-exact
  // and avoids the cancellation of the quotient as b approaches 1.
  double e = 1.0;
  for (int k = 1; k < n; ++k) e = 1.0 + b * e;
  return e;
}

double capacity_limit(int n) {
  if (n < 1) throw Error("effective capacity needs n >= 1");
  return static_cast<double>(n);
}

WeightTable build_weight_table(const ProtocolTable& table, Beta beta) {
  WeightTable w;
  w.beta = beta.value();
  w.limit = beta.value() >= kBetaLimitThreshold;
  const int k = table.unified_count();
  w.capacity.resize(static_cast<std::size_t>(k));
  w.weight.resize(static_cast<std::size_t>(k));
  for (int p = 0; p < k; ++p) {
    double e = effective_capacity(beta, table.count({p}));
    w.capacity[static_cast<std::size_t>(p)] = e;
    w.weight[static_cast<std::size_t>(p)] = 1.0 / e;
  }
  return w;
}

WeightTable build_limit_weight_table(const ProtocolTable& table) {
  WeightTable w;
  w.beta = 1.0;
  w.limit = true;
  const int k = table.unified_count();
  w.capacity.resize(static_cast<std::size_t>(k));
  w.weight.resize(static_cast<std::size_t>(k));
  for (int p = 0; p < k; ++p) {
    double e = capacity_limit(table.count({p}));
    w.capacity[static_cast<std::size_t>(p)] = e;
    w.weight[static_cast<std::size_t>(p)] = 1.0 / e;
  }
  return w;
}

}  // namespace unifl
