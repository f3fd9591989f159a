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

#include "unifl/nn/gradcheck.hpp"

#include <algorithm>
#include <cmath>
#include <random>

#include "unifl/error.hpp"

namespace unifl::nn {

double relative_error(double analytic, double numeric, double floor) {
  return std::abs(analytic - numeric) / std::max({std::abs(analytic), std::abs(numeric), floor});
}

GradCheckResult gradcheck(ParameterStore& store, const std::function<double(bool)>& loss,
                          const GradCheckOptions& options) {
  std::vector<Parameter*> candidates;
  for (Parameter* p : store.trainable())
    if (!p->frozen && p->value.numel() > 0) candidates.push_back(p);
  if (candidates.empty()) throw Error("gradcheck: no trainable parameters");

  store.zero_grad();
  loss(true);

  std::mt19937_64 rng(options.seed);
  auto pick = [&rng](std::size_t n) {
    return static_cast<std::size_t>(static_cast<double>(rng() >> 11) * 0x1.0p-53 * static_cast<double>(n));
  };
  GradCheckResult result;
  for (int s = 0; s < options.samples; ++s) {
    Parameter* p = candidates[pick(candidates.size())];
    const std::size_t i = pick(p->value.numel());
    const double original = p->value[i];
    p->value[i] = original + options.step;
    const double up = loss(false);
    p->value[i] = original - options.step;
    const double down = loss(false);
    p->value[i] = original;

    GradCheckEntry e;
    e.name = p->name;
    e.index = i;
    e.analytic = p->grad[i];
    e.numeric = (up - down) / (2.0 * options.step);
    e.rel_error = relative_error(e.analytic, e.numeric, options.denominator_floor);
    result.max_rel_error = std::max(result.max_rel_error, e.rel_error);
    result.entries.push_back(std::move(e));
  }
  return result;
}

}  // namespace unifl::nn
