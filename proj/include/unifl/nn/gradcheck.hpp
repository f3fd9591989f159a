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

#include <cstdint>
#include <functional>
#include <string>
#include <vector>

#include "unifl/nn/tape.hpp"

namespace unifl::nn {

struct GradCheckOptions {
  int samples = 20;
  double step = 1e-5;            // central-difference half width
  double denominator_floor = 1e-6;  // keeps near-zero gradients from dominating the ratio
  std::uint64_t seed = 3;
};

struct GradCheckEntry {
  std::string name;
  std::size_t index = 0;
  double analytic = 0.0;
  double numeric = 0.0;
  double rel_error = 0.0;
};

struct GradCheckResult {
  std::vector<GradCheckEntry> entries;
  double max_rel_error = 0.0;
};

/// `loss(with_backward)` runs a forward pass and returns the scalar loss; when asked it also
/// runs backward so that Parameter::grad holds d(loss)/d(param). Parameters are sampled
/// uniformly by tensor, then by element.
GradCheckResult gradcheck(ParameterStore& store, const std::function<double(bool)>& loss,
                          const GradCheckOptions& options = {});

/// Relative error |a - n| / max(|a|, |n|, floor).
double relative_error(double analytic, double numeric, double floor);

}  // namespace unifl::nn
