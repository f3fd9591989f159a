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

#include <algorithm>
#include <numeric>

#include "unifl/dataset.hpp"
#include "unifl/error.hpp"

namespace unifl {

namespace {

// Fisher-Yates with uniform01 so the order does not depend on the standard library.
void shuffle(std::vector<int>& v, std::mt19937_64& rng) {
  for (std::size_t i = v.size(); i > 1; --i) {
    const auto j = static_cast<std::size_t>(uniform01(rng) * static_cast<double>(i));
    std::swap(v[i - 1], v[std::min(j, i - 1)]);
  }
}

}  // namespace

MixedBatchSampler::MixedBatchSampler(std::array<std::vector<Sample>, kDatasetCount> datasets, std::uint64_t seed,
                                     int per_dataset)
    : data_(std::move(datasets)), per_dataset_(per_dataset) {
  if (per_dataset < 1) throw Error("per-dataset quota must be positive");
  for (std::size_t d = 0; d < kDatasetCount; ++d) {
    if (data_[d].empty())
      throw Error("dataset " + std::string(dataset_name(static_cast<DatasetId>(d))) + " has no samples");
    rng_[d].seed(derive_seed(seed, 0x5A3D1E00 + d));
    order_[d].resize(data_[d].size());
    std::iota(order_[d].begin(), order_[d].end(), 0);
    shuffle(order_[d], rng_[d]);
  }
}

int MixedBatchSampler::take(std::size_t d) {
  if (cursor_[d] == order_[d].size()) {
    shuffle(order_[d], rng_[d]);
    cursor_[d] = 0;
  }
  return order_[d][cursor_[d]++];
}

std::vector<MixedBatchSampler::Draw> MixedBatchSampler::next_indices() {
  std::vector<Draw> out;
  out.reserve(kDatasetCount * static_cast<std::size_t>(per_dataset_));
  for (std::size_t d = 0; d < kDatasetCount; ++d)
    for (int k = 0; k < per_dataset_; ++k) out.push_back({static_cast<DatasetId>(d), take(d)});
  return out;
}

MixedBatch MixedBatchSampler::next_batch() {
  MixedBatch b;
  for (const auto& draw : next_indices()) {
    b.samples.push_back(data_[static_cast<std::size_t>(draw.dataset)][static_cast<std::size_t>(draw.index)]);
    ++b.composition[static_cast<std::size_t>(draw.dataset)];
  }
  return b;
}

}  // namespace unifl
