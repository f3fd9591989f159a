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
#include <cstddef>
#include <optional>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

namespace unifl {

/// The four annotation protocols that are trained jointly.
enum class DatasetId { AFLW = 0, WFLW = 1, COFW = 2, T300W = 3 };

inline constexpr std::size_t kDatasetCount = 4;
inline constexpr std::array<DatasetId, kDatasetCount> kAllDatasets = {
    DatasetId::AFLW, DatasetId::WFLW, DatasetId::COFW, DatasetId::T300W};

/// Size of the unified landmark set.
inline constexpr int kUnifiedCount = 124;
/// Sum of the four dataset landmark counts (19 + 98 + 29 + 68).
inline constexpr int kTotalLandmarks = 214;

std::string_view dataset_name(DatasetId ds);
std::optional<DatasetId> dataset_from_name(std::string_view name);
/// Declared landmark count of a standard dataset.
int dataset_size(DatasetId ds);

struct UnifiedLandmarkId {
  int index = 0;
  friend bool operator==(UnifiedLandmarkId, UnifiedLandmarkId) = default;
  friend auto operator<=>(UnifiedLandmarkId, UnifiedLandmarkId) = default;
};

/// One (dataset, local landmark index) occurrence of a unified landmark.
struct LandmarkRef {
  std::size_t dataset = 0;  // slot in ProtocolTable::datasets()
  int local = 0;
  friend bool operator==(const LandmarkRef&, const LandmarkRef&) = default;
};

/// Per-dataset block of a protocol table.
struct DatasetMapping {
  std::string name;
  int size = 0;
  std::vector<int> forward;  // local -> unified
  std::vector<int> flip;     // local -> mirrored local (involution)
  std::size_t declared_line = 0;

  friend bool operator==(const DatasetMapping& a, const DatasetMapping& b) {
    return a.name == b.name && a.size == b.size && a.forward == b.forward && a.flip == b.flip;
  }
};

struct ProtocolLoadOptions {
  /// Require exactly the four standard datasets with their canonical sizes,
  /// 124 distinct unified ids and 214 map lines in total.
  bool standard = true;
};

/// Correspondence between the per-dataset landmark sets and the unified set.
/// Immutable after loading.
class ProtocolTable {
 public:
  /// Parses and validates a mapping file. Throws ParseError naming the offending line.
  static ProtocolTable load(std::string_view text, ProtocolLoadOptions opts = {});
  static ProtocolTable load_file(const std::string& path, ProtocolLoadOptions opts = {});
  /// The mapping file shipped with the library.
  static const ProtocolTable& standard();

  std::string serialize() const;

  const std::vector<DatasetMapping>& datasets() const { return datasets_; }
  /// Slot of a named dataset; throws if absent.
  std::size_t slot(std::string_view name) const;
  std::size_t slot(DatasetId ds) const { return slot(dataset_name(ds)); }

  int unified_count() const { return static_cast<int>(reverse_.size()); }
  int dataset_landmarks(DatasetId ds) const { return datasets_[slot(ds)].size; }

  UnifiedLandmarkId map_forward(DatasetId ds, int local) const { return map_forward(slot(ds), local); }
  UnifiedLandmarkId map_forward(std::size_t slot, int local) const;
  const std::vector<LandmarkRef>& map_reverse(UnifiedLandmarkId p) const;
  int count(UnifiedLandmarkId p) const;
  /// Indicator: does dataset `slot` annotate unified landmark p.
  bool contains(std::size_t slot, UnifiedLandmarkId p) const;
  int flip(DatasetId ds, int local) const;
  const std::vector<int>& flip_permutation(DatasetId ds) const { return datasets_[slot(ds)].flip; }

  friend bool operator==(const ProtocolTable&, const ProtocolTable&) = default;

 private:
  void check_unified(UnifiedLandmarkId p) const;

  std::vector<DatasetMapping> datasets_;
  std::vector<std::vector<LandmarkRef>> reverse_;
  int version_ = 1;
};

/// Contents of the shipped default mapping file.
std::string_view default_protocol_text();

}  // namespace unifl
