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

#include <optional>
#include <vector>

#include "unifl/protocol.hpp"

namespace unifl {

struct Point {
  double x = 0.0;
  double y = 0.0;
  friend bool operator==(const Point&, const Point&) = default;
};

/// Axis-aligned face box in pixel coordinates.
struct Box {
  double x_min = 0.0;
  double y_min = 0.0;
  double x_max = 0.0;
  double y_max = 0.0;

  double width() const { return x_max - x_min; }
  double height() const { return y_max - y_min; }
  friend bool operator==(const Box&, const Box&) = default;
};

/// Landmark coordinates of one face in one annotation protocol.
/// `dataset` is empty for sets expressed in unified ids.
struct LandmarkSet {
  std::optional<DatasetId> dataset;
  std::vector<Point> coords;
  std::vector<bool> visible;
  std::optional<Box> box;

  std::size_t size() const { return coords.size(); }
  int visible_count() const;

  static LandmarkSet all_visible(std::optional<DatasetId> ds, std::vector<Point> pts);
  friend bool operator==(const LandmarkSet&, const LandmarkSet&) = default;
};

/// Tight bounding box of the visible landmarks.
Box bounding_box(const LandmarkSet& lms);

/// Throws unless coordinates are finite and the length matches the dataset.
void validate(const LandmarkSet& lms, const ProtocolTable& table);

}  // namespace unifl
