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

#include <string>
#include <vector>

#include "unifl/image.hpp"
#include "unifl/landmarks.hpp"
#include "unifl/protocol.hpp"

namespace unifl {

inline constexpr int kDefaultStride = 4;
inline constexpr double kDefaultKernelSigma = 1.5;

/// Per-unified-landmark probability maps at a fixed stride.
/// Cell (r, c) covers input pixels [c*stride, (c+1)*stride) x [r*stride, (r+1)*stride)
/// and its center is ((c + 0.5) * stride, (r + 0.5) * stride).
struct HeatmapStack {
  int stride = kDefaultStride;
  int height = 0;
  int width = 0;
  std::vector<ImagePlane> planes;
  std::vector<bool> present;
  std::vector<bool> clipped;  // landmark fell outside the grid and was clamped to the border

  static HeatmapStack zeros(int planes, int height, int width, int stride);
  int plane_count() const { return static_cast<int>(planes.size()); }
  friend bool operator==(const HeatmapStack&, const HeatmapStack&) = default;
};

struct HeatmapGeometry {
  int height = 0;  // heatmap cells
  int width = 0;
  int stride = kDefaultStride;

  /// Grid for an input image of the given pixel size.
  static HeatmapGeometry for_input(int image_height, int image_width, int stride = kDefaultStride);
};

/// Renders each visible landmark as exp(-d^2 / (2 sigma^2)) around its nearest cell
/// (peak exactly 1) into the plane of its unified id.
HeatmapStack encode(const LandmarkSet& lms, const ProtocolTable& table, HeatmapGeometry geom,
                    double kernel_sigma = kDefaultKernelSigma);

struct DecodeResult {
  LandmarkSet landmarks;            // unified ids, input-pixel coordinates
  std::vector<bool> low_confidence;  // plane was all zero
};

/// Argmax per plane with a quarter-cell shift toward the larger neighbour on each axis.
/// Ties resolve to the lowest row, then the lowest column. Planes flagged not present are
/// decoded too but reported invisible.
DecodeResult decode(const HeatmapStack& stack);

/// Decoded point of a single plane in input pixels; sets `empty` when the plane is all zero.
Point decode_plane(const ImagePlane& plane, int stride, bool* empty = nullptr);

/// Selects the landmarks of dataset `ds` from a unified-id set.
LandmarkSet to_dataset(const LandmarkSet& unified, const ProtocolTable& table, DatasetId ds);

/// Binary heatmap dump: 16-byte header (magic "UHM1", plane count, H, W as LE u32)
/// followed by plane-major little-endian float32 values.
std::string encode_heatmap_dump(const HeatmapStack& stack);
HeatmapStack decode_heatmap_dump(std::string_view bytes, int stride = kDefaultStride);
void write_heatmap_dump(const std::string& path, const HeatmapStack& stack);
HeatmapStack read_heatmap_dump(const std::string& path, int stride = kDefaultStride);

}  // namespace unifl
