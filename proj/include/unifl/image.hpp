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

#include <cstddef>
#include <span>
#include <string>
#include <vector>

namespace unifl {

/// Dense single-channel H x W plane of reals, row-major.
class ImagePlane {
 public:
  ImagePlane() = default;
  ImagePlane(int height, int width, double fill = 0.0);
  ImagePlane(int height, int width, std::vector<double> data);

  int height() const { return height_; }
  int width() const { return width_; }
  std::size_t size() const { return data_.size(); }
  bool empty() const { return data_.empty(); }

  double& at(int row, int col) { return data_[index(row, col)]; }
  double at(int row, int col) const { return data_[index(row, col)]; }

  std::span<double> data() { return data_; }
  std::span<const double> data() const { return data_; }

  double min() const;
  double max() const;

  friend bool operator==(const ImagePlane&, const ImagePlane&) = default;

 private:
  std::size_t index(int row, int col) const {
    return static_cast<std::size_t>(row) * static_cast<std::size_t>(width_) + static_cast<std::size_t>(col);
  }

  int height_ = 0;
  int width_ = 0;
  std::vector<double> data_;
};

/// One or three channels of equal size. 8-bit sources are kept in [0, 255].
struct Image {
  std::vector<ImagePlane> channels;

  int height() const { return channels.empty() ? 0 : channels.front().height(); }
  int width() const { return channels.empty() ? 0 : channels.front().width(); }
  int channel_count() const { return static_cast<int>(channels.size()); }

  friend bool operator==(const Image&, const Image&) = default;
};

/// Reads binary (P5/P6) or ASCII (P2/P3) portable graymap/pixmap files.
Image read_pnm(const std::string& path);
Image parse_pnm(std::string_view bytes);
/// Writes P5 for one channel and P6 for three. Values are rounded and clamped to [0, 255].
void write_pnm(const std::string& path, const Image& image);
std::string encode_pnm(const Image& image);

/// Bilinear sample with zero fill outside the plane. (x, y) are column/row coordinates.
double sample_bilinear(const ImagePlane& plane, double x, double y);

/// Average of the channels.
ImagePlane to_gray(const Image& image);

}  // namespace unifl
