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

#include "unifl/image.hpp"

#include <cctype>
#include <algorithm>
#include <cmath>
#include <fstream>
#include <sstream>

#include "unifl/error.hpp"
#include "util.hpp"

namespace unifl {

ImagePlane::ImagePlane(int height, int width, double fill) : height_(height), width_(width) {
  if (height < 0 || width < 0) throw ShapeError("negative plane dimensions");
  data_.assign(static_cast<std::size_t>(height) * static_cast<std::size_t>(width), fill);
}

ImagePlane::ImagePlane(int height, int width, std::vector<double> data)
    : height_(height), width_(width), data_(std::move(data)) {
  if (height < 0 || width < 0 ||
      data_.size() != static_cast<std::size_t>(height) * static_cast<std::size_t>(width))
    throw ShapeError("plane data does not match " + std::to_string(height) + "x" + std::to_string(width));
}

double ImagePlane::min() const { return data_.empty() ? 0.0 : *std::min_element(data_.begin(), data_.end()); }
double ImagePlane::max() const { return data_.empty() ? 0.0 : *std::max_element(data_.begin(), data_.end()); }

namespace {

// Reads the next header token, skipping whitespace and '#' comments.
std::string next_token(std::string_view bytes, std::size_t& pos) {
  for (;;) {
    while (pos < bytes.size() && std::isspace(static_cast<unsigned char>(bytes[pos]))) ++pos;
    if (pos < bytes.size() && bytes[pos] == '#') {
      while (pos < bytes.size() && bytes[pos] != '\n') ++pos;
      continue;
    }
    break;
  }
  std::size_t start = pos;
  while (pos < bytes.size() && !std::isspace(static_cast<unsigned char>(bytes[pos]))) ++pos;
  if (start == pos) throw Error("truncated PNM header");
  return std::string(bytes.substr(start, pos - start));
}

int header_int(std::string_view bytes, std::size_t& pos) {
  auto tok = next_token(bytes, pos);
  auto v = detail::parse_int(tok);
  if (!v || *v <= 0) throw Error("bad PNM header field '" + tok + "'");
  return static_cast<int>(*v);
}

}  // namespace

Image parse_pnm(std::string_view bytes) {
  std::size_t pos = 0;
  std::string magic = next_token(bytes, pos);
  int channels = 0;
  bool binary = false;
  if (magic == "P5") channels = 1, binary = true;
  else if (magic == "P6") channels = 3, binary = true;
  else if (magic == "P2") channels = 1;
  else if (magic == "P3") channels = 3;
  else throw Error("unsupported PNM magic '" + magic + "'");

  const int width = header_int(bytes, pos);
  const int height = header_int(bytes, pos);
  const int maxval = header_int(bytes, pos);
  if (maxval > 65535) throw Error("PNM maxval out of range");
  const double scale = 255.0 / maxval;

  Image img;
  img.channels.assign(static_cast<std::size_t>(channels), ImagePlane(height, width));
  const std::size_t n = static_cast<std::size_t>(width) * static_cast<std::size_t>(height);

  if (binary) {
    ++pos;  // single whitespace byte after maxval
    const std::size_t bps = maxval < 256 ? 1 : 2;
    if (bytes.size() < pos + n * static_cast<std::size_t>(channels) * bps) throw Error("truncated PNM raster");
    for (std::size_t i = 0; i < n; ++i)
      for (int c = 0; c < channels; ++c) {
        unsigned v = static_cast<unsigned char>(bytes[pos]);
        if (bps == 2) v = (v << 8) | static_cast<unsigned char>(bytes[pos + 1]);
        pos += bps;
        img.channels[static_cast<std::size_t>(c)].data()[i] = v * scale;
      }
    if (pos != bytes.size()) throw Error("trailing bytes after PNM raster");
  } else {
    for (std::size_t i = 0; i < n; ++i)
      for (int c = 0; c < channels; ++c) {
        auto tok = next_token(bytes, pos);
        auto v = detail::parse_int(tok);
        if (!v || *v < 0 || *v > maxval) throw Error("bad PNM sample '" + tok + "'");
        img.channels[static_cast<std::size_t>(c)].data()[i] = static_cast<double>(*v) * scale;
      }
  }
  return img;
}

Image read_pnm(const std::string& path) { return parse_pnm(detail::read_text_file(path)); }

std::string encode_pnm(const Image& image) {
  const int c = image.channel_count();
  if (c != 1 && c != 3) throw Error("PNM output needs 1 or 3 channels");
  std::string out = (c == 1 ? "P5\n" : "P6\n") + std::to_string(image.width()) + " " +
                    std::to_string(image.height()) + "\n255\n";
  const std::size_t n = image.channels.front().size();
  out.reserve(out.size() + n * static_cast<std::size_t>(c));
  for (std::size_t i = 0; i < n; ++i)
    for (int k = 0; k < c; ++k) {
      double v = std::clamp(std::round(image.channels[static_cast<std::size_t>(k)].data()[i]), 0.0, 255.0);
      out.push_back(static_cast<char>(static_cast<unsigned char>(v)));
    }
  return out;
}

void write_pnm(const std::string& path, const Image& image) { detail::write_text_file(path, encode_pnm(image)); }

double sample_bilinear(const ImagePlane& plane, double x, double y) {
  const double fx = std::floor(x), fy = std::floor(y);
  const int x0 = static_cast<int>(fx), y0 = static_cast<int>(fy);
  const double ax = x - fx, ay = y - fy;
  auto px = [&](int r, int c) {
    if (r < 0 || c < 0 || r >= plane.height() || c >= plane.width()) return 0.0;
    return plane.at(r, c);
  };
  return (1 - ay) * ((1 - ax) * px(y0, x0) + ax * px(y0, x0 + 1)) +
         ay * ((1 - ax) * px(y0 + 1, x0) + ax * px(y0 + 1, x0 + 1));
}

ImagePlane to_gray(const Image& image) {
  if (image.channels.empty()) return {};
  ImagePlane out(image.height(), image.width());
  for (const auto& ch : image.channels)
    for (std::size_t i = 0; i < out.size(); ++i) out.data()[i] += ch.data()[i];
  for (auto& v : out.data()) v /= image.channel_count();
  return out;
}

}  // namespace unifl
