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

#include "unifl/heatmap.hpp"

#include <algorithm>
#include <cmath>

#include "unifl/error.hpp"
#include "util.hpp"

namespace unifl {

int LandmarkSet::visible_count() const {
  return static_cast<int>(std::count(visible.begin(), visible.end(), true));
}

LandmarkSet LandmarkSet::all_visible(std::optional<DatasetId> ds, std::vector<Point> pts) {
  LandmarkSet s;
  s.dataset = ds;
  s.visible.assign(pts.size(), true);
  s.coords = std::move(pts);
  return s;
}

Box bounding_box(const LandmarkSet& lms) {
  Box b{1e300, 1e300, -1e300, -1e300};
  bool any = false;
  for (std::size_t i = 0; i < lms.size(); ++i) {
    if (!lms.visible[i]) continue;
    any = true;
    b.x_min = std::min(b.x_min, lms.coords[i].x);
    b.y_min = std::min(b.y_min, lms.coords[i].y);
    b.x_max = std::max(b.x_max, lms.coords[i].x);
    b.y_max = std::max(b.y_max, lms.coords[i].y);
  }
  if (!any) throw Error("bounding box of a landmark set without visible points");
  return b;
}

void validate(const LandmarkSet& lms, const ProtocolTable& table) {
  if (lms.visible.size() != lms.coords.size()) throw Error("visibility and coordinate counts differ");
  for (const auto& p : lms.coords)
    if (!std::isfinite(p.x) || !std::isfinite(p.y)) throw Error("non-finite landmark coordinate");
  const int expected = lms.dataset ? table.dataset_landmarks(*lms.dataset) : table.unified_count();
  if (static_cast<int>(lms.size()) != expected)
    throw Error("landmark set has " + std::to_string(lms.size()) + " points, expected " + std::to_string(expected));
}

HeatmapStack HeatmapStack::zeros(int planes, int height, int width, int stride) {
  HeatmapStack s;
  s.stride = stride;
  s.height = height;
  s.width = width;
  s.planes.assign(static_cast<std::size_t>(planes), ImagePlane(height, width));
  s.present.assign(static_cast<std::size_t>(planes), false);
  s.clipped.assign(static_cast<std::size_t>(planes), false);
  return s;
}

HeatmapGeometry HeatmapGeometry::for_input(int image_height, int image_width, int stride) {
  if (stride < 1) throw Error("stride must be >= 1");
  if (image_height % stride || image_width % stride) throw ShapeError("input size is not a multiple of the stride");
  return {image_height / stride, image_width / stride, stride};
}

HeatmapStack encode(const LandmarkSet& lms, const ProtocolTable& table, HeatmapGeometry geom, double kernel_sigma) {
  if (geom.stride < 1) throw Error("stride must be >= 1");
  if (!(kernel_sigma > 0.0)) throw Error("kernel sigma must be positive");
  if (!lms.dataset) throw Error("encode needs a dataset-tagged landmark set");
  validate(lms, table);
  const std::size_t slot = table.slot(*lms.dataset);

  auto stack = HeatmapStack::zeros(table.unified_count(), geom.height, geom.width, geom.stride);
  const int radius = static_cast<int>(std::ceil(3.0 * kernel_sigma));
  const double denom = 2.0 * kernel_sigma * kernel_sigma;

  for (std::size_t j = 0; j < lms.size(); ++j) {
    if (!lms.visible[j]) continue;
    const auto p = static_cast<std::size_t>(table.map_forward(slot, static_cast<int>(j)).index);
    int cx = static_cast<int>(std::floor(lms.coords[j].x / geom.stride));
    int cy = static_cast<int>(std::floor(lms.coords[j].y / geom.stride));
    if (cx < 0 || cy < 0 || cx >= geom.width || cy >= geom.height) {
      stack.clipped[p] = true;
      cx = std::clamp(cx, 0, geom.width - 1);
      cy = std::clamp(cy, 0, geom.height - 1);
    }
    auto& plane = stack.planes[p];
    for (int r = std::max(0, cy - radius); r <= std::min(geom.height - 1, cy + radius); ++r)
      for (int c = std::max(0, cx - radius); c <= std::min(geom.width - 1, cx + radius); ++c) {
        const double d2 = static_cast<double>((r - cy) * (r - cy) + (c - cx) * (c - cx));
        plane.at(r, c) = std::exp(-d2 / denom);
      }
    stack.present[p] = true;
  }
  return stack;
}

Point decode_plane(const ImagePlane& plane, int stride, bool* empty) {
  const int h = plane.height(), w = plane.width();
  if (h < 1 || w < 1) throw ShapeError("cannot decode an empty plane");
  int br = 0, bc = 0;
  double best = plane.at(0, 0);
  bool nonzero = false;
  for (int r = 0; r < h; ++r)
    for (int c = 0; c < w; ++c) {
      const double v = plane.at(r, c);
      if (v != 0.0) nonzero = true;
      if (v > best) {
        best = v;
        br = r;
        bc = c;
      }
    }
  if (empty) *empty = !nonzero;
  if (!nonzero) return {0.5 * w * stride, 0.5 * h * stride};

  double x = bc, y = br;
  if (bc > 0 && bc < w - 1) {
    const double d = plane.at(br, bc + 1) - plane.at(br, bc - 1);
    x += d > 0 ? 0.25 : (d < 0 ? -0.25 : 0.0);
  }
  if (br > 0 && br < h - 1) {
    const double d = plane.at(br + 1, bc) - plane.at(br - 1, bc);
    y += d > 0 ? 0.25 : (d < 0 ? -0.25 : 0.0);
  }
  return {(x + 0.5) * stride, (y + 0.5) * stride};
}

DecodeResult decode(const HeatmapStack& stack) {
  if (std::none_of(stack.present.begin(), stack.present.end(), [](bool b) { return b; }))
    throw Error("decode needs at least one present plane");
  DecodeResult res;
  res.landmarks.coords.reserve(stack.planes.size());
  for (std::size_t p = 0; p < stack.planes.size(); ++p) {
    bool empty = false;
    res.landmarks.coords.push_back(decode_plane(stack.planes[p], stack.stride, &empty));
    res.landmarks.visible.push_back(stack.present[p]);
    res.low_confidence.push_back(empty);
  }
  return res;
}

LandmarkSet to_dataset(const LandmarkSet& unified, const ProtocolTable& table, DatasetId ds) {
  if (static_cast<int>(unified.size()) != table.unified_count()) throw Error("expected a unified landmark set");
  const std::size_t slot = table.slot(ds);
  LandmarkSet out;
  out.dataset = ds;
  out.box = unified.box;
  const int n = table.datasets()[slot].size;
  for (int j = 0; j < n; ++j) {
    const auto p = static_cast<std::size_t>(table.map_forward(slot, j).index);
    out.coords.push_back(unified.coords[p]);
    out.visible.push_back(unified.visible.empty() ? true : static_cast<bool>(unified.visible[p]));
  }
  return out;
}

namespace {
constexpr std::uint32_t kDumpMagic = 0x314D4855;  // "UHM1"
}

std::string encode_heatmap_dump(const HeatmapStack& stack) {
  std::string buf;
  buf.reserve(16 + stack.planes.size() * static_cast<std::size_t>(stack.height * stack.width) * 4);
  detail::put_u32(buf, kDumpMagic);
  detail::put_u32(buf, static_cast<std::uint32_t>(stack.planes.size()));
  detail::put_u32(buf, static_cast<std::uint32_t>(stack.height));
  detail::put_u32(buf, static_cast<std::uint32_t>(stack.width));
  for (const auto& plane : stack.planes)
    for (double v : plane.data()) detail::put_f32(buf, static_cast<float>(v));
  return buf;
}

HeatmapStack decode_heatmap_dump(std::string_view bytes, int stride) {
  std::size_t pos = 0;
  if (detail::get_u32(bytes, pos) != kDumpMagic) throw Error("not a heatmap dump (bad magic)");
  const auto n = detail::get_u32(bytes, pos);
  const auto h = detail::get_u32(bytes, pos);
  const auto w = detail::get_u32(bytes, pos);
  const std::size_t need = 16 + static_cast<std::size_t>(n) * h * w * 4;
  if (bytes.size() != need) throw Error("heatmap dump size does not match its header");
  auto stack = HeatmapStack::zeros(static_cast<int>(n), static_cast<int>(h), static_cast<int>(w), stride);
  for (std::uint32_t p = 0; p < n; ++p) {
    auto& plane = stack.planes[p];
    for (auto& v : plane.data()) v = detail::get_f32(bytes, pos);
    stack.present[p] = plane.max() > 0.0;
  }
  return stack;
}

void write_heatmap_dump(const std::string& path, const HeatmapStack& stack) {
  detail::write_text_file(path, encode_heatmap_dump(stack));
}

HeatmapStack read_heatmap_dump(const std::string& path, int stride) {
  return decode_heatmap_dump(detail::read_text_file(path), stride);
}

}  // namespace unifl
