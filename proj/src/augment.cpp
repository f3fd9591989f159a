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

#include <cmath>
#include <numbers>

#include "unifl/dataset.hpp"
#include "unifl/error.hpp"

namespace unifl {

Affine2 Affine2::rotation_degrees(double deg) {
  const double t = deg * std::numbers::pi / 180.0;
  const double cs = std::cos(t), sn = std::sin(t);
  // y grows downward, so a visually counter-clockwise turn uses +sin in the x row.
  return {cs, sn, -sn, cs, 0, 0};
}

Affine2 Affine2::inverse() const {
  const double det = determinant();
  if (det == 0.0) throw Error("singular affine transform");
  const double ia = d / det, ib = -b / det, ic = -c / det, id = a / det;
  return {ia, ib, ic, id, -(ia * tx + ib * ty), -(ic * tx + id * ty)};
}

Affine2 Affine2::then_after(const Affine2& in) const {
  return {a * in.a + b * in.c, a * in.b + b * in.d, c * in.a + d * in.c, c * in.b + d * in.d,
          a * in.tx + b * in.ty + tx, c * in.tx + d * in.ty + ty};
}

Image warp_affine(const Image& src, const Affine2& transform, int out_height, int out_width) {
  const Affine2 inv = transform.inverse();
  Image out;
  for (const auto& ch : src.channels) {
    ImagePlane plane(out_height, out_width);
    for (int r = 0; r < out_height; ++r)
      for (int c = 0; c < out_width; ++c) {
        const Point q = inv.apply({c + 0.5, r + 0.5});
        plane.at(r, c) = sample_bilinear(ch, q.x - 0.5, q.y - 0.5);
      }
    out.channels.push_back(std::move(plane));
  }
  return out;
}

namespace {

LandmarkSet transform_landmarks(const LandmarkSet& lms, const Affine2& m) {
  LandmarkSet out = lms;
  for (auto& p : out.coords) p = m.apply(p);
  if (lms.box) {
    const Point corners[4] = {{lms.box->x_min, lms.box->y_min},
                              {lms.box->x_max, lms.box->y_min},
                              {lms.box->x_min, lms.box->y_max},
                              {lms.box->x_max, lms.box->y_max}};
    Box b{1e300, 1e300, -1e300, -1e300};
    for (const auto& corner : corners) {
      const Point q = m.apply(corner);
      b.x_min = std::min(b.x_min, q.x);
      b.y_min = std::min(b.y_min, q.y);
      b.x_max = std::max(b.x_max, q.x);
      b.y_max = std::max(b.y_max, q.y);
    }
    out.box = b;
  }
  return out;
}

}  // namespace

Sample preprocess(const RawSample& raw, DatasetId ds, int out_size, double margin) {
  if (out_size < 1) throw Error("crop size must be positive");
  const Box box = raw.landmarks.box ? *raw.landmarks.box : bounding_box(raw.landmarks);
  const double side = std::max(box.width(), box.height()) * (1.0 + margin);
  if (!(side > 0.0)) throw Error("degenerate face box");
  const double cx = 0.5 * (box.x_min + box.x_max), cy = 0.5 * (box.y_min + box.y_max);
  const double k = out_size / side;
  const Affine2 m = compose(Affine2::scaling(k, k), Affine2::translation(-(cx - 0.5 * side), -(cy - 0.5 * side)));

  Sample s;
  s.image = warp_affine(raw.image, m, out_size, out_size);
  s.landmarks = transform_landmarks(raw.landmarks, m);
  s.landmarks.dataset = ds;
  s.dataset = ds;
  s.source_id = raw.source_id;
  s.from_source = m;
  return s;
}

double uniform01(std::mt19937_64& rng) { return static_cast<double>(rng() >> 11) * 0x1.0p-53; }

std::uint64_t derive_seed(std::uint64_t root, std::uint64_t stream, std::uint64_t index) {
  auto mix = [](std::uint64_t z) {
    z += 0x9E3779B97F4A7C15ULL;
    z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
    z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
    return z ^ (z >> 31);
  };
  return mix(mix(mix(root) ^ stream) ^ index);
}

AugmentDraw draw_augmentation(std::mt19937_64& rng, const AugmentConfig& cfg) {
  // Always consume the same number of variates so streams stay aligned.
  AugmentDraw d;
  d.scale = cfg.scale_min + (cfg.scale_max - cfg.scale_min) * uniform01(rng);
  d.rotate = uniform01(rng) < cfg.rotate_prob;
  const double angle = (2.0 * uniform01(rng) - 1.0) * cfg.max_angle_deg;
  d.angle_deg = d.rotate ? angle : 0.0;
  d.flip = uniform01(rng) < cfg.flip_prob;
  return d;
}

Affine2 augmentation_transform(const AugmentDraw& draw, int height, int width) {
  const double cx = 0.5 * width, cy = 0.5 * height;
  Affine2 m = Affine2::scaling(draw.scale, draw.scale);
  if (draw.rotate) m = compose(Affine2::rotation_degrees(draw.angle_deg), m);
  if (draw.flip) m = compose(Affine2::scaling(-1.0, 1.0), m);
  return compose(Affine2::translation(cx, cy), compose(m, Affine2::translation(-cx, -cy)));
}

Sample apply_augmentation(const Sample& sample, const AugmentDraw& draw, const ProtocolTable& table) {
  const int h = sample.image.height(), w = sample.image.width();
  const Affine2 m = augmentation_transform(draw, h, w);
  Sample out;
  out.dataset = sample.dataset;
  out.source_id = sample.source_id;
  out.from_source = compose(m, sample.from_source);
  out.image = warp_affine(sample.image, m, h, w);
  LandmarkSet moved = transform_landmarks(sample.landmarks, m);
  if (draw.flip) {
    const auto& perm = table.flip_permutation(sample.dataset);
    if (perm.size() != moved.size()) throw Error("flip permutation does not match the landmark count");
    LandmarkSet reordered = moved;
    for (std::size_t j = 0; j < perm.size(); ++j) {
      const auto src = static_cast<std::size_t>(perm[j]);
      reordered.coords[j] = moved.coords[src];
      reordered.visible[j] = moved.visible[src];
    }
    moved = std::move(reordered);
  }
  out.landmarks = std::move(moved);
  return out;
}

Sample augment(const Sample& sample, std::mt19937_64& rng, const ProtocolTable& table, const AugmentConfig& cfg) {
  return apply_augmentation(sample, draw_augmentation(rng, cfg), table);
}

}  // namespace unifl
