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
#include <filesystem>
#include <numbers>

#include "unifl/dataset.hpp"
#include "unifl/error.hpp"
#include "util.hpp"

namespace unifl {

std::vector<Point> unified_template() {
  constexpr double pi = std::numbers::pi;
  std::vector<Point> t(static_cast<std::size_t>(kUnifiedCount));
  auto set = [&](int id, double x, double y) { t[static_cast<std::size_t>(id)] = {x, y}; };

  // Face contour, image-left temple to image-right temple through the chin.
  for (int i = 0; i <= 32; ++i) set(i, 0.5 - 0.42 * std::cos(pi * i / 32.0), 0.45 + 0.5 * std::sin(pi * i / 32.0));
  // Brows: upper arc then lower arc back.
  for (int k = 0; k < 5; ++k) {
    const double u = k / 4.0;
    set(33 + k, 0.20 + 0.22 * u, 0.30 - 0.04 * std::sin(pi * u));
    set(42 + k, 0.58 + 0.22 * u, 0.30 - 0.04 * std::sin(pi * u));
  }
  for (int k = 0; k < 4; ++k) {
    const double u = (k + 1) / 5.0;
    set(38 + k, 0.42 - 0.22 * u, 0.325 - 0.02 * std::sin(pi * u));
    set(47 + k, 0.80 - 0.22 * u, 0.325 - 0.02 * std::sin(pi * u));
  }
  // Nose bridge and lower nose.
  for (int k = 0; k < 4; ++k) set(51 + k, 0.5, 0.40 + 0.07 * k);
  for (int k = 0; k < 5; ++k) set(55 + k, 0.43 + 0.035 * k, k == 2 ? 0.66 : 0.645);
  // Eyes: eight points counter-clockwise from the image-left corner.
  auto eye = [&](int first, double cx) {
    for (int k = 0; k < 8; ++k) {
      const double a = pi - k * pi / 4.0;
      set(first + k, cx + 0.09 * std::cos(a), 0.42 - 0.035 * std::sin(a));
    }
  };
  eye(60, 0.33);
  eye(68, 0.67);
  for (int k = 0; k < 12; ++k) {
    const double a = pi - k * pi / 6.0;
    set(76 + k, 0.5 + 0.15 * std::cos(a), 0.80 - 0.06 * std::sin(a));
  }
  for (int k = 0; k < 8; ++k) {
    const double a = pi - k * pi / 4.0;
    set(88 + k, 0.5 + 0.10 * std::cos(a), 0.80 - 0.025 * std::sin(a));
  }
  set(96, 0.33, 0.42);
  set(97, 0.67, 0.42);
  // Points annotated only in COFW.
  set(98, 0.19, 0.31);
  set(99, 0.81, 0.31);
  set(100, 0.43, 0.31);
  set(101, 0.57, 0.31);
  set(102, 0.31, 0.27);
  set(103, 0.69, 0.27);
  set(104, 0.31, 0.34);
  set(105, 0.69, 0.34);
  set(106, 0.33, 0.395);
  set(107, 0.67, 0.395);
  set(108, 0.33, 0.445);
  set(109, 0.67, 0.445);
  set(110, 0.43, 0.62);
  set(111, 0.57, 0.62);
  set(112, 0.5, 0.68);
  set(113, 0.5, 0.735);
  set(114, 0.5, 0.785);
  set(115, 0.5, 0.815);
  set(116, 0.5, 0.865);
  // Points annotated only in AFLW.
  set(117, 0.21, 0.30);
  set(118, 0.30, 0.28);
  set(119, 0.41, 0.30);
  set(120, 0.59, 0.30);
  set(121, 0.70, 0.28);
  set(122, 0.79, 0.30);
  set(123, 0.5, 0.80);
  return t;
}

namespace {

double normal(std::mt19937_64& rng) {
  // Box-Muller on uniform01 keeps the stream library-independent.
  const double u1 = 1.0 - uniform01(rng), u2 = uniform01(rng);
  return std::sqrt(-2.0 * std::log(u1)) * std::cos(2.0 * std::numbers::pi * u2);
}

}  // namespace

std::array<std::vector<RawSample>, kDatasetCount> generate_synthetic(const ProtocolTable& table,
                                                                    const SynthConfig& cfg) {
  if (cfg.image_size < 16) throw Error("synthetic images must be at least 16 pixels");
  const auto tmpl = unified_template();
  const double size = cfg.image_size;
  std::array<std::vector<RawSample>, kDatasetCount> out;

  for (std::size_t d = 0; d < kDatasetCount; ++d) {
    const auto ds = static_cast<DatasetId>(d);
    const std::size_t slot = table.slot(ds);
    std::mt19937_64 rng(derive_seed(cfg.seed, 0xD00D + d));
    for (int i = 0; i < cfg.samples_per_dataset; ++i) {
      const double side = size * (0.45 + 0.2 * uniform01(rng));
      const double cx = 0.5 * size + 0.08 * size * (2 * uniform01(rng) - 1);
      const double cy = 0.5 * size + 0.08 * size * (2 * uniform01(rng) - 1);
      const Affine2 frame = compose(
          Affine2::translation(cx, cy),
          compose(Affine2::rotation_degrees(20.0 * (2 * uniform01(rng) - 1)),
                  compose(Affine2::scaling(side, side), Affine2::translation(-0.5, -0.5))));

      std::vector<Point> pts(tmpl.size());
      for (std::size_t p = 0; p < tmpl.size(); ++p) {
        Point q = frame.apply(tmpl[p]);
        q.x += 0.3 * normal(rng);
        q.y += 0.3 * normal(rng);
        pts[p] = q;
      }

      // Background noise, a brighter face disc and dark dots on every landmark.
      ImagePlane img(cfg.image_size, cfg.image_size);
      const double radius = 0.5 * side;
      for (int r = 0; r < cfg.image_size; ++r)
        for (int c = 0; c < cfg.image_size; ++c) {
          const double dx = c + 0.5 - cx, dy = r + 0.5 - cy;
          double v = 60.0 + 20.0 * uniform01(rng);
          if (dx * dx + dy * dy < radius * radius) v += 100.0;
          img.at(r, c) = v;
        }
      for (const auto& q : pts)
        for (int r = 0; r < cfg.image_size; ++r)
          for (int c = 0; c < cfg.image_size; ++c) {
            const double dx = c + 0.5 - q.x, dy = r + 0.5 - q.y;
            img.at(r, c) -= 110.0 * std::exp(-(dx * dx + dy * dy) / 2.0);
          }
      for (auto& v : img.data()) v = std::clamp(std::round(v), 0.0, 255.0);

      RawSample s;
      s.image.channels.push_back(std::move(img));
      s.landmarks.dataset = ds;
      const auto& mapping = table.datasets()[slot];
      for (int j = 0; j < mapping.size; ++j) {
        s.landmarks.coords.push_back(pts[static_cast<std::size_t>(mapping.forward[static_cast<std::size_t>(j)])]);
        const bool can_hide = ds == DatasetId::COFW || ds == DatasetId::AFLW;
        const double roll = uniform01(rng);
        s.landmarks.visible.push_back(!(can_hide && roll < cfg.occlusion_prob));
      }
      const Point corners[4] = {{0, 0}, {1, 0}, {0, 1}, {1, 1}};
      Box box{1e300, 1e300, -1e300, -1e300};
      for (const auto& corner : corners) {
        const Point q = frame.apply(corner);
        box.x_min = std::min(box.x_min, q.x);
        box.y_min = std::min(box.y_min, q.y);
        box.x_max = std::max(box.x_max, q.x);
        box.y_max = std::max(box.y_max, q.y);
      }
      if (ds == DatasetId::COFW || ds == DatasetId::T300W) {
        LandmarkSet all = s.landmarks;
        all.visible.assign(all.coords.size(), true);
        box = bounding_box(all);
      }
      s.landmarks.box = box;
      char name[32];
      std::snprintf(name, sizeof name, "img_%04d", i);
      s.source_id = name;
      out[d].push_back(std::move(s));
    }
  }
  return out;
}

void write_synthetic(const std::string& out_dir, const std::array<std::vector<RawSample>, kDatasetCount>& data) {
  namespace fs = std::filesystem;
  for (std::size_t d = 0; d < kDatasetCount; ++d) {
    const auto ds = static_cast<DatasetId>(d);
    const fs::path dir = fs::path(out_dir) / std::string(dataset_name(ds));
    fs::create_directories(dir);
    std::vector<TabularEntry> entries;
    for (const auto& s : data[d]) {
      const std::string image_name = s.source_id + ".pgm";
      write_pnm((dir / image_name).string(), s.image);
      if (ds == DatasetId::T300W) {
        detail::write_text_file((dir / (s.source_id + ".pts")).string(), write_pts(s.landmarks));
      } else {
        TabularEntry e;
        e.image_path = image_name;
        e.landmarks = s.landmarks;
        e.box = *s.landmarks.box;
        if (ds == DatasetId::WFLW) e.attributes.assign(6, 0);
        entries.push_back(std::move(e));
      }
    }
    if (ds != DatasetId::T300W) detail::write_text_file((dir / "list.txt").string(), write_tabular(entries, ds));
  }
}

}  // namespace unifl
