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
#include <cstdint>
#include <random>
#include <string>
#include <string_view>
#include <vector>

#include "unifl/geometry.hpp"
#include "unifl/image.hpp"
#include "unifl/landmarks.hpp"
#include "unifl/protocol.hpp"

namespace unifl {

inline constexpr int kFullCropSize = 480;
inline constexpr double kCropMargin = 0.25;

/// One preprocessed training/evaluation face.
struct Sample {
  Image image;
  LandmarkSet landmarks;  // coordinates in the preprocessed image
  DatasetId dataset = DatasetId::AFLW;
  std::string source_id;
  Affine2 from_source;  // source-image coordinates -> preprocessed coordinates
};

/// A face as stored on disk, before cropping.
struct RawSample {
  Image image;
  LandmarkSet landmarks;  // carries the face box
  std::string source_id;
};

// ---------------------------------------------------------------------------
// Annotation formats

/// 300W `.pts`: `version: 1`, `n_points: k`, `{`, k lines `x y`, `}`.
/// File coordinates are 1-based; the result is 0-based.
LandmarkSet parse_pts(std::string_view text);
std::string write_pts(const LandmarkSet& lms);

struct TabularEntry {
  std::string image_path;
  LandmarkSet landmarks;
  Box box;
  std::vector<int> attributes;  // WFLW only
};

/// Whitespace-separated list files, one face per line:
///   WFLW: 98*2 coords, 4 box values, 6 attribute flags, image path
///   COFW: 29*2 coords, 29 visibility bits (1 = visible), image path
///   AFLW: 19*2 coords, 19 visibility bits, 4 box values, image path
/// Box values are x_min y_min x_max y_max. COFW boxes are the landmark extent.
std::vector<TabularEntry> parse_tabular(std::string_view text, DatasetId ds);
std::string write_tabular(const std::vector<TabularEntry>& entries, DatasetId ds);

/// Loads `<dir>` laid out as written by generate_synthetic_dataset: `list.txt`
/// for the tabular datasets, `*.pts` beside each image for 300W.
std::vector<RawSample> load_dataset_dir(const std::string& dir, DatasetId ds);

// ---------------------------------------------------------------------------
// Preprocessing and augmentation

/// Crops the face box expanded to a square of side max(w, h) * (1 + margin) around its
/// center and resizes bilinearly to out_size x out_size. Out-of-image pixels are zero.
Sample preprocess(const RawSample& raw, DatasetId ds, int out_size = kFullCropSize, double margin = kCropMargin);

/// Resamples `src` so that output pixel q reads src at transform^-1(q). Zero fill.
Image warp_affine(const Image& src, const Affine2& transform, int out_height, int out_width);

struct AugmentDraw {
  double scale = 1.0;      // [1.0, 1.25], always applied
  double angle_deg = 0.0;  // [-30, 30] when rotated
  bool rotate = false;     // probability 0.6
  bool flip = false;       // probability 0.5
};

struct AugmentConfig {
  double scale_min = 1.0;
  double scale_max = 1.25;
  double rotate_prob = 0.6;
  double max_angle_deg = 30.0;
  double flip_prob = 0.5;
};

AugmentDraw draw_augmentation(std::mt19937_64& rng, const AugmentConfig& cfg = {});
/// Affine map (about the image center) for a draw on a width x height image.
Affine2 augmentation_transform(const AugmentDraw& draw, int height, int width);
/// Applies a fixed draw. Flipping reorders landmarks with the protocol's flip permutation.
Sample apply_augmentation(const Sample& sample, const AugmentDraw& draw, const ProtocolTable& table);
Sample augment(const Sample& sample, std::mt19937_64& rng, const ProtocolTable& table, const AugmentConfig& cfg = {});

// ---------------------------------------------------------------------------
// Deterministic randomness

/// Uniform double in [0, 1) from the top 53 bits; identical across standard libraries.
double uniform01(std::mt19937_64& rng);
/// Independent stream seed derived from a root seed (splitmix64 mixing).
std::uint64_t derive_seed(std::uint64_t root, std::uint64_t stream, std::uint64_t index = 0);

// ---------------------------------------------------------------------------
// Mixed batches

struct MixedBatch {
  std::vector<Sample> samples;  // grouped by dataset in AFLW, WFLW, COFW, 300W order
  std::array<int, kDatasetCount> composition{};
};

/// Draws a fixed quota from each dataset per batch, without replacement within an
/// epoch; each dataset is reshuffled independently when exhausted.
class MixedBatchSampler {
 public:
  MixedBatchSampler(std::array<std::vector<Sample>, kDatasetCount> datasets, std::uint64_t seed,
                    int per_dataset = 2);

  struct Draw {
    DatasetId dataset;
    int index;
  };
  std::vector<Draw> next_indices();
  MixedBatch next_batch();

  const std::vector<Sample>& dataset(DatasetId ds) const { return data_[static_cast<std::size_t>(ds)]; }
  int per_dataset() const { return per_dataset_; }

 private:
  int take(std::size_t ds);

  std::array<std::vector<Sample>, kDatasetCount> data_;
  std::array<std::vector<int>, kDatasetCount> order_;
  std::array<std::size_t, kDatasetCount> cursor_{};
  std::array<std::mt19937_64, kDatasetCount> rng_;
  int per_dataset_;
};

// ---------------------------------------------------------------------------
// Synthetic stand-in data

struct SynthConfig {
  int image_size = 96;
  int samples_per_dataset = 8;
  std::uint64_t seed = 7;
  double occlusion_prob = 0.1;  // COFW / AFLW visibility
};

/// Canonical positions of the unified landmarks on a unit face frame.
std::vector<Point> unified_template();

/// Faces drawn from a jittered unified template, annotated in each protocol.
std::array<std::vector<RawSample>, kDatasetCount> generate_synthetic(const ProtocolTable& table,
                                                                    const SynthConfig& cfg);
/// Writes generate_synthetic output as `<out>/<DATASET>/...` in the on-disk formats.
void write_synthetic(const std::string& out_dir, const std::array<std::vector<RawSample>, kDatasetCount>& data);

}  // namespace unifl
