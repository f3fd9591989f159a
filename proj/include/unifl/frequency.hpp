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

#include <complex>
#include <vector>

#include "unifl/image.hpp"

namespace unifl {

/// Default mask width in frequency-index units.
inline constexpr double kDefaultHfSigma = 20.0;

/// 2-D spectrum with the zero-frequency bin moved to (height/2, width/2) (floor for odd sizes).
struct Spectrum {
  int height = 0;
  int width = 0;
  std::vector<std::complex<double>> bins;  // row-major, centered

  std::complex<double>& at(int row, int col) { return bins[static_cast<std::size_t>(row) * width + col]; }
  std::complex<double> at(int row, int col) const { return bins[static_cast<std::size_t>(row) * width + col]; }
};

/// Forward transform of a real plane, centered layout. Unnormalized (DC = sum of pixels).
Spectrum fft2(const ImagePlane& img);
/// Inverse of fft2, including the 1/(H*W) factor. Returns the complex result.
std::vector<std::complex<double>> ifft2_complex(const Spectrum& spec);
/// Real part of the inverse transform.
ImagePlane ifft2(const Spectrum& spec);

/// Gaussian high-emphasis mask in the centered layout:
///   M(r, c) = 1 - exp(-((c - W/2)^2 + (r - H/2)^2) / (2 sigma^2))
/// with column distance measured against the width and row distance against the height.
struct FrequencyMask {
  double sigma = 0.0;
  ImagePlane values;
};

FrequencyMask build_mask(int height, int width, double sigma);

struct HighFrequencyResult {
  ImagePlane image;
  double imag_residue = 0.0;  // max |Im| of the inverse transform
};

/// Multiplies the centered spectrum by `mask` and transforms back.
HighFrequencyResult apply_spectral_mask(const ImagePlane& img, const ImagePlane& mask);

/// High-frequency structure image IFFT(FFT(I) * M_h). Throws if the imaginary residue
/// of the reconstruction is not negligible.
ImagePlane extract_hf(const ImagePlane& img, double sigma = kDefaultHfSigma);
/// Per-channel extract_hf.
Image extract_hf(const Image& img, double sigma = kDefaultHfSigma);

/// Affine stretch of [min, max] onto [0, 255]. A constant plane maps to all zeros.
ImagePlane normalize_display(const ImagePlane& img);

}  // namespace unifl
