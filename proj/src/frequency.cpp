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

#include "unifl/frequency.hpp"

#include <fftw3.h>

#include <algorithm>
#include <cmath>
#include <memory>

#include "unifl/error.hpp"

namespace unifl {

namespace {

struct FftwFree {
  void operator()(fftw_complex* p) const { fftw_free(p); }
};
using FftwBuffer = std::unique_ptr<fftw_complex[], FftwFree>;

FftwBuffer alloc_buffer(std::size_t n) {
  auto* p = static_cast<fftw_complex*>(fftw_malloc(sizeof(fftw_complex) * n));
  if (!p) throw std::bad_alloc();
  return FftwBuffer(p);
}

// In-place 2-D transform of an aligned buffer. FFTW_ESTIMATE plans do not depend on
// timing, so results are reproducible run to run.
void transform(fftw_complex* buf, int height, int width, int sign) {
  fftw_plan plan = fftw_plan_dft_2d(height, width, buf, buf, sign, FFTW_ESTIMATE);
  if (!plan) throw Error("FFTW planning failed");
  fftw_execute(plan);
  fftw_destroy_plan(plan);
}

// Centered index of raw bin k along an axis of length n.
inline int shift_index(int k, int n) { return (k + n / 2) % n; }

}  // namespace

Spectrum fft2(const ImagePlane& img) {
  const int h = img.height(), w = img.width();
  if (h < 1 || w < 1) throw ShapeError("fft2 needs a non-empty plane");
  const std::size_t n = img.size();
  auto buf = alloc_buffer(n);
  for (std::size_t i = 0; i < n; ++i) {
    buf[i][0] = img.data()[i];
    buf[i][1] = 0.0;
  }
  transform(buf.get(), h, w, FFTW_FORWARD);

  Spectrum s{h, w, std::vector<std::complex<double>>(n)};
  for (int r = 0; r < h; ++r)
    for (int c = 0; c < w; ++c) {
      const auto& b = buf[static_cast<std::size_t>(r) * w + c];
      s.at(shift_index(r, h), shift_index(c, w)) = {b[0], b[1]};
    }
  return s;
}

std::vector<std::complex<double>> ifft2_complex(const Spectrum& spec) {
  const int h = spec.height, w = spec.width;
  const std::size_t n = static_cast<std::size_t>(h) * w;
  if (spec.bins.size() != n || n == 0) throw ShapeError("spectrum size mismatch");
  auto buf = alloc_buffer(n);
  for (int r = 0; r < h; ++r)
    for (int c = 0; c < w; ++c) {
      auto v = spec.at(shift_index(r, h), shift_index(c, w));
      auto& b = buf[static_cast<std::size_t>(r) * w + c];
      b[0] = v.real();
      b[1] = v.imag();
    }
  transform(buf.get(), h, w, FFTW_BACKWARD);
  std::vector<std::complex<double>> out(n);
  const double inv = 1.0 / static_cast<double>(n);
  for (std::size_t i = 0; i < n; ++i) out[i] = {buf[i][0] * inv, buf[i][1] * inv};
  return out;
}

ImagePlane ifft2(const Spectrum& spec) {
  auto z = ifft2_complex(spec);
  ImagePlane out(spec.height, spec.width);
  for (std::size_t i = 0; i < z.size(); ++i) out.data()[i] = z[i].real();
  return out;
}

FrequencyMask build_mask(int height, int width, double sigma) {
  if (!(sigma > 0.0)) throw Error("mask sigma must be positive");
  if (height < 1 || width < 1) throw ShapeError("mask needs positive dimensions");
  FrequencyMask m{sigma, ImagePlane(height, width)};
  const int cr = height / 2, cc = width / 2;
  const double denom = 2.0 * sigma * sigma;
  for (int r = 0; r < height; ++r)
    for (int c = 0; c < width; ++c) {
      const double dx = c - cc, dy = r - cr;
      const double d2 = dx * dx + dy * dy;
      // -expm1(-x) == 1 - exp(-x) without cancellation near the center
      m.values.at(r, c) = d2 == 0.0 ? 0.0 : -std::expm1(-d2 / denom);
    }
  return m;
}

HighFrequencyResult apply_spectral_mask(const ImagePlane& img, const ImagePlane& mask) {
  if (mask.height() != img.height() || mask.width() != img.width())
    throw ShapeError("mask and image dimensions differ");
  Spectrum s = fft2(img);
  for (std::size_t i = 0; i < s.bins.size(); ++i) s.bins[i] *= mask.data()[i];
  auto z = ifft2_complex(s);
  HighFrequencyResult res{ImagePlane(img.height(), img.width()), 0.0};
  for (std::size_t i = 0; i < z.size(); ++i) {
    res.image.data()[i] = z[i].real();
    res.imag_residue = std::max(res.imag_residue, std::abs(z[i].imag()));
  }
  return res;
}

ImagePlane extract_hf(const ImagePlane& img, double sigma) {
  auto mask = build_mask(img.height(), img.width(), sigma);
  auto res = apply_spectral_mask(img, mask.values);
  double scale = 1.0;
  for (double v : img.data()) scale = std::max(scale, std::abs(v));
  if (res.imag_residue > 1e-9 * scale)
    throw Error("high-frequency reconstruction left an imaginary residue of " + std::to_string(res.imag_residue));
  return std::move(res.image);
}

Image extract_hf(const Image& img, double sigma) {
  Image out;
  out.channels.reserve(img.channels.size());
  for (const auto& ch : img.channels) out.channels.push_back(extract_hf(ch, sigma));
  return out;
}

ImagePlane normalize_display(const ImagePlane& img) {
  ImagePlane out(img.height(), img.width());
  if (img.empty()) return out;
  const double lo = img.min(), hi = img.max();
  if (!(hi > lo)) return out;
  const double range = hi - lo;
  for (std::size_t i = 0; i < img.size(); ++i) {
    const double v = img.data()[i];
    out.data()[i] = v == hi ? 255.0 : 255.0 * (v - lo) / range;
  }
  return out;
}

}  // namespace unifl
