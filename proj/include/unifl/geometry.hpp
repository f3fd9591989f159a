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

#include "unifl/landmarks.hpp"

namespace unifl {

/// 2-D affine map p' = [a b; c d] p + t in continuous pixel coordinates
/// (pixel (col, row) covers [col, col+1) x [row, row+1)).
struct Affine2 {
  double a = 1, b = 0, c = 0, d = 1, tx = 0, ty = 0;

  static Affine2 identity() { return {}; }
  static Affine2 translation(double x, double y) { return {1, 0, 0, 1, x, y}; }
  static Affine2 scaling(double sx, double sy) { return {sx, 0, 0, sy, 0, 0}; }
  /// Counter-clockwise as seen on screen (y axis pointing down).
  static Affine2 rotation_degrees(double deg);

  Point apply(Point p) const { return {a * p.x + b * p.y + tx, c * p.x + d * p.y + ty}; }
  Affine2 inverse() const;
  /// (*this) after `inner`: p -> this(inner(p)).
  Affine2 then_after(const Affine2& inner) const;
  double determinant() const { return a * d - b * c; }
};

/// Composition: outer(inner(p)).
inline Affine2 compose(const Affine2& outer, const Affine2& inner) { return outer.then_after(inner); }

}  // namespace unifl
