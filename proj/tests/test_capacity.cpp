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

#include <doctest.h>

#include <cmath>

#include "unifl/capacity.hpp"
#include "unifl/error.hpp"

using namespace unifl;

namespace {

double geometric_sum(double beta, int n) {
  double s = 0.0, term = 1.0;
  for (int k = 0; k < n; ++k) {
    s += term;
    term *= beta;
  }
  return s;
}

}  // namespace

TEST_CASE("closed form matches the geometric series") {
  for (double beta : {0.0, 0.1, 0.2, 0.3, 0.4, 0.5, 0.6, 0.7, 0.8, 0.9, 0.999})
    for (int n = 1; n <= 8; ++n) CHECK(std::abs(effective_capacity(Beta(beta), n) - geometric_sum(beta, n)) < 1e-12);
  CHECK(effective_capacity(Beta(0.9), 4) == doctest::Approx(3.439).epsilon(1e-15));
}

TEST_CASE("capacity recurrence and bounds") {
  for (double beta : {0.0, 0.25, 0.5, 0.9, 0.999})
    for (int n = 2; n <= 8; ++n) {
      const double e = effective_capacity(Beta(beta), n);
      CHECK(std::abs(e - (1.0 + beta * effective_capacity(Beta(beta), n - 1))) < 1e-12);
      CHECK(e >= 1.0);
      CHECK(e <= n);
      CHECK(e >= effective_capacity(Beta(beta), n - 1));
    }
  for (double beta : {0.0, 0.5, 0.99}) CHECK(effective_capacity(Beta(beta), 1) == 1.0);
  for (int n = 1; n <= 8; ++n) CHECK(effective_capacity(Beta(0.0), n) == 1.0);
}

TEST_CASE("limit of the capacity") {
  CHECK(capacity_limit(4) == 4.0);
  CHECK(capacity_limit(1) == 1.0);
  for (int n = 1; n <= 4; ++n) CHECK(std::abs(effective_capacity(Beta(0.999999), n) - n) < 1e-4);
  CHECK(effective_capacity(Beta(1.0 - 1e-12), 3) == 3.0);  // routed to the limit
}

TEST_CASE("capacity argument validation") {
  CHECK_THROWS_AS(effective_capacity(Beta(0.5), 0), Error);
  CHECK_THROWS_AS(Beta(-0.1), Error);
  CHECK_THROWS_AS(Beta(1.5), Error);
}

TEST_CASE("weight table") {
  const ProtocolTable& t = ProtocolTable::standard();
  const WeightTable w9 = build_weight_table(t, Beta(0.9));
  const WeightTable w0 = build_weight_table(t, Beta(0.0));
  const WeightTable lim = build_limit_weight_table(t);
  for (int p = 0; p < kUnifiedCount; ++p) {
    const int c = t.count({p});
    CHECK(w0.weight_of({p}) == 1.0);
    CHECK(w9.capacity[static_cast<std::size_t>(p)] == effective_capacity(Beta(0.9), c));
    CHECK(w9.weight_of({p}) == doctest::Approx(1.0 / geometric_sum(0.9, c)).epsilon(1e-14));
    CHECK(w9.weight_of({p}) >= 1.0 / c);
    CHECK(w9.weight_of({p}) <= 1.0);
    CHECK(lim.weight_of({p}) == doctest::Approx(1.0 / c));
    if (c == 4) CHECK(w9.weight_of({p}) == doctest::Approx(0.290782).epsilon(1e-6));
    if (c == 1) CHECK(w9.weight_of({p}) == 1.0);
  }
  // Weight never increases with count for a fixed beta.
  for (int a = 0; a < kUnifiedCount; ++a)
    for (int b = 0; b < kUnifiedCount; ++b)
      if (t.count({a}) < t.count({b})) CHECK(w9.weight_of({a}) > w9.weight_of({b}));
}
