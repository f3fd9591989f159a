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

#include <set>
#include <string>

#include "unifl/error.hpp"
#include "unifl/protocol.hpp"

using namespace unifl;

namespace {

const char* kTwoDatasetText = R"(# two small schemes sharing one point
dataset A 2
dataset B 2
map A 0 0
map A 1 1
map B 0 1
map B 1 2
)";

ProtocolTable two_dataset_table() { return ProtocolTable::load(kTwoDatasetText, {.standard = false}); }

std::string drop_line(std::string text, const std::string& line) {
  const auto pos = text.find(line + "\n");
  REQUIRE(pos != std::string::npos);
  text.erase(pos, line.size() + 1);
  return text;
}

}  // namespace

TEST_CASE("shipped table has the unified aggregates") {
  const ProtocolTable& t = ProtocolTable::standard();
  CHECK(t.unified_count() == kUnifiedCount);
  std::set<int> distinct;
  int total = 0;
  for (std::size_t s = 0; s < t.datasets().size(); ++s)
    for (int j = 0; j < t.datasets()[s].size; ++j) distinct.insert(t.map_forward(s, j).index);
  for (int p = 0; p < kUnifiedCount; ++p) {
    const int c = t.count({p});
    CHECK(c >= 1);
    CHECK(c <= 4);
    total += c;
  }
  CHECK(distinct.size() == 124);
  CHECK(total == 19 + 98 + 29 + 68);
  CHECK(t.dataset_landmarks(DatasetId::AFLW) == 19);
  CHECK(t.dataset_landmarks(DatasetId::WFLW) == 98);
  CHECK(t.dataset_landmarks(DatasetId::COFW) == 29);
  CHECK(t.dataset_landmarks(DatasetId::T300W) == 68);
}

TEST_CASE("forward and reverse maps are mutually inverse") {
  const ProtocolTable& t = ProtocolTable::standard();
  for (std::size_t s = 0; s < t.datasets().size(); ++s) {
    std::set<int> seen;
    for (int j = 0; j < t.datasets()[s].size; ++j) {
      const UnifiedLandmarkId u = t.map_forward(s, j);
      CHECK(seen.insert(u.index).second);  // injective within a dataset
      const auto& refs = t.map_reverse(u);
      bool found = false;
      for (const auto& r : refs) found = found || (r.dataset == s && r.local == j);
      CHECK(found);
      CHECK(t.contains(s, u));
    }
  }
  for (int p = 0; p < kUnifiedCount; ++p) {
    const auto& refs = t.map_reverse({p});
    CHECK(static_cast<int>(refs.size()) == t.count({p}));
    for (const auto& r : refs) CHECK(t.map_forward(r.dataset, r.local) == UnifiedLandmarkId{p});
  }
}

TEST_CASE("counts of one and four occur with matching reverse lists") {
  const ProtocolTable& t = ProtocolTable::standard();
  bool saw_one = false, saw_four = false;
  for (int p = 0; p < kUnifiedCount; ++p) {
    const auto& refs = t.map_reverse({p});
    if (t.count({p}) == 4) {
      saw_four = true;
      std::set<std::size_t> ds;
      for (const auto& r : refs) ds.insert(r.dataset);
      CHECK(ds.size() == 4);
    }
    if (t.count({p}) == 1) {
      saw_one = true;
      CHECK(refs.size() == 1);
    }
  }
  CHECK(saw_one);
  CHECK(saw_four);
  const UnifiedLandmarkId u = t.map_forward(DatasetId::AFLW, 0);
  CHECK(t.contains(t.slot(DatasetId::AFLW), u));
  CHECK(t.count(t.map_forward(DatasetId::WFLW, 97)) >= 1);
}

TEST_CASE("lookups reject out-of-range indices") {
  const ProtocolTable& t = ProtocolTable::standard();
  CHECK_THROWS_AS(t.map_forward(DatasetId::COFW, 29), Error);
  CHECK_THROWS_AS(t.map_forward(DatasetId::COFW, -1), Error);
  CHECK_NOTHROW(t.map_forward(DatasetId::COFW, 28));
  CHECK_THROWS_AS(t.map_reverse({124}), Error);
  CHECK_THROWS_AS(t.count({-1}), Error);
}

TEST_CASE("flip permutations are involutions") {
  const ProtocolTable& t = ProtocolTable::standard();
  for (DatasetId ds : kAllDatasets) {
    const auto& perm = t.flip_permutation(ds);
    REQUIRE(static_cast<int>(perm.size()) == t.dataset_landmarks(ds));
    for (int j = 0; j < static_cast<int>(perm.size()); ++j) CHECK(perm[static_cast<std::size_t>(perm[j])] == j);
  }
}

TEST_CASE("serialization round-trips") {
  const ProtocolTable& t = ProtocolTable::standard();
  const ProtocolTable again = ProtocolTable::load(t.serialize());
  CHECK(again == t);
  const ProtocolTable small = two_dataset_table();
  CHECK(ProtocolTable::load(small.serialize(), {.standard = false}) == small);
}

TEST_CASE("two-dataset table counts by construction") {
  const ProtocolTable t = two_dataset_table();
  CHECK(t.unified_count() == 3);
  CHECK(t.count({0}) == 1);
  CHECK(t.count({1}) == 2);
  CHECK(t.count({2}) == 1);
  CHECK_THROWS_AS(ProtocolTable::load(kTwoDatasetText), ParseError);  // not the four standard datasets
}

TEST_CASE("malformed mapping files name the offending line") {
  const std::string text(default_protocol_text());

  SUBCASE("omitted WFLW landmark") {
    try {
      ProtocolTable::load(drop_line(text, "map WFLW 97 97"));
      FAIL("expected a ParseError");
    } catch (const ParseError& e) {
      CHECK(std::string(e.what()).find("distinct-id/total-count mismatch") != std::string::npos);
    }
  }
  SUBCASE("duplicate local index") {
    try {
      ProtocolTable::load("dataset A 2\nmap A 0 0\nmap A 0 1\n", {.standard = false});
      FAIL("expected a ParseError");
    } catch (const ParseError& e) {
      CHECK(e.line() == 3);
      CHECK(std::string(e.what()).find("duplicate local index") != std::string::npos);
    }
  }
  SUBCASE("unified index out of range") {
    try {
      ProtocolTable::load("dataset A 1\nmap A 0 124\n", {.standard = false});
      FAIL("expected a ParseError");
    } catch (const ParseError& e) {
      CHECK(e.line() == 2);
    }
  }
  SUBCASE("flip that is not an involution") {
    CHECK_THROWS_AS(ProtocolTable::load("dataset A 3\nmap A 0 0\nmap A 1 1\nmap A 2 2\nflip A 0 1\nflip A 1 2\n",
                                        {.standard = false}),
                    ParseError);
  }
  SUBCASE("unknown directive") {
    CHECK_THROWS_AS(ProtocolTable::load("dataset A 1\nmap A 0 0\nbogus\n", {.standard = false}), ParseError);
  }
}
