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

#include "unifl/protocol.hpp"

#include <algorithm>
#include <fstream>
#include <map>
#include <set>
#include <sstream>

#include "unifl/error.hpp"
#include "util.hpp"

namespace unifl {

namespace {

constexpr std::array<std::string_view, kDatasetCount> kNames = {"AFLW", "WFLW", "COFW", "300W"};
constexpr std::array<int, kDatasetCount> kSizes = {19, 98, 29, 68};

int parse_index(const std::string& tok, std::size_t line, const char* what) {
  auto v = detail::parse_int(tok);
  if (!v) throw ParseError(std::string("expected integer ") + what + ", got '" + tok + "'", line);
  return *v;
}

}  // namespace

std::string_view dataset_name(DatasetId ds) { return kNames[static_cast<std::size_t>(ds)]; }

std::optional<DatasetId> dataset_from_name(std::string_view name) {
  for (std::size_t i = 0; i < kDatasetCount; ++i)
    if (kNames[i] == name) return static_cast<DatasetId>(i);
  if (name == "T300W" || name == "300w") return DatasetId::T300W;
  return std::nullopt;
}

int dataset_size(DatasetId ds) { return kSizes[static_cast<std::size_t>(ds)]; }

ProtocolTable ProtocolTable::load(std::string_view text, ProtocolLoadOptions opts) {
  ProtocolTable t;
  std::map<std::string, std::size_t, std::less<>> by_name;
  std::size_t map_lines = 0;
  std::size_t last_line = 0;

  auto lookup = [&](const std::string& name, std::size_t line) -> DatasetMapping& {
    auto it = by_name.find(name);
    if (it == by_name.end()) throw ParseError("undeclared dataset '" + name + "'", line);
    return t.datasets_[it->second];
  };

  std::size_t lineno = 0;
  for (const auto& raw : detail::split_lines(text)) {
    ++lineno;
    auto toks = detail::tokenize(detail::strip_comment(raw));
    if (toks.empty()) continue;
    last_line = lineno;
    const std::string& kw = toks[0];
    if (kw == "version") {
      if (toks.size() != 2) throw ParseError("expected 'version <n>'", lineno);
      t.version_ = parse_index(toks[1], lineno, "version");
    } else if (kw == "dataset") {
      if (toks.size() != 3) throw ParseError("expected 'dataset <NAME> <SIZE>'", lineno);
      if (by_name.count(toks[1])) throw ParseError("dataset '" + toks[1] + "' declared twice", lineno);
      int size = parse_index(toks[2], lineno, "size");
      if (size <= 0) throw ParseError("dataset size must be positive", lineno);
      DatasetMapping d;
      d.name = toks[1];
      d.size = size;
      d.forward.assign(static_cast<std::size_t>(size), -1);
      d.flip.resize(static_cast<std::size_t>(size));
      for (int i = 0; i < size; ++i) d.flip[static_cast<std::size_t>(i)] = i;
      d.declared_line = lineno;
      by_name.emplace(d.name, t.datasets_.size());
      t.datasets_.push_back(std::move(d));
    } else if (kw == "map") {
      if (toks.size() != 4) throw ParseError("expected 'map <NAME> <local> <unified>'", lineno);
      auto& d = lookup(toks[1], lineno);
      int local = parse_index(toks[2], lineno, "local index");
      int unified = parse_index(toks[3], lineno, "unified index");
      if (local < 0 || local >= d.size)
        throw ParseError("local index " + toks[2] + " out of range for " + d.name, lineno);
      if (unified < 0 || unified >= kUnifiedCount)
        throw ParseError("unified index " + toks[3] + " out of [0,124)", lineno);
      auto& slot = d.forward[static_cast<std::size_t>(local)];
      if (slot != -1) throw ParseError("duplicate local index " + toks[2] + " for " + d.name, lineno);
      if (std::find(d.forward.begin(), d.forward.end(), unified) != d.forward.end())
        throw ParseError("unified index " + toks[3] + " mapped twice within " + d.name, lineno);
      slot = unified;
      ++map_lines;
    } else if (kw == "flip") {
      if (toks.size() != 4) throw ParseError("expected 'flip <NAME> <a> <b>'", lineno);
      auto& d = lookup(toks[1], lineno);
      int a = parse_index(toks[2], lineno, "flip index");
      int b = parse_index(toks[3], lineno, "flip index");
      if (a < 0 || b < 0 || a >= d.size || b >= d.size)
        throw ParseError("flip index out of range for " + d.name, lineno);
      if (a == b) throw ParseError("flip pair must name two distinct landmarks", lineno);
      auto ua = static_cast<std::size_t>(a), ub = static_cast<std::size_t>(b);
      if (d.flip[ua] != a || d.flip[ub] != b)
        throw ParseError("landmark already paired in another flip line", lineno);
      d.flip[ua] = b;
      d.flip[ub] = a;
    } else {
      throw ParseError("unknown directive '" + kw + "'", lineno);
    }
  }

  if (t.datasets_.empty()) throw ParseError("no datasets declared", 0);

  if (opts.standard) {
    if (t.datasets_.size() != kDatasetCount)
      throw ParseError("expected the four datasets AFLW, WFLW, COFW, 300W", last_line);
    for (const auto& d : t.datasets_) {
      auto id = dataset_from_name(d.name);
      if (!id || dataset_name(*id) != d.name)
        throw ParseError("unknown dataset '" + d.name + "'", d.declared_line);
      if (d.size != dataset_size(*id))
        throw ParseError(d.name + " must declare " + std::to_string(dataset_size(*id)) + " landmarks",
                         d.declared_line);
    }
  }

  std::set<int> distinct;
  for (const auto& d : t.datasets_)
    for (int u : d.forward)
      if (u >= 0) distinct.insert(u);

  if (opts.standard &&
      (map_lines != kTotalLandmarks || distinct.size() != static_cast<std::size_t>(kUnifiedCount))) {
    std::size_t where = last_line;
    for (const auto& d : t.datasets_)
      if (std::count(d.forward.begin(), d.forward.end(), -1) > 0) {
        where = d.declared_line;
        break;
      }
    throw ParseError("distinct-id/total-count mismatch: " + std::to_string(map_lines) + " map lines and " +
                         std::to_string(distinct.size()) + " distinct unified ids (expected 214 and 124)",
                     where);
  }

  for (const auto& d : t.datasets_) {
    auto it = std::find(d.forward.begin(), d.forward.end(), -1);
    if (it != d.forward.end())
      throw ParseError(d.name + " local index " + std::to_string(it - d.forward.begin()) + " has no map line",
                       d.declared_line);
  }

  const int k = static_cast<int>(distinct.size());
  if (*distinct.rbegin() != k - 1)
    throw ParseError("unified ids must be dense in [0," + std::to_string(k) + ")", last_line);

  t.reverse_.assign(static_cast<std::size_t>(k), {});
  for (std::size_t s = 0; s < t.datasets_.size(); ++s) {
    const auto& d = t.datasets_[s];
    for (int j = 0; j < d.size; ++j)
      t.reverse_[static_cast<std::size_t>(d.forward[static_cast<std::size_t>(j)])].push_back({s, j});
  }

  // A mirrored landmark must land on the same mirrored unified id in every dataset.
  std::vector<int> mirror(static_cast<std::size_t>(k), -1);
  for (const auto& d : t.datasets_) {
    for (int j = 0; j < d.size; ++j) {
      int u = d.forward[static_cast<std::size_t>(j)];
      int v = d.forward[static_cast<std::size_t>(d.flip[static_cast<std::size_t>(j)])];
      auto& m = mirror[static_cast<std::size_t>(u)];
      if (m != -1 && m != v)
        throw ParseError("flip pairs of " + d.name + " disagree with another dataset on unified id " +
                             std::to_string(u),
                         d.declared_line);
      m = v;
    }
  }
  return t;
}

ProtocolTable ProtocolTable::load_file(const std::string& path, ProtocolLoadOptions opts) {
  return load(detail::read_text_file(path), opts);
}

const ProtocolTable& ProtocolTable::standard() {
  static const ProtocolTable table = load(default_protocol_text());
  return table;
}

std::string ProtocolTable::serialize() const {
  std::ostringstream os;
  os << "version " << version_ << "\n";
  for (const auto& d : datasets_) os << "dataset " << d.name << ' ' << d.size << "\n";
  for (const auto& d : datasets_) {
    for (int j = 0; j < d.size; ++j) os << "map " << d.name << ' ' << j << ' ' << d.forward[static_cast<std::size_t>(j)] << "\n";
    for (int j = 0; j < d.size; ++j) {
      int m = d.flip[static_cast<std::size_t>(j)];
      if (m > j) os << "flip " << d.name << ' ' << j << ' ' << m << "\n";
    }
  }
  return os.str();
}

std::size_t ProtocolTable::slot(std::string_view name) const {
  for (std::size_t i = 0; i < datasets_.size(); ++i)
    if (datasets_[i].name == name) return i;
  throw Error("dataset '" + std::string(name) + "' is not part of this protocol");
}

UnifiedLandmarkId ProtocolTable::map_forward(std::size_t s, int local) const {
  if (s >= datasets_.size()) throw Error("dataset slot out of range");
  const auto& d = datasets_[s];
  if (local < 0 || local >= d.size)
    throw Error("local index " + std::to_string(local) + " out of range for " + d.name + " (size " +
                std::to_string(d.size) + ")");
  return {d.forward[static_cast<std::size_t>(local)]};
}

void ProtocolTable::check_unified(UnifiedLandmarkId p) const {
  if (p.index < 0 || p.index >= unified_count())
    throw Error("unified id " + std::to_string(p.index) + " out of range");
}

const std::vector<LandmarkRef>& ProtocolTable::map_reverse(UnifiedLandmarkId p) const {
  check_unified(p);
  return reverse_[static_cast<std::size_t>(p.index)];
}

int ProtocolTable::count(UnifiedLandmarkId p) const { return static_cast<int>(map_reverse(p).size()); }

bool ProtocolTable::contains(std::size_t s, UnifiedLandmarkId p) const {
  for (const auto& r : map_reverse(p))
    if (r.dataset == s) return true;
  return false;
}

int ProtocolTable::flip(DatasetId ds, int local) const {
  const auto& d = datasets_[slot(ds)];
  if (local < 0 || local >= d.size) throw Error("local index out of range for " + d.name);
  return d.flip[static_cast<std::size_t>(local)];
}

}  // namespace unifl
