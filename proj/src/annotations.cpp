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

#include <algorithm>
#include <charconv>
#include <filesystem>

#include "unifl/dataset.hpp"
#include "unifl/error.hpp"
#include "util.hpp"

namespace unifl {

namespace {

std::string fmt_double(double v) {
  char buf[32];
  auto [p, ec] = std::to_chars(buf, buf + sizeof buf, v);
  (void)ec;
  return std::string(buf, p);
}

double number(const std::string& tok, std::size_t line) {
  auto v = detail::parse_double(tok);
  if (!v) throw ParseError("non-numeric field '" + tok + "'", line);
  return *v;
}

int flag(const std::string& tok, std::size_t line) {
  auto v = detail::parse_int(tok);
  if (!v || (*v != 0 && *v != 1)) throw ParseError("expected 0/1 flag, got '" + tok + "'", line);
  return static_cast<int>(*v);
}

}  // namespace

LandmarkSet parse_pts(std::string_view text) {
  auto lines = detail::split_lines(text);
  std::size_t i = 0;
  long declared = -1;
  for (; i < lines.size(); ++i) {
    auto t = detail::trim(lines[i]);
    if (t.empty()) continue;
    if (t == "{") break;
    auto colon = t.find(':');
    if (colon == std::string::npos) throw ParseError("expected 'key: value' header line", i + 1);
    auto key = detail::trim(std::string_view(t).substr(0, colon));
    auto val = detail::trim(std::string_view(t).substr(colon + 1));
    if (key == "n_points") {
      auto v = detail::parse_int(val);
      if (!v || *v <= 0) throw ParseError("bad n_points value '" + val + "'", i + 1);
      declared = static_cast<long>(*v);
    } else if (key != "version") {
      throw ParseError("unknown header key '" + key + "'", i + 1);
    }
  }
  if (i == lines.size()) throw ParseError("missing '{'", lines.size());
  if (declared < 0) throw ParseError("header does not declare n_points", i + 1);

  LandmarkSet lms;
  ++i;
  bool closed = false;
  for (; i < lines.size(); ++i) {
    auto toks = detail::tokenize(lines[i]);
    if (toks.empty()) continue;
    if (toks.size() == 1 && toks[0] == "}") {
      closed = true;
      ++i;
      break;
    }
    if (toks.size() != 2) throw ParseError("malformed coordinate line", i + 1);
    if (static_cast<long>(lms.coords.size()) == declared)
      throw ParseError("more coordinate lines than n_points = " + std::to_string(declared), i + 1);
    lms.coords.push_back({number(toks[0], i + 1) - 1.0, number(toks[1], i + 1) - 1.0});
  }
  if (!closed) throw ParseError("missing '}'", lines.size());
  if (static_cast<long>(lms.coords.size()) != declared)
    throw ParseError("n_points is " + std::to_string(declared) + " but " + std::to_string(lms.coords.size()) +
                         " coordinate lines were found",
                     i);
  for (; i < lines.size(); ++i)
    if (!detail::trim(lines[i]).empty()) throw ParseError("unexpected content after '}'", i + 1);
  lms.visible.assign(lms.coords.size(), true);
  if (declared == dataset_size(DatasetId::T300W)) lms.dataset = DatasetId::T300W;
  return lms;
}

std::string write_pts(const LandmarkSet& lms) {
  std::string out = "version: 1\nn_points: " + std::to_string(lms.size()) + "\n{\n";
  for (const auto& p : lms.coords) out += fmt_double(p.x + 1.0) + " " + fmt_double(p.y + 1.0) + "\n";
  out += "}\n";
  return out;
}

namespace {

struct Layout {
  int points;
  bool visibility;
  bool box;
  int attributes;
  std::size_t columns() const {
    return static_cast<std::size_t>(points * 2 + (visibility ? points : 0) + (box ? 4 : 0) + attributes + 1);
  }
};

Layout layout_for(DatasetId ds) {
  switch (ds) {
    case DatasetId::WFLW: return {98, false, true, 6};
    case DatasetId::COFW: return {29, true, false, 0};
    case DatasetId::AFLW: return {19, true, true, 0};
    case DatasetId::T300W: break;
  }
  throw Error("300W annotations use the pts format, not a list file");
}

}  // namespace

std::vector<TabularEntry> parse_tabular(std::string_view text, DatasetId ds) {
  const Layout lay = layout_for(ds);
  std::vector<TabularEntry> out;
  std::size_t lineno = 0;
  for (const auto& line : detail::split_lines(text)) {
    ++lineno;
    auto toks = detail::tokenize(line);
    if (toks.empty()) continue;
    if (toks.size() != lay.columns())
      throw ParseError("expected " + std::to_string(lay.columns()) + " columns for " +
                           std::string(dataset_name(ds)) + ", got " + std::to_string(toks.size()),
                       lineno);
    TabularEntry e;
    e.landmarks.dataset = ds;
    std::size_t k = 0;
    for (int j = 0; j < lay.points; ++j) {
      double x = number(toks[k++], lineno);
      double y = number(toks[k++], lineno);
      e.landmarks.coords.push_back({x, y});
    }
    e.landmarks.visible.assign(static_cast<std::size_t>(lay.points), true);
    if (ds == DatasetId::WFLW) {
      e.box = {number(toks[k], lineno), number(toks[k + 1], lineno), number(toks[k + 2], lineno),
               number(toks[k + 3], lineno)};
      k += 4;
      for (int a = 0; a < lay.attributes; ++a) e.attributes.push_back(flag(toks[k++], lineno));
    } else {
      for (int j = 0; j < lay.points; ++j) e.landmarks.visible[static_cast<std::size_t>(j)] = flag(toks[k++], lineno) == 1;
      if (lay.box) {
        e.box = {number(toks[k], lineno), number(toks[k + 1], lineno), number(toks[k + 2], lineno),
                 number(toks[k + 3], lineno)};
        k += 4;
      } else {
        LandmarkSet all = e.landmarks;
        all.visible.assign(all.coords.size(), true);
        e.box = bounding_box(all);
      }
    }
    e.image_path = toks[k];
    if (!(e.box.width() > 0.0 && e.box.height() > 0.0)) throw ParseError("degenerate face box", lineno);
    e.landmarks.box = e.box;
    out.push_back(std::move(e));
  }
  return out;
}

std::string write_tabular(const std::vector<TabularEntry>& entries, DatasetId ds) {
  const Layout lay = layout_for(ds);
  std::string out;
  for (const auto& e : entries) {
    if (static_cast<int>(e.landmarks.size()) != lay.points) throw Error("entry does not match the dataset layout");
    std::vector<std::string> cols;
    for (const auto& p : e.landmarks.coords) {
      cols.push_back(fmt_double(p.x));
      cols.push_back(fmt_double(p.y));
    }
    auto push_box = [&] {
      for (double v : {e.box.x_min, e.box.y_min, e.box.x_max, e.box.y_max}) cols.push_back(fmt_double(v));
    };
    if (ds == DatasetId::WFLW) {
      push_box();
      for (int a = 0; a < lay.attributes; ++a)
        cols.push_back(std::to_string(a < static_cast<int>(e.attributes.size()) ? e.attributes[static_cast<std::size_t>(a)] : 0));
    } else {
      for (bool v : e.landmarks.visible) cols.push_back(v ? "1" : "0");
      if (lay.box) push_box();
    }
    cols.push_back(e.image_path);
    for (std::size_t i = 0; i < cols.size(); ++i) {
      if (i) out += ' ';
      out += cols[i];
    }
    out += '\n';
  }
  return out;
}

std::vector<RawSample> load_dataset_dir(const std::string& dir, DatasetId ds) {
  namespace fs = std::filesystem;
  std::vector<RawSample> out;
  const fs::path root(dir);
  if (ds == DatasetId::T300W) {
    std::vector<fs::path> pts;
    for (const auto& entry : fs::directory_iterator(root))
      if (entry.path().extension() == ".pts") pts.push_back(entry.path());
    std::sort(pts.begin(), pts.end());
    for (const auto& p : pts) {
      RawSample s;
      try {
        s.landmarks = parse_pts(detail::read_text_file(p.string()));
      } catch (const ParseError& e) {
        throw ParseError(p.filename().string() + ": " + e.what(), 0);
      }
      s.landmarks.dataset = DatasetId::T300W;
      s.landmarks.box = bounding_box(s.landmarks);
      fs::path img = p;
      img.replace_extension(".pgm");
      if (!fs::exists(img)) img.replace_extension(".ppm");
      s.image = read_pnm(img.string());
      s.source_id = p.stem().string();
      out.push_back(std::move(s));
    }
  } else {
    auto entries = parse_tabular(detail::read_text_file((root / "list.txt").string()), ds);
    for (auto& e : entries) {
      RawSample s;
      s.image = read_pnm((root / e.image_path).string());
      s.landmarks = std::move(e.landmarks);
      s.source_id = fs::path(e.image_path).stem().string();
      out.push_back(std::move(s));
    }
  }
  return out;
}

}  // namespace unifl
