/*
Copyright 2026 The granloc Authors.

Licensed under the Apache License, Version 2.0 (the "License");
you may not use this file except in compliance with the License.
You may obtain a copy of the License at

    http://www.apache.org/licenses/LICENSE-2.0

Unless required by applicable law or agreed to in writing, software
distributed under the License is distributed on an "AS IS" BASIS,
WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
See the License for the specific language governing permissions and
limitations under the License.
*/

#pragma once

// JSON Lines manifests, one SampleRecord per line:
//   {"boxes":[[x0,y0,x1,y1],...],"image_height":H,"image_id":"...",
//    "image_width":W,"label":"...","observation_id":"...",
//    "scoremap_path":"...","split":"train-weaksup|train-fullsup|test"}
// Optional fields are omitted when absent. Saved files are canonical: keys
// sorted, no whitespace, reals printed with 6 significant digits, '\n' line
// endings.

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <istream>
#include <ostream>
#include <sstream>
#include <string>
#include <unordered_set>

#include <json.hpp>

#include "granloc/manifest.hpp"
#include "granloc/taxonomy.hpp"

namespace granloc {

namespace detail {

inline std::string format_real(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.6g", v);
  return buf;
}

inline std::string json_string(const std::string& s) { return nlohmann::json(s).dump(); }

inline Error line_error(std::size_t line, const std::string& what) {
  return Error(Errc::ParseError, "line " + std::to_string(line), what);
}

}  // namespace detail

inline std::string format_record(const SampleRecord& r) {
  std::string out = "{";
  bool first = true;
  auto key = [&](const char* k) {
    if (!first) out += ',';
    first = false;
    out += '"';
    out += k;
    out += "\":";
  };
  if (!r.boxes.empty()) {
    key("boxes");
    out += '[';
    for (std::size_t i = 0; i < r.boxes.size(); ++i) {
      const auto& b = r.boxes[i];
      if (i) out += ',';
      out += '[' + detail::format_real(b.x0) + ',' + detail::format_real(b.y0) + ',' +
             detail::format_real(b.x1) + ',' + detail::format_real(b.y1) + ']';
    }
    out += ']';
  }
  if (r.image_height) {
    key("image_height");
    out += std::to_string(*r.image_height);
  }
  key("image_id");
  out += detail::json_string(r.image_id);
  if (r.image_width) {
    key("image_width");
    out += std::to_string(*r.image_width);
  }
  key("label");
  out += detail::json_string(r.label);
  if (r.observation_id) {
    key("observation_id");
    out += detail::json_string(*r.observation_id);
  }
  if (r.scoremap_path) {
    key("scoremap_path");
    out += detail::json_string(*r.scoremap_path);
  }
  key("split");
  out += detail::json_string(std::string(split_name(r.split)));
  out += '}';
  return out;
}

/// Parses one line; structural checks only (no hierarchy, no uniqueness).
inline SampleRecord parse_record(const std::string& text, std::size_t line) {
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(text);
  } catch (const nlohmann::json::exception& e) {
    throw detail::line_error(line, e.what());
  }
  if (!j.is_object()) throw detail::line_error(line, "record is not an object");
  SampleRecord r;
  auto need_string = [&](const char* k) -> std::string {
    if (!j.contains(k) || !j[k].is_string())
      throw detail::line_error(line, std::string("missing string field ") + k);
    return j[k].get<std::string>();
  };
  auto opt_int = [&](const char* k) -> std::optional<int> {
    if (!j.contains(k)) return std::nullopt;
    if (!j[k].is_number_integer() || j[k].get<long long>() < 1 || j[k].get<long long>() > (1 << 30))
      throw detail::line_error(line, std::string(k) + " must be a positive integer");
    return j[k].get<int>();
  };
  for (const auto& [k, v] : j.items()) {
    static const std::unordered_set<std::string> known{
        "boxes", "image_height", "image_id", "image_width", "label",
        "observation_id", "scoremap_path", "split"};
    if (!known.count(k)) throw detail::line_error(line, "unknown field " + k);
  }
  r.image_id = need_string("image_id");
  if (r.image_id.empty()) throw detail::line_error(line, "empty image_id");
  r.label = need_string("label");
  try {
    r.split = parse_split(need_string("split"));
  } catch (const Error&) {
    throw detail::line_error(line, "unknown split");
  }
  if (j.contains("observation_id")) r.observation_id = need_string("observation_id");
  if (j.contains("scoremap_path")) r.scoremap_path = need_string("scoremap_path");
  r.image_width = opt_int("image_width");
  r.image_height = opt_int("image_height");
  if (j.contains("boxes")) {
    if (!j["boxes"].is_array()) throw detail::line_error(line, "boxes must be an array");
    for (const auto& b : j["boxes"]) {
      if (!b.is_array() || b.size() != 4)
        throw detail::line_error(line, "box must be [x0,y0,x1,y1]");
      for (const auto& c : b)
        if (!c.is_number()) throw detail::line_error(line, "box coordinate is not a number");
      FloatBox fb{b[0].get<double>(), b[1].get<double>(), b[2].get<double>(), b[3].get<double>()};
      if (!(fb.x1 > fb.x0 && fb.y1 > fb.y0 && fb.x0 >= 0 && fb.y0 >= 0))
        throw detail::line_error(line, "degenerate box");
      if ((r.image_width && fb.x1 > *r.image_width) || (r.image_height && fb.y1 > *r.image_height))
        throw detail::line_error(line, "box outside image bounds");
      r.boxes.push_back(fb);
    }
  }
  if (r.split != Split::TrainWeaksup && r.boxes.empty())
    throw detail::line_error(line, std::string(split_name(r.split)) + " record needs a box");
  return r;
}

/// Reads a manifest. When `h` is given every label must name one of its nodes.
inline Manifest read_manifest(std::istream& in, const LabelHierarchy* h = nullptr) {
  Manifest m;
  std::unordered_set<std::string> ids;
  std::string text;
  std::size_t line = 0;
  while (std::getline(in, text)) {
    ++line;
    if (!text.empty() && text.back() == '\r') text.pop_back();
    if (text.find_first_not_of(" \t") == std::string::npos) continue;
    SampleRecord r = parse_record(text, line);
    if (!ids.insert(r.image_id).second)
      throw Error(Errc::DuplicateImageId, r.image_id, "line " + std::to_string(line));
    if (h && !h->find(r.label))
      throw Error(Errc::UnknownLabel, r.image_id, r.label + " (line " + std::to_string(line) + ")");
    m.records.push_back(std::move(r));
  }
  return m;
}

inline void write_manifest(std::ostream& out, const Manifest& m) {
  for (const auto& r : m.records) out << format_record(r) << '\n';
}

inline Manifest load_manifest(const std::filesystem::path& path, const LabelHierarchy* h = nullptr) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(Errc::IoError, path.string(), "cannot open for reading");
  return read_manifest(in, h);
}

inline void save_manifest(const Manifest& m, const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw Error(Errc::IoError, path.string(), "cannot open for writing");
  write_manifest(out, m);
  if (!out) throw Error(Errc::IoError, path.string(), "write failed");
}

}  // namespace granloc
