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

// Hierarchy files: `parent,child` CSV edge lists, or nested JSON objects
// {"name": ..., "children": [...]}.

#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>
#include <vector>

#include <json.hpp>

#include "granloc/csv.hpp"
#include "granloc/taxonomy.hpp"

namespace granloc {

inline std::vector<Edge> read_edges_csv(std::istream& in) {
  std::vector<std::string> row;
  std::size_t line = 0;
  if (!csv::read_row(in, row, line)) throw Error(Errc::ParseError, "line 1", "empty file");
  if (row.size() != 2 || row[0] != "parent" || row[1] != "child")
    throw Error(Errc::ParseError, "line 1", "expected header parent,child");
  std::vector<Edge> edges;
  while (csv::read_row(in, row, line)) {
    if (row.size() == 1 && row[0].empty()) continue;
    if (row.size() != 2)
      throw Error(Errc::ParseError, "line " + std::to_string(line), "expected 2 fields");
    if (row[0].empty() || row[1].empty())
      throw Error(Errc::ParseError, "line " + std::to_string(line), "empty node name");
    edges.push_back({std::move(row[0]), std::move(row[1])});
  }
  return edges;
}

inline void write_edges_csv(std::ostream& out, const std::vector<Edge>& edges) {
  out << "parent,child\n";
  for (const auto& e : edges) csv::write_row(out, {e.parent, e.child});
}

namespace detail {

inline void collect_json_edges(const nlohmann::json& node, std::vector<Edge>& edges,
                               std::size_t depth) {
  if (depth > 10000) throw Error(Errc::ParseError, "hierarchy json", "nesting too deep");
  if (!node.is_object() || !node.contains("name") || !node["name"].is_string())
    throw Error(Errc::ParseError, "hierarchy json", "node without string \"name\"");
  const auto& name = node["name"].get_ref<const std::string&>();
  if (!node.contains("children")) return;
  const auto& children = node["children"];
  if (!children.is_array())
    throw Error(Errc::ParseError, name, "\"children\" must be an array");
  for (const auto& child : children) {
    if (!child.is_object() || !child.contains("name") || !child["name"].is_string())
      throw Error(Errc::ParseError, name, "child without string \"name\"");
    edges.push_back({name, child["name"].get<std::string>()});
    collect_json_edges(child, edges, depth + 1);
  }
}

inline nlohmann::ordered_json hierarchy_node_json(const LabelHierarchy& h, NodeId id) {
  nlohmann::ordered_json j;
  j["name"] = h.name(id);
  const auto& children = h.node(id).children;
  if (!children.empty()) {
    auto arr = nlohmann::ordered_json::array();
    for (NodeId c : children) arr.push_back(hierarchy_node_json(h, c));
    j["children"] = std::move(arr);
  }
  return j;
}

}  // namespace detail

inline LabelHierarchy read_hierarchy_json(std::istream& in) {
  nlohmann::json doc;
  try {
    doc = nlohmann::json::parse(in);
  } catch (const nlohmann::json::exception& e) {
    throw Error(Errc::ParseError, "hierarchy json", e.what());
  }
  std::vector<Edge> edges;
  detail::collect_json_edges(doc, edges, 0);
  if (edges.empty()) return LabelHierarchy::singleton(doc["name"].get<std::string>());
  return build_hierarchy(edges);
}

inline void write_hierarchy_json(std::ostream& out, const LabelHierarchy& h) {
  out << detail::hierarchy_node_json(h, h.root()).dump(2) << '\n';
}

inline bool has_json_extension(const std::filesystem::path& p) {
  return p.extension() == ".json";
}

inline std::ifstream open_input(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(Errc::IoError, path.string(), "cannot open for reading");
  return in;
}

inline std::ofstream open_output(const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw Error(Errc::IoError, path.string(), "cannot open for writing");
  return out;
}

/// Edge list from either file form; used for DAG input as well.
inline std::vector<Edge> load_edges(const std::filesystem::path& path) {
  auto in = open_input(path);
  if (has_json_extension(path)) return read_hierarchy_json(in).edges();
  return read_edges_csv(in);
}

inline LabelHierarchy load_hierarchy(const std::filesystem::path& path) {
  auto in = open_input(path);
  if (has_json_extension(path)) return read_hierarchy_json(in);
  return build_hierarchy(read_edges_csv(in));
}

inline void save_hierarchy(const LabelHierarchy& h, const std::filesystem::path& path) {
  auto out = open_output(path);
  if (has_json_extension(path))
    write_hierarchy_json(out, h);
  else
    write_edges_csv(out, h.edges());
  if (!out) throw Error(Errc::IoError, path.string(), "write failed");
}

}  // namespace granloc
