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

// CAM aggregation: the score maps of every leaf under a chosen ancestor are
// averaged pixelwise and the mean is min-max normalized.

#include <algorithm>
#include <cctype>
#include <filesystem>
#include <fstream>
#include <map>
#include <numeric>
#include <set>
#include <span>
#include <string>
#include <vector>

#include <json.hpp>

#include "granloc/scoremap.hpp"
#include "granloc/smf.hpp"
#include "granloc/taxonomy.hpp"

namespace granloc {

/// Leaf label -> score map for a single image.
using CamSet = std::map<std::string, ScoreMap>;

/// Leaves below `ancestor` (the node itself when it is a leaf), by name.
inline std::vector<std::string> leaves_under(const LabelHierarchy& h, std::string_view ancestor) {
  std::vector<std::string> out;
  std::vector<NodeId> stack{h.id_of(ancestor)};
  while (!stack.empty()) {
    NodeId u = stack.back();
    stack.pop_back();
    const auto& ch = h.node(u).children;
    if (ch.empty()) out.push_back(h.name(u));
    stack.insert(stack.end(), ch.begin(), ch.end());
  }
  std::sort(out.begin(), out.end());
  return out;
}

/// Pixelwise mean, then min-max normalization. With `pre_normalize` each map
/// is normalized before averaging instead. Maps are summed in a canonical
/// (lexicographic by content) order, so the result does not depend on input
/// order.
inline ScoreMap aggregate_cams(std::span<const ScoreMap> maps, bool pre_normalize = false) {
  if (maps.empty()) throw Error(Errc::EmptyInput, "aggregate_cams");
  const std::size_t w = maps.front().width(), h = maps.front().height();
  for (const auto& m : maps)
    if (m.width() != w || m.height() != h)
      throw Error(Errc::DimensionMismatch, "aggregate_cams",
                  std::to_string(m.width()) + "x" + std::to_string(m.height()) + " vs " +
                      std::to_string(w) + "x" + std::to_string(h));
  std::vector<ScoreMap> normalized;
  std::span<const ScoreMap> inputs = maps;
  if (pre_normalize) {
    normalized.reserve(maps.size());
    for (const auto& m : maps) normalized.push_back(minmax_normalize(m));
    inputs = normalized;
  }
  std::vector<std::size_t> order(inputs.size());
  std::iota(order.begin(), order.end(), 0);
  std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
    return std::lexicographical_compare(inputs[a].values().begin(), inputs[a].values().end(),
                                        inputs[b].values().begin(), inputs[b].values().end());
  });
  std::vector<double> sum(w * h, 0.0);
  for (std::size_t k : order) {
    const auto v = inputs[k].values();
    for (std::size_t i = 0; i < sum.size(); ++i) sum[i] += v[i];
  }
  std::vector<float> mean(sum.size());
  const double n = static_cast<double>(inputs.size());
  for (std::size_t i = 0; i < sum.size(); ++i) mean[i] = static_cast<float>(sum[i] / n);
  return minmax_normalize(ScoreMap(w, h, std::move(mean)));
}

/// Aggregated map for an image labeled `leaf_label`, over all leaves sharing
/// its ancestor at `tier_depth`. Every such leaf must have a map in `cams`.
inline ScoreMap cam_agg_for_sample(const LabelHierarchy& h, const CamSet& cams,
                                   std::string_view leaf_label, std::size_t tier_depth,
                                   bool pre_normalize = false) {
  const NodeId leaf = h.id_of(leaf_label);
  if (!h.is_leaf(leaf)) throw Error(Errc::InvalidArgument, std::string(leaf_label), "not a leaf");
  const std::size_t d = h.depth(leaf);
  if (tier_depth > d)
    throw Error(Errc::DepthOutOfRange, std::to_string(tier_depth),
                "leaf depth is " + std::to_string(d));
  const NodeId ancestor = h.coarsen(leaf, d - tier_depth);
  std::vector<ScoreMap> maps;
  for (const auto& name : leaves_under(h, h.name(ancestor))) {
    auto it = cams.find(name);
    if (it == cams.end()) throw Error(Errc::MissingSiblingCam, name);
    maps.push_back(it->second);
  }
  return aggregate_cams(maps, pre_normalize);
}

// ---------------------------------------------------------------------------
// CamSet directories: <leaf>.smf files plus index.json mapping leaf -> file
// name. Names that are unsafe as file names get a generated file name and
// are only reachable through the index.

inline bool path_safe_name(std::string_view name) {
  if (name.empty() || name == "." || name == ".." || name == "index") return false;
  return std::all_of(name.begin(), name.end(), [](char c) {
    return std::isalnum(static_cast<unsigned char>(c)) || c == '_' || c == '-' || c == '.';
  });
}

inline void save_camset(const CamSet& cams, const std::filesystem::path& dir) {
  std::filesystem::create_directories(dir);
  nlohmann::ordered_json index = nlohmann::ordered_json::object();
  std::size_t generated = 0;
  for (const auto& [leaf, map] : cams) {
    std::string file = path_safe_name(leaf) ? leaf + ".smf" : "cam_" + std::to_string(generated++) + ".smf";
    write_smf(map, dir / file);
    index[leaf] = file;
  }
  std::ofstream out(dir / "index.json", std::ios::binary | std::ios::trunc);
  if (!out) throw Error(Errc::IoError, (dir / "index.json").string(), "cannot open for writing");
  out << index.dump(2) << '\n';
}

inline CamSet load_camset(const std::filesystem::path& dir) {
  if (!std::filesystem::is_directory(dir)) throw Error(Errc::IoError, dir.string(), "not a directory");
  CamSet cams;
  std::set<std::string> indexed_files;
  const auto index_path = dir / "index.json";
  if (std::filesystem::exists(index_path)) {
    std::ifstream in(index_path, std::ios::binary);
    nlohmann::json index;
    try {
      index = nlohmann::json::parse(in);
    } catch (const nlohmann::json::exception& e) {
      throw Error(Errc::ParseError, index_path.string(), e.what());
    }
    if (!index.is_object()) throw Error(Errc::ParseError, index_path.string(), "expected an object");
    for (const auto& [leaf, file] : index.items()) {
      if (!file.is_string()) throw Error(Errc::ParseError, index_path.string(), "file name for " + leaf);
      cams.emplace(leaf, read_scoremap(dir / file.get<std::string>()));
      indexed_files.insert(file.get<std::string>());
    }
  }
  for (const auto& entry : std::filesystem::directory_iterator(dir)) {
    const auto& p = entry.path();
    if (p.extension() != ".smf" || indexed_files.count(p.filename().string())) continue;
    cams.emplace(p.stem().string(), read_scoremap(p));
  }
  return cams;
}

}  // namespace granloc
