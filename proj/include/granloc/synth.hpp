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

// Deterministic synthetic datasets: a consistent hierarchy with given tier
// widths, one planted ground-truth box per image, and a score map shaped as
// a blob around the box with controllable offset, size error and noise.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <cstdio>
#include <filesystem>
#include <string>
#include <vector>

#include "granloc/evaluation.hpp"
#include "granloc/manifest.hpp"
#include "granloc/manifest_io.hpp"
#include "granloc/parallel.hpp"
#include "granloc/rng.hpp"
#include "granloc/smf.hpp"
#include "granloc/taxonomy.hpp"
#include "granloc/taxonomy_io.hpp"

namespace granloc {

enum class BlobShape { Gaussian, Box };

struct SynthConfig {
  std::uint64_t seed = 0;
  std::vector<std::size_t> tier_widths{2, 4, 8};  ///< nodes per tier below the root
  std::size_t images_per_category = 10;
  std::size_t image_size = 224;  ///< square annotation frame
  std::size_t map_size = 0;      ///< square score map; 0 means image_size
  double box_min_fraction = 0.2;  ///< GT side length range, fraction of image_size
  double box_max_fraction = 0.6;
  BlobShape blob = BlobShape::Gaussian;
  double area_scale = 1.0;     ///< blob area / GT area
  double center_jitter = 0.0;  ///< max center offset, fraction of GT side
  double size_jitter = 0.0;    ///< area_scale multiplied by U[1 - s, 1 + s]
  double noise_amplitude = 0.0;
  Split split = Split::Test;

  void validate() const {
    if (tier_widths.empty()) throw Error(Errc::InvalidArgument, "tier_widths", "empty");
    for (std::size_t i = 0; i < tier_widths.size(); ++i) {
      if (tier_widths[i] == 0) throw Error(Errc::InvalidArgument, "tier_widths", "zero width");
      if (i > 0 && tier_widths[i] < tier_widths[i - 1])
        throw Error(Errc::InvalidArgument, "tier_widths", "must be non-decreasing");
    }
    if (images_per_category == 0) throw Error(Errc::InvalidArgument, "images_per_category", "must be >= 1");
    if (image_size == 0) throw Error(Errc::InvalidArgument, "image_size", "must be >= 1");
    if (!(box_min_fraction > 0.0 && box_min_fraction <= box_max_fraction && box_max_fraction <= 1.0))
      throw Error(Errc::InvalidArgument, "box fractions", "need 0 < min <= max <= 1");
    if (!(area_scale > 0.0)) throw Error(Errc::InvalidArgument, "area_scale", "must be > 0");
    if (center_jitter < 0.0 || size_jitter < 0.0 || size_jitter >= 1.0)
      throw Error(Errc::InvalidArgument, "jitter", "out of range");
    if (noise_amplitude < 0.0) throw Error(Errc::InvalidArgument, "noise_amplitude", "must be >= 0");
  }

  std::size_t effective_map_size() const { return map_size ? map_size : image_size; }
};

inline std::string synth_node_name(std::size_t tier, std::size_t index) {
  return "t" + std::to_string(tier) + "_" + std::to_string(index);
}

/// Root "root"; node j of tier t+1 hangs under node floor(j * w_t / w_{t+1})
/// of tier t.
inline LabelHierarchy synth_hierarchy(const SynthConfig& cfg) {
  std::vector<Edge> edges;
  for (std::size_t j = 0; j < cfg.tier_widths[0]; ++j) edges.push_back({"root", synth_node_name(1, j)});
  for (std::size_t t = 1; t < cfg.tier_widths.size(); ++t) {
    const std::size_t up = cfg.tier_widths[t - 1], down = cfg.tier_widths[t];
    for (std::size_t j = 0; j < down; ++j)
      edges.push_back({synth_node_name(t, j * up / down), synth_node_name(t + 1, j)});
  }
  return build_hierarchy(edges);
}

struct SynthImage {
  SampleRecord record;
  ScoreMap map;
};

/// Everything about one image derives from SplitMix64::keyed(seed, image_id).
inline SynthImage synth_image(const SynthConfig& cfg, const std::string& image_id,
                              const std::string& label) {
  auto rng = SplitMix64::keyed(cfg.seed, image_id);
  const auto size = static_cast<double>(cfg.image_size);
  const double bw = std::max(1.0, std::round(rng.uniform(cfg.box_min_fraction, cfg.box_max_fraction) * size));
  const double bh = std::max(1.0, std::round(rng.uniform(cfg.box_min_fraction, cfg.box_max_fraction) * size));
  // keep the whole blob inside the frame when the box leaves room for it
  const double grow = std::max(0.0, std::sqrt(cfg.area_scale * (1.0 + cfg.size_jitter)) - 1.0) / 2.0 +
                      cfg.center_jitter;
  auto place = [&](double side) {
    double margin = std::ceil(grow * side);
    if (side + 2.0 * margin > size) margin = 0.0;
    return margin + std::floor(rng.uniform01() * (size - side - 2.0 * margin + 1.0));
  };
  const double x0 = place(bw);
  const double y0 = place(bh);

  SynthImage img;
  auto& r = img.record;
  r.image_id = image_id;
  r.observation_id = image_id;
  r.label = label;
  r.split = cfg.split;
  r.image_width = r.image_height = static_cast<int>(cfg.image_size);
  r.boxes = {FloatBox{x0, y0, x0 + bw, y0 + bh}};
  r.scoremap_path = "maps/" + image_id + ".smf";

  const double cx = x0 + bw / 2.0 + rng.uniform(-cfg.center_jitter, cfg.center_jitter) * bw;
  const double cy = y0 + bh / 2.0 + rng.uniform(-cfg.center_jitter, cfg.center_jitter) * bh;
  const double scale = cfg.area_scale * rng.uniform(1.0 - cfg.size_jitter, 1.0 + cfg.size_jitter);
  const double blob_w = bw * std::sqrt(scale), blob_h = bh * std::sqrt(scale);

  const std::size_t ms = cfg.effective_map_size();
  const double step = size / static_cast<double>(ms);
  std::vector<float> values(ms * ms);
  for (std::size_t y = 0; y < ms; ++y) {
    const double py = (static_cast<double>(y) + 0.5) * step;
    for (std::size_t x = 0; x < ms; ++x) {
      const double px = (static_cast<double>(x) + 0.5) * step;
      double v;
      if (cfg.blob == BlobShape::Box) {
        const bool in_x = px >= cx - blob_w / 2.0 && px < cx + blob_w / 2.0;
        const bool in_y = py >= cy - blob_h / 2.0 && py < cy + blob_h / 2.0;
        v = in_x && in_y ? 1.0 : 0.0;
      } else {
        const double sx = blob_w / 4.0, sy = blob_h / 4.0;
        const double dx = (px - cx) / sx, dy = (py - cy) / sy;
        v = std::exp(-0.5 * (dx * dx + dy * dy));
      }
      if (cfg.noise_amplitude > 0.0) v += cfg.noise_amplitude * rng.uniform01();
      values[y * ms + x] = static_cast<float>(v);
    }
  }
  img.map = ScoreMap(ms, ms, std::move(values));
  return img;
}

struct SynthDataset {
  LabelHierarchy hierarchy;
  Manifest manifest;
};

inline std::string synth_image_id(std::size_t index) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "img%07zu", index);
  return buf;
}

/// Hierarchy and manifest only; maps come from synth_image / synth_source.
inline SynthDataset synth_dataset(const SynthConfig& cfg) {
  cfg.validate();
  SynthDataset ds{synth_hierarchy(cfg), {}};
  std::size_t index = 0;
  for (NodeId leaf : ds.hierarchy.leaves())
    for (std::size_t k = 0; k < cfg.images_per_category; ++k)
      ds.manifest.records.push_back(
          synth_image(cfg, synth_image_id(index++), ds.hierarchy.name(leaf)).record);
  return ds;
}

/// Regenerates maps on demand instead of reading files.
inline ScoreMapSource synth_source(const SynthConfig& cfg) {
  return [cfg](const SampleRecord& r) { return synth_image(cfg, r.image_id, r.label).map; };
}

/// Writes hierarchy.csv, manifest.jsonl and maps/<image_id>.smf to `out_dir`.
inline SynthDataset generate_synthetic(const SynthConfig& cfg, const std::filesystem::path& out_dir,
                                       std::size_t threads = 1) {
  SynthDataset ds = synth_dataset(cfg);
  std::filesystem::create_directories(out_dir / "maps");
  parallel_for(ds.manifest.size(), threads, [&](std::size_t i, std::size_t) {
    const auto& r = ds.manifest.records[i];
    write_smf(synth_image(cfg, r.image_id, r.label).map, out_dir / *r.scoremap_path);
  });
  save_hierarchy(ds.hierarchy, out_dir / "hierarchy.csv");
  save_manifest(ds.manifest, out_dir / "manifest.jsonl");
  return ds;
}

}  // namespace granloc
