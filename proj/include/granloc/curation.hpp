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

// Dataset curation: box-size filtering and observation-grouped splits.

#include <cmath>
#include <cstdint>
#include <map>
#include <numeric>
#include <ostream>
#include <span>
#include <string>
#include <unordered_map>
#include <vector>

#include "granloc/csv.hpp"
#include "granloc/manifest.hpp"
#include "granloc/rng.hpp"

namespace granloc {

struct FilterConfig {
  double min_box_size = 32.0;     ///< pixels, either dimension
  double max_box_extent = 0.96;   ///< fraction of the image width / height
};

struct Rejection {
  std::string image_id;
  std::string reason;
};

struct FilterResult {
  Manifest kept;
  std::vector<Rejection> rejected;
};

/// Drops records with any box narrower or shorter than min_box_size, or
/// wider (taller) than max_box_extent of the image width (height). Records
/// without boxes pass through.
inline FilterResult filter_boxes(const Manifest& m, const FilterConfig& cfg = {}) {
  FilterResult out;
  for (const auto& r : m.records) {
    std::string reason;
    for (const auto& b : r.boxes) {
      if (!r.has_dimensions()) throw Error(Errc::MissingDimensions, r.image_id);
      if (b.width() < cfg.min_box_size || b.height() < cfg.min_box_size) {
        reason = "min_size";
      } else if (b.width() > cfg.max_box_extent * *r.image_width) {
        reason = "max_width";
      } else if (b.height() > cfg.max_box_extent * *r.image_height) {
        reason = "max_height";
      }
      if (!reason.empty()) break;
    }
    if (reason.empty())
      out.kept.records.push_back(r);
    else
      out.rejected.push_back({r.image_id, reason});
  }
  return out;
}

inline void write_rejections_csv(std::ostream& out, std::span<const Rejection> rejected) {
  out << "image_id,reason\n";
  for (const auto& r : rejected) csv::write_row(out, {r.image_id, r.reason});
}

/// Assigns whole observation groups to splits. Groups (records sharing an
/// observation_id; records without one stand alone) are shuffled by a
/// Fisher-Yates pass driven by SplitMix64(seed), then laid end to end; a group
/// goes to the split whose cumulative quota contains the midpoint of its
/// record range. Split sizes therefore track the fractions to within one
/// group. Each output keeps input record order.
inline std::vector<Manifest> split_by_observation(const Manifest& m, std::span<const double> fractions,
                                                  std::uint64_t seed) {
  if (fractions.empty()) throw Error(Errc::InvalidArgument, "fractions", "empty");
  double total = 0.0;
  for (double f : fractions) {
    if (!(f > 0.0)) throw Error(Errc::InvalidArgument, "fractions", "must be positive");
    total += f;
  }
  if (std::abs(total - 1.0) > 1e-9) throw Error(Errc::InvalidArgument, "fractions", "must sum to 1");

  std::vector<std::vector<std::size_t>> groups;
  std::unordered_map<std::string, std::size_t> group_of;
  for (std::size_t i = 0; i < m.size(); ++i) {
    const auto& obs = m.records[i].observation_id;
    if (obs) {
      auto [it, inserted] = group_of.try_emplace(*obs, groups.size());
      if (inserted) groups.emplace_back();
      groups[it->second].push_back(i);
    } else {
      groups.push_back({i});
    }
  }
  std::vector<std::size_t> order(groups.size());
  std::iota(order.begin(), order.end(), 0);
  SplitMix64 rng(seed);
  for (std::size_t i = order.size(); i > 1; --i)
    std::swap(order[i - 1], order[static_cast<std::size_t>(rng.below(i))]);

  std::vector<double> bounds;
  double acc = 0.0;
  for (double f : fractions) bounds.push_back((acc += f) * static_cast<double>(m.size()));

  std::vector<std::size_t> assignment(m.size(), 0);
  std::size_t placed = 0;
  for (std::size_t g : order) {
    const double mid = static_cast<double>(placed) + static_cast<double>(groups[g].size()) / 2.0;
    std::size_t k = 0;
    while (k + 1 < bounds.size() && mid >= bounds[k]) ++k;
    for (std::size_t i : groups[g]) assignment[i] = k;
    placed += groups[g].size();
  }
  std::vector<Manifest> out(fractions.size());
  for (std::size_t i = 0; i < m.size(); ++i) out[assignment[i]].records.push_back(m.records[i]);
  return out;
}

}  // namespace granloc
