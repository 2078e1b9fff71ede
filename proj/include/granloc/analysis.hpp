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

// Per-image localization diagnostics (predicted-box area ratio, activation
// inside vs outside the ground-truth box, component counts) and box-size
// distributions.

#include <algorithm>
#include <cstdio>
#include <optional>
#include <ostream>
#include <span>
#include <string>
#include <vector>

#include <json.hpp>

#include "granloc/csv.hpp"
#include "granloc/evaluation.hpp"
#include "granloc/manifest.hpp"
#include "granloc/parallel.hpp"
#include "granloc/scoremap.hpp"

namespace granloc {

inline double area_ratio(const BBox& pred, const BBox& gt) {
  if (!pred.valid() || !gt.valid()) throw Error(Errc::InvalidBox, "area_ratio");
  return static_cast<double>(pred.area()) / static_cast<double>(gt.area());
}

/// Sum of the map inside `gt` over the sum outside; nullopt when nothing
/// lies outside.
inline std::optional<double> gt_activation_ratio(const ScoreMap& m, const BBox& gt) {
  if (!m.normalized()) throw Error(Errc::NotNormalized, "gt_activation_ratio");
  if (!gt.within(m.width(), m.height())) throw Error(Errc::BoxOutOfBounds, "gt_activation_ratio");
  double inside = 0.0, total = 0.0;
  for (std::size_t y = 0; y < m.height(); ++y)
    for (std::size_t x = 0; x < m.width(); ++x) {
      const double v = m.at(x, y);
      total += v;
      if (static_cast<int>(x) >= gt.x0 && static_cast<int>(x) < gt.x1 &&
          static_cast<int>(y) >= gt.y0 && static_cast<int>(y) < gt.y1)
        inside += v;
    }
  const double outside = total - inside;
  if (!(outside > 0.0)) return std::nullopt;
  return inside / outside;
}

inline std::size_t count_components_at(const ScoreMap& m, double tau) {
  return connected_components(threshold(m, tau)).size();
}

struct DiagnosticRecord {
  std::string sample_id;
  std::optional<double> area_ratio;           ///< undefined when the mask is empty
  std::optional<double> gt_activation_ratio;  ///< undefined when nothing lies outside the box
  std::size_t n_components = 0;
};

struct DiagnosticsSummary {
  double tau_star = 0;
  double tau_star_box_acc = 0;
  std::size_t n_samples = 0;
  std::optional<double> median_area_ratio;
  std::optional<double> median_gt_activation_ratio;
  double median_n_components = 0;
  std::size_t undefined_area_ratio = 0;
  std::size_t undefined_gt_activation_ratio = 0;
};

struct Diagnostics {
  std::vector<DiagnosticRecord> records;  ///< sorted by sample id
  DiagnosticsSummary summary;
};

/// Median; the mean of the middle pair for even counts.
inline std::optional<double> median(std::vector<double> values) {
  if (values.empty()) return std::nullopt;
  std::sort(values.begin(), values.end());
  const std::size_t n = values.size();
  if (n % 2 == 1) return values[n / 2];
  return (values[n / 2 - 1] + values[n / 2]) / 2.0;
}

/// Diagnostics for one sample at a fixed threshold. The predicted box is the
/// component box with the best IoU against any ground-truth box; ratios use
/// the ground-truth box it matched (the first box when the mask is empty).
inline DiagnosticRecord diagnose_sample(const EvalSample& s, double tau) {
  DiagnosticRecord rec;
  rec.sample_id = s.id;
  const auto comps = connected_components(threshold(s.map, tau));
  rec.n_components = comps.size();
  const BBox* gt = &s.gt_boxes.front();
  const BBox* pred = nullptr;
  double best = -1.0;
  for (const auto& c : comps)
    for (const auto& g : s.gt_boxes) {
      const double v = iou(c.box, g);
      if (v > best) {
        best = v;
        pred = &c.box;
        gt = &g;
      }
    }
  if (pred) rec.area_ratio = area_ratio(*pred, *gt);
  rec.gt_activation_ratio = gt_activation_ratio(s.map, *gt);
  return rec;
}

/// Picks the optimal threshold at IoU 0.5, then diagnoses every sample there.
inline Diagnostics diagnose_split(std::span<const EvalSample> samples, const EvalConfig& cfg,
                                  std::size_t threads = 1) {
  if (samples.empty()) throw Error(Errc::EmptySampleSet, "diagnose_split");
  const auto choice = optimal_threshold(samples, 0.5, cfg, threads);
  Diagnostics out;
  out.records.resize(samples.size());
  parallel_for(samples.size(), threads, [&](std::size_t i, std::size_t) {
    out.records[i] = diagnose_sample(samples[i], choice.tau);
  });
  std::stable_sort(out.records.begin(), out.records.end(),
                   [](const auto& a, const auto& b) { return a.sample_id < b.sample_id; });

  auto& sum = out.summary;
  sum.tau_star = choice.tau;
  sum.tau_star_box_acc = choice.box_acc;
  sum.n_samples = samples.size();
  std::vector<double> areas, activations, components;
  for (const auto& r : out.records) {
    if (r.area_ratio) areas.push_back(*r.area_ratio); else ++sum.undefined_area_ratio;
    if (r.gt_activation_ratio) activations.push_back(*r.gt_activation_ratio);
    else ++sum.undefined_gt_activation_ratio;
    components.push_back(static_cast<double>(r.n_components));
  }
  sum.median_area_ratio = median(std::move(areas));
  sum.median_gt_activation_ratio = median(std::move(activations));
  sum.median_n_components = *median(std::move(components));
  return out;
}

inline void write_diagnostics_csv(std::ostream& out, const Diagnostics& d) {
  auto num = [](const std::optional<double>& v) -> std::string {
    if (!v) return "NA";
    char buf[32];
    std::snprintf(buf, sizeof buf, "%.9g", *v);
    return buf;
  };
  out << "sample_id,area_ratio,gt_activation_ratio,n_components\n";
  for (const auto& r : d.records)
    out << csv::quote(r.sample_id) << ',' << num(r.area_ratio) << ','
        << num(r.gt_activation_ratio) << ',' << r.n_components << '\n';
}

inline nlohmann::ordered_json diagnostics_summary_json(const DiagnosticsSummary& s) {
  auto opt = [](const std::optional<double>& v) -> nlohmann::ordered_json {
    return v ? nlohmann::ordered_json(*v) : nlohmann::ordered_json(nullptr);
  };
  nlohmann::ordered_json j;
  j["n_samples"] = s.n_samples;
  j["tau_star"] = s.tau_star;
  j["tau_star_box_acc"] = s.tau_star_box_acc;
  j["median_area_ratio"] = opt(s.median_area_ratio);
  j["median_gt_activation_ratio"] = opt(s.median_gt_activation_ratio);
  j["median_n_components"] = s.median_n_components;
  j["undefined_area_ratio"] = s.undefined_area_ratio;
  j["undefined_gt_activation_ratio"] = s.undefined_gt_activation_ratio;
  return j;
}

// ---------------------------------------------------------------------------
// Box-size distribution

struct CdfCurve {
  std::vector<double> breakpoints;  ///< distinct normalized areas, ascending
  std::vector<double> fractions;    ///< fraction of boxes with area <= breakpoint
};

/// Empirical CDF of box area / image area, one point per box.
inline CdfCurve box_size_cdf(const Manifest& split) {
  std::vector<double> areas;
  for (const auto& r : split.records) {
    if (!r.has_dimensions()) throw Error(Errc::MissingDimensions, r.image_id);
    if (r.boxes.empty()) throw Error(Errc::InvalidBox, r.image_id, "record has no boxes");
    const double image_area = static_cast<double>(*r.image_width) * *r.image_height;
    for (const auto& b : r.boxes) areas.push_back(b.area() / image_area);
  }
  if (areas.empty()) throw Error(Errc::EmptySampleSet, "box_size_cdf");
  std::sort(areas.begin(), areas.end());
  CdfCurve cdf;
  const double n = static_cast<double>(areas.size());
  for (std::size_t i = 0; i < areas.size(); ++i) {
    if (i + 1 < areas.size() && areas[i + 1] == areas[i]) continue;
    cdf.breakpoints.push_back(areas[i]);
    cdf.fractions.push_back(static_cast<double>(i + 1) / n);
  }
  return cdf;
}

inline void write_cdf_csv(std::ostream& out, const CdfCurve& cdf) {
  out << "normalized_area,cumulative_fraction\n";
  char buf[64];
  for (std::size_t i = 0; i < cdf.breakpoints.size(); ++i) {
    std::snprintf(buf, sizeof buf, "%.9g,%.9g\n", cdf.breakpoints[i], cdf.fractions[i]);
    out << buf;
  }
}

}  // namespace granloc
