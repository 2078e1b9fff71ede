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

// BoxAcc over a (threshold, IoU) grid and MaxBoxAccV2.
//
// For one image, the best IoU reachable at every grid threshold is computed in
// a single descending sweep: pixels are bucketed by the highest grid index
// whose threshold they pass, buckets are activated from the top down, and an
// 8-connected union-find keeps each component's bounding box. A max-heap of
// component scores with lazy invalidation yields the best component after each
// bucket. Hits are then exact integer counts, so reductions are
// order-independent.

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <cstdint>
#include <filesystem>
#include <functional>
#include <ostream>
#include <queue>
#include <span>
#include <string>
#include <vector>

#include <json.hpp>

#include "granloc/manifest.hpp"
#include "granloc/parallel.hpp"
#include "granloc/scoremap.hpp"
#include "granloc/smf.hpp"

namespace granloc {

struct EvalConfig {
  std::vector<double> iou_thresholds{0.30, 0.50, 0.70};
  std::size_t n_thresholds = 1000;

  /// tau_i = i / (n - 1), both ends included.
  double tau(std::size_t i) const {
    return static_cast<double>(i) / static_cast<double>(n_thresholds - 1);
  }

  void validate() const {
    if (n_thresholds < 2) throw Error(Errc::InvalidArgument, "n_thresholds", "must be >= 2");
    if (iou_thresholds.empty()) throw Error(Errc::InvalidArgument, "iou_thresholds", "empty");
    for (std::size_t i = 0; i < iou_thresholds.size(); ++i) {
      const double d = iou_thresholds[i];
      if (!(d > 0.0 && d <= 1.0))
        throw Error(Errc::InvalidArgument, "iou_thresholds", std::to_string(d) + " outside (0,1]");
      if (i > 0 && !(d > iou_thresholds[i - 1]))
        throw Error(Errc::InvalidArgument, "iou_thresholds", "must be strictly increasing");
    }
  }
};

/// One image ready for scoring: a normalized map in the annotation frame.
struct EvalSample {
  std::string id;
  ScoreMap map;
  std::vector<BBox> gt_boxes;
  std::size_t frame_width = 0;  ///< annotation frame; 0 means "same as map"
  std::size_t frame_height = 0;
};

/// Best IoU at each grid threshold, max over component boxes x GT boxes.
struct PerImageCurve {
  std::vector<double> best_iou;
};

namespace detail {

inline void check_sample(const EvalSample& s) {
  if (!s.map.normalized()) throw Error(Errc::NotNormalized, s.id);
  const std::size_t fw = s.frame_width ? s.frame_width : s.map.width();
  const std::size_t fh = s.frame_height ? s.frame_height : s.map.height();
  if (fw != s.map.width() || fh != s.map.height())
    throw Error(Errc::DimensionMismatch, s.id,
                "map " + std::to_string(s.map.width()) + "x" + std::to_string(s.map.height()) +
                    " vs frame " + std::to_string(fw) + "x" + std::to_string(fh));
  if (s.gt_boxes.empty()) throw Error(Errc::InvalidBox, s.id, "no ground-truth boxes");
  for (const auto& b : s.gt_boxes)
    if (!b.within(s.map.width(), s.map.height()))
      throw Error(Errc::DimensionMismatch, s.id, "ground-truth box outside the map");
}

inline double best_iou_against(const BBox& box, std::span<const BBox> gts) {
  double best = 0.0;
  for (const auto& g : gts) best = std::max(best, iou(box, g));
  return best;
}

/// Largest grid index i with tau_i <= v.
inline std::size_t grid_level(double v, const EvalConfig& cfg) {
  const std::size_t last = cfg.n_thresholds - 1;
  if (v >= 1.0) return last;
  auto i = static_cast<std::size_t>(std::max(0.0, std::floor(v * static_cast<double>(last))));
  i = std::min(i, last);
  while (i < last && cfg.tau(i + 1) <= v) ++i;
  while (i > 0 && cfg.tau(i) > v) --i;
  return i;
}

}  // namespace detail

inline PerImageCurve per_image_curve(const EvalSample& s, const EvalConfig& cfg) {
  detail::check_sample(s);
  const std::size_t n_levels = cfg.n_thresholds;
  const std::size_t w = s.map.width(), h = s.map.height(), n_pix = w * h;
  const auto values = s.map.values();

  // bucket pixels by grid level (counting sort)
  std::vector<std::uint32_t> level(n_pix);
  std::vector<std::uint32_t> start(n_levels + 1, 0);
  for (std::size_t p = 0; p < n_pix; ++p) {
    level[p] = static_cast<std::uint32_t>(detail::grid_level(values[p], cfg));
    ++start[level[p] + 1];
  }
  for (std::size_t i = 0; i < n_levels; ++i) start[i + 1] += start[i];
  std::vector<std::uint32_t> order(n_pix);
  {
    std::vector<std::uint32_t> fill(start.begin(), start.end() - 1);
    for (std::size_t p = 0; p < n_pix; ++p) order[fill[level[p]]++] = static_cast<std::uint32_t>(p);
  }

  constexpr std::uint32_t kInactive = 0xFFFFFFFFu;
  std::vector<std::uint32_t> parent(n_pix, kInactive);
  std::vector<std::uint32_t> comp_size(n_pix, 0);
  std::vector<BBox> box(n_pix);
  std::vector<std::uint32_t> version(n_pix, 0);
  std::vector<std::uint32_t> scored_at(n_pix, kInactive);

  auto find = [&](std::uint32_t x) {
    while (parent[x] != x) {
      parent[x] = parent[parent[x]];
      x = parent[x];
    }
    return x;
  };
  auto unite = [&](std::uint32_t a, std::uint32_t b) {
    a = find(a);
    b = find(b);
    if (a == b) return a;
    if (comp_size[a] < comp_size[b]) std::swap(a, b);
    parent[b] = a;
    comp_size[a] += comp_size[b];
    box[a] = {std::min(box[a].x0, box[b].x0), std::min(box[a].y0, box[b].y0),
              std::max(box[a].x1, box[b].x1), std::max(box[a].y1, box[b].y1)};
    return a;
  };

  struct Entry {
    double score;
    std::uint32_t root;
    std::uint32_t version;
    bool operator<(const Entry& o) const { return score < o.score; }
  };
  std::priority_queue<Entry> heap;
  std::vector<std::uint32_t> dirty;

  PerImageCurve curve;
  curve.best_iou.assign(n_levels, 0.0);
  const auto iw = static_cast<std::int64_t>(w), ih = static_cast<std::int64_t>(h);
  for (std::size_t lv = n_levels; lv-- > 0;) {
    for (std::uint32_t k = start[lv]; k < start[lv + 1]; ++k) {
      const std::uint32_t p = order[k];
      const auto x = static_cast<int>(p % w), y = static_cast<int>(p / w);
      parent[p] = p;
      comp_size[p] = 1;
      box[p] = {x, y, x + 1, y + 1};
      std::uint32_t root = p;
      for (int dy = -1; dy <= 1; ++dy) {
        const std::int64_t ny = y + dy;
        if (ny < 0 || ny >= ih) continue;
        for (int dx = -1; dx <= 1; ++dx) {
          const std::int64_t nx = x + dx;
          if ((dx == 0 && dy == 0) || nx < 0 || nx >= iw) continue;
          const auto q = static_cast<std::uint32_t>(ny * iw + nx);
          if (parent[q] != kInactive) root = unite(root, q);
        }
      }
      dirty.push_back(root);
    }
    for (std::uint32_t d : dirty) {
      const std::uint32_t r = find(d);
      if (scored_at[r] == lv) continue;
      scored_at[r] = static_cast<std::uint32_t>(lv);
      ++version[r];
      heap.push({detail::best_iou_against(box[r], s.gt_boxes), r, version[r]});
    }
    dirty.clear();
    while (!heap.empty()) {
      const Entry& top = heap.top();
      if (parent[top.root] == top.root && version[top.root] == top.version) break;
      heap.pop();
    }
    curve.best_iou[lv] = heap.empty() ? 0.0 : heap.top().score;
  }
  return curve;
}

/// Best IoU at a single threshold, by direct labeling of the binarized map.
inline double best_iou_at(const EvalSample& s, double tau) {
  detail::check_sample(s);
  double best = 0.0;
  for (const auto& b : boxes_from_mask(threshold(s.map, tau)))
    best = std::max(best, detail::best_iou_against(b, s.gt_boxes));
  return best;
}

/// Fraction of samples whose best IoU at `tau` reaches `delta`.
inline double box_acc(std::span<const EvalSample> samples, double tau, double delta) {
  if (samples.empty()) throw Error(Errc::EmptySampleSet, "box_acc");
  std::size_t hits = 0;
  for (const auto& s : samples)
    if (best_iou_at(s, tau) >= delta) ++hits;
  return static_cast<double>(hits) / static_cast<double>(samples.size());
}

struct IouSummary {
  double delta = 0;
  std::size_t best_tau_index = 0;
  double best_tau = 0;
  double best_box_acc = 0;  ///< fraction in [0, 1]
  friend bool operator==(const IouSummary&, const IouSummary&) = default;
};

struct EvalReport {
  std::size_t n_samples = 0;
  std::vector<double> iou_thresholds;
  std::size_t n_grid = 0;
  std::vector<std::uint64_t> hit_counts;  ///< [n_grid x n_iou], row-major
  std::vector<IouSummary> per_iou;
  double max_box_acc_v2 = 0;  ///< percent

  std::uint64_t hits(std::size_t tau_index, std::size_t iou_index) const {
    return hit_counts[tau_index * iou_thresholds.size() + iou_index];
  }
  double box_acc(std::size_t tau_index, std::size_t iou_index) const {
    return static_cast<double>(hits(tau_index, iou_index)) / static_cast<double>(n_samples);
  }
  friend bool operator==(const EvalReport&, const EvalReport&) = default;
};

/// Accumulates hit counts; merging accumulators is integer addition.
class HitAccumulator {
 public:
  explicit HitAccumulator(const EvalConfig& cfg)
      : cfg_(&cfg), hits_(cfg.n_thresholds * cfg.iou_thresholds.size(), 0) {}

  void add(const PerImageCurve& curve) {
    const std::size_t n_iou = cfg_->iou_thresholds.size();
    for (std::size_t i = 0; i < cfg_->n_thresholds; ++i)
      for (std::size_t d = 0; d < n_iou; ++d)
        if (curve.best_iou[i] >= cfg_->iou_thresholds[d]) ++hits_[i * n_iou + d];
    ++n_samples_;
  }

  void merge(const HitAccumulator& other) {
    for (std::size_t i = 0; i < hits_.size(); ++i) hits_[i] += other.hits_[i];
    n_samples_ += other.n_samples_;
  }

  std::size_t n_samples() const { return n_samples_; }
  const std::vector<std::uint64_t>& hits() const { return hits_; }

 private:
  const EvalConfig* cfg_;
  std::vector<std::uint64_t> hits_;
  std::size_t n_samples_ = 0;
};

/// Per IoU threshold independently: the best BoxAcc over the grid, at the
/// smallest threshold attaining it. MaxBoxAccV2 is 100 x their mean.
inline EvalReport make_report(const HitAccumulator& acc, const EvalConfig& cfg) {
  if (acc.n_samples() == 0) throw Error(Errc::EmptySampleSet, "report");
  EvalReport r;
  r.n_samples = acc.n_samples();
  r.iou_thresholds = cfg.iou_thresholds;
  r.n_grid = cfg.n_thresholds;
  r.hit_counts = acc.hits();
  const std::size_t n_iou = cfg.iou_thresholds.size();
  double sum = 0.0;
  for (std::size_t d = 0; d < n_iou; ++d) {
    std::size_t best_i = 0;
    for (std::size_t i = 1; i < cfg.n_thresholds; ++i)
      if (r.hits(i, d) > r.hits(best_i, d)) best_i = i;
    IouSummary s{cfg.iou_thresholds[d], best_i, cfg.tau(best_i), r.box_acc(best_i, d)};
    sum += s.best_box_acc;
    r.per_iou.push_back(s);
  }
  r.max_box_acc_v2 = 100.0 * sum / static_cast<double>(n_iou);
  return r;
}

inline EvalReport max_box_acc_v2(std::span<const EvalSample> samples, const EvalConfig& cfg,
                                 std::size_t threads = 1) {
  cfg.validate();
  if (samples.empty()) throw Error(Errc::EmptySampleSet, "max_box_acc_v2");
  const std::size_t workers = std::min(resolve_threads(threads), samples.size());
  std::vector<HitAccumulator> partial(workers, HitAccumulator(cfg));
  parallel_for(samples.size(), workers, [&](std::size_t i, std::size_t worker) {
    partial[worker].add(per_image_curve(samples[i], cfg));
  });
  HitAccumulator total(cfg);
  for (const auto& p : partial) total.merge(p);
  return make_report(total, cfg);
}

struct ThresholdChoice {
  double tau = 0;
  std::size_t tau_index = 0;
  double box_acc = 0;
};

/// Smallest grid threshold maximizing BoxAcc at `delta`. `delta` need not be
/// one of cfg.iou_thresholds.
inline ThresholdChoice optimal_threshold(std::span<const EvalSample> samples, double delta,
                                         const EvalConfig& cfg, std::size_t threads = 1) {
  EvalConfig single = cfg;
  single.iou_thresholds = {delta};
  single.validate();
  const auto report = max_box_acc_v2(samples, single, threads);
  const auto& s = report.per_iou.front();
  return {s.best_tau, s.best_tau_index, s.best_box_acc};
}

// ---------------------------------------------------------------------------
// Running over a manifest

/// Resolves the raw score map for a record.
using ScoreMapSource = std::function<ScoreMap(const SampleRecord&)>;

/// Reads `scoremap_path` relative to `root`.
inline ScoreMapSource file_scoremap_source(std::filesystem::path root) {
  return [root = std::move(root)](const SampleRecord& r) -> ScoreMap {
    if (!r.scoremap_path) throw Error(Errc::MissingScoreMap, r.image_id, "no scoremap_path");
    const auto path = root / *r.scoremap_path;
    try {
      return read_scoremap(path);
    } catch (const Error& e) {
      if (e.code() == Errc::MissingScoreMap)
        throw Error(Errc::MissingScoreMap, r.image_id, path.string());
      throw;
    }
  };
}

/// Rounds float manifest boxes half-up to integer half-open boxes, clipped
/// to the image frame.
inline BBox to_pixel_box(const FloatBox& b, int width, int height) {
  auto clampx = [](long v, int hi) { return static_cast<int>(std::clamp<long>(v, 0, hi)); };
  return {clampx(round_half_up(b.x0), width), clampx(round_half_up(b.y0), height),
          clampx(round_half_up(b.x1), width), clampx(round_half_up(b.y1), height)};
}

inline std::vector<BBox> pixel_boxes(const SampleRecord& r) {
  if (!r.has_dimensions()) throw Error(Errc::MissingDimensions, r.image_id);
  std::vector<BBox> out;
  for (const auto& fb : r.boxes) {
    BBox b = to_pixel_box(fb, *r.image_width, *r.image_height);
    if (!b.valid()) throw Error(Errc::InvalidBox, r.image_id, "box collapses after rounding");
    out.push_back(b);
  }
  return out;
}

/// Normalizes `raw` and resizes it to the record's annotation frame.
inline EvalSample make_eval_sample(const SampleRecord& r, const ScoreMap& raw) {
  if (!r.has_dimensions()) throw Error(Errc::MissingDimensions, r.image_id);
  if (r.boxes.empty()) throw Error(Errc::InvalidBox, r.image_id, "record has no boxes");
  EvalSample s;
  s.id = r.image_id;
  s.frame_width = static_cast<std::size_t>(*r.image_width);
  s.frame_height = static_cast<std::size_t>(*r.image_height);
  s.map = resize_bilinear(minmax_normalize(raw), s.frame_width, s.frame_height);
  s.gt_boxes = pixel_boxes(r);
  return s;
}

inline EvalReport evaluate_run(const Manifest& split, const ScoreMapSource& source,
                               const EvalConfig& cfg, std::size_t threads = 1) {
  cfg.validate();
  if (split.empty()) throw Error(Errc::EmptySampleSet, "evaluate_run");
  const std::size_t workers = std::min(resolve_threads(threads), split.size());
  std::vector<HitAccumulator> partial(workers, HitAccumulator(cfg));
  parallel_for(split.size(), workers, [&](std::size_t i, std::size_t worker) {
    const auto& rec = split.records[i];
    partial[worker].add(per_image_curve(make_eval_sample(rec, source(rec)), cfg));
  });
  HitAccumulator total(cfg);
  for (const auto& p : partial) total.merge(p);
  return make_report(total, cfg);
}

// ---------------------------------------------------------------------------
// Serialization

inline nlohmann::ordered_json report_json(const EvalReport& r) {
  nlohmann::ordered_json j;
  j["n_samples"] = r.n_samples;
  j["iou_thresholds"] = r.iou_thresholds;
  j["n_grid"] = r.n_grid;
  auto per = nlohmann::ordered_json::array();
  for (const auto& s : r.per_iou) {
    nlohmann::ordered_json e;
    e["delta"] = s.delta;
    e["best_tau"] = s.best_tau;
    e["best_box_acc"] = s.best_box_acc;
    per.push_back(std::move(e));
  }
  j["per_iou"] = std::move(per);
  j["max_box_acc_v2"] = r.max_box_acc_v2;
  return j;
}

/// `tau,delta,box_acc` rows over the whole grid.
inline void write_surface_csv(std::ostream& out, const EvalReport& r, const EvalConfig& cfg) {
  out << "tau,delta,box_acc\n";
  char buf[96];
  for (std::size_t i = 0; i < r.n_grid; ++i)
    for (std::size_t d = 0; d < r.iou_thresholds.size(); ++d) {
      std::snprintf(buf, sizeof buf, "%.9g,%.9g,%.9g\n", cfg.tau(i), r.iou_thresholds[d],
                    r.box_acc(i, d));
      out << buf;
    }
}

}  // namespace granloc
