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

#include <gtest/gtest.h>

#include <filesystem>
#include <sstream>

#include "granloc/evaluation.hpp"
#include "granloc/synth.hpp"
#include "support/oracle.hpp"

using namespace granloc;
namespace fs = std::filesystem;

namespace {

// Normalized map with `value` inside `box` and zero elsewhere.
ScoreMap indicator(std::size_t w, std::size_t h, const BBox& box, float value = 1.0f) {
  std::vector<float> v(w * h, 0.0f);
  for (int y = box.y0; y < box.y1; ++y)
    for (int x = box.x0; x < box.x1; ++x) v[y * w + x] = value;
  return ScoreMap(w, h, std::move(v), true);
}

EvalSample sample(std::string id, ScoreMap m, std::vector<BBox> gt) {
  EvalSample s;
  s.id = std::move(id);
  s.map = std::move(m);
  s.gt_boxes = std::move(gt);
  return s;
}

// One perfect sample and one whose best IoU is 0.6 at every threshold: a
// corner-to-corner diagonal always boxes the full frame.
std::vector<EvalSample> two_sample_set() {
  std::vector<float> diag(100, 0.0f);
  for (int i = 0; i < 10; ++i) diag[i * 10 + i] = 1.0f;
  return {sample("perfect", indicator(10, 10, {0, 0, 10, 10}), {{0, 0, 10, 10}}),
          sample("sixty", ScoreMap(10, 10, diag, true), {{0, 0, 6, 10}})};
}

std::vector<EvalSample> random_set(std::uint64_t seed, std::size_t n, std::size_t side) {
  SplitMix64 rng(seed);
  std::vector<EvalSample> out;
  for (std::size_t i = 0; i < n; ++i) out.push_back(oracle::random_sample(rng, side, "s" + std::to_string(i)));
  return out;
}

struct TempDir {
  fs::path path;
  TempDir() {
    path = fs::temp_directory_path() / ("granloc_eval_" + std::to_string(::testing::UnitTest::GetInstance()->random_seed()) +
                                        "_" + ::testing::UnitTest::GetInstance()->current_test_info()->name());
    fs::remove_all(path);
    fs::create_directories(path);
  }
  ~TempDir() { fs::remove_all(path); }
};

}  // namespace

TEST(EvalConfig, GridAndValidation) {
  EvalConfig cfg;
  EXPECT_EQ(cfg.tau(0), 0.0);
  EXPECT_EQ(cfg.tau(999), 1.0);
  EXPECT_DOUBLE_EQ(cfg.tau(333), 333.0 / 999.0);
  EXPECT_NO_THROW(cfg.validate());
  EXPECT_THROW((EvalConfig{{0.5, 0.3}, 1000}.validate()), Error);
  EXPECT_THROW((EvalConfig{{0.0}, 1000}.validate()), Error);
  EXPECT_THROW((EvalConfig{{0.5}, 1}.validate()), Error);
}

TEST(GridLevel, BracketsValue) {
  EvalConfig cfg;
  SplitMix64 rng(1);
  for (int t = 0; t < 20000; ++t) {
    double v = t % 2 ? rng.uniform01() : static_cast<float>(static_cast<double>(rng.below(1000)) / 999.0);
    auto i = detail::grid_level(v, cfg);
    EXPECT_LE(cfg.tau(i), v);
    if (i + 1 < cfg.n_thresholds) {
      EXPECT_GT(cfg.tau(i + 1), v);
    }
  }
  EXPECT_EQ(detail::grid_level(0.0, cfg), 0u);
  EXPECT_EQ(detail::grid_level(1.0, cfg), 999u);
}

TEST(PerImageCurve, IndicatorInsideGt) {
  EvalConfig cfg;
  auto s = sample("a", indicator(20, 20, {4, 5, 12, 15}), {{4, 5, 12, 15}});
  auto c = per_image_curve(s, cfg);
  ASSERT_EQ(c.best_iou.size(), 1000u);
  EXPECT_DOUBLE_EQ(c.best_iou[0], iou({0, 0, 20, 20}, {4, 5, 12, 15}));
  for (std::size_t i = 1; i < 1000; ++i) EXPECT_EQ(c.best_iou[i], 1.0);
}

TEST(PerImageCurve, AllZeroMap) {
  EvalConfig cfg;
  auto s = sample("z", ScoreMap(10, 10, std::vector<float>(100, 0.0f), true), {{0, 0, 5, 5}});
  auto c = per_image_curve(s, cfg);
  EXPECT_DOUBLE_EQ(c.best_iou[0], 0.25);
  for (std::size_t i = 1; i < 1000; ++i) EXPECT_EQ(c.best_iou[i], 0.0);
}

TEST(PerImageCurve, PartialBlobSixty) {
  EvalConfig cfg;
  auto c = per_image_curve(sample("b", indicator(10, 10, {0, 0, 6, 10}), {{0, 0, 10, 10}}), cfg);
  for (std::size_t i = 1; i < 1000; ++i) EXPECT_DOUBLE_EQ(c.best_iou[i], 0.6);
  auto d = per_image_curve(two_sample_set()[1], cfg);
  for (double v : d.best_iou) EXPECT_DOUBLE_EQ(v, 0.6);
}

TEST(PerImageCurve, Errors) {
  EvalConfig cfg;
  auto s = sample("d", indicator(10, 10, {0, 0, 4, 4}), {{0, 0, 4, 4}});
  s.frame_width = 20;
  s.frame_height = 10;
  try {
    per_image_curve(s, cfg);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), Errc::DimensionMismatch);
    EXPECT_EQ(e.subject(), "d");
  }
  auto unnorm = sample("u", ScoreMap(2, 2, {0, 1, 2, 3}), {{0, 0, 1, 1}});
  EXPECT_THROW(per_image_curve(unnorm, cfg), Error);
}

TEST(PerImageCurve, MatchesDirectLabelingOnRandomMaps) {
  EvalConfig cfg{{0.3, 0.5, 0.7}, 57};
  for (const auto& s : random_set(4, 40, 24)) {
    auto c = per_image_curve(s, cfg);
    for (std::size_t i = 0; i < cfg.n_thresholds; ++i) {
      EXPECT_EQ(c.best_iou[i], oracle::best_iou(s, cfg.tau(i))) << s.id << " level " << i;
      EXPECT_EQ(c.best_iou[i], best_iou_at(s, cfg.tau(i)));
    }
  }
}

TEST(BoxAcc, TwoSampleHandCount) {
  auto set = two_sample_set();
  EXPECT_DOUBLE_EQ(box_acc(set, 0.5, 0.7), 0.5);
  EXPECT_DOUBLE_EQ(box_acc(set, 0.5, 0.5), 1.0);
  EXPECT_DOUBLE_EQ(box_acc(set, 0.5, 1.0), 0.5);
  std::vector<EvalSample> none{sample("n", indicator(10, 10, {0, 0, 1, 1}), {{5, 5, 10, 10}})};
  EXPECT_DOUBLE_EQ(box_acc(none, 0.5, 0.3), 0.0);
  EXPECT_THROW(box_acc(std::vector<EvalSample>{}, 0.5, 0.5), Error);
}

TEST(MaxBoxAccV2, PerfectSetIsHundred) {
  std::vector<EvalSample> set;
  for (int i = 0; i < 10; ++i) {
    BBox b{i, i, i + 5, i + 7};
    set.push_back(sample("p" + std::to_string(i), indicator(20, 20, b), {b}));
  }
  EXPECT_EQ(max_box_acc_v2(set, EvalConfig{}).max_box_acc_v2, 100.0);
}

TEST(MaxBoxAccV2, TwoSampleSet) {
  auto r = max_box_acc_v2(two_sample_set(), EvalConfig{});
  EXPECT_NEAR(r.max_box_acc_v2, 100.0 * (1.0 + 1.0 + 0.5) / 3.0, 1e-9);
  ASSERT_EQ(r.per_iou.size(), 3u);
  EXPECT_EQ(r.per_iou[2].best_box_acc, 0.5);
  EXPECT_EQ(r.per_iou[0].best_tau_index, 0u);
  EXPECT_THROW(max_box_acc_v2(std::vector<EvalSample>{}, EvalConfig{}), Error);
}

TEST(MaxBoxAccV2, PerDeltaMaximization) {
  // a: tight at low tau, a single pixel above 0.3
  // b, c: 8 wide at low tau (IoU 0.625), tight above 0.3
  std::vector<float> va(100, 0.0f), vb(100, 0.0f);
  for (int y = 0; y < 10; ++y)
    for (int x = 0; x < 8; ++x) va[y * 10 + x] = vb[y * 10 + x] = 0.3f;
  va[0] = 1.0f;
  for (int y = 0; y < 10; ++y)
    for (int x = 0; x < 5; ++x) vb[y * 10 + x] = 1.0f;
  std::vector<EvalSample> set{sample("a", ScoreMap(10, 10, va, true), {{0, 0, 8, 10}}),
                              sample("b", ScoreMap(10, 10, vb, true), {{0, 0, 5, 10}}),
                              sample("c", ScoreMap(10, 10, vb, true), {{0, 0, 5, 10}})};
  auto r = max_box_acc_v2(set, EvalConfig{{0.6, 0.9}, 1000});
  EXPECT_EQ(r.per_iou[0].best_box_acc, 1.0);
  EXPECT_EQ(r.per_iou[0].best_tau_index, 1u);
  EXPECT_DOUBLE_EQ(r.per_iou[1].best_box_acc, 2.0 / 3.0);
  EXPECT_EQ(r.per_iou[1].best_tau_index, 300u);
  // one tau shared by both deltas could reach only 2/3 on average
  EXPECT_NEAR(r.max_box_acc_v2, 100.0 * 5.0 / 6.0, 1e-12);
}

TEST(MaxBoxAccV2, OracleEquivalence) {
  EvalConfig cfg{{0.3, 0.5, 0.7}, 101};
  for (std::uint64_t seed = 0; seed < 4; ++seed) {
    auto set = random_set(100 + seed, 25, seed % 2 ? 32 : 16);
    auto fast = max_box_acc_v2(set, cfg);
    auto ref = oracle::max_box_acc_v2(set, cfg);
    EXPECT_EQ(fast.hit_counts, ref.hits);
    EXPECT_NEAR(fast.max_box_acc_v2, ref.max_box_acc_v2, 1e-12);
  }
}

TEST(MaxBoxAccV2, MonotoneInDelta) {
  auto r = max_box_acc_v2(random_set(8, 30, 20), EvalConfig{{0.1, 0.3, 0.5, 0.7, 0.9}, 200});
  for (std::size_t i = 0; i < r.n_grid; ++i)
    for (std::size_t d = 1; d < 5; ++d) EXPECT_LE(r.hits(i, d), r.hits(i, d - 1));
  EXPECT_GE(r.max_box_acc_v2, 0.0);
  EXPECT_LE(r.max_box_acc_v2, 100.0);
}

TEST(MaxBoxAccV2, PermutationAndThreadInvariance) {
  auto set = random_set(12, 40, 20);
  EvalConfig cfg;
  auto base = max_box_acc_v2(set, cfg, 1);
  SplitMix64 rng(77);
  for (int t = 0; t < 5; ++t) {
    for (std::size_t i = set.size(); i > 1; --i) std::swap(set[i - 1], set[rng.below(i)]);
    EXPECT_EQ(max_box_acc_v2(set, cfg, 1 + t), base);
  }
  EXPECT_EQ(report_json(max_box_acc_v2(set, cfg, 4)).dump(), report_json(base).dump());
}

TEST(MaxBoxAccV2, ScaleAndShiftInvariance) {
  SplitMix64 rng(31);
  for (int t = 0; t < 20; ++t) {
    std::vector<float> v(144), w(144);
    for (std::size_t i = 0; i < v.size(); ++i) {
      v[i] = static_cast<float>(rng.below(65)) / 64.0f;
      w[i] = 4.0f * v[i] + 3.0f;
    }
    BBox gt{2, 3, 9, 11};
    EvalConfig cfg;
    auto a = per_image_curve(sample("v", minmax_normalize(ScoreMap(12, 12, v)), {gt}), cfg);
    auto b = per_image_curve(sample("w", minmax_normalize(ScoreMap(12, 12, w)), {gt}), cfg);
    EXPECT_EQ(a.best_iou, b.best_iou);
  }
}

TEST(MaxBoxAccV2, MultipleGtBoxesAnyMatch) {
  auto s = sample("m", indicator(20, 20, {12, 12, 18, 18}), {{0, 0, 5, 5}, {12, 12, 18, 18}});
  EXPECT_EQ(max_box_acc_v2(std::vector<EvalSample>{s}, EvalConfig{}).max_box_acc_v2, 100.0);
}

TEST(OptimalThreshold, ConstantCurvePicksZero) {
  // diagonal from corner to corner: the foreground box is the full frame at every tau
  std::vector<float> v(100, 0.0f);
  for (int i = 0; i < 10; ++i) v[i * 10 + i] = 1.0f;
  std::vector<EvalSample> set{sample("d", ScoreMap(10, 10, v, true), {{0, 0, 10, 10}})};
  auto c = optimal_threshold(set, 0.5, EvalConfig{});
  EXPECT_EQ(c.tau, 0.0);
  EXPECT_EQ(c.box_acc, 1.0);
}

TEST(OptimalThreshold, BlobShrinksAboveFourTenths) {
  std::vector<float> v(400, 0.0f);
  for (int y = 0; y < 10; ++y)
    for (int x = 0; x < 10; ++x) v[y * 20 + x] = 0.4f;
  for (int y = 4; y < 6; ++y)
    for (int x = 4; x < 6; ++x) v[y * 20 + x] = 1.0f;
  std::vector<EvalSample> set{sample("s", ScoreMap(20, 20, v, true), {{0, 0, 10, 10}})};
  auto c = optimal_threshold(set, 0.5, EvalConfig{});
  EXPECT_LE(c.tau, 0.4);
  EXPECT_EQ(c.box_acc, 1.0);
  auto curve = per_image_curve(set[0], EvalConfig{});
  EXPECT_EQ(curve.best_iou[399], 1.0);
  EXPECT_DOUBLE_EQ(curve.best_iou[400], 0.04);
}

TEST(OptimalThreshold, OffGridDeltaMatchesBruteForce) {
  auto set = random_set(55, 20, 16);
  EvalConfig cfg{{0.3, 0.5, 0.7}, 80};
  const double delta = 0.42;
  auto c = optimal_threshold(set, delta, cfg);
  std::size_t best = 0, best_i = 0;
  for (std::size_t i = 0; i < cfg.n_thresholds; ++i) {
    std::size_t hits = 0;
    for (const auto& s : set) hits += oracle::best_iou(s, cfg.tau(i)) >= delta;
    if (hits > best) best = hits, best_i = i;
  }
  EXPECT_EQ(c.tau_index, best_i);
  EXPECT_DOUBLE_EQ(c.box_acc, static_cast<double>(best) / 20.0);
}

TEST(EvaluateRun, SyntheticSplitEqualsPerSampleSum) {
  SynthConfig sc;
  sc.seed = 5;
  sc.tier_widths = {2, 5};
  sc.images_per_category = 20;
  sc.image_size = 64;
  sc.map_size = 16;
  sc.noise_amplitude = 0.05;
  sc.center_jitter = 0.1;
  auto ds = synth_dataset(sc);
  ASSERT_EQ(ds.manifest.size(), 100u);
  EvalConfig cfg;
  auto report = evaluate_run(ds.manifest, synth_source(sc), cfg, 3);
  HitAccumulator acc(cfg);
  for (const auto& r : ds.manifest.records)
    acc.add(per_image_curve(make_eval_sample(r, synth_image(sc, r.image_id, r.label).map), cfg));
  EXPECT_EQ(report, make_report(acc, cfg));
  EXPECT_EQ(report_json(evaluate_run(ds.manifest, synth_source(sc), cfg, 1)).dump(),
            report_json(report).dump());
}

TEST(EvaluateRun, MissingAndCorruptMaps) {
  TempDir dir;
  SynthConfig sc;
  sc.tier_widths = {2};
  sc.images_per_category = 3;
  sc.image_size = 32;
  auto ds = generate_synthetic(sc, dir.path);
  fs::remove(dir.path / *ds.manifest.records[4].scoremap_path);
  try {
    evaluate_run(ds.manifest, file_scoremap_source(dir.path), EvalConfig{}, 2);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), Errc::MissingScoreMap);
    EXPECT_EQ(e.subject(), ds.manifest.records[4].image_id);
  }
  const auto corrupt = dir.path / *ds.manifest.records[1].scoremap_path;
  {
    std::fstream f(corrupt, std::ios::in | std::ios::out | std::ios::binary);
    f.seekp(0);
    f.put('X');
  }
  try {
    evaluate_run(ds.manifest, file_scoremap_source(dir.path), EvalConfig{}, 2);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), Errc::CorruptScoreMap);
    EXPECT_NE(e.subject().find(ds.manifest.records[1].image_id), std::string::npos);
  }
}

TEST(EvaluateRun, UpsamplesMapsToFrame) {
  SampleRecord r;
  r.image_id = "up";
  r.label = "x";
  r.split = Split::Test;
  r.image_width = 40;
  r.image_height = 20;
  r.boxes = {{10.4, 5.5, 30.6, 15.2}};
  auto s = make_eval_sample(r, ScoreMap(4, 2, {0, 1, 2, 3, 4, 5, 6, 7}));
  EXPECT_EQ(s.map.width(), 40u);
  EXPECT_EQ(s.map.height(), 20u);
  EXPECT_TRUE(s.map.normalized());
  EXPECT_EQ(s.gt_boxes, (std::vector<BBox>{{10, 6, 31, 15}}));
}

TEST(Report, JsonShapeAndSurface) {
  EvalConfig cfg{{0.3, 0.5, 0.7}, 5};
  auto r = max_box_acc_v2(two_sample_set(), cfg);
  auto j = report_json(r);
  std::vector<std::string> keys;
  for (auto it = j.begin(); it != j.end(); ++it) keys.push_back(it.key());
  EXPECT_EQ(keys, (std::vector<std::string>{"n_samples", "iou_thresholds", "n_grid", "per_iou", "max_box_acc_v2"}));
  EXPECT_EQ(j["per_iou"].size(), 3u);
  EXPECT_EQ(j["per_iou"][2]["best_box_acc"], 0.5);
  EXPECT_EQ(j["per_iou"][0]["best_tau"], 0.0);
  std::ostringstream csv;
  write_surface_csv(csv, r, cfg);
  std::istringstream in(csv.str());
  std::string line;
  std::getline(in, line);
  EXPECT_EQ(line, "tau,delta,box_acc");
  std::size_t rows = 0;
  while (std::getline(in, line)) ++rows;
  EXPECT_EQ(rows, 15u);
  EXPECT_NE(csv.str().find("\n1,0.7,0.5\n"), std::string::npos);
}
