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
#include <set>
#include <sstream>

#include "granloc/curation.hpp"
#include "granloc/manifest_io.hpp"
#include "granloc/smf.hpp"
#include "granloc/synth.hpp"
#include "granloc/evaluation.hpp"
#include "granloc/analysis.hpp"

using namespace granloc;
namespace fs = std::filesystem;

namespace {

Errc code_of(auto&& fn) {
  try {
    fn();
  } catch (const Error& e) {
    return e.code();
  }
  ADD_FAILURE() << "no granloc::Error thrown";
  return Errc::InvalidArgument;
}

SampleRecord boxed(std::string id, double bw, double bh, int iw = 224, int ih = 224) {
  SampleRecord r;
  r.image_id = std::move(id);
  r.label = "x";
  r.split = Split::Test;
  r.image_width = iw;
  r.image_height = ih;
  r.boxes = {{10, 10, 10 + bw, 10 + bh}};
  return r;
}

std::string read_text(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  return {std::istreambuf_iterator<char>(in), {}};
}

fs::path scratch(const std::string& name) {
  auto p = fs::temp_directory_path() / ("granloc_dataio_" + name);
  fs::remove_all(p);
  fs::create_directories(p);
  return p;
}

const char* kCanonical =
    "{\"boxes\":[[12.5,3,100,90.25]],\"image_height\":120,\"image_id\":\"a1\",\"image_width\":160,"
    "\"label\":\"s1\",\"observation_id\":\"o1\",\"scoremap_path\":\"maps/a1.smf\",\"split\":\"test\"}\n"
    "{\"image_id\":\"a2\",\"label\":\"s2\",\"split\":\"train-weaksup\"}\n"
    "{\"boxes\":[[0,0,1,1],[2,2,3.33333,4]],\"image_height\":10,\"image_id\":\"a\\\"3\",\"image_width\":10,"
    "\"label\":\"s1\",\"split\":\"train-fullsup\"}\n";

}  // namespace

TEST(Manifest, CanonicalRoundTripIsByteStable) {
  std::istringstream in(kCanonical);
  auto m = read_manifest(in);
  ASSERT_EQ(m.size(), 3u);
  EXPECT_EQ(m.records[0].boxes[0].x0, 12.5);
  EXPECT_EQ(*m.records[0].observation_id, "o1");
  EXPECT_FALSE(m.records[1].image_width.has_value());
  EXPECT_EQ(m.records[2].image_id, "a\"3");
  std::ostringstream out;
  write_manifest(out, m);
  EXPECT_EQ(out.str(), kCanonical);
}

TEST(Manifest, NonCanonicalInputSavesCanonically) {
  std::istringstream in("{ \"split\": \"test\", \"label\": \"s\", \"image_id\": \"z\", \"boxes\": [[1.0, 2.0, 3.0, 4.0]] }\r\n\n");
  auto m = read_manifest(in);
  std::ostringstream out;
  write_manifest(out, m);
  EXPECT_EQ(out.str(), "{\"boxes\":[[1,2,3,4]],\"image_id\":\"z\",\"label\":\"s\",\"split\":\"test\"}\n");
}

TEST(Manifest, FileRoundTrip) {
  auto dir = scratch("manifest");
  std::istringstream in(kCanonical);
  auto m = read_manifest(in);
  save_manifest(m, dir / "m.jsonl");
  EXPECT_EQ(read_text(dir / "m.jsonl"), kCanonical);
  EXPECT_EQ(load_manifest(dir / "m.jsonl").records, m.records);
  fs::remove_all(dir);
}

TEST(Manifest, Errors) {
  auto h = build_hierarchy(std::vector<Edge>{{"r", "s1"}, {"r", "s2"}});
  auto read = [&](const std::string& text) {
    std::istringstream in(text);
    return read_manifest(in, &h);
  };
  EXPECT_EQ(code_of([&] { read("{\"image_id\":\"a\",\"label\":\"zz\",\"split\":\"train-weaksup\"}\n"); }),
            Errc::UnknownLabel);
  EXPECT_EQ(code_of([&] {
              read("{\"image_id\":\"a\",\"label\":\"s1\",\"split\":\"train-weaksup\"}\n"
                   "{\"image_id\":\"a\",\"label\":\"s2\",\"split\":\"train-weaksup\"}\n");
            }),
            Errc::DuplicateImageId);
  try {
    read("{\"image_id\":\"a\",\"label\":\"s1\",\"split\":\"train-weaksup\"}\n{oops\n");
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), Errc::ParseError);
    EXPECT_EQ(e.subject(), "line 2");
  }
  for (const char* bad : {
           "{\"image_id\":\"a\",\"label\":\"s1\",\"split\":\"test\"}",  // boxed split without boxes
           "{\"image_id\":\"a\",\"label\":\"s1\",\"split\":\"valid\"}",
           "{\"image_id\":\"a\",\"label\":\"s1\",\"split\":\"train-weaksup\",\"extra\":1}",
           "{\"image_id\":\"a\",\"label\":\"s1\",\"split\":\"test\",\"boxes\":[[5,5,4,9]]}",
           "{\"image_id\":\"a\",\"label\":\"s1\",\"split\":\"test\",\"image_width\":8,\"boxes\":[[0,0,9,4]]}",
           "{\"image_id\":\"a\",\"label\":\"s1\",\"split\":\"test\",\"image_width\":0,\"boxes\":[[0,0,1,1]]}",
           "{\"label\":\"s1\",\"split\":\"train-weaksup\"}",
           "[1,2]",
       })
    EXPECT_EQ(code_of([&] { read(std::string(bad) + "\n"); }), Errc::ParseError) << bad;
}

TEST(FilterBoxes, Rules) {
  Manifest m{{boxed("thin", 31, 100), boxed("wide", 0.97 * 224, 50, 224, 224), boxed("ok", 50, 50),
              boxed("tall", 50, 0.97 * 224), boxed("edge", 32, 0.96 * 224)}};
  for (auto& r : m.records) r.boxes[0] = {0, 0, r.boxes[0].width(), r.boxes[0].height()};
  auto res = filter_boxes(m);
  ASSERT_EQ(res.kept.size(), 2u);
  EXPECT_EQ(res.kept.records[0].image_id, "ok");
  EXPECT_EQ(res.kept.records[1].image_id, "edge");
  ASSERT_EQ(res.rejected.size(), 3u);
  EXPECT_EQ(res.rejected[0].image_id, "thin");
  EXPECT_EQ(res.rejected[0].reason, "min_size");
  EXPECT_EQ(res.rejected[1].reason, "max_width");
  EXPECT_EQ(res.rejected[2].reason, "max_height");
  EXPECT_EQ(filter_boxes(res.kept).kept.records, res.kept.records);
  std::ostringstream log;
  write_rejections_csv(log, res.rejected);
  EXPECT_EQ(log.str(), "image_id,reason\nthin,min_size\nwide,max_width\ntall,max_height\n");
}

TEST(FilterBoxes, ConfigurableAndNeedsDimensions) {
  Manifest m{{boxed("a", 20, 20)}};
  EXPECT_EQ(filter_boxes(m).kept.size(), 0u);
  EXPECT_EQ(filter_boxes(m, {16, 0.96}).kept.size(), 1u);
  m.records[0].image_height.reset();
  EXPECT_EQ(code_of([&] { filter_boxes(m); }), Errc::MissingDimensions);
}

TEST(SplitByObservation, SingleObservationStaysTogether) {
  Manifest m;
  for (int i = 0; i < 20; ++i) {
    SampleRecord r;
    r.image_id = "i" + std::to_string(i);
    r.label = "x";
    r.observation_id = "same";
    m.records.push_back(r);
  }
  std::vector<double> f{0.5, 0.3, 0.2};
  for (std::uint64_t seed = 0; seed < 5; ++seed) {
    auto parts = split_by_observation(m, f, seed);
    std::size_t nonempty = 0;
    for (auto& p : parts) nonempty += !p.empty();
    EXPECT_EQ(nonempty, 1u);
  }
}

TEST(SplitByObservation, SingletonsBalancedAndDeterministic) {
  Manifest m;
  for (int i = 0; i < 1000; ++i) {
    SampleRecord r;
    r.image_id = "i" + std::to_string(i);
    r.label = "x";
    m.records.push_back(r);
  }
  std::vector<double> f{0.5, 0.5};
  auto a = split_by_observation(m, f, 2024);
  auto b = split_by_observation(m, f, 2024);
  EXPECT_EQ(a[0].records, b[0].records);
  EXPECT_NEAR(static_cast<double>(a[0].size()), 500.0, 25.0);
  EXPECT_EQ(a[0].size() + a[1].size(), 1000u);
  auto c = split_by_observation(m, f, 2025);
  EXPECT_NE(a[0].records, c[0].records);
}

TEST(SplitByObservation, PartitionWithGroups) {
  Manifest m;
  SplitMix64 rng(5);
  for (int i = 0; i < 300; ++i) {
    SampleRecord r;
    r.image_id = "i" + std::to_string(i);
    r.label = "x";
    if (rng.below(4)) r.observation_id = "o" + std::to_string(rng.below(60));
    m.records.push_back(r);
  }
  std::vector<double> f{0.6, 0.2, 0.2};
  auto parts = split_by_observation(m, f, 1);
  std::set<std::string> ids;
  std::map<std::string, std::size_t> obs_split;
  std::size_t total = 0;
  for (std::size_t k = 0; k < parts.size(); ++k) {
    total += parts[k].size();
    for (const auto& r : parts[k].records) {
      EXPECT_TRUE(ids.insert(r.image_id).second);
      if (r.observation_id) {
        auto [it, inserted] = obs_split.emplace(*r.observation_id, k);
        EXPECT_EQ(it->second, k) << *r.observation_id;
      }
    }
  }
  EXPECT_EQ(total, m.size());
  EXPECT_THROW(split_by_observation(m, std::vector<double>{0.5, 0.4}, 1), Error);
  EXPECT_THROW(split_by_observation(m, std::vector<double>{1.5, -0.5}, 1), Error);
}

TEST(Smf, ExactLayout) {
  ScoreMap m(2, 1, {1.0f, -2.5f});
  auto bytes = encode_smf(m);
  std::vector<std::uint8_t> expect{'S', 'M', 'F', '1', 2, 0, 0, 0, 1, 0, 0, 0,
                                   0x00, 0x00, 0x80, 0x3F, 0x00, 0x00, 0x20, 0xC0};
  EXPECT_EQ(bytes, expect);
  auto back = decode_smf(bytes, "mem");
  EXPECT_EQ(back.width(), 2u);
  EXPECT_EQ(back.values()[1], -2.5f);
}

TEST(Smf, FileRoundTripByteIdentical) {
  auto dir = scratch("smf");
  SplitMix64 rng(1);
  std::vector<float> v(37 * 11);
  for (auto& x : v) x = static_cast<float>(rng.uniform(-1e6, 1e6));
  ScoreMap m(37, 11, v);
  write_smf(m, dir / "a.smf");
  auto back = read_scoremap(dir / "a.smf");
  write_smf(back, dir / "b.smf");
  EXPECT_EQ(read_text(dir / "a.smf"), read_text(dir / "b.smf"));
  EXPECT_TRUE(std::equal(back.values().begin(), back.values().end(), v.begin()));
  fs::remove_all(dir);
}

TEST(Smf, CorruptionNamesPath) {
  auto dir = scratch("smf_bad");
  write_smf(ScoreMap::filled(3, 3, 0.5f), dir / "m.smf");
  auto bytes = read_file_bytes(dir / "m.smf", Errc::IoError);
  bytes[0] = 'X';
  write_file_bytes(dir / "bad_magic.smf", bytes);
  try {
    read_scoremap(dir / "bad_magic.smf");
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), Errc::CorruptScoreMap);
    EXPECT_EQ(e.subject(), (dir / "bad_magic.smf").string());
  }
  bytes[0] = 'S';
  bytes.pop_back();
  write_file_bytes(dir / "short.smf", bytes);
  EXPECT_EQ(code_of([&] { read_scoremap(dir / "short.smf"); }), Errc::CorruptScoreMap);
  bytes.push_back(0xFF);
  bytes[bytes.size() - 2] = 0xFF;  // last value becomes a NaN pattern 0xFFFF....
  bytes[bytes.size() - 3] = 0xFF;
  bytes[bytes.size() - 4] = 0xFF;
  write_file_bytes(dir / "nan.smf", bytes);
  EXPECT_EQ(code_of([&] { read_scoremap(dir / "nan.smf"); }), Errc::CorruptScoreMap);
  EXPECT_EQ(code_of([&] { read_scoremap(dir / "absent.smf"); }), Errc::MissingScoreMap);
  fs::remove_all(dir);
}

TEST(Pgm, EightAndSixteenBit) {
  std::string p8 = "P5\n# comment\n3 1\n255\n";
  p8 += std::string{'\x00', '\x80', '\xff'};
  auto m8 = decode_pgm(std::vector<std::uint8_t>(p8.begin(), p8.end()), "p8");
  EXPECT_EQ(m8.width(), 3u);
  EXPECT_FLOAT_EQ(m8.values()[1], 128.0f / 255.0f);
  EXPECT_EQ(m8.values()[2], 1.0f);
  std::string p16 = "P5 2 1 65535\n";
  p16 += std::string{'\x00', '\x01', '\xff', '\xff'};
  auto m16 = decode_pgm(std::vector<std::uint8_t>(p16.begin(), p16.end()), "p16");
  EXPECT_FLOAT_EQ(m16.values()[0], 1.0f / 65535.0f);
  EXPECT_EQ(m16.values()[1], 1.0f);
  std::string bad = "P5\n2 2\n255\n\x01";
  EXPECT_EQ(code_of([&] { decode_pgm(std::vector<std::uint8_t>(bad.begin(), bad.end()), "b"); }),
            Errc::CorruptScoreMap);
  auto enc = encode_pgm8(ScoreMap(3, 1, {0, 5, 10}));
  auto dec = decode_pgm(enc, "enc");
  EXPECT_FLOAT_EQ(dec.values()[1], 128.0f / 255.0f);
}

TEST(Synth, HierarchyShape) {
  SynthConfig sc;
  sc.tier_widths = {2, 3, 7};
  auto h = synth_hierarchy(sc);
  auto c = is_consistent(h);
  EXPECT_TRUE(c.consistent);
  EXPECT_EQ(c.depth, 3u);
  EXPECT_EQ(tier_labels(h, 1).size(), 2u);
  EXPECT_EQ(tier_labels(h, 2).size(), 3u);
  EXPECT_EQ(tier_labels(h, 3).size(), 7u);
  EXPECT_EQ(h.name(h.root()), "root");
}

TEST(Synth, DeterministicAndSeedSensitive) {
  auto dir = scratch("synth");
  SynthConfig sc;
  sc.seed = 3;
  sc.tier_widths = {2, 3};
  sc.images_per_category = 2;
  sc.image_size = 48;
  sc.noise_amplitude = 0.1;
  generate_synthetic(sc, dir / "a", 2);
  generate_synthetic(sc, dir / "b", 1);
  EXPECT_EQ(read_text(dir / "a/manifest.jsonl"), read_text(dir / "b/manifest.jsonl"));
  EXPECT_EQ(read_text(dir / "a/hierarchy.csv"), read_text(dir / "b/hierarchy.csv"));
  EXPECT_EQ(read_text(dir / "a/maps/img0000003.smf"), read_text(dir / "b/maps/img0000003.smf"));
  sc.seed = 4;
  generate_synthetic(sc, dir / "c", 1);
  EXPECT_NE(read_text(dir / "a/manifest.jsonl"), read_text(dir / "c/manifest.jsonl"));
  auto h = load_hierarchy(dir / "a/hierarchy.csv");
  auto m = load_manifest(dir / "a/manifest.jsonl", &h);
  EXPECT_EQ(m.size(), 6u);
  for (const auto& r : m.records) {
    auto map = read_scoremap(dir / "a" / *r.scoremap_path);
    auto n = minmax_normalize(map);
    EXPECT_TRUE(n.normalized());
    EXPECT_EQ(map.width(), 48u);
  }
  fs::remove_all(dir);
}

TEST(Synth, ExactIndicatorMapsScoreHundred) {
  SynthConfig sc;
  sc.seed = 1;
  sc.tier_widths = {3, 6};
  sc.images_per_category = 5;
  sc.image_size = 64;
  sc.blob = BlobShape::Box;
  auto ds = synth_dataset(sc);
  for (const auto& r : ds.manifest.records) {
    auto s = make_eval_sample(r, synth_image(sc, r.image_id, r.label).map);
    EXPECT_EQ(boxes_from_mask(threshold(s.map, 0.5)), s.gt_boxes) << r.image_id;
  }
  EXPECT_EQ(evaluate_run(ds.manifest, synth_source(sc), EvalConfig{}).max_box_acc_v2, 100.0);
}

TEST(Synth, ConfigValidation) {
  SynthConfig sc;
  sc.tier_widths = {};
  EXPECT_THROW(sc.validate(), Error);
  sc = SynthConfig{};
  sc.noise_amplitude = -1;
  EXPECT_THROW(sc.validate(), Error);
  sc = SynthConfig{};
  sc.images_per_category = 0;
  EXPECT_THROW(sc.validate(), Error);
}
