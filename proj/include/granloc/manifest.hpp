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

#include <cmath>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "granloc/error.hpp"

namespace granloc {

enum class Split { TrainWeaksup, TrainFullsup, Test };

constexpr std::string_view split_name(Split s) {
  switch (s) {
    case Split::TrainWeaksup: return "train-weaksup";
    case Split::TrainFullsup: return "train-fullsup";
    case Split::Test: return "test";
  }
  return "test";
}

inline Split parse_split(std::string_view s) {
  if (s == "train-weaksup") return Split::TrainWeaksup;
  if (s == "train-fullsup") return Split::TrainFullsup;
  if (s == "test") return Split::Test;
  throw Error(Errc::InvalidArgument, std::string(s), "unknown split");
}

/// Annotation box in float pixel coordinates, (x0, y0) inclusive corner and
/// (x1, y1) exclusive corner, exactly as stored in a manifest.
struct FloatBox {
  double x0 = 0, y0 = 0, x1 = 0, y1 = 0;

  double width() const { return x1 - x0; }
  double height() const { return y1 - y0; }
  double area() const { return width() * height(); }
  friend bool operator==(const FloatBox&, const FloatBox&) = default;
};

struct SampleRecord {
  std::string image_id;
  std::optional<std::string> observation_id;
  std::string label;
  Split split = Split::TrainWeaksup;
  std::optional<int> image_width;
  std::optional<int> image_height;
  std::vector<FloatBox> boxes;
  std::optional<std::string> scoremap_path;

  bool has_dimensions() const { return image_width && image_height; }
  friend bool operator==(const SampleRecord&, const SampleRecord&) = default;
};

struct Manifest {
  std::vector<SampleRecord> records;

  std::size_t size() const { return records.size(); }
  bool empty() const { return records.empty(); }
  friend bool operator==(const Manifest&, const Manifest&) = default;
};

inline Manifest filter_split(const Manifest& m, Split split) {
  Manifest out;
  for (const auto& r : m.records)
    if (r.split == split) out.records.push_back(r);
  return out;
}

inline long round_half_up(double v) { return static_cast<long>(std::floor(v + 0.5)); }

}  // namespace granloc
