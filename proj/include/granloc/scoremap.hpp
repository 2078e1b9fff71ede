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

// Score maps and the image-processing steps that turn one into boxes:
// min-max normalization, thresholding, 8-connected components, tight boxes,
// IoU, bilinear resizing and the centered-Gaussian baseline map.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "granloc/error.hpp"

namespace granloc {

/// Row-major 2-D activation map. `normalized()` marks maps known to lie in
/// [0, 1] after min-max normalization.
class ScoreMap {
 public:
  ScoreMap() = default;

  ScoreMap(std::size_t width, std::size_t height, std::vector<float> values,
           bool normalized = false)
      : width_(width), height_(height), values_(std::move(values)), normalized_(normalized) {
    if (width_ == 0 || height_ == 0)
      throw Error(Errc::DimensionMismatch, "score map", "dimensions must be >= 1");
    if (values_.size() != width_ * height_)
      throw Error(Errc::DimensionMismatch, "score map",
                  std::to_string(values_.size()) + " values for " + std::to_string(width_) + "x" +
                      std::to_string(height_));
    for (float v : values_)
      if (!std::isfinite(v)) throw Error(Errc::NonFiniteValue, "score map");
    if (normalized_)
      for (float v : values_)
        if (v < 0.0f || v > 1.0f)
          throw Error(Errc::NotNormalized, "score map", "value outside [0,1]");
  }

  static ScoreMap filled(std::size_t width, std::size_t height, float value) {
    return ScoreMap(width, height, std::vector<float>(width * height, value));
  }

  std::size_t width() const { return width_; }
  std::size_t height() const { return height_; }
  std::size_t size() const { return values_.size(); }
  bool normalized() const { return normalized_; }
  std::span<const float> values() const { return values_; }
  float at(std::size_t x, std::size_t y) const { return values_[y * width_ + x]; }

  friend bool operator==(const ScoreMap&, const ScoreMap&) = default;

 private:
  std::size_t width_ = 0;
  std::size_t height_ = 0;
  std::vector<float> values_;
  bool normalized_ = false;
};

/// Integer pixel box, [x0, x1) x [y0, y1).
struct BBox {
  int x0 = 0, y0 = 0, x1 = 0, y1 = 0;

  int width() const { return x1 - x0; }
  int height() const { return y1 - y0; }
  std::int64_t area() const { return static_cast<std::int64_t>(width()) * height(); }
  bool valid() const { return x0 >= 0 && y0 >= 0 && x1 > x0 && y1 > y0; }
  bool within(std::size_t w, std::size_t h) const {
    return valid() && static_cast<std::size_t>(x1) <= w && static_cast<std::size_t>(y1) <= h;
  }
  friend bool operator==(const BBox&, const BBox&) = default;
};

inline double iou(const BBox& a, const BBox& b) {
  const std::int64_t iw = std::max(0, std::min(a.x1, b.x1) - std::max(a.x0, b.x0));
  const std::int64_t ih = std::max(0, std::min(a.y1, b.y1) - std::max(a.y0, b.y0));
  const std::int64_t inter = iw * ih;
  const std::int64_t uni = a.area() + b.area() - inter;
  if (uni <= 0) return 0.0;
  return static_cast<double>(inter) / static_cast<double>(uni);
}

struct BinaryMask {
  std::size_t width = 0;
  std::size_t height = 0;
  std::vector<std::uint8_t> bits;  // 0 or 1, row-major

  bool at(std::size_t x, std::size_t y) const { return bits[y * width + x] != 0; }
  std::size_t count() const {
    return static_cast<std::size_t>(std::count(bits.begin(), bits.end(), std::uint8_t{1}));
  }
};

/// (v - min) / (max - min); a constant map becomes all zeros.
inline ScoreMap minmax_normalize(const ScoreMap& m) {
  if (m.normalized()) return m;
  auto [lo_it, hi_it] = std::minmax_element(m.values().begin(), m.values().end());
  const double lo = *lo_it;
  const double hi = *hi_it;
  std::vector<float> out(m.size(), 0.0f);
  if (hi > lo) {
    const double range = hi - lo;
    for (std::size_t i = 0; i < out.size(); ++i)
      out[i] = static_cast<float>((static_cast<double>(m.values()[i]) - lo) / range);
  }
  return ScoreMap(m.width(), m.height(), std::move(out), true);
}

/// Foreground where value >= tau.
inline BinaryMask threshold(const ScoreMap& m, double tau) {
  if (!m.normalized()) throw Error(Errc::NotNormalized, "threshold");
  if (!(tau >= 0.0 && tau <= 1.0))
    throw Error(Errc::InvalidArgument, "tau", std::to_string(tau) + " outside [0,1]");
  BinaryMask mask{m.width(), m.height(), std::vector<std::uint8_t>(m.size())};
  for (std::size_t i = 0; i < m.size(); ++i)
    mask.bits[i] = static_cast<double>(m.values()[i]) >= tau ? 1 : 0;
  return mask;
}

struct Component {
  std::vector<std::uint32_t> pixels;  // row-major indices, ascending
  BBox box;
};

/// 8-connected foreground components, ordered by (box top, box left).
inline std::vector<Component> connected_components(const BinaryMask& mask) {
  const auto w = static_cast<std::int64_t>(mask.width);
  const auto h = static_cast<std::int64_t>(mask.height);
  std::vector<std::uint8_t> seen(mask.bits.size(), 0);
  std::vector<Component> comps;
  std::vector<std::uint32_t> stack;
  for (std::int64_t start = 0; start < w * h; ++start) {
    if (!mask.bits[start] || seen[start]) continue;
    Component c;
    c.box = {static_cast<int>(start % w), static_cast<int>(start / w),
             static_cast<int>(start % w) + 1, static_cast<int>(start / w) + 1};
    seen[start] = 1;
    stack.assign(1, static_cast<std::uint32_t>(start));
    while (!stack.empty()) {
      const std::uint32_t p = stack.back();
      stack.pop_back();
      c.pixels.push_back(p);
      const auto x = static_cast<std::int64_t>(p % w);
      const auto y = static_cast<std::int64_t>(p / w);
      c.box.x0 = std::min<int>(c.box.x0, static_cast<int>(x));
      c.box.y0 = std::min<int>(c.box.y0, static_cast<int>(y));
      c.box.x1 = std::max<int>(c.box.x1, static_cast<int>(x) + 1);
      c.box.y1 = std::max<int>(c.box.y1, static_cast<int>(y) + 1);
      for (std::int64_t dy = -1; dy <= 1; ++dy)
        for (std::int64_t dx = -1; dx <= 1; ++dx) {
          const std::int64_t nx = x + dx, ny = y + dy;
          if (nx < 0 || ny < 0 || nx >= w || ny >= h) continue;
          const std::int64_t q = ny * w + nx;
          if (mask.bits[q] && !seen[q]) {
            seen[q] = 1;
            stack.push_back(static_cast<std::uint32_t>(q));
          }
        }
    }
    std::sort(c.pixels.begin(), c.pixels.end());
    comps.push_back(std::move(c));
  }
  std::stable_sort(comps.begin(), comps.end(), [](const Component& a, const Component& b) {
    return a.box.y0 != b.box.y0 ? a.box.y0 < b.box.y0 : a.box.x0 < b.box.x0;
  });
  return comps;
}

inline std::vector<BBox> boxes_from_mask(const BinaryMask& mask) {
  std::vector<BBox> out;
  for (auto& c : connected_components(mask)) out.push_back(c.box);
  return out;
}

/// Corner-aligned bilinear resampling: destination index d maps to source
/// coordinate d * (src - 1) / (dst - 1). A one-pixel destination axis samples
/// the source center. Normalized input yields normalized output.
inline ScoreMap resize_bilinear(const ScoreMap& m, std::size_t new_w, std::size_t new_h) {
  if (new_w == 0 || new_h == 0)
    throw Error(Errc::DimensionMismatch, "resize", "dimensions must be >= 1");
  if (new_w == m.width() && new_h == m.height()) return m;
  auto coords = [](std::size_t src, std::size_t dst) {
    std::vector<std::pair<std::size_t, double>> c(dst);
    for (std::size_t d = 0; d < dst; ++d) {
      double s = dst == 1 ? (static_cast<double>(src) - 1.0) / 2.0
                          : static_cast<double>(d) * static_cast<double>(src - 1) /
                                static_cast<double>(dst - 1);
      auto i0 = static_cast<std::size_t>(std::floor(s));
      if (i0 >= src - 1) {
        i0 = src - 1;
        s = static_cast<double>(i0);
      }
      c[d] = {i0, s - static_cast<double>(i0)};
    }
    return c;
  };
  const auto cx = coords(m.width(), new_w);
  const auto cy = coords(m.height(), new_h);
  const std::size_t sw = m.width();
  std::vector<float> out(new_w * new_h);
  for (std::size_t y = 0; y < new_h; ++y) {
    const auto [y0, fy] = cy[y];
    const std::size_t y1 = std::min(y0 + 1, m.height() - 1);
    for (std::size_t x = 0; x < new_w; ++x) {
      const auto [x0, fx] = cx[x];
      const std::size_t x1 = std::min(x0 + 1, sw - 1);
      const double a = m.values()[y0 * sw + x0], b = m.values()[y0 * sw + x1];
      const double c = m.values()[y1 * sw + x0], d = m.values()[y1 * sw + x1];
      const double top = a + (b - a) * fx;
      const double bottom = c + (d - c) * fx;
      out[y * new_w + x] = static_cast<float>(top + (bottom - top) * fy);
    }
  }
  ScoreMap resized(new_w, new_h, std::move(out));
  return m.normalized() ? minmax_normalize(resized) : resized;
}

/// exp(-((i - (M-1)/2)^2 + (j - (M-1)/2)^2) / (2 sigma^2)) for row i, column j.
inline ScoreMap center_gaussian_raw(std::size_t side, double sigma) {
  if (side == 0) throw Error(Errc::InvalidArgument, "side", "must be >= 1");
  if (!(sigma > 0.0)) throw Error(Errc::InvalidArgument, "sigma", "must be > 0");
  const double c = (static_cast<double>(side) - 1.0) / 2.0;
  const double denom = 2.0 * sigma * sigma;
  std::vector<float> v(side * side);
  for (std::size_t i = 0; i < side; ++i)
    for (std::size_t j = 0; j < side; ++j) {
      const double di = static_cast<double>(i) - c;
      const double dj = static_cast<double>(j) - c;
      v[i * side + j] = static_cast<float>(std::exp(-(di * di + dj * dj) / denom));
    }
  return ScoreMap(side, side, std::move(v));
}

/// Center baseline map, min-max normalized. Sigma defaults to side / 4.
inline ScoreMap center_gaussian(std::size_t side = 224, std::optional<double> sigma = std::nullopt) {
  return minmax_normalize(
      center_gaussian_raw(side, sigma.value_or(static_cast<double>(side) / 4.0)));
}

}  // namespace granloc
