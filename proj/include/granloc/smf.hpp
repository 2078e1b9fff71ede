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

// Score-map files.
//
// SMF1: bytes 53 4D 46 31 ("SMF1"), u32 LE width, u32 LE height, then
// width*height IEEE-754 binary32 LE values, row-major, top-left origin.
// Binary PGM ("P5") is accepted on input; samples map to sample / maxval.

#include <bit>
#include <cctype>
#include <cmath>
#include <span>
#include <cstdint>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <iterator>
#include <string>
#include <vector>

#include "granloc/scoremap.hpp"

namespace granloc {

inline constexpr char kSmfMagic[4] = {'S', 'M', 'F', '1'};

inline std::vector<std::uint8_t> encode_smf(const ScoreMap& m) {
  std::vector<std::uint8_t> out;
  out.reserve(12 + 4 * m.size());
  auto put32 = [&](std::uint32_t v) {
    for (int i = 0; i < 4; ++i) out.push_back(static_cast<std::uint8_t>(v >> (8 * i)));
  };
  out.insert(out.end(), std::begin(kSmfMagic), std::end(kSmfMagic));
  put32(static_cast<std::uint32_t>(m.width()));
  put32(static_cast<std::uint32_t>(m.height()));
  for (float v : m.values()) put32(std::bit_cast<std::uint32_t>(v));
  return out;
}

/// `source` names the file in error messages.
inline ScoreMap decode_smf(std::span<const std::uint8_t> bytes, const std::string& source) {
  auto get32 = [&](std::size_t off) {
    std::uint32_t v = 0;
    for (int i = 0; i < 4; ++i) v |= static_cast<std::uint32_t>(bytes[off + i]) << (8 * i);
    return v;
  };
  if (bytes.size() < 12 || std::memcmp(bytes.data(), kSmfMagic, 4) != 0)
    throw Error(Errc::CorruptScoreMap, source, "bad SMF1 magic");
  const std::uint64_t w = get32(4), h = get32(8);
  if (w == 0 || h == 0) throw Error(Errc::CorruptScoreMap, source, "zero dimension");
  if (bytes.size() != 12 + 4 * w * h)
    throw Error(Errc::CorruptScoreMap, source,
                "expected " + std::to_string(12 + 4 * w * h) + " bytes, found " +
                    std::to_string(bytes.size()));
  std::vector<float> values(w * h);
  for (std::size_t i = 0; i < values.size(); ++i) {
    values[i] = std::bit_cast<float>(get32(12 + 4 * i));
    if (!std::isfinite(values[i]))
      throw Error(Errc::CorruptScoreMap, source, "non-finite value at index " + std::to_string(i));
  }
  return ScoreMap(w, h, std::move(values));
}

/// P5 with maxval < 256 (one byte per sample) or up to 65535 (two bytes,
/// big-endian).
inline ScoreMap decode_pgm(std::span<const std::uint8_t> bytes, const std::string& source) {
  std::size_t pos = 0;
  auto corrupt = [&](const char* why) { return Error(Errc::CorruptScoreMap, source, why); };
  auto skip_space = [&] {
    while (pos < bytes.size()) {
      if (bytes[pos] == '#') {
        while (pos < bytes.size() && bytes[pos] != '\n') ++pos;
      } else if (std::isspace(bytes[pos])) {
        ++pos;
      } else {
        break;
      }
    }
  };
  auto read_uint = [&] {
    skip_space();
    std::uint64_t v = 0;
    std::size_t digits = 0;
    while (pos < bytes.size() && bytes[pos] >= '0' && bytes[pos] <= '9' && digits < 10) {
      v = v * 10 + (bytes[pos++] - '0');
      ++digits;
    }
    if (digits == 0) throw corrupt("malformed PGM header");
    return v;
  };
  if (bytes.size() < 2 || bytes[0] != 'P' || bytes[1] != '5') throw corrupt("bad PGM magic");
  pos = 2;
  const std::uint64_t w = read_uint(), h = read_uint(), maxval = read_uint();
  if (w == 0 || h == 0 || maxval == 0 || maxval > 65535) throw corrupt("bad PGM header values");
  if (pos >= bytes.size() || !std::isspace(bytes[pos])) throw corrupt("malformed PGM header");
  ++pos;
  const std::size_t bps = maxval < 256 ? 1 : 2;
  if (bytes.size() - pos != w * h * bps) throw corrupt("PGM payload size mismatch");
  std::vector<float> values(w * h);
  for (std::size_t i = 0; i < values.size(); ++i) {
    std::uint32_t s = bps == 1 ? bytes[pos + i]
                               : (static_cast<std::uint32_t>(bytes[pos + 2 * i]) << 8) |
                                     bytes[pos + 2 * i + 1];
    if (s > maxval) throw corrupt("PGM sample exceeds maxval");
    values[i] = static_cast<float>(static_cast<double>(s) / static_cast<double>(maxval));
  }
  return ScoreMap(w, h, std::move(values));
}

inline std::vector<std::uint8_t> encode_pgm8(const ScoreMap& m) {
  const ScoreMap n = minmax_normalize(m);
  std::string header =
      "P5\n" + std::to_string(n.width()) + " " + std::to_string(n.height()) + "\n255\n";
  std::vector<std::uint8_t> out(header.begin(), header.end());
  for (float v : n.values()) out.push_back(static_cast<std::uint8_t>(std::lround(v * 255.0f)));
  return out;
}

inline std::vector<std::uint8_t> read_file_bytes(const std::filesystem::path& path, Errc missing) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(missing, path.string(), "cannot open");
  return std::vector<std::uint8_t>(std::istreambuf_iterator<char>(in), {});
}

inline void write_file_bytes(const std::filesystem::path& path, std::span<const std::uint8_t> bytes) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw Error(Errc::IoError, path.string(), "cannot open for writing");
  out.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
  if (!out) throw Error(Errc::IoError, path.string(), "write failed");
}

/// Reads SMF1 or P5 PGM, chosen by content. A missing file raises
/// MissingScoreMap, anything malformed CorruptScoreMap; both name the path.
inline ScoreMap read_scoremap(const std::filesystem::path& path) {
  const auto bytes = read_file_bytes(path, Errc::MissingScoreMap);
  if (bytes.size() >= 2 && bytes[0] == 'P' && bytes[1] == '5') return decode_pgm(bytes, path.string());
  return decode_smf(bytes, path.string());
}

inline void write_smf(const ScoreMap& m, const std::filesystem::path& path) {
  write_file_bytes(path, encode_smf(m));
}

inline void write_pgm8(const ScoreMap& m, const std::filesystem::path& path) {
  write_file_bytes(path, encode_pgm8(m));
}

}  // namespace granloc
