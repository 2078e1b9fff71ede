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

// Minimal RFC 4180 reading and writing: quoted fields, doubled quotes,
// embedded commas and newlines inside quotes.

#include <istream>
#include <ostream>
#include <string>
#include <string_view>
#include <vector>

#include "granloc/error.hpp"

namespace granloc::csv {

/// Reads one record. Returns false at end of input.
inline bool read_row(std::istream& in, std::vector<std::string>& fields, std::size_t& line_no) {
  fields.clear();
  int ch = in.peek();
  if (ch == std::char_traits<char>::eof()) return false;
  ++line_no;
  std::string field;
  bool quoted = false;
  bool was_quoted = false;
  for (;;) {
    ch = in.get();
    if (ch == std::char_traits<char>::eof()) {
      if (quoted) throw Error(Errc::ParseError, "line " + std::to_string(line_no), "unterminated quote");
      break;
    }
    char c = static_cast<char>(ch);
    if (quoted) {
      if (c == '"') {
        if (in.peek() == '"') {
          field += '"';
          in.get();
        } else {
          quoted = false;
        }
      } else {
        if (c == '\n') ++line_no;
        field += c;
      }
      continue;
    }
    if (c == '"' && field.empty() && !was_quoted) {
      quoted = was_quoted = true;
    } else if (c == ',') {
      fields.push_back(std::move(field));
      field.clear();
      was_quoted = false;
    } else if (c == '\n') {
      break;
    } else if (c == '\r') {
      if (in.peek() == '\n') in.get();
      break;
    } else {
      field += c;
    }
  }
  fields.push_back(std::move(field));
  return true;
}

inline std::string quote(std::string_view field) {
  bool needs = field.find_first_of(",\"\r\n") != std::string_view::npos ||
               (!field.empty() && (field.front() == ' ' || field.back() == ' '));
  if (!needs) return std::string(field);
  std::string out = "\"";
  for (char c : field) {
    if (c == '"') out += '"';
    out += c;
  }
  out += '"';
  return out;
}

inline void write_row(std::ostream& out, const std::vector<std::string>& fields) {
  for (std::size_t i = 0; i < fields.size(); ++i) {
    if (i) out << ',';
    out << quote(fields[i]);
  }
  out << '\n';
}

}  // namespace granloc::csv
