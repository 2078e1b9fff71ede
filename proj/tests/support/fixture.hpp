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

// Bundled taxonomy fixture: 500 leaves at depth 6 with per-species image
// counts, expanded into a weakly labeled manifest.

#include <cstdio>
#include <fstream>
#include <string>

#include "granloc/csv.hpp"
#include "granloc/manifest.hpp"
#include "granloc/taxonomy_io.hpp"

#ifndef GRANLOC_TEST_DATA
#error "GRANLOC_TEST_DATA must point at tests/data"
#endif

namespace fixture {

inline std::string data_path(const std::string& name) { return std::string(GRANLOC_TEST_DATA) + "/" + name; }

inline granloc::LabelHierarchy tiers_hierarchy() {
  return granloc::load_hierarchy(data_path("inat_tiers_taxonomy.csv"));
}

inline granloc::Manifest tiers_manifest() {
  std::ifstream in(data_path("inat_tiers_counts.csv"));
  if (!in) throw granloc::Error(granloc::Errc::IoError, data_path("inat_tiers_counts.csv"));
  granloc::Manifest m;
  std::vector<std::string> row;
  std::size_t line = 0;
  granloc::csv::read_row(in, row, line);  // header
  std::size_t next_id = 0;
  while (granloc::csv::read_row(in, row, line)) {
    const auto n = std::stoul(row.at(1));
    for (std::size_t k = 0; k < n; ++k) {
      char id[32];
      std::snprintf(id, sizeof id, "w%06zu", next_id++);
      granloc::SampleRecord r;
      r.image_id = id;
      r.label = row.at(0);
      r.split = granloc::Split::TrainWeaksup;
      m.records.push_back(std::move(r));
    }
  }
  return m;
}

}  // namespace fixture
