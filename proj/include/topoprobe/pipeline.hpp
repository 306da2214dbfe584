// Copyright 2026 The topoprobe authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#pragma once

#include <optional>
#include <string>
#include <vector>

#include "topoprobe/report.hpp"

namespace topoprobe::pipeline {

inline constexpr const char* kToolVersion = "0.1.0";

struct DiscoveryOptions {
  std::uint64_t seed = 42;
  std::vector<double> alpha_grid;          // empty -> default grid
  std::optional<std::string> only_element; // name or slug, case-insensitive
  bool collect_artifacts = false;
  std::string timestamp;                   // empty -> omitted from the report
};

// Raw sweep data for one element's size benchmark, for CSV dumps.
struct ElementArtifacts {
  std::string element;
  stats::LatencyMatrix matrix;
  stats::ReducedSeries series;
};

struct DiscoveryResult {
  report::TopologyReport report;
  std::vector<ElementArtifacts> artifacts;
  bool any_inconclusive = false;
};

// Runs the planned benchmark matrix against simulator backends (one session
// per element) and assembles the unified report.
DiscoveryResult run_discovery(const sim::DeviceSpec& spec, const DiscoveryOptions& options);

// Lowercase, non-alphanumerics folded to '-': "Const L1.5" -> "const-l1-5".
std::string element_slug(const std::string& name);

}  // namespace topoprobe::pipeline
