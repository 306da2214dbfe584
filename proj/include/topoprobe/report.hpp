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

#include "topoprobe/probes.hpp"

namespace topoprobe::report {

enum class CellState { kValue, kNotApplicable, kNotAvailable, kInconclusive };

// One report cell: either a value-carrying result or an explicit marker.
struct AttributeCell {
  CellState state = CellState::kNotApplicable;
  std::optional<probes::AttributeResult> result;  // set only for kValue
  std::string note;

  static AttributeCell not_applicable();
  static AttributeCell not_available(std::string note = "");
  static AttributeCell inconclusive(std::string note);
  // Wraps a probe result; an inconclusive AttributeResult becomes the
  // inconclusive marker.
  static AttributeCell from_result(probes::AttributeResult r);
};

inline const std::vector<std::string> kAttributeNames = {
    "size",   "latency", "read_bw",        "write_bw",
    "amount", "line_size", "fetch_granularity", "shared_with"};

struct MemoryElementReport {
  std::string name;
  std::string scope;
  AttributeCell size;
  AttributeCell latency;
  AttributeCell read_bw;
  AttributeCell write_bw;
  AttributeCell line_size;
  AttributeCell fetch_granularity;
  AttributeCell amount;
  AttributeCell shared_with;

  AttributeCell& cell(const std::string& attribute);
  const AttributeCell& cell(const std::string& attribute) const;
};

struct Provenance {
  std::string tool_version;
  std::uint64_t seed = 0;
  std::string backend_id;
  std::string timestamp;  // empty = omitted from the outputs
};

struct TopologyReport {
  sim::ApiInfo api;  // general + compute sections
  std::vector<MemoryElementReport> memory;
  Provenance provenance;
};

struct CellResult {
  std::string element;
  std::string attribute;
  AttributeCell cell;
  std::string scope;  // carried on the first cell of an element
};

// Plan cell descriptors live in probes (plan_benchmarks); assembly validates
// results against them: every planned cell exactly once, markers for
// everything without a value.
struct PlanCellRef {
  std::string element;
  std::string attribute;
};

TopologyReport assemble_report(const sim::ApiInfo& api_info,
                               const std::vector<CellResult>& results,
                               const std::vector<PlanCellRef>& plan,
                               const Provenance& provenance);

// Canonical JSON: stable key order, sizes in bytes, latencies in cycles,
// bandwidths in GiB/s. emit -> parse -> emit is byte-identical.
std::string emit_json(const TopologyReport& report);

std::string emit_markdown(const TopologyReport& report);

// Raw timing dump: array_size_bytes,sample_index,latency_cycles.
std::string render_raw_csv(const stats::LatencyMatrix& matrix);
// Companion reduction: array_size_bytes,score.
std::string render_reduced_csv(const stats::ReducedSeries& series);

stats::LatencyMatrix parse_raw_csv(const std::string& text);

void write_file(const std::string& path, const std::string& content);

}  // namespace topoprobe::report
