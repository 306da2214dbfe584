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

#include "topoprobe/report.hpp"

#include <cmath>
#include <cstdio>
#include <fstream>
#include <map>
#include <set>
#include <sstream>

#include "topoprobe/errors.hpp"

namespace topoprobe::report {

AttributeCell AttributeCell::not_applicable() {
  AttributeCell c;
  c.state = CellState::kNotApplicable;
  return c;
}

AttributeCell AttributeCell::not_available(std::string note) {
  AttributeCell c;
  c.state = CellState::kNotAvailable;
  c.note = std::move(note);
  return c;
}

AttributeCell AttributeCell::inconclusive(std::string note) {
  AttributeCell c;
  c.state = CellState::kInconclusive;
  c.note = std::move(note);
  return c;
}

AttributeCell AttributeCell::from_result(probes::AttributeResult r) {
  if (r.inconclusive()) return inconclusive(r.note);
  AttributeCell c;
  c.state = CellState::kValue;
  c.note = r.note;
  c.result = std::move(r);
  return c;
}

AttributeCell& MemoryElementReport::cell(const std::string& attribute) {
  if (attribute == "size") return size;
  if (attribute == "latency") return latency;
  if (attribute == "read_bw") return read_bw;
  if (attribute == "write_bw") return write_bw;
  if (attribute == "line_size") return line_size;
  if (attribute == "fetch_granularity") return fetch_granularity;
  if (attribute == "amount") return amount;
  if (attribute == "shared_with") return shared_with;
  throw InputError("unknown attribute '" + attribute + "'");
}

const AttributeCell& MemoryElementReport::cell(const std::string& attribute) const {
  return const_cast<MemoryElementReport*>(this)->cell(attribute);
}

TopologyReport assemble_report(const sim::ApiInfo& api_info,
                               const std::vector<CellResult>& results,
                               const std::vector<PlanCellRef>& plan,
                               const Provenance& provenance) {
  std::map<std::pair<std::string, std::string>, const CellResult*> by_key;
  for (const auto& r : results) {
    auto [it, inserted] = by_key.emplace(std::make_pair(r.element, r.attribute), &r);
    (void)it;
    if (!inserted)
      throw InputError("duplicate result for cell " + r.element + "." + r.attribute);
  }

  std::set<std::pair<std::string, std::string>> planned;
  for (const auto& p : plan) planned.insert({p.element, p.attribute});
  for (const auto& r : results) {
    if (!planned.count({r.element, r.attribute}))
      throw InputError("result for unplanned cell " + r.element + "." + r.attribute);
  }

  TopologyReport out;
  out.api = api_info;
  out.provenance = provenance;

  std::map<std::string, std::size_t> element_index;
  for (const auto& p : plan) {
    auto key = std::make_pair(p.element, p.attribute);
    auto it = by_key.find(key);
    if (it == by_key.end())
      throw InputError("missing cell " + p.element + "." + p.attribute +
                       " (no value and no marker)");
    if (!element_index.count(p.element)) {
      element_index[p.element] = out.memory.size();
      MemoryElementReport element;
      element.name = p.element;
      out.memory.push_back(std::move(element));
    }
    auto& element = out.memory[element_index[p.element]];
    if (!it->second->scope.empty()) element.scope = it->second->scope;
    element.cell(p.attribute) = it->second->cell;
  }
  return out;
}

// ---------------------------------------------------------------------------
// JSON

namespace {

using Json = nlohmann::ordered_json;

// Integral quantities (bytes, cycles, counts) serialize as integers.
Json number(double v) {
  if (std::isfinite(v) && v >= 0 && v == std::floor(v) && v < 9.2e18)
    return Json(static_cast<std::uint64_t>(v));
  return Json(v);
}

Json cell_to_json(const AttributeCell& cell) {
  Json j;
  switch (cell.state) {
    case CellState::kNotApplicable:
      j["status"] = "not-applicable";
      return j;
    case CellState::kNotAvailable:
      j["status"] = "not-available";
      if (!cell.note.empty()) j["note"] = cell.note;
      return j;
    case CellState::kInconclusive:
      j["value"] = nullptr;
      j["confidence"] = 0.0;
      j["note"] = cell.note;
      return j;
    case CellState::kValue:
      break;
  }

  const auto& r = *cell.result;
  if (r.latency) {
    j["mean"] = r.latency->mean;
    j["p50"] = number(r.latency->p50);
    j["p95"] = number(r.latency->p95);
    j["stddev"] = r.latency->stddev;
    j["min"] = number(r.latency->min);
    j["max"] = number(r.latency->max);
    j["unit"] = "cycles";
  } else if (r.sharing) {
    j["value"] = *r.sharing;
  } else if (r.cu_groups) {
    j["groups"] = *r.cu_groups;
    Json exclusive = Json::array();
    for (const auto& g : *r.cu_groups)
      if (g.size() == 1) exclusive.push_back(g.front());
    j["exclusive_cus"] = exclusive;
  } else if (r.value) {
    if (r.unit == "GiB/s")
      j["value"] = *r.value;
    else
      j["value"] = number(*r.value);
    if (!r.unit.empty()) j["unit"] = r.unit;
  }
  j["confidence"] = r.confidence;
  j["method"] = probes::to_string(r.method);
  if (!r.note.empty()) j["note"] = r.note;
  return j;
}

}  // namespace

std::string emit_json(const TopologyReport& report) {
  Json j;
  j["general"] = {{"vendor", sim::to_string(report.api.vendor)},
                  {"model", report.api.model},
                  {"clock_rate_khz", report.api.clock_rate_khz},
                  {"compute_capability", report.api.compute_capability}};
  Json c;
  c["num_sm"] = report.api.compute.num_sm;
  c["cores_per_sm"] = report.api.compute.cores_per_sm;
  c["max_blocks_per_sm"] = report.api.compute.max_blocks_per_sm;
  c["max_threads_per_block"] = report.api.compute.max_threads_per_block;
  c["max_threads_per_sm"] = report.api.compute.max_threads_per_sm;
  c["warp_size"] = report.api.compute.warp_size;
  c["registers_per_block"] = report.api.compute.registers_per_block;
  c["registers_per_sm"] = report.api.compute.registers_per_sm;
  if (report.api.vendor == sim::Vendor::kAmdLike) {
    c["physical_cu_ids"] = report.api.physical_cu_ids;
    c["active_cu_ids"] = report.api.active_cu_ids;
  }
  j["compute"] = std::move(c);

  j["memory"] = Json::array();
  for (const auto& element : report.memory) {
    Json e;
    e["name"] = element.name;
    e["scope"] = element.scope.empty() ? "n/a" : element.scope;
    e["size"] = cell_to_json(element.size);
    e["latency"] = cell_to_json(element.latency);
    e["read_bw"] = cell_to_json(element.read_bw);
    e["write_bw"] = cell_to_json(element.write_bw);
    e["line_size"] = cell_to_json(element.line_size);
    e["fetch_granularity"] = cell_to_json(element.fetch_granularity);
    e["amount"] = cell_to_json(element.amount);
    e["shared_with"] = cell_to_json(element.shared_with);
    j["memory"].push_back(std::move(e));
  }

  Json p;
  p["tool_version"] = report.provenance.tool_version;
  p["seed"] = report.provenance.seed;
  p["backend_id"] = report.provenance.backend_id;
  if (!report.provenance.timestamp.empty()) p["timestamp"] = report.provenance.timestamp;
  j["provenance"] = std::move(p);

  return j.dump(2) + "\n";
}

// ---------------------------------------------------------------------------
// Markdown

namespace {

std::string cell_to_text(const AttributeCell& cell) {
  switch (cell.state) {
    case CellState::kNotApplicable:
      return "n/a";
    case CellState::kNotAvailable:
      return "not available";
    case CellState::kInconclusive:
      return "inconclusive";
    case CellState::kValue:
      break;
  }
  const auto& r = *cell.result;
  char buf[64];
  if (r.latency) {
    std::snprintf(buf, sizeof(buf), "%.1f cycles (p50 %.0f, p95 %.0f)", r.latency->mean,
                  r.latency->p50, r.latency->p95);
    return buf;
  }
  if (r.sharing) {
    std::string s;
    for (const auto& e : *r.sharing) s += (s.empty() ? "" : ", ") + e;
    return s;
  }
  if (r.cu_groups) {
    std::size_t exclusive = 0;
    for (const auto& g : *r.cu_groups)
      if (g.size() == 1) ++exclusive;
    std::snprintf(buf, sizeof(buf), "%zu groups, %zu exclusive CUs", r.cu_groups->size(),
                  exclusive);
    return buf;
  }
  if (r.value) {
    if (*r.value == std::floor(*r.value))
      std::snprintf(buf, sizeof(buf), "%llu %s",
                    static_cast<unsigned long long>(*r.value), r.unit.c_str());
    else
      std::snprintf(buf, sizeof(buf), "%.2f %s", *r.value, r.unit.c_str());
    return buf;
  }
  return "?";
}

std::string confidence_to_text(const AttributeCell& cell) {
  if (cell.state != CellState::kValue) return cell.state == CellState::kInconclusive ? "0" : "";
  char buf[32];
  std::snprintf(buf, sizeof(buf), "%g", cell.result->confidence);
  return buf;
}

}  // namespace

std::string emit_markdown(const TopologyReport& report) {
  std::ostringstream md;
  md << "# Topology report: " << report.api.model << "\n\n";

  md << "## General\n\n";
  md << "| property | value |\n|---|---|\n";
  md << "| vendor | " << sim::to_string(report.api.vendor) << " |\n";
  md << "| model | " << report.api.model << " |\n";
  md << "| clock rate | " << report.api.clock_rate_khz << " kHz |\n";
  md << "| compute capability | " << report.api.compute_capability << " |\n\n";

  md << "## Compute\n\n";
  md << "| property | value |\n|---|---|\n";
  const auto& c = report.api.compute;
  md << "| SMs/CUs | " << c.num_sm << " |\n";
  md << "| cores per SM/CU | " << c.cores_per_sm << " |\n";
  md << "| max blocks per SM/CU | " << c.max_blocks_per_sm << " |\n";
  md << "| max threads per block | " << c.max_threads_per_block << " |\n";
  md << "| max threads per SM/CU | " << c.max_threads_per_sm << " |\n";
  md << "| warp size | " << c.warp_size << " |\n";
  md << "| registers per block | " << c.registers_per_block << " |\n";
  md << "| registers per SM/CU | " << c.registers_per_sm << " |\n";
  if (report.api.vendor == sim::Vendor::kAmdLike) {
    md << "| active CUs | " << report.api.active_cu_ids.size() << " of "
       << report.api.physical_cu_ids.size() << " physical ids |\n";
  }
  md << "\n## Memory\n";

  for (const auto& element : report.memory) {
    md << "\n### " << element.name << " (" << (element.scope.empty() ? "n/a" : element.scope)
       << ")\n\n";
    md << "| attribute | value | method | confidence |\n|---|---|---|---|\n";
    for (const auto& attr : kAttributeNames) {
      const auto& cell = element.cell(attr);
      const std::string method =
          cell.state == CellState::kValue ? probes::to_string(cell.result->method) : "";
      md << "| " << attr << " | " << cell_to_text(cell) << " | " << method << " | "
         << confidence_to_text(cell) << " |\n";
    }
  }

  md << "\n---\nseed " << report.provenance.seed << ", backend "
     << report.provenance.backend_id << ", version " << report.provenance.tool_version;
  if (!report.provenance.timestamp.empty()) md << ", " << report.provenance.timestamp;
  md << "\n";
  return md.str();
}

// ---------------------------------------------------------------------------
// CSV

std::string render_raw_csv(const stats::LatencyMatrix& matrix) {
  std::ostringstream csv;
  csv << "array_size_bytes,sample_index,latency_cycles\n";
  for (const auto& row : matrix.rows) {
    for (std::size_t i = 0; i < row.latencies.size(); ++i) {
      csv << row.array_size_bytes << ',' << i << ','
          << static_cast<std::int64_t>(row.latencies[i]) << '\n';
    }
  }
  return csv.str();
}

std::string render_reduced_csv(const stats::ReducedSeries& series) {
  std::ostringstream csv;
  csv << "array_size_bytes,score\n";
  char buf[48];
  for (const auto& p : series.points) {
    std::snprintf(buf, sizeof(buf), "%.17g", p.score);
    csv << p.array_size_bytes << ',' << buf << '\n';
  }
  return csv.str();
}

stats::LatencyMatrix parse_raw_csv(const std::string& text) {
  std::istringstream in(text);
  std::string line;
  if (!std::getline(in, line) || line != "array_size_bytes,sample_index,latency_cycles")
    throw InputError("raw CSV: bad header");
  stats::LatencyMatrix matrix;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    std::uint64_t size = 0;
    std::uint64_t index = 0;
    long long latency = 0;
    if (std::sscanf(line.c_str(), "%llu,%llu,%lld",
                    reinterpret_cast<unsigned long long*>(&size),
                    reinterpret_cast<unsigned long long*>(&index), &latency) != 3)
      throw InputError("raw CSV: bad row '" + line + "'");
    if (matrix.rows.empty() || matrix.rows.back().array_size_bytes != size)
      matrix.rows.push_back({size, {}});
    matrix.rows.back().latencies.push_back(static_cast<double>(latency));
  }
  return matrix;
}

void write_file(const std::string& path, const std::string& content) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw InputError("cannot write '" + path + "'");
  out << content;
  if (!out) throw InputError("write to '" + path + "' failed");
}

}  // namespace topoprobe::report
