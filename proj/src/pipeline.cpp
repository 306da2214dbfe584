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

#include "topoprobe/pipeline.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>
#include <map>

#include "topoprobe/errors.hpp"

namespace {

using topoprobe::probes::PlanMethod;
using P = PlanMethod;

struct CellMethods {
  P size;
  P latency;
  P bandwidth;  // expands to read_bw and write_bw
  P line_size;
  P fetch_granularity;
  P amount;
  P shared_with;
};

struct ElementDef {
  const char* name;
  const char* space;
  bool bypass_first = false;           // probe the level behind the space's first cache
  CellMethods methods{};
  std::uint64_t search_cap_bytes = 0;  // 0 -> engine default
  bool l2_alignment = false;           // segment count via API-total alignment
};

constexpr std::uint64_t kConstantCap = 64 * 1024;  // constant-array limit

const std::vector<ElementDef>& catalog(topoprobe::sim::Vendor vendor) {
  static const std::vector<ElementDef> nvidia = {
      {"L1", "global", false,
       {P::kBenchmark, P::kBenchmark, P::kNotAvailable, P::kBenchmark, P::kBenchmark,
        P::kBenchmark, P::kBenchmark}},
      {"L2", "l2", false,
       {P::kApi, P::kBenchmark, P::kBenchmark, P::kBenchmark, P::kBenchmark, P::kBenchmark,
        P::kNotApplicable},
       0, true},
      {"Texture", "texture", false,
       {P::kBenchmark, P::kBenchmark, P::kNotAvailable, P::kBenchmark, P::kBenchmark,
        P::kBenchmark, P::kBenchmark}},
      {"Readonly", "readonly", false,
       {P::kBenchmark, P::kBenchmark, P::kNotAvailable, P::kBenchmark, P::kBenchmark,
        P::kBenchmark, P::kBenchmark}},
      {"Const L1", "constant", false,
       {P::kBenchmark, P::kBenchmark, P::kNotAvailable, P::kBenchmark, P::kBenchmark,
        P::kBenchmark, P::kBenchmark},
       kConstantCap},
      {"Const L1.5", "constant", true,
       {P::kBenchmark, P::kBenchmark, P::kNotAvailable, P::kBenchmark, P::kBenchmark,
        P::kNotAvailable, P::kNotApplicable},
       kConstantCap},
      {"Shared Memory", "shared", false,
       {P::kApi, P::kBenchmark, P::kNotAvailable, P::kNotApplicable, P::kNotApplicable,
        P::kNotApplicable, P::kNotApplicable}},
      {"Device Memory", "device", false,
       {P::kApi, P::kBenchmark, P::kBenchmark, P::kNotApplicable, P::kNotApplicable,
        P::kNotApplicable, P::kNotApplicable}},
  };
  static const std::vector<ElementDef> amd = {
      {"vL1", "global", false,
       {P::kBenchmark, P::kBenchmark, P::kNotAvailable, P::kBenchmark, P::kBenchmark,
        P::kBenchmark, P::kNotApplicable}},
      {"sL1d", "scalar", false,
       {P::kBenchmark, P::kBenchmark, P::kNotAvailable, P::kBenchmark, P::kBenchmark,
        P::kNotApplicable, P::kBenchmark}},
      {"L2", "l2", false,
       {P::kApi, P::kBenchmark, P::kBenchmark, P::kApi, P::kBenchmark, P::kApi,
        P::kNotApplicable},
       0, true},
      {"L3", "l3", false,
       {P::kApi, P::kNotAvailable, P::kBenchmark, P::kApi, P::kNotAvailable, P::kApi,
        P::kNotApplicable}},
      {"LDS", "lds", false,
       {P::kApi, P::kBenchmark, P::kNotAvailable, P::kNotApplicable, P::kNotApplicable,
        P::kNotApplicable, P::kNotApplicable}},
      {"Device Memory", "device", false,
       {P::kApi, P::kBenchmark, P::kBenchmark, P::kNotApplicable, P::kNotApplicable,
        P::kNotApplicable, P::kNotApplicable}},
  };
  return vendor == topoprobe::sim::Vendor::kNvidiaLike ? nvidia : amd;
}

P method_for(const ElementDef& def, const std::string& attribute) {
  if (attribute == "size") return def.methods.size;
  if (attribute == "latency") return def.methods.latency;
  if (attribute == "read_bw" || attribute == "write_bw") return def.methods.bandwidth;
  if (attribute == "line_size") return def.methods.line_size;
  if (attribute == "fetch_granularity") return def.methods.fetch_granularity;
  if (attribute == "amount") return def.methods.amount;
  if (attribute == "shared_with") return def.methods.shared_with;
  throw topoprobe::InputError("unknown attribute '" + attribute + "'");
}

// Dependency order: fetch granularity before latency and line size, size
// before amount and line size, the segment count before the L2 line probe.
const std::vector<std::string> kExecutionOrder = {
    "size", "fetch_granularity", "latency", "read_bw", "write_bw", "amount", "line_size"};

// The amd L3 row collapses to markers when the device exposes no L3.
bool l3_absent(const topoprobe::sim::ApiInfo& api, topoprobe::sim::Vendor vendor,
               const char* element) {
  return vendor == topoprobe::sim::Vendor::kAmdLike && std::string(element) == "L3" &&
         !api.has("l3", "size");
}

}  // namespace

namespace topoprobe::probes {

std::string to_string(PlanMethod m) {
  switch (m) {
    case PlanMethod::kApi: return "api";
    case PlanMethod::kBenchmark: return "benchmark";
    case PlanMethod::kNotApplicable: return "not-applicable";
    case PlanMethod::kNotAvailable: return "not-available";
  }
  return "benchmark";
}

std::vector<PlanCell> plan_benchmarks(const sim::ApiInfo& api_info, sim::Vendor vendor) {
  std::vector<PlanCell> plan;
  for (const auto& def : catalog(vendor)) {
    const bool absent = l3_absent(api_info, vendor, def.name);
    for (const auto& attribute : kExecutionOrder)
      plan.push_back(
          {def.name, attribute, absent ? P::kNotApplicable : method_for(def, attribute)});
  }
  for (const auto& def : catalog(vendor)) {
    const bool absent = l3_absent(api_info, vendor, def.name);
    plan.push_back(
        {def.name, "shared_with", absent ? P::kNotApplicable : def.methods.shared_with});
  }
  return plan;
}

}  // namespace topoprobe::probes

namespace topoprobe::pipeline {

namespace {

using probes::AttributeResult;
using report::AttributeCell;
using report::CellResult;

std::uint64_t fnv1a(const std::string& s) {
  std::uint64_t h = 1469598103934665603ull;
  for (unsigned char c : s) {
    h ^= c;
    h *= 1099511628211ull;
  }
  return h;
}

bool iequals(const std::string& a, const std::string& b) {
  if (a.size() != b.size()) return false;
  for (std::size_t i = 0; i < a.size(); ++i)
    if (std::tolower(static_cast<unsigned char>(a[i])) !=
        std::tolower(static_cast<unsigned char>(b[i])))
      return false;
  return true;
}

bool element_selected(const DiscoveryOptions& options, const std::string& element) {
  if (!options.only_element) return true;
  return iequals(element, *options.only_element) ||
         element_slug(element) == element_slug(*options.only_element);
}

AttributeCell marker_cell(P method, const std::string& note = "") {
  switch (method) {
    case P::kNotApplicable:
      return AttributeCell::not_applicable();
    case P::kNotAvailable:
      return AttributeCell::not_available(note);
    default:
      return AttributeCell::inconclusive(note);
  }
}

// Per-element probe state threaded through the attribute loop.
struct ElementRun {
  bool present = false;
  std::set<std::string> bypass;
  std::string scope;
  std::string target;  // first non-bypassed level
  std::optional<double> size_value;
  std::optional<double> fetch_granularity;
};

}  // namespace

std::string element_slug(const std::string& name) {
  std::string slug;
  for (unsigned char c : name) {
    if (std::isalnum(c))
      slug.push_back(static_cast<char>(std::tolower(c)));
    else if (!slug.empty() && slug.back() != '-')
      slug.push_back('-');
  }
  while (!slug.empty() && slug.back() == '-') slug.pop_back();
  return slug;
}

DiscoveryResult run_discovery(const sim::DeviceSpec& spec, const DiscoveryOptions& options) {
  sim::validate_device_spec(spec);
  const sim::ApiInfo api = sim::device_info(spec);
  const auto plan = probes::plan_benchmarks(api, spec.vendor);
  const auto& defs = catalog(spec.vendor);

  probes::ProbeOptions base_opts;
  if (!options.alpha_grid.empty()) base_opts.alpha_grid = options.alpha_grid;

  DiscoveryResult out;
  std::vector<CellResult> results;
  std::vector<report::PlanCellRef> plan_refs;
  for (const auto& cell : plan)
    if (element_selected(options, cell.element))
      plan_refs.push_back({cell.element, cell.attribute});

  std::map<std::string, ElementRun> runs;

  for (const auto& def : defs) {
    if (!element_selected(options, def.name)) continue;
    auto& run = runs[def.name];

    const auto* traversal = spec.find_space(def.space);
    run.present = traversal != nullptr && !l3_absent(api, spec.vendor, def.name);
    if (run.present && def.bypass_first) {
      // A Const-L1.5-style probe needs a dedicated per-SM cache behind the
      // space's first level.
      run.present = traversal->size() >= 3 && spec.find_level((*traversal)[1])->is_cache &&
                    spec.find_level((*traversal)[1])->scope == sim::Scope::kPerSm;
      if (run.present) run.bypass.insert((*traversal)[0]);
    }
    if (run.present) {
      for (const auto& level : *traversal) {
        if (!run.bypass.count(level)) {
          run.target = level;
          break;
        }
      }
      run.scope = sim::to_string(spec.find_level(run.target)->scope);
    }

    auto emit = [&](const std::string& attribute, AttributeCell cell) {
      results.push_back({def.name, attribute, std::move(cell), run.scope});
    };

    if (!run.present) {
      for (const auto& attribute : kExecutionOrder)
        emit(attribute, AttributeCell::not_applicable());
      continue;
    }

    probes::SimulatorBackend backend(spec, options.seed ^ fnv1a(def.name));
    probes::ProbeOptions opts = base_opts;
    if (def.search_cap_bytes) opts.search_cap_bytes = def.search_cap_bytes;

    const double api_total =
        api.has(run.target, "size") ? api.get(run.target, "size") : 0.0;
    std::optional<double> segment_size;

    for (const auto& attribute : kExecutionOrder) {
      const P method = method_for(def, attribute);
      if (method == P::kNotApplicable || method == P::kNotAvailable) {
        emit(attribute, marker_cell(method));
        continue;
      }

      try {
        if (attribute == "size") {
          if (method == P::kApi) {
            if (api_total > 0) {
              run.size_value = api_total;
              emit(attribute,
                   AttributeCell::from_result(AttributeResult::api_value(api_total, "bytes")));
            } else {
              emit(attribute, AttributeCell::inconclusive("API exposes no size"));
            }
          } else {
            auto m = probes::measure_cache_size(backend, def.space, run.bypass, opts, true);
            run.size_value = m.result.value;
            opts.size_step_hint_bytes = m.sweep_step_bytes;
            if (options.collect_artifacts && !m.matrix.rows.empty())
              out.artifacts.push_back(
                  {def.name, std::move(m.matrix), std::move(m.series)});
            emit(attribute, AttributeCell::from_result(std::move(m.result)));
          }
        } else if (attribute == "fetch_granularity") {
          const std::uint64_t over_capacity =
              run.size_value ? static_cast<std::uint64_t>(2 * *run.size_value) : 0;
          auto r = probes::measure_fetch_granularity(backend, def.space, run.bypass,
                                                     over_capacity, opts);
          run.fetch_granularity = r.value;
          if (r.value) opts.known_fetch_granularity = static_cast<std::uint32_t>(*r.value);
          emit(attribute, AttributeCell::from_result(std::move(r)));
        } else if (attribute == "latency") {
          const std::uint32_t fg =
              run.fetch_granularity ? static_cast<std::uint32_t>(*run.fetch_granularity)
                                    : opts.fallback_granule_bytes;
          const std::uint64_t cap =
              run.size_value ? static_cast<std::uint64_t>(*run.size_value) : 0;
          auto s = probes::measure_load_latency(backend, def.space, run.bypass, fg, opts, cap);
          AttributeResult r;
          r.latency = s;
          r.unit = "cycles";
          r.confidence = 1.0;
          r.method = probes::Method::kBenchmark;
          emit(attribute, AttributeCell::from_result(std::move(r)));
        } else if (attribute == "read_bw" || attribute == "write_bw") {
          auto r = probes::measure_bandwidth(
              backend, def.space,
              attribute == "read_bw" ? sim::Direction::kRead : sim::Direction::kWrite, opts);
          emit(attribute, AttributeCell::from_result(std::move(r)));
        } else if (attribute == "amount") {
          if (method == P::kApi) {
            if (api.has(run.target, "amount"))
              emit(attribute, AttributeCell::from_result(AttributeResult::api_value(
                                  api.get(run.target, "amount"), "segments")));
            else
              emit(attribute, AttributeCell::inconclusive("API exposes no segment count"));
          } else if (def.l2_alignment) {
            auto r = probes::measure_l2_segments(backend, def.space, run.bypass, api_total,
                                                 spec.vendor, opts);
            if (r.value && *r.value > 0) segment_size = api_total / *r.value;
            emit(attribute, AttributeCell::from_result(std::move(r)));
          } else if (run.size_value) {
            auto r = probes::measure_amount(backend, def.space, run.bypass,
                                            static_cast<std::uint64_t>(*run.size_value),
                                            spec.compute.cores_per_sm, opts);
            emit(attribute, AttributeCell::from_result(std::move(r)));
          } else {
            emit(attribute, AttributeCell::inconclusive("requires the cache size"));
          }
        } else if (attribute == "line_size") {
          if (method == P::kApi) {
            if (api.has(run.target, "line_size"))
              emit(attribute, AttributeCell::from_result(AttributeResult::api_value(
                                  api.get(run.target, "line_size"), "bytes")));
            else
              emit(attribute, AttributeCell::inconclusive("API exposes no line size"));
          } else {
            // The L2 probe sweeps around one aligned segment, not the total.
            std::uint64_t size_input = 0;
            if (def.l2_alignment && segment_size)
              size_input = static_cast<std::uint64_t>(*segment_size);
            else if (!def.l2_alignment && run.size_value)
              size_input = static_cast<std::uint64_t>(*run.size_value);
            const std::uint32_t fg =
                run.fetch_granularity ? static_cast<std::uint32_t>(*run.fetch_granularity) : 0;
            auto r = probes::measure_cache_line_size(backend, def.space, run.bypass,
                                                     size_input, fg, opts);
            emit(attribute, AttributeCell::from_result(std::move(r)));
          }
        }
      } catch (const UnsupportedMeasurementError& e) {
        emit(attribute, AttributeCell::not_available(e.what()));
      }
    }
  }

  // Physical sharing runs last, once every participating size is known.
  auto emit_shared = [&](const std::string& element, AttributeCell cell) {
    results.push_back({element, "shared_with", std::move(cell), ""});
  };

  if (spec.vendor == sim::Vendor::kNvidiaLike) {
    const bool filtered = options.only_element.has_value();
    std::vector<probes::SharingTarget> targets;
    for (const auto& def : defs) {
      if (def.methods.shared_with != P::kBenchmark) continue;
      const auto it = runs.find(def.name);
      if (it == runs.end() || !it->second.present || !it->second.size_value) continue;
      targets.push_back({def.name, def.space, it->second.bypass,
                         static_cast<std::uint64_t>(*it->second.size_value),
                         it->second.fetch_granularity
                             ? static_cast<std::uint32_t>(*it->second.fetch_granularity)
                             : 0});
    }
    std::map<std::string, std::vector<std::string>> groups;
    if (!filtered && targets.size() >= 2) {
      probes::SimulatorBackend backend(spec, options.seed ^ fnv1a("physical-sharing"));
      groups = probes::measure_physical_sharing(backend, targets, base_opts);
    } else if (!filtered && targets.size() == 1) {
      groups[targets.front().element] = {targets.front().element};
    }
    for (const auto& def : defs) {
      if (!element_selected(options, def.name)) continue;
      const auto& run = runs[def.name];
      if (!run.present) {
        emit_shared(def.name, AttributeCell::not_applicable());
        continue;
      }
      if (def.methods.shared_with != P::kBenchmark) {
        emit_shared(def.name, marker_cell(def.methods.shared_with));
        continue;
      }
      if (filtered) {
        emit_shared(def.name,
                    AttributeCell::not_available(
                        "skipped by the element filter (needs the other elements' sizes)"));
      } else if (groups.count(def.name)) {
        AttributeResult r;
        r.sharing = groups[def.name];
        r.confidence = 1.0;
        r.method = probes::Method::kBenchmark;
        emit_shared(def.name, AttributeCell::from_result(std::move(r)));
      } else {
        emit_shared(def.name, AttributeCell::inconclusive("requires the cache size"));
      }
    }
  } else {
    for (const auto& def : defs) {
      if (!element_selected(options, def.name)) continue;
      const auto& run = runs[def.name];
      if (!run.present) {
        emit_shared(def.name, AttributeCell::not_applicable());
        continue;
      }
      if (def.methods.shared_with != P::kBenchmark) {
        emit_shared(def.name, marker_cell(def.methods.shared_with));
        continue;
      }
      if (!run.size_value) {
        emit_shared(def.name, AttributeCell::inconclusive("requires the cache size"));
        continue;
      }
      try {
        probes::SimulatorBackend backend(spec, options.seed ^ fnv1a("sl1d-sharing"));
        probes::ProbeOptions sharing_opts = base_opts;
        if (run.fetch_granularity)
          sharing_opts.known_fetch_granularity =
              static_cast<std::uint32_t>(*run.fetch_granularity);
        auto sharing = probes::measure_sl1d_sharing(
            backend, spec.cu_topology.active_cu_ids,
            static_cast<std::uint64_t>(*run.size_value), sharing_opts);
        AttributeResult r;
        r.cu_groups = sharing.groups;
        r.confidence = 1.0;
        r.method = probes::Method::kBenchmark;
        r.note = std::to_string(sharing.exclusive_cus.size()) + " exclusive CUs";
        emit_shared(def.name, AttributeCell::from_result(std::move(r)));
      } catch (const UnsupportedMeasurementError& e) {
        emit_shared(def.name, AttributeCell::not_available(e.what()));
      }
    }
  }

  report::Provenance provenance;
  provenance.tool_version = kToolVersion;
  provenance.seed = options.seed;
  provenance.backend_id = "memsim";
  provenance.timestamp = options.timestamp;
  out.report = report::assemble_report(api, results, plan_refs, provenance);

  for (const auto& element : out.report.memory)
    for (const auto& attribute : report::kAttributeNames)
      if (element.cell(attribute).state == report::CellState::kInconclusive)
        out.any_inconclusive = true;

  return out;
}

}  // namespace topoprobe::pipeline
