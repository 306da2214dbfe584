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

#include <cstdint>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "topoprobe/backend.hpp"
#include "topoprobe/stats.hpp"

namespace topoprobe::probes {

enum class Method { kApi, kBenchmark, kLookup };

std::string to_string(Method m);

// One discovered attribute. A missing value with confidence 0 marks an
// inconclusive measurement; `note` says why.
struct AttributeResult {
  std::optional<double> value;
  std::string unit;
  double confidence = 0.0;
  Method method = Method::kBenchmark;
  std::optional<stats::SummaryStats> latency;            // latency results
  std::optional<std::vector<std::string>> sharing;       // physical sharing groups
  std::optional<std::vector<std::vector<int>>> cu_groups;  // sL1d groups
  std::string note;

  bool inconclusive() const { return !value && !latency && !sharing && !cu_groups; }

  static AttributeResult api_value(double v, std::string unit);
  static AttributeResult benchmark_value(double v, std::string unit, double confidence);
  static AttributeResult inconclusive_result(std::string note);
};

struct ProbeOptions {
  std::uint64_t search_floor_bytes = 1024;
  std::uint64_t search_cap_bytes = 1024ull * 1024;
  std::uint32_t timed_count = 512;
  std::uint32_t fallback_granule_bytes = 32;     // stride/step when FG is unknown
  std::uint32_t known_fetch_granularity = 0;     // 0 = not yet measured
  std::uint32_t max_sweep_rows = 4096;
  int max_widenings = 3;
  std::vector<double> alpha_grid = stats::kDefaultAlphaGrid;
  double boundary_margin_fraction = 0.05;
  double miss_fraction_threshold = 0.05;
  std::uint32_t line_size_cap_bytes = 1024;      // fetch-granularity stride cap
  std::uint32_t reference_array_bytes = 1024;
  // Step the size measurement swept with; the line probe starts its row grid
  // one step past the measured size so every row spills the cache.
  std::uint32_t size_step_hint_bytes = 0;
  sim::Actor actor;
};

// Per-access hit/miss classification: miss iff latency > (hit + miss) / 2.
std::vector<bool> classify_hit_miss(const Trace& trace, double hit_latency,
                                    double miss_latency);

// Hit latency of the chase target and of the next level behind it, measured
// with small resident arrays (spike-trimmed means).
struct LatencyRefs {
  double hit = 0.0;
  double miss = 0.0;
};

LatencyRefs latency_references(MeasurementBackend& backend, const std::string& space,
                               const std::set<std::string>& bypass, const ProbeOptions& opts);

struct SearchInterval {
  std::uint64_t lo_bytes = 0;  // largest all-hit size seen
  std::uint64_t hi_bytes = 0;  // smallest size with misses
};

// Doubles the chase size from the floor until the timed pass shows misses,
// then bisects until hi <= 2 * lo. Throws UnboundedSearchError when the cap
// is reached without misses.
SearchInterval find_search_interval(MeasurementBackend& backend, const std::string& space,
                                    const std::set<std::string>& bypass,
                                    const ProbeOptions& opts);

// One warm-up + timed chase per array size in [lo, hi], step bytes apart.
stats::LatencyMatrix size_sweep(MeasurementBackend& backend, const std::string& space,
                                const std::set<std::string>& bypass, SearchInterval interval,
                                std::uint32_t step_bytes, std::uint32_t stride_bytes,
                                const ProbeOptions& opts);

struct SizeMeasurement {
  AttributeResult result;
  std::uint32_t sweep_step_bytes = 0;
  stats::LatencyMatrix matrix;       // final sweep, kept for raw dumps
  stats::ReducedSeries series;
};

// The full size workflow: interval search, sweep, reduction, change-point
// detection, boundary-driven widening (at most max_widenings, x2 per flagged
// side). Returns the size as the last all-hit sweep size; confidence is the
// K-S significance level. With force_benchmark false, an API-exposed size is
// returned directly.
SizeMeasurement measure_cache_size(MeasurementBackend& backend, const std::string& space,
                                   const std::set<std::string>& bypass,
                                   const ProbeOptions& opts, bool force_benchmark = false);

// Timed chase over a 256 * fetch-granularity array (capped at max_array_bytes
// when given, so small caches are not overrun); spikes above 2.5 * p50 are
// trimmed before the stats.
stats::SummaryStats measure_load_latency(MeasurementBackend& backend, const std::string& space,
                                         const std::set<std::string>& bypass,
                                         std::uint32_t fetch_granularity,
                                         const ProbeOptions& opts,
                                         std::uint64_t max_array_bytes = 0);

// Grows the stride in 4-byte steps over an over-capacity chase until the
// timed pass is all misses; that stride is the fetch granularity.
AttributeResult measure_fetch_granularity(MeasurementBackend& backend, const std::string& space,
                                          const std::set<std::string>& bypass,
                                          std::uint64_t over_capacity_bytes,
                                          const ProbeOptions& opts);

// Pivot/MAX stride heuristic around the cache boundary; reports the largest
// power of two at or below the stride where the behavior flips to MAX-like.
AttributeResult measure_cache_line_size(MeasurementBackend& backend, const std::string& space,
                                        const std::set<std::string>& bypass,
                                        std::uint64_t size_bytes, std::uint32_t fetch_granularity,
                                        const ProbeOptions& opts);

// Two synchronized cores in one SM: A warms, B warms, A re-runs timed. The
// first core-B index that leaves A's data resident reveals the segment count
// as cores_per_sm / index.
AttributeResult measure_amount(MeasurementBackend& backend, const std::string& space,
                               const std::set<std::string>& bypass, std::uint64_t size_bytes,
                               std::uint32_t cores_per_sm, const ProbeOptions& opts);

// Nearest integer fraction alignment of a measured segment size against the
// API total; exposed separately for direct verification.
struct SegmentAlignment {
  int segments = 0;
  double confidence = 0.0;
};

SegmentAlignment align_segment_size(double api_total_bytes, double measured_segment_bytes);

// nvidia-like: benchmarks one segment of the level behind `space` and aligns
// it against the API total. amd-like: reports the API segment count.
AttributeResult measure_l2_segments(MeasurementBackend& backend, const std::string& space,
                                    const std::set<std::string>& bypass,
                                    double api_l2_total_bytes, sim::Vendor vendor,
                                    const ProbeOptions& opts);

struct SharingTarget {
  std::string element;
  std::string space;
  std::set<std::string> bypass;
  std::uint64_t size_bytes = 0;
  std::uint32_t fetch_granularity = 0;  // 0 -> fallback granule
};

// Warm A, warm B, timed pass on A, sequentially on one core; eviction means
// the two spaces share a physical cache. Returns the transitive-closure
// group for every element.
std::map<std::string, std::vector<std::string>> measure_physical_sharing(
    MeasurementBackend& backend, const std::vector<SharingTarget>& targets,
    const ProbeOptions& opts);

struct Sl1dSharing {
  std::vector<std::vector<int>> groups;  // over active CU ids, each sorted
  std::vector<int> exclusive_cus;        // singleton groups
};

// Cross-CU paired eviction probe on the scalar space over all active CU
// pairs.
Sl1dSharing measure_sl1d_sharing(MeasurementBackend& backend,
                                 const std::vector<int>& active_cu_ids,
                                 std::uint64_t sl1d_size_bytes, const ProbeOptions& opts);

// Stream at maximum threads with num_sm * max_blocks_per_sm blocks.
AttributeResult measure_bandwidth(MeasurementBackend& backend, const std::string& space,
                                  sim::Direction direction, const ProbeOptions& opts);

enum class PlanMethod { kApi, kBenchmark, kNotApplicable, kNotAvailable };

std::string to_string(PlanMethod m);

struct PlanCell {
  std::string element;
  std::string attribute;
  PlanMethod method = PlanMethod::kBenchmark;
};

// The full element x attribute coverage matrix for the vendor, in execution
// order: per element [size, fetch_granularity, latency, read_bw, write_bw,
// amount, line_size], then every shared_with cell. API cells are never
// benchmarked; not-applicable/not-available cells become report markers.
std::vector<PlanCell> plan_benchmarks(const sim::ApiInfo& api_info, sim::Vendor vendor);

}  // namespace topoprobe::probes
