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

#include "topoprobe/probes.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <limits>
#include <numeric>

#include "topoprobe/errors.hpp"

namespace topoprobe::probes {

std::string to_string(Method m) {
  switch (m) {
    case Method::kApi: return "api";
    case Method::kBenchmark: return "benchmark";
    case Method::kLookup: return "lookup";
  }
  return "benchmark";
}

AttributeResult AttributeResult::api_value(double v, std::string unit) {
  AttributeResult r;
  r.value = v;
  r.unit = std::move(unit);
  r.confidence = 1.0;
  r.method = Method::kApi;
  return r;
}

AttributeResult AttributeResult::benchmark_value(double v, std::string unit,
                                                 double confidence) {
  AttributeResult r;
  r.value = v;
  r.unit = std::move(unit);
  r.confidence = confidence;
  r.method = Method::kBenchmark;
  return r;
}

AttributeResult AttributeResult::inconclusive_result(std::string note) {
  AttributeResult r;
  r.confidence = 0.0;
  r.method = Method::kBenchmark;
  r.note = std::move(note);
  return r;
}

namespace {

double trimmed_mean(const stats::Sample& sample) {
  const auto s = stats::summary_stats(sample);
  const double cutoff = 2.5 * s.p50;
  double sum = 0.0;
  std::size_t n = 0;
  for (double v : sample) {
    if (v <= cutoff) {
      sum += v;
      ++n;
    }
  }
  return n > 0 ? sum / static_cast<double>(n) : s.mean;
}

std::uint32_t chase_granule(const ProbeOptions& opts) {
  return opts.known_fetch_granularity > 0 ? opts.known_fetch_granularity
                                          : opts.fallback_granule_bytes;
}

// First level of the traversal that is not bypassed.
std::string target_level(MeasurementBackend& backend, const std::string& space,
                         const std::set<std::string>& bypass, std::size_t* depth_left = nullptr) {
  const auto caps = backend.capabilities();
  const auto* levels = caps.levels_for(space);
  if (!levels) throw InputError("backend does not support space '" + space + "'");
  for (std::size_t i = 0; i < levels->size(); ++i) {
    const bool last = i + 1 == levels->size();
    if (!last && bypass.count((*levels)[i])) continue;
    if (depth_left) *depth_left = levels->size() - i;
    return (*levels)[i];
  }
  throw InputError("space '" + space + "' has no usable level");
}

PChasePlan make_plan(const std::string& space, const std::set<std::string>& bypass,
                     std::uint64_t array_bytes, std::uint32_t stride,
                     const ProbeOptions& opts, int buffer_id = 0) {
  PChasePlan plan;
  plan.space = space;
  plan.bypass = bypass;
  plan.array_bytes = array_bytes;
  plan.stride_bytes = stride;
  const std::uint64_t chain = array_bytes / stride;
  plan.timed_count = static_cast<std::uint32_t>(
      std::min<std::uint64_t>(opts.timed_count, chain));
  plan.warmup = true;
  plan.actor = opts.actor;
  plan.buffer_id = buffer_id;
  return plan;
}

std::size_t count_misses(const Trace& trace, const LatencyRefs& refs) {
  const auto flags = classify_hit_miss(trace, refs.hit, refs.miss);
  return static_cast<std::size_t>(std::count(flags.begin(), flags.end(), true));
}

bool shows_misses(const Trace& trace, const LatencyRefs& refs, const ProbeOptions& opts) {
  const std::size_t misses = count_misses(trace, refs);
  const std::size_t floor = std::max<std::size_t>(
      2, static_cast<std::size_t>(
             std::ceil(opts.miss_fraction_threshold *
                       static_cast<double>(trace.latencies.size()))));
  // Two misses suffice on short traces; longer ones additionally need four
  // so that rare latency spikes cannot fake an eviction.
  const std::size_t needed = trace.latencies.size() >= 128 ? std::max<std::size_t>(floor, 4)
                                                           : floor;
  return misses >= needed;
}

// Eviction verdict for the three-phase probes: an evicted chase misses on
// 50-100% of its loads (50% when the stride is half the fetch granularity),
// an undisturbed one only on rare spikes.
bool evicted(const Trace& trace, const LatencyRefs& refs) {
  return count_misses(trace, refs) * 4 >= trace.latencies.size();
}

}  // namespace

std::vector<bool> classify_hit_miss(const Trace& trace, double hit_latency,
                                    double miss_latency) {
  if (!(hit_latency < miss_latency))
    throw InputError("classify_hit_miss: hit latency must be below miss latency");
  const double midpoint = 0.5 * (hit_latency + miss_latency);
  std::vector<bool> miss(trace.latencies.size());
  for (std::size_t i = 0; i < trace.latencies.size(); ++i)
    miss[i] = trace.latencies[i] > midpoint;
  return miss;
}

LatencyRefs latency_references(MeasurementBackend& backend, const std::string& space,
                               const std::set<std::string>& bypass,
                               const ProbeOptions& opts) {
  std::size_t depth = 0;
  const std::string target = target_level(backend, space, bypass, &depth);
  if (depth < 2)
    throw UnsupportedMeasurementError("space '" + space +
                                      "' has no level behind '" + target +
                                      "' to classify misses against");
  const std::uint32_t stride = chase_granule(opts);

  LatencyRefs refs;
  auto hit_trace =
      backend.run_pchase(make_plan(space, bypass, opts.reference_array_bytes, stride, opts));
  refs.hit = trimmed_mean(hit_trace.latencies);

  std::set<std::string> next_bypass = bypass;
  next_bypass.insert(target);
  auto miss_trace = backend.run_pchase(
      make_plan(space, next_bypass, opts.reference_array_bytes, stride, opts));
  refs.miss = trimmed_mean(miss_trace.latencies);

  if (!(refs.hit < refs.miss))
    throw UnsupportedMeasurementError("reference latencies of '" + space +
                                      "' do not separate hit from miss");
  return refs;
}

SearchInterval find_search_interval(MeasurementBackend& backend, const std::string& space,
                                    const std::set<std::string>& bypass,
                                    const ProbeOptions& opts) {
  const LatencyRefs refs = latency_references(backend, space, bypass, opts);
  const std::uint32_t stride = chase_granule(opts);

  auto misses_at = [&](std::uint64_t size) {
    return shows_misses(backend.run_pchase(make_plan(space, bypass, size, stride, opts)),
                        refs, opts);
  };

  std::uint64_t lo = 0;
  std::uint64_t hi = 0;
  for (std::uint64_t size = opts.search_floor_bytes; size <= opts.search_cap_bytes;
       size *= 2) {
    if (misses_at(size)) {
      hi = size;
      lo = size / 2;  // last all-hit size (the floor's half when it missed at once)
      break;
    }
    lo = size;
  }
  if (hi == 0) throw UnboundedSearchError(opts.search_floor_bytes, opts.search_cap_bytes);

  while (hi > 2 * lo) {
    std::uint64_t mid = (lo + hi) / 2;
    mid -= mid % stride;
    if (mid <= lo || mid >= hi) break;
    if (misses_at(mid))
      hi = mid;
    else
      lo = mid;
  }
  return {lo, hi};
}

stats::LatencyMatrix size_sweep(MeasurementBackend& backend, const std::string& space,
                                const std::set<std::string>& bypass, SearchInterval interval,
                                std::uint32_t step_bytes, std::uint32_t stride_bytes,
                                const ProbeOptions& opts) {
  if (step_bytes == 0 || stride_bytes == 0) throw InputError("size_sweep: zero step or stride");
  if (interval.lo_bytes >= interval.hi_bytes)
    throw InputError("size_sweep: empty interval");

  // Rows must share one trace length; clamp to the smallest chain.
  const std::uint32_t timed = static_cast<std::uint32_t>(std::min<std::uint64_t>(
      opts.timed_count, interval.lo_bytes / stride_bytes));
  if (timed < 16)
    throw InputError("size_sweep: interval too small for 16 timed loads per row");

  stats::LatencyMatrix matrix;
  for (std::uint64_t size = interval.lo_bytes; size <= interval.hi_bytes; size += step_bytes) {
    PChasePlan plan = make_plan(space, bypass, size, stride_bytes, opts);
    plan.timed_count = timed;
    Trace trace = backend.run_pchase(plan);
    matrix.rows.push_back({size, std::move(trace.latencies)});
  }
  return matrix;
}

SizeMeasurement measure_cache_size(MeasurementBackend& backend, const std::string& space,
                                   const std::set<std::string>& bypass,
                                   const ProbeOptions& opts, bool force_benchmark) {
  SizeMeasurement out;

  if (!force_benchmark) {
    const auto api = backend.query_api_info();
    const std::string target = target_level(backend, space, bypass);
    if (api.has(target, "size")) {
      out.result = AttributeResult::api_value(api.get(target, "size"), "bytes");
      return out;
    }
  }

  SearchInterval interval;
  try {
    interval = find_search_interval(backend, space, bypass, opts);
  } catch (const UnboundedSearchError& e) {
    out.result = AttributeResult::inconclusive_result(
        "no misses up to " + std::to_string(e.hi_bytes()) + " bytes (>" +
        std::to_string(e.hi_bytes() / 1024) + " KiB)");
    return out;
  }

  // Detection runs on a spike-capped copy of the sweep: an outlier on a hit
  // row can otherwise reach miss-row score territory and drag the change
  // point a few rows off. The retained matrix stays raw.
  const double spike_cap = 1.25 * latency_references(backend, space, bypass, opts).miss;

  const std::uint32_t granule = chase_granule(opts);
  double max_score_range = 0.0;

  const std::uint64_t widen_cap = backend.capabilities().device_memory_bytes / 8;
  std::optional<stats::ChangePointResult> cp;
  int widenings = 0;
  for (;;) {
    // Step defaults to the fetch granularity; raised so the sweep stays
    // within max_sweep_rows. The chase stride stays at the granule.
    std::uint64_t step = granule;
    const std::uint64_t width = interval.hi_bytes - interval.lo_bytes;
    if (width / step + 1 > opts.max_sweep_rows) {
      const std::uint64_t span = opts.max_sweep_rows - 1;
      step = (width + span - 1) / span;
      step += (granule - step % granule) % granule;  // keep granule-aligned
    }
    out.sweep_step_bytes = static_cast<std::uint32_t>(step);

    out.matrix = size_sweep(backend, space, bypass, interval,
                            static_cast<std::uint32_t>(step), granule, opts);
    out.series = stats::reduce_geometric(out.matrix);

    stats::LatencyMatrix capped = out.matrix;
    for (auto& row : capped.rows)
      for (auto& v : row.latencies) v = std::min(v, spike_cap);
    const auto detection_series = stats::reduce_geometric(capped);

    double lo_score = detection_series.points.front().score;
    double hi_score = lo_score;
    for (const auto& p : detection_series.points) {
      lo_score = std::min(lo_score, p.score);
      hi_score = std::max(hi_score, p.score);
    }
    max_score_range = std::max(max_score_range, hi_score - lo_score);

    cp = detect_change_point(detection_series, opts.alpha_grid);
    const auto verdict = stats::boundary_outlier_check(
        detection_series, cp, {interval.lo_bytes, interval.hi_bytes},
        opts.boundary_margin_fraction, 0.01 * max_score_range);
    if (verdict == stats::BoundaryVerdict::kAccept || widenings >= opts.max_widenings) break;

    ++widenings;
    if (verdict == stats::BoundaryVerdict::kWidenLow ||
        verdict == stats::BoundaryVerdict::kWidenBoth)
      interval.lo_bytes = std::max<std::uint64_t>(opts.search_floor_bytes / 2,
                                                  interval.lo_bytes / 2);
    if (verdict == stats::BoundaryVerdict::kWidenHigh ||
        verdict == stats::BoundaryVerdict::kWidenBoth)
      interval.hi_bytes = std::min(interval.hi_bytes * 2, widen_cap);
  }

  if (!cp) {
    out.result = AttributeResult::inconclusive_result(
        "no change point in [" + std::to_string(interval.lo_bytes) + ", " +
        std::to_string(interval.hi_bytes) + "] after " + std::to_string(widenings) +
        " widenings");
    return out;
  }

  // The change point is the first size whose loads miss; the cache holds the
  // previous sweep size.
  const double size = static_cast<double>(cp->value_bytes - out.sweep_step_bytes);
  out.result = AttributeResult::benchmark_value(size, "bytes", cp->significance);
  char alpha[24];
  std::snprintf(alpha, sizeof(alpha), "%g", cp->significance);
  out.result.note = "change point at " + std::to_string(cp->value_bytes) +
                    " bytes, rejected at alpha=" + alpha;
  return out;
}

stats::SummaryStats measure_load_latency(MeasurementBackend& backend, const std::string& space,
                                         const std::set<std::string>& bypass,
                                         std::uint32_t fetch_granularity,
                                         const ProbeOptions& opts,
                                         std::uint64_t max_array_bytes) {
  if (fetch_granularity == 0) throw InputError("measure_load_latency: zero fetch granularity");
  std::uint64_t array = 256ull * fetch_granularity;
  if (max_array_bytes >= fetch_granularity && max_array_bytes < array)
    array = max_array_bytes - max_array_bytes % fetch_granularity;
  Trace trace =
      backend.run_pchase(make_plan(space, bypass, array, fetch_granularity, opts));

  // Spikes sit far above p50; drop them before the stats.
  const auto raw = stats::summary_stats(trace.latencies);
  stats::Sample trimmed;
  trimmed.reserve(trace.latencies.size());
  for (double v : trace.latencies)
    if (v <= 2.5 * raw.p50) trimmed.push_back(v);
  return stats::summary_stats(trimmed.empty() ? trace.latencies : trimmed);
}

AttributeResult measure_fetch_granularity(MeasurementBackend& backend,
                                          const std::string& space,
                                          const std::set<std::string>& bypass,
                                          std::uint64_t over_capacity_bytes,
                                          const ProbeOptions& opts) {
  if (over_capacity_bytes == 0)
    return AttributeResult::inconclusive_result("no over-capacity array size available");
  const LatencyRefs refs = latency_references(backend, space, bypass, opts);

  for (std::uint32_t stride = 4; stride <= opts.line_size_cap_bytes; stride += 4) {
    Trace trace =
        backend.run_pchase(make_plan(space, bypass, over_capacity_bytes, stride, opts));
    const std::size_t misses = count_misses(trace, refs);
    if (misses == trace.latencies.size()) {
      auto r = AttributeResult::benchmark_value(stride, "bytes", 1.0);
      r.note = "first all-miss stride";
      return r;
    }
  }
  return AttributeResult::inconclusive_result(
      "hits persist up to a stride of " + std::to_string(opts.line_size_cap_bytes) + " bytes");
}

AttributeResult measure_cache_line_size(MeasurementBackend& backend, const std::string& space,
                                        const std::set<std::string>& bypass,
                                        std::uint64_t size_bytes,
                                        std::uint32_t fetch_granularity,
                                        const ProbeOptions& opts) {
  if (size_bytes == 0)
    return AttributeResult::inconclusive_result("cache size unknown");
  if (fetch_granularity == 0)
    return AttributeResult::inconclusive_result("fetch granularity unknown");

  const std::uint32_t half_fg = std::max<std::uint32_t>(4, fetch_granularity / 2);
  const std::uint32_t pivot = half_fg;
  // Rows start one size-sweep step past the measured size: the measurement
  // under-reports by less than one step, so this lands strictly past the
  // capacity and every row spills the cache for boundary-stride chases.
  const std::uint64_t base =
      size_bytes + std::max(fetch_granularity, opts.size_step_hint_bytes);
  constexpr int kRows = 17;

  // Latency spikes (up to 20x a miss) would dominate a row's RMS and fake a
  // behavior flip; cap everything just above the next level's latency.
  double spike_cap = std::numeric_limits<double>::infinity();
  try {
    spike_cap = 1.25 * latency_references(backend, space, bypass, opts).miss;
  } catch (const UnsupportedMeasurementError&) {
  }

  // Per-access-normalized root-mean-square scores of a 17-row sweep at the
  // given stride. All sweeps share one latency baseline (captured from the
  // pivot sweep): a per-sweep minimum would flatten all-miss sweeps to zero
  // and make them indistinguishable from all-hit ones.
  double baseline = -1.0;
  auto reduced_rows = [&](std::uint32_t stride) {
    std::vector<stats::Sample> rows;
    const std::uint32_t timed = static_cast<std::uint32_t>(
        std::min<std::uint64_t>(opts.timed_count, base / stride));
    for (int j = 0; j < kRows; ++j) {
      PChasePlan plan = make_plan(space, bypass, base + static_cast<std::uint64_t>(j) * stride,
                                  stride, opts);
      plan.timed_count = timed;
      rows.push_back(backend.run_pchase(plan).latencies);
      for (auto& v : rows.back()) v = std::min(v, spike_cap);
    }
    if (baseline < 0) {
      baseline = rows.front().front();
      for (const auto& row : rows)
        for (double v : row) baseline = std::min(baseline, v);
    }
    std::vector<double> scores(kRows);
    for (int j = 0; j < kRows; ++j) {
      double acc = 0.0;
      for (double v : rows[j]) acc += (v - baseline) * (v - baseline);
      scores[j] = std::sqrt(acc / static_cast<double>(timed));
    }
    return scores;
  };

  const auto pivot_scores = reduced_rows(pivot);

  std::vector<double> weights(kRows);
  double wsum = 0.0;
  for (int j = 0; j < kRows; ++j) wsum += j + 1;
  for (int j = 0; j < kRows; ++j) weights[j] = (j + 1) / wsum;

  auto distance = [&](const std::vector<double>& scores) {
    double d = 0.0;
    for (int j = 0; j < kRows; ++j) d += weights[j] * std::abs(scores[j] - pivot_scores[j]);
    return d;
  };
  const double pivot_magnitude = [&] {
    double p = 0.0;
    for (int j = 0; j < kRows; ++j) p += weights[j] * pivot_scores[j];
    return p;
  }();

  // MAX stride: surely past the line size; doubled until its behavior
  // separates from the pivot's.
  std::uint32_t max_stride = 8 * fetch_granularity;
  double max_distance = 0.0;
  for (;;) {
    max_distance = distance(reduced_rows(max_stride));
    if (max_distance > 0.5 * pivot_magnitude) break;
    max_stride *= 2;
    if (max_stride > 64 * fetch_granularity)
      return AttributeResult::inconclusive_result(
          "pivot and MAX strides behave identically");
  }

  // March candidate strides; the first one nearer MAX than pivot marks the
  // transition past the line size. With the outlier re-weighting (scores
  // beyond the transition pinned to MAX's), the most significant score
  // increase is the step into the transition: every pre-transition value
  // sits at or below half of MAX's score, so the entry jump, at least half
  // of MAX's score, dominates any sub-line jump.
  std::uint32_t transition = 0;
  for (std::uint32_t stride = pivot + half_fg; stride <= max_stride; stride += half_fg) {
    const double d = distance(reduced_rows(stride));
    if (d > 0.5 * max_distance) {
      transition = stride;
      break;
    }
  }
  if (transition == 0)
    return AttributeResult::inconclusive_result("no stride crossed over to MAX behavior");

  std::uint32_t line = 1;
  while (line * 2 <= transition) line *= 2;
  auto r = AttributeResult::benchmark_value(line, "bytes", 1.0);
  r.note = "behavior flipped at stride " + std::to_string(transition);
  return r;
}

AttributeResult measure_amount(MeasurementBackend& backend, const std::string& space,
                               const std::set<std::string>& bypass, std::uint64_t size_bytes,
                               std::uint32_t cores_per_sm, const ProbeOptions& opts) {
  if (!backend.capabilities().paired_actors)
    throw UnsupportedMeasurementError("backend has no paired-actor support");
  if (size_bytes == 0) return AttributeResult::inconclusive_result("cache size unknown");

  const LatencyRefs refs = latency_references(backend, space, bypass, opts);
  const std::uint32_t stride = chase_granule(opts);

  for (std::uint32_t k = 1; k < cores_per_sm; k *= 2) {
    PChasePlan warm_a = make_plan(space, bypass, size_bytes, stride, opts, 0);
    warm_a.timed_count = 0;
    PChasePlan warm_b = warm_a;
    warm_b.buffer_id = 1;
    warm_b.actor.core_index = static_cast<int>(k);
    PChasePlan timed_a = make_plan(space, bypass, size_bytes, stride, opts, 0);
    timed_a.warmup = false;

    const auto traces = backend.run_paired_phase_sequence({warm_a, warm_b, timed_a});
    if (traces.size() != 1)
      throw Error("paired phase sequence returned an unexpected trace count");
    if (!evicted(traces[0], refs)) {
      // Core B stopped evicting core A: it crossed into another segment.
      auto r = AttributeResult::benchmark_value(cores_per_sm / k, "segments", 1.0);
      r.note = "first non-evicting core index " + std::to_string(k);
      return r;
    }
  }
  auto r = AttributeResult::benchmark_value(1.0, "segments", 1.0);
  r.note = "every core index evicted core 0";
  return r;
}

SegmentAlignment align_segment_size(double api_total_bytes, double measured_segment_bytes) {
  if (api_total_bytes <= 0 || measured_segment_bytes <= 0)
    throw InputError("align_segment_size: sizes must be positive");
  SegmentAlignment best;
  double best_err = -1.0;
  for (int k = 1; k <= 256; ++k) {
    const double fraction = api_total_bytes / k;
    const double err = std::abs(measured_segment_bytes - fraction);
    if (best_err < 0 || err < best_err) {
      best_err = err;
      best.segments = k;
      best.confidence = 1.0 - err / fraction;
    }
  }
  best.confidence = std::max(0.0, best.confidence);
  return best;
}

AttributeResult measure_l2_segments(MeasurementBackend& backend, const std::string& space,
                                    const std::set<std::string>& bypass,
                                    double api_l2_total_bytes, sim::Vendor vendor,
                                    const ProbeOptions& opts) {
  if (vendor == sim::Vendor::kAmdLike) {
    const auto api = backend.query_api_info();
    const std::string target = target_level(backend, space, bypass);
    if (api.has(target, "amount"))
      return AttributeResult::api_value(api.get(target, "amount"), "segments");
    return AttributeResult::inconclusive_result("API exposes no segment count");
  }

  if (api_l2_total_bytes <= 0)
    return AttributeResult::inconclusive_result("API total size unknown");

  ProbeOptions sized = opts;
  sized.search_cap_bytes = static_cast<std::uint64_t>(2 * api_l2_total_bytes);
  const auto segment = measure_cache_size(backend, space, bypass, sized, true);
  if (!segment.result.value)
    return AttributeResult::inconclusive_result("segment size benchmark was inconclusive: " +
                                                segment.result.note);

  const auto aligned = align_segment_size(api_l2_total_bytes, *segment.result.value);
  auto r = AttributeResult::benchmark_value(aligned.segments, "segments", aligned.confidence);
  r.note = "segment measured at " + std::to_string(static_cast<std::uint64_t>(
                                        *segment.result.value)) +
           " bytes against an API total of " +
           std::to_string(static_cast<std::uint64_t>(api_l2_total_bytes));
  return r;
}

namespace {

struct UnionFind {
  std::vector<int> parent;
  explicit UnionFind(std::size_t n) : parent(n) {
    std::iota(parent.begin(), parent.end(), 0);
  }
  int find(int x) {
    while (parent[x] != x) x = parent[x] = parent[parent[x]];
    return x;
  }
  void unite(int a, int b) { parent[find(a)] = find(b); }
};

}  // namespace

std::map<std::string, std::vector<std::string>> measure_physical_sharing(
    MeasurementBackend& backend, const std::vector<SharingTarget>& targets,
    const ProbeOptions& opts) {
  UnionFind uf(targets.size());

  auto stride_of = [&](const SharingTarget& t) {
    return t.fetch_granularity > 0 ? t.fetch_granularity : opts.fallback_granule_bytes;
  };

  for (std::size_t i = 0; i < targets.size(); ++i) {
    const auto refs_i = latency_references(backend, targets[i].space, targets[i].bypass, opts);
    for (std::size_t j = i + 1; j < targets.size(); ++j) {
      // Three chases on one core: populate A, populate B, re-run A timed.
      PChasePlan warm_a =
          make_plan(targets[i].space, targets[i].bypass, targets[i].size_bytes,
                    stride_of(targets[i]), opts, 0);
      warm_a.timed_count = 0;
      PChasePlan warm_b =
          make_plan(targets[j].space, targets[j].bypass, targets[j].size_bytes,
                    stride_of(targets[j]), opts, 1);
      warm_b.timed_count = 0;
      PChasePlan timed_a =
          make_plan(targets[i].space, targets[i].bypass, targets[i].size_bytes,
                    stride_of(targets[i]), opts, 0);
      timed_a.warmup = false;

      const auto traces = backend.run_paired_phase_sequence({warm_a, warm_b, timed_a});
      if (traces.size() == 1 && evicted(traces[0], refs_i))
        uf.unite(static_cast<int>(i), static_cast<int>(j));
    }
  }

  std::map<std::string, std::vector<std::string>> result;
  for (std::size_t i = 0; i < targets.size(); ++i) {
    std::vector<std::string> group;
    for (std::size_t j = 0; j < targets.size(); ++j)
      if (uf.find(static_cast<int>(j)) == uf.find(static_cast<int>(i)))
        group.push_back(targets[j].element);
    std::sort(group.begin(), group.end());
    result[targets[i].element] = std::move(group);
  }
  return result;
}

Sl1dSharing measure_sl1d_sharing(MeasurementBackend& backend,
                                 const std::vector<int>& active_cu_ids,
                                 std::uint64_t sl1d_size_bytes, const ProbeOptions& opts) {
  if (!backend.capabilities().paired_actors)
    throw UnsupportedMeasurementError("backend has no paired-actor support");
  if (!backend.capabilities().levels_for("scalar"))
    throw UnsupportedMeasurementError("backend exposes no scalar space");

  ProbeOptions local = opts;
  local.actor = {0, 0, active_cu_ids.empty() ? 0 : active_cu_ids.front()};
  const LatencyRefs refs = latency_references(backend, "scalar", {}, local);
  const std::uint32_t stride = chase_granule(opts);

  UnionFind uf(active_cu_ids.size());
  for (std::size_t i = 0; i < active_cu_ids.size(); ++i) {
    for (std::size_t j = i + 1; j < active_cu_ids.size(); ++j) {
      PChasePlan warm_a;
      warm_a.space = "scalar";
      warm_a.array_bytes = sl1d_size_bytes;
      warm_a.stride_bytes = stride;
      warm_a.timed_count = 0;
      warm_a.warmup = true;
      warm_a.actor = {static_cast<int>(i), 0, active_cu_ids[i]};
      warm_a.buffer_id = 0;
      PChasePlan warm_b = warm_a;
      warm_b.actor = {static_cast<int>(j), 0, active_cu_ids[j]};
      warm_b.buffer_id = 1;
      PChasePlan timed_a = warm_a;
      timed_a.warmup = false;
      timed_a.timed_count = static_cast<std::uint32_t>(
          std::min<std::uint64_t>(opts.timed_count, sl1d_size_bytes / stride));

      const auto traces = backend.run_paired_phase_sequence({warm_a, warm_b, timed_a});
      if (traces.size() == 1 && evicted(traces[0], refs))
        uf.unite(static_cast<int>(i), static_cast<int>(j));
    }
  }

  Sl1dSharing sharing;
  std::map<int, std::vector<int>> groups;
  for (std::size_t i = 0; i < active_cu_ids.size(); ++i)
    groups[uf.find(static_cast<int>(i))].push_back(active_cu_ids[i]);
  for (auto& [root, members] : groups) {
    std::sort(members.begin(), members.end());
    if (members.size() == 1) sharing.exclusive_cus.push_back(members.front());
    sharing.groups.push_back(members);
  }
  std::sort(sharing.groups.begin(), sharing.groups.end());
  std::sort(sharing.exclusive_cus.begin(), sharing.exclusive_cus.end());
  return sharing;
}

AttributeResult measure_bandwidth(MeasurementBackend& backend, const std::string& space,
                                  sim::Direction direction, const ProbeOptions& opts) {
  (void)opts;
  const auto api = backend.query_api_info();
  StreamPlan plan;
  plan.space = space;
  plan.direction = direction;
  plan.threads_per_block = api.compute.max_threads_per_block;
  plan.num_blocks = api.compute.num_sm * api.compute.max_blocks_per_sm;
  plan.bytes_total = 256ull * 1024 * 1024;
  const double achieved = backend.run_stream(plan);
  auto r = AttributeResult::benchmark_value(achieved, "GiB/s", 1.0);
  r.note = "streamed at " + std::to_string(plan.num_blocks) + " blocks x " +
           std::to_string(plan.threads_per_block) + " threads";
  return r;
}

}  // namespace topoprobe::probes
