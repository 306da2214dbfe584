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

#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include <algorithm>
#include <cmath>

#include "topoprobe/errors.hpp"
#include "topoprobe/probes.hpp"
#include "topoprobe/profiles.hpp"

using namespace topoprobe;
using namespace topoprobe::probes;

namespace {

sim::DeviceSpec noise_off(sim::DeviceSpec spec) {
  spec.noise.jitter_stddev_fraction = 0.0;
  spec.noise.spike_probability = 0.0;
  return spec;
}

sim::DeviceSpec builtin(const std::string& name) {
  return profiles::find_builtin_profile(name)->spec;
}

// Two-level device with a configurable L1 geometry, noise off.
sim::DeviceSpec custom_cache(std::uint64_t size, std::uint32_t line, std::uint32_t fg,
                             std::uint32_t amount = 1, std::uint32_t cores = 128) {
  sim::DeviceSpec s;
  s.vendor = sim::Vendor::kNvidiaLike;
  s.model = "custom";
  s.clock_rate_khz = 1000;
  s.compute = {4, cores, 8, 256, 1024, 32, 32768, 65536};
  sim::MemoryLevelSpec l1;
  l1.name = "l1";
  l1.size_bytes = size;
  l1.line_size_bytes = line;
  l1.fetch_granularity_bytes = fg;
  l1.associativity = static_cast<std::uint32_t>(size / line);
  l1.hit_latency_cycles = 40;
  l1.scope = sim::Scope::kPerSm;
  l1.amount = amount;
  l1.is_cache = true;
  sim::MemoryLevelSpec mem;
  mem.name = "mem";
  mem.size_bytes = 1ull << 30;
  mem.hit_latency_cycles = 400;
  mem.scope = sim::Scope::kPerGpu;
  mem.amount = 1;
  mem.is_cache = false;
  mem.peak_read_gibps = 100.0;
  mem.peak_write_gibps = 80.0;
  s.levels = {l1, mem};
  s.logical_spaces = {{"global", {"l1", "mem"}}, {"device", {"mem"}}};
  s.cu_topology.physical_cu_ids = {0, 1, 2, 3};
  s.cu_topology.active_cu_ids = {0, 1, 2, 3};
  s.noise = {0.0, 0.0, 5.0, 20.0, 1};
  return s;
}

Trace fake_trace(stats::Sample latencies) {
  Trace t;
  t.latencies = std::move(latencies);
  return t;
}

}  // namespace

TEST_CASE("classify_hit_miss splits at the midpoint") {
  const auto flags = classify_hit_miss(fake_trace({40, 40, 400}), 40, 400);
  CHECK(flags == std::vector<bool>{false, false, true});

  const auto all_hits = classify_hit_miss(fake_trace({40, 45, 50, 100}), 40, 400);
  CHECK(std::count(all_hits.begin(), all_hits.end(), true) == 0);

  CHECK_THROWS_AS(classify_hit_miss(fake_trace({1}), 400, 40), InputError);
}

TEST_CASE("latency references measure the target and the level behind it") {
  SimulatorBackend backend(noise_off(builtin("tiny-test")), 1);
  const auto refs = latency_references(backend, "global", {}, {});
  CHECK(refs.hit == doctest::Approx(40.0));
  CHECK(refs.miss == doctest::Approx(400.0));

  // The device space has nothing behind it to classify against.
  CHECK_THROWS_AS(latency_references(backend, "device", {}, {}), UnsupportedMeasurementError);
}

TEST_CASE("find_search_interval bisects the doubling result") {
  SimulatorBackend tiny(noise_off(builtin("tiny-test")), 1);
  auto interval = find_search_interval(tiny, "global", {}, {});
  CHECK(interval.lo_bytes == 8192);  // the exact size still fits
  CHECK(interval.hi_bytes == 16384);
  CHECK(interval.hi_bytes - interval.lo_bytes <= 32768);

  // 96 KiB cache: doubling passes 64 KiB all-hit and stops at 128 KiB.
  SimulatorBackend mid(custom_cache(96 * 1024, 128, 32), 1);
  interval = find_search_interval(mid, "global", {}, {});
  CHECK(interval.lo_bytes == 65536);
  CHECK(interval.hi_bytes == 131072);

  // Larger than the cap: unbounded-search error carrying the scanned range.
  SimulatorBackend big(custom_cache(2 * 1024 * 1024, 128, 32), 1);
  try {
    find_search_interval(big, "global", {}, {});
    FAIL("expected UnboundedSearchError");
  } catch (const UnboundedSearchError& e) {
    CHECK(e.lo_bytes() == 1024);
    CHECK(e.hi_bytes() == 1024 * 1024);
  }
}

TEST_CASE("size_sweep produces uniform rows on the step grid") {
  SimulatorBackend backend(noise_off(builtin("tiny-test")), 1);
  const SearchInterval interval{28 * 1024, 36 * 1024};
  const auto matrix = size_sweep(backend, "global", {}, interval, 32, 32, {});
  REQUIRE(matrix.rows.size() == 257);
  const std::size_t n = matrix.rows.front().latencies.size();
  for (const auto& row : matrix.rows) REQUIRE(row.latencies.size() == n);

  // Around the 8 KiB boundary: resident rows are all-hit, larger rows miss.
  const auto around = size_sweep(backend, "global", {}, {7168, 9216}, 32, 32, {});
  for (const auto& row : around.rows) {
    const bool any_miss =
        std::any_of(row.latencies.begin(), row.latencies.end(), [](double v) { return v > 200; });
    if (row.array_size_bytes <= 8192)
      REQUIRE_FALSE(any_miss);
    else
      REQUIRE(any_miss);
  }
}

TEST_CASE("measure_cache_size recovers the exact size with noise off") {
  SimulatorBackend tiny(noise_off(builtin("tiny-test")), 1);
  auto m = measure_cache_size(tiny, "global", {}, {});
  REQUIRE(m.result.value.has_value());
  CHECK(*m.result.value == 8192.0);
  CHECK(m.result.method == Method::kBenchmark);
  CHECK(m.result.confidence > 0.0);
  CHECK(m.result.confidence <= 1.0);

  SimulatorBackend h100(noise_off(builtin("synthetic-h100")), 1);
  m = measure_cache_size(h100, "global", {}, {});
  REQUIRE(m.result.value.has_value());
  CHECK(*m.result.value == 243712.0);

  m = measure_cache_size(h100, "constant", {}, {});
  REQUIRE(m.result.value.has_value());
  CHECK(*m.result.value == 2048.0);
}

TEST_CASE("measure_cache_size under default noise stays within one step") {
  SimulatorBackend tiny(builtin("tiny-test"), 42);
  const auto m = measure_cache_size(tiny, "global", {}, {});
  REQUIRE(m.result.value.has_value());
  CHECK(std::abs(*m.result.value - 8192.0) <= m.sweep_step_bytes);
}

TEST_CASE("measure_cache_size prefers the API and honors force_benchmark") {
  SimulatorBackend h100(noise_off(builtin("synthetic-h100")), 1);
  const auto api = measure_cache_size(h100, "l2", {}, {});
  CHECK(api.result.method == Method::kApi);
  CHECK(*api.result.value == 49996800.0);
  CHECK(api.result.confidence == 1.0);

  SimulatorBackend mi210(noise_off(builtin("synthetic-mi210")), 1);
  const auto forced = measure_cache_size(mi210, "global", {}, {}, true);
  CHECK(forced.result.method == Method::kBenchmark);
  CHECK(*forced.result.value == 16384.0);
}

TEST_CASE("capped search space yields an inconclusive size") {
  // A constant-cache-like space whose true size exceeds the search cap.
  SimulatorBackend backend(custom_cache(96 * 1024, 64, 64), 1);
  ProbeOptions opts;
  opts.search_cap_bytes = 64 * 1024;
  const auto m = measure_cache_size(backend, "global", {}, opts);
  CHECK(m.result.inconclusive());
  CHECK(m.result.confidence == 0.0);
  CHECK(m.result.note.find("no misses") != std::string::npos);
}

TEST_CASE("measure_load_latency matches the profile ground truth") {
  SimulatorBackend h100(noise_off(builtin("synthetic-h100")), 1);
  auto s = measure_load_latency(h100, "global", {}, 32, {});
  CHECK(s.mean == 38.0);
  CHECK(s.stddev == 0.0);

  SimulatorBackend mi210(noise_off(builtin("synthetic-mi210")), 1);
  s = measure_load_latency(mi210, "global", {}, 64, {});
  CHECK(s.mean == 125.0);

  // Default noise: trimmed mean within 1%, p50 within one cycle.
  SimulatorBackend noisy(builtin("synthetic-h100"), 7);
  s = measure_load_latency(noisy, "global", {}, 32, {});
  CHECK(std::abs(s.mean - 38.0) <= 0.38);
  CHECK(std::abs(s.p50 - 38.0) <= 1.0);
}

TEST_CASE("measure_fetch_granularity finds the first all-miss stride") {
  SimulatorBackend tiny(noise_off(builtin("tiny-test")), 1);
  auto r = measure_fetch_granularity(tiny, "global", {}, 2 * 8192, {});
  REQUIRE(r.value.has_value());
  CHECK(*r.value == 32.0);

  // V100-like: 64-byte transactions on 128-byte lines.
  SimulatorBackend v100(custom_cache(32 * 1024, 128, 64), 1);
  r = measure_fetch_granularity(v100, "global", {}, 2 * 32 * 1024, {});
  CHECK(*r.value == 64.0);

  SimulatorBackend h100(noise_off(builtin("synthetic-h100")), 1);
  r = measure_fetch_granularity(h100, "constant", {}, 2 * 2048, {});
  CHECK(*r.value == 64.0);

  r = measure_fetch_granularity(h100, "global", {}, 0, {});
  CHECK(r.inconclusive());
}

TEST_CASE("measure_cache_line_size reports the power-of-two line") {
  SimulatorBackend h100(noise_off(builtin("synthetic-h100")), 1);
  auto r = measure_cache_line_size(h100, "global", {}, 243712, 32, {});
  REQUIRE(r.value.has_value());
  CHECK(*r.value == 128.0);

  SimulatorBackend mi210(noise_off(builtin("synthetic-mi210")), 1);
  r = measure_cache_line_size(mi210, "global", {}, 16384, 64, {});
  CHECK(*r.value == 64.0);  // line equals the fetch granularity

  SimulatorBackend tiny(noise_off(builtin("tiny-test")), 1);
  r = measure_cache_line_size(tiny, "global", {}, 8192, 32, {});
  CHECK(*r.value == 64.0);

  r = measure_cache_line_size(tiny, "global", {}, 0, 32, {});
  CHECK(r.inconclusive());
}

TEST_CASE("measure_amount counts cache segments") {
  SimulatorBackend one(noise_off(builtin("synthetic-h100")), 1);
  auto r = measure_amount(one, "global", {}, 243712, 128, {});
  REQUIRE(r.value.has_value());
  CHECK(*r.value == 1.0);

  SimulatorBackend two(custom_cache(8192, 64, 32, 2, 128), 1);
  r = measure_amount(two, "global", {}, 8192, 128, {});
  CHECK(*r.value == 2.0);

  SimulatorBackend four(custom_cache(8192, 64, 32, 4, 128), 1);
  r = measure_amount(four, "global", {}, 8192, 128, {});
  CHECK(*r.value == 4.0);
}

namespace {

// Wrapper that hides paired-actor support.
class NoPairsBackend : public MeasurementBackend {
 public:
  explicit NoPairsBackend(MeasurementBackend& inner) : inner_(inner) {}
  BackendCapabilities capabilities() const override {
    auto caps = inner_.capabilities();
    caps.paired_actors = false;
    return caps;
  }
  sim::ApiInfo query_api_info() override { return inner_.query_api_info(); }
  Trace run_pchase(const PChasePlan& p) override { return inner_.run_pchase(p); }
  std::vector<Trace> run_paired_phase_sequence(const std::vector<PChasePlan>& p) override {
    return inner_.run_paired_phase_sequence(p);
  }
  double run_stream(const StreamPlan& p) override { return inner_.run_stream(p); }

 private:
  MeasurementBackend& inner_;
};

}  // namespace

TEST_CASE("measure_amount needs paired actors") {
  SimulatorBackend inner(noise_off(builtin("tiny-test")), 1);
  NoPairsBackend backend(inner);
  CHECK_THROWS_AS(measure_amount(backend, "global", {}, 8192, 64, {}),
                  UnsupportedMeasurementError);
}

TEST_CASE("align_segment_size snaps to the nearest integer fraction") {
  // 24.6 MB against 50 MB: two 25 MB segments, 0.4 MB off.
  auto a = align_segment_size(50e6, 24.6e6);
  CHECK(a.segments == 2);
  CHECK(a.confidence == doctest::Approx(1.0 - 0.4e6 / 25e6).epsilon(1e-12));

  a = align_segment_size(40e6, 19.7e6);
  CHECK(a.segments == 2);

  a = align_segment_size(8388608.0, 8388608.0);
  CHECK(a.segments == 1);
  CHECK(a.confidence == 1.0);

  a = align_segment_size(50e6, 25e6);
  CHECK(a.segments == 2);
  CHECK(a.confidence == 1.0);
}

TEST_CASE("measure_l2_segments benchmarks nvidia and trusts the amd API") {
  // L2 scaled down 100x keeps the unit test quick; two segments remain.
  const auto spec =
      profiles::scale_device_spec(noise_off(builtin("synthetic-h100")), 100, {"l2"});
  SimulatorBackend h100(spec, 1);
  const double api_total = sim::device_info(spec).get("l2", "size");
  CHECK(api_total == 499968.0);
  auto r = measure_l2_segments(h100, "l2", {}, api_total, sim::Vendor::kNvidiaLike, {});
  REQUIRE(r.value.has_value());
  CHECK(*r.value == 2.0);
  CHECK(r.confidence == doctest::Approx(1.0));
  CHECK(r.method == Method::kBenchmark);

  SimulatorBackend mi210(noise_off(builtin("synthetic-mi210")), 1);
  r = measure_l2_segments(mi210, "l2", {}, 8388608.0, sim::Vendor::kAmdLike, {});
  CHECK(r.method == Method::kApi);
  CHECK(*r.value == 1.0);
  CHECK(r.confidence == 1.0);
}

TEST_CASE("measure_physical_sharing groups spaces on one physical cache") {
  SimulatorBackend h100(noise_off(builtin("synthetic-h100")), 1);
  std::vector<SharingTarget> targets = {
      {"L1", "global", {}, 243712, 32},
      {"Texture", "texture", {}, 243712, 32},
      {"Readonly", "readonly", {}, 243712, 32},
      {"Const L1", "constant", {}, 2048, 64},
  };
  auto groups = measure_physical_sharing(h100, targets, {});
  const std::vector<std::string> unified = {"L1", "Readonly", "Texture"};
  CHECK(groups["L1"] == unified);
  CHECK(groups["Texture"] == unified);
  CHECK(groups["Readonly"] == unified);
  CHECK(groups["Const L1"] == std::vector<std::string>{"Const L1"});

  // Pair order must not matter.
  std::reverse(targets.begin(), targets.end());
  SimulatorBackend again(noise_off(builtin("synthetic-h100")), 1);
  auto reversed = measure_physical_sharing(again, targets, {});
  CHECK(reversed["L1"] == unified);
  CHECK(reversed["Const L1"] == std::vector<std::string>{"Const L1"});
}

TEST_CASE("measure_sl1d_sharing recovers the configured CU partition") {
  // Small amd device: 8 physical CUs in pairs, CUs 3 and 6 disabled.
  sim::DeviceSpec spec = custom_cache(8192, 64, 64);
  spec.vendor = sim::Vendor::kAmdLike;
  spec.compute.num_sm = 8;
  sim::MemoryLevelSpec sl1d = spec.levels[0];
  sl1d.name = "sl1d";
  sl1d.hit_latency_cycles = 30;
  spec.levels.insert(spec.levels.begin(), sl1d);
  spec.logical_spaces.push_back({"scalar", {"sl1d", "mem"}});
  spec.cu_topology.physical_cu_ids = {0, 1, 2, 3, 4, 5, 6, 7};
  spec.cu_topology.active_cu_ids = {0, 1, 2, 4, 5, 7};
  spec.cu_topology.sl1d_groups = {{0, 1}, {2, 3}, {4, 5}, {6, 7}};

  SimulatorBackend backend(spec, 1);
  const auto sharing = measure_sl1d_sharing(backend, spec.cu_topology.active_cu_ids, 8192, {});
  const std::vector<std::vector<int>> expected = {{0, 1}, {2}, {4, 5}, {7}};
  CHECK(sharing.groups == expected);
  CHECK(sharing.exclusive_cus == std::vector<int>{2, 7});
}

TEST_CASE("measure_bandwidth reports the achieved rate at saturation") {
  SimulatorBackend h100(noise_off(builtin("synthetic-h100")), 1);
  auto r = measure_bandwidth(h100, "l2", sim::Direction::kRead, {});
  CHECK(*r.value == doctest::Approx(4505.6));
  r = measure_bandwidth(h100, "l2", sim::Direction::kWrite, {});
  CHECK(*r.value == doctest::Approx(3481.6));

  SimulatorBackend mi210(noise_off(builtin("synthetic-mi210")), 1);
  r = measure_bandwidth(mi210, "device", sim::Direction::kWrite, {});
  CHECK(*r.value == doctest::Approx(921.6));
  r = measure_bandwidth(mi210, "device", sim::Direction::kRead, {});
  CHECK(*r.value == doctest::Approx(1024.0));

  CHECK_THROWS_AS(measure_bandwidth(h100, "global", sim::Direction::kRead, {}),
                  UnsupportedMeasurementError);
}
