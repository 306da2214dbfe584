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
#include <random>

#include "topoprobe/errors.hpp"
#include "topoprobe/stats.hpp"

using namespace topoprobe;
using namespace topoprobe::stats;

namespace {

// Independent oracle: evaluate |F - G| at every candidate breakpoint by
// direct counting. Quadratic, but the K-S statistic only changes at sample
// values, so checking each value is exhaustive.
double brute_force_ks(const Sample& a, const Sample& b) {
  Sample points = a;
  points.insert(points.end(), b.begin(), b.end());
  double d = 0.0;
  for (double v : points) {
    double fa = 0.0;
    double fb = 0.0;
    for (double x : a)
      if (x <= v) fa += 1.0;
    for (double x : b)
      if (x <= v) fb += 1.0;
    fa /= static_cast<double>(a.size());
    fb /= static_cast<double>(b.size());
    d = std::max(d, std::abs(fa - fb));
  }
  return d;
}

Sample random_sample(std::mt19937_64& rng, std::size_t max_len) {
  std::uniform_int_distribution<std::size_t> len_dist(1, max_len);
  std::uniform_int_distribution<int> val_dist(0, 9);  // small pool forces ties
  Sample s(len_dist(rng));
  for (auto& v : s) v = static_cast<double>(val_dist(rng));
  return s;
}

Sample gaussian_sample(std::mt19937_64& rng, std::size_t n, double mean, double sd) {
  std::normal_distribution<double> dist(mean, sd);
  Sample s(n);
  for (auto& v : s) v = std::max(0.0, dist(rng));
  return s;
}

}  // namespace

TEST_CASE("ks_statistic matches hand cases") {
  CHECK(ks_statistic({1, 2, 3}, {1, 2, 3}) == 0.0);
  CHECK(ks_statistic({1, 1, 1}, {2, 2, 2}) == 1.0);
  // Oracle: breakpoints {1,2,3}: F=[.5,1,1], G=[.5,.5,1] -> sup 0.5.
  CHECK(brute_force_ks({1, 2}, {1, 3}) == doctest::Approx(0.5));
  CHECK(ks_statistic({1, 2}, {1, 3}) == doctest::Approx(0.5));
}

TEST_CASE("ks_statistic equals brute force on random pairs") {
  std::mt19937_64 rng(12345);
  for (int it = 0; it < 10000; ++it) {
    const Sample a = random_sample(rng, 32);
    const Sample b = random_sample(rng, 32);
    const double fast = ks_statistic(a, b);
    const double slow = brute_force_ks(a, b);
    REQUIRE(fast == doctest::Approx(slow).epsilon(1e-12));
  }
}

TEST_CASE("ks_statistic properties") {
  std::mt19937_64 rng(99);
  for (int it = 0; it < 500; ++it) {
    const Sample a = random_sample(rng, 24);
    const Sample b = random_sample(rng, 24);
    const double dab = ks_statistic(a, b);
    const double dba = ks_statistic(b, a);
    REQUIRE(dab == dba);
    REQUIRE(dab >= 0.0);
    REQUIRE(dab <= 1.0);

    Sample sa = a, sb = b;
    std::sort(sa.begin(), sa.end());
    std::sort(sb.begin(), sb.end());
    if (sa == sb) REQUIRE(dab == 0.0);
    if (dab == 0.0 && a.size() == b.size()) REQUIRE(sa == sb);
  }
  CHECK_THROWS_AS(ks_statistic({}, {1.0}), InputError);
  CHECK_THROWS_AS(ks_statistic({1.0}, {}), InputError);
  CHECK_THROWS_AS(ks_statistic({-1.0}, {1.0}), InputError);
}

TEST_CASE("ks_critical_value matches direct evaluation") {
  // Oracle: sqrt(0.5 * (n+m)/(n*m) * -ln(alpha/2)).
  const double expected_100 = std::sqrt(0.5 * (200.0 / 10000.0) * -std::log(0.025));
  CHECK(ks_critical_value(100, 100, 0.05) == doctest::Approx(expected_100).epsilon(1e-12));
  CHECK(std::abs(ks_critical_value(100, 100, 0.05) - 0.19206) < 1e-4);
  CHECK(std::abs(ks_critical_value(50, 50, 0.05) - 0.27162) < 1e-4);

  // Quadrupling both sample sizes halves the value exactly.
  for (std::size_t n : {8u, 25u, 100u}) {
    const double base = ks_critical_value(n, n, 0.05);
    const double quad = ks_critical_value(4 * n, 4 * n, 0.05);
    CHECK(quad == doctest::Approx(0.5 * base).epsilon(1e-12));
  }
}

TEST_CASE("ks_critical_value monotonicity and domain") {
  const std::size_t ns[] = {1, 2, 5, 10, 50, 200};
  for (std::size_t i = 0; i + 1 < 6; ++i) {
    CHECK(ks_critical_value(ns[i + 1], 10, 0.05) < ks_critical_value(ns[i], 10, 0.05));
    CHECK(ks_critical_value(10, ns[i + 1], 0.05) < ks_critical_value(10, ns[i], 0.05));
  }
  const double alphas[] = {0.001, 0.01, 0.05, 0.2, 0.5};
  for (std::size_t i = 0; i + 1 < 5; ++i) {
    CHECK(ks_critical_value(20, 20, alphas[i + 1]) < ks_critical_value(20, 20, alphas[i]));
  }
  CHECK_THROWS_AS(ks_critical_value(10, 10, 0.0), InputError);
  CHECK_THROWS_AS(ks_critical_value(10, 10, 1.0), InputError);
  CHECK_THROWS_AS(ks_critical_value(10, 10, -0.1), InputError);
  CHECK_THROWS_AS(ks_critical_value(0, 10, 0.05), InputError);
}

TEST_CASE("ks_two_sample_test behaves on separated and identical data") {
  const Sample same = {38, 38, 39, 40, 38, 41, 39};
  auto r = ks_two_sample_test(same, same, 0.05);
  CHECK_FALSE(r.reject);
  CHECK(r.statistic == 0.0);

  std::mt19937_64 rng(7);
  const Sample a = gaussian_sample(rng, 200, 100.0, 2.0);
  const Sample b = gaussian_sample(rng, 200, 140.0, 2.0);
  r = ks_two_sample_test(a, b, 0.05);
  CHECK(r.reject);
  CHECK(r.statistic == doctest::Approx(1.0));
}

TEST_CASE("ks_two_sample_test quick type-I sanity") {
  // Light version; the 1000-trial calibration runs in the acceptance suite.
  std::mt19937_64 rng(2026);
  int rejections = 0;
  const int trials = 200;
  for (int t = 0; t < trials; ++t) {
    const Sample a = gaussian_sample(rng, 200, 100.0, 2.0);
    const Sample b = gaussian_sample(rng, 200, 100.0, 2.0);
    if (ks_two_sample_test(a, b, 0.05).reject) ++rejections;
  }
  CHECK(static_cast<double>(rejections) / trials <= 0.09);
}

TEST_CASE("reduce_geometric hand cases") {
  LatencyMatrix single;
  single.rows.push_back({64, {5, 5, 5}});
  auto r = reduce_geometric(single);
  REQUIRE(r.points.size() == 1);
  CHECK(r.points[0].score == 0.0);

  // Hand evaluation: min = 5; row2 = sqrt(0 + 16) = 4.
  LatencyMatrix two;
  two.rows.push_back({64, {5, 5}});
  two.rows.push_back({128, {5, 9}});
  r = reduce_geometric(two);
  REQUIRE(r.points.size() == 2);
  CHECK(r.points[0].score == 0.0);
  CHECK(r.points[1].score == 4.0);
  CHECK(r.points[0].array_size_bytes == 64);
  CHECK(r.points[1].array_size_bytes == 128);
}

TEST_CASE("reduce_geometric shift invariance and scaling") {
  std::mt19937_64 rng(4242);
  std::uniform_real_distribution<double> val(10.0, 500.0);
  LatencyMatrix m;
  for (int i = 0; i < 12; ++i) {
    LatencyRow row;
    row.array_size_bytes = 1024 * (i + 1);
    for (int j = 0; j < 20; ++j) row.latencies.push_back(std::floor(val(rng)));
    m.rows.push_back(row);
  }
  const auto base = reduce_geometric(m);

  LatencyMatrix shifted = m;
  for (auto& row : shifted.rows)
    for (auto& v : row.latencies) v += 10.0;
  const auto sh = reduce_geometric(shifted);
  for (std::size_t i = 0; i < base.points.size(); ++i)
    CHECK(sh.points[i].score == base.points[i].score);

  // Scale (matrix - min) by c -> scores scale by c.
  double global_min = m.rows[0].latencies[0];
  for (const auto& row : m.rows)
    for (double v : row.latencies) global_min = std::min(global_min, v);
  const double c = 3.0;
  LatencyMatrix scaled = m;
  for (auto& row : scaled.rows)
    for (auto& v : row.latencies) v = global_min + c * (v - global_min);
  const auto sc = reduce_geometric(scaled);
  for (std::size_t i = 0; i < base.points.size(); ++i)
    CHECK(sc.points[i].score == doctest::Approx(c * base.points[i].score).epsilon(1e-12));
}

TEST_CASE("reduce_geometric rejects malformed matrices") {
  LatencyMatrix empty;
  CHECK_THROWS_AS(reduce_geometric(empty), InputError);

  LatencyMatrix ragged;
  ragged.rows.push_back({64, {1, 2, 3}});
  ragged.rows.push_back({128, {1, 2}});
  CHECK_THROWS_AS(reduce_geometric(ragged), InputError);

  LatencyMatrix nonincreasing;
  nonincreasing.rows.push_back({128, {1, 2}});
  nonincreasing.rows.push_back({64, {1, 2}});
  CHECK_THROWS_AS(reduce_geometric(nonincreasing), InputError);
}

namespace {

ReducedSeries make_series(const std::vector<double>& scores) {
  ReducedSeries s;
  for (std::size_t i = 0; i < scores.size(); ++i)
    s.points.push_back({1024 * (i + 1), scores[i]});
  return s;
}

}  // namespace

TEST_CASE("detect_change_point finds a single jump") {
  const auto series = make_series({0, 0, 0, 0, 10, 10, 10, 10});
  const auto cp = detect_change_point(series);
  REQUIRE(cp.has_value());
  CHECK(cp->index == 4);
  CHECK(cp->value_bytes == series.points[4].array_size_bytes);
  CHECK(cp->ks_statistic == doctest::Approx(1.0));
  CHECK(cp->significance == doctest::Approx(0.05));
}

TEST_CASE("detect_change_point returns the junction of two constant segments") {
  std::mt19937_64 rng(31);
  std::uniform_int_distribution<std::size_t> len(12, 80);
  for (int it = 0; it < 200; ++it) {
    const std::size_t n = len(rng);
    std::uniform_int_distribution<std::size_t> cut(4, n - 4);
    const std::size_t junction = cut(rng);
    std::vector<double> scores(n, 2.0);
    for (std::size_t i = junction; i < n; ++i) scores[i] = 50.0;
    const auto cp = detect_change_point(make_series(scores));
    REQUIRE(cp.has_value());
    REQUIRE(cp->index == junction);
  }
}

TEST_CASE("detect_change_point stays quiet on i.i.d. noise") {
  std::mt19937_64 rng(555);
  int detections = 0;
  const int trials = 1000;
  for (int t = 0; t < trials; ++t) {
    const Sample noise = gaussian_sample(rng, 64, 10.0, 1.0);
    if (detect_change_point(make_series(noise)).has_value()) ++detections;
  }
  // At most 5% of trials may fire at the grid's loosest alpha (0.05).
  CHECK(static_cast<double>(detections) / trials <= 0.05);
}

TEST_CASE("detect_change_point input validation") {
  CHECK_THROWS_AS(detect_change_point(make_series({1, 2, 3})), InputError);
  const auto ok = make_series({0, 0, 0, 0, 9, 9, 9, 9});
  CHECK_THROWS_AS(detect_change_point(ok, {}), InputError);
  CHECK_THROWS_AS(detect_change_point(ok, {0.05, 0.01}), InputError);
  CHECK_THROWS_AS(detect_change_point(ok, {0.0, 0.05}), InputError);
}

TEST_CASE("boundary_outlier_check verdicts") {
  IntervalBytes iv{1024, 1024 + 32 * 1024};
  const auto series = make_series({0, 0, 0, 0, 9, 9, 9, 9});

  ChangePointResult mid{4, (iv.lo_bytes + iv.hi_bytes) / 2, 0.05, 1.0};
  CHECK(boundary_outlier_check(series, mid, iv) == BoundaryVerdict::kAccept);

  ChangePointResult low{4, iv.lo_bytes + 32, 0.05, 1.0};
  CHECK(boundary_outlier_check(series, low, iv) == BoundaryVerdict::kWidenLow);

  ChangePointResult high{4, iv.hi_bytes - 32, 0.05, 1.0};
  CHECK(boundary_outlier_check(series, high, iv) == BoundaryVerdict::kWidenHigh);

  // Flat series without a change point: accepted (no-change outcome).
  const auto flat = make_series({3, 3, 3, 3, 3, 3, 3, 3});
  CHECK(boundary_outlier_check(flat, std::nullopt, iv, 0.05, 0.0) ==
        BoundaryVerdict::kAccept);

  // Non-flat without a change point, transition away from the edges.
  ReducedSeries ramp;
  for (int i = 0; i < 16; ++i) {
    const std::uint64_t size = iv.lo_bytes + (i + 1) * 2048;
    ramp.points.push_back({size, i < 8 ? 1.0 : 40.0});
  }
  CHECK(boundary_outlier_check(ramp, std::nullopt, iv, 0.05, 1.0) ==
        BoundaryVerdict::kWidenBoth);

  // Dominant transition hugging the high edge.
  ReducedSeries edge;
  for (int i = 0; i < 16; ++i) {
    const std::uint64_t size = iv.lo_bytes + (i + 1) * 2048;
    edge.points.push_back({size, i < 15 ? 1.0 : 40.0});
  }
  CHECK(boundary_outlier_check(edge, std::nullopt, iv, 0.05, 1.0) ==
        BoundaryVerdict::kWidenHigh);
}

TEST_CASE("summary_stats hand cases") {
  const auto s = summary_stats({38, 38, 38});
  CHECK(s.mean == 38.0);
  CHECK(s.stddev == 0.0);
  CHECK(s.min == 38.0);
  CHECK(s.max == 38.0);
  CHECK(s.p50 == 38.0);
  CHECK(s.p95 == 38.0);

  // Nearest-rank oracle on 1..100: rank ceil(0.5*100)=50 -> 50,
  // rank ceil(0.95*100)=95 -> 95.
  Sample seq(100);
  for (int i = 0; i < 100; ++i) seq[i] = i + 1;
  const auto t = summary_stats(seq);
  CHECK(t.p50 == 50.0);
  CHECK(t.p95 == 95.0);
  CHECK(t.mean == doctest::Approx(50.5));
  CHECK(t.min == 1.0);
  CHECK(t.max == 100.0);
}

TEST_CASE("summary_stats permutation invariance") {
  std::mt19937_64 rng(77);
  Sample s = gaussian_sample(rng, 101, 200.0, 15.0);
  const auto base = summary_stats(s);
  std::shuffle(s.begin(), s.end(), rng);
  const auto shuffled = summary_stats(s);
  CHECK(base.mean == shuffled.mean);
  CHECK(base.p50 == shuffled.p50);
  CHECK(base.p95 == shuffled.p95);
  CHECK(base.stddev == shuffled.stddev);
  CHECK(base.min == shuffled.min);
  CHECK(base.max == shuffled.max);

  CHECK_THROWS_AS(summary_stats({}), InputError);
}
