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
#include <optional>
#include <vector>

namespace topoprobe::stats {

// One group of latency measurements, in cycles. All entries finite and >= 0.
using Sample = std::vector<double>;

// Kolmogorov distance: supremum of |F(x) - G(x)| over the empirical CDFs of
// the two samples. Symmetric; 0 exactly when the multisets are equal; <= 1.
double ks_statistic(const Sample& a, const Sample& b);

// Two-sample critical value approximation at significance alpha:
// sqrt(0.5 * (n+m)/(n*m) * |ln(alpha/2)|). Strictly decreasing in n, m and
// in alpha.
double ks_critical_value(std::size_t n, std::size_t m, double alpha);

struct KsTestResult {
  bool reject = false;  // H0 (same distribution) rejected
  double statistic = 0.0;
  double critical = 0.0;
};

KsTestResult ks_two_sample_test(const Sample& a, const Sample& b, double alpha);

// Raw result of a size sweep: one latency vector per tested array size.
struct LatencyRow {
  std::uint64_t array_size_bytes = 0;
  Sample latencies;
};

struct LatencyMatrix {
  std::vector<LatencyRow> rows;
};

struct ReducedPoint {
  std::uint64_t array_size_bytes = 0;
  double score = 0.0;
};

// One-dimensional view of a LatencyMatrix, same length and size order.
struct ReducedSeries {
  std::vector<ReducedPoint> points;
};

// Geometric mapping reduction: S_i = sqrt(sum_j (r_ij - min(r))^2) with
// min(r) the global minimum over the whole matrix. Invariant under a global
// additive shift of the matrix.
ReducedSeries reduce_geometric(const LatencyMatrix& matrix);

struct ChangePointResult {
  std::size_t index = 0;            // first index of the changed segment
  std::uint64_t value_bytes = 0;    // array size at that index
  double significance = 0.0;        // strictest alpha that rejected H0
  double ks_statistic = 0.0;        // statistic at the returned split
};

inline const std::vector<double> kDefaultAlphaGrid{0.001, 0.005, 0.01, 0.05};

// Tests every admissible split (at least 4 points on each side) with the
// two-sample K-S test. Scans the alpha grid strictest-first; at the first
// alpha with any rejection, returns the split with the largest
// (statistic - critical) margin, smallest index on ties. Empty result when
// no split rejects at any alpha.
std::optional<ChangePointResult> detect_change_point(
    const ReducedSeries& series,
    const std::vector<double>& alpha_grid = kDefaultAlphaGrid);

enum class BoundaryVerdict { kAccept, kWidenLow, kWidenHigh, kWidenBoth };

struct IntervalBytes {
  std::uint64_t lo_bytes = 0;
  std::uint64_t hi_bytes = 0;
};

// Flags change points (or, without one, the dominant score transition) that
// hug an interval edge. Margin defaults to 5% of the interval width. A
// series without a change point is accepted when its score range is within
// flatness_epsilon, widened on both sides otherwise.
BoundaryVerdict boundary_outlier_check(
    const ReducedSeries& series, const std::optional<ChangePointResult>& cp,
    IntervalBytes interval, double boundary_margin_fraction = 0.05,
    double flatness_epsilon = 0.0);

struct SummaryStats {
  double mean = 0.0;
  double p50 = 0.0;
  double p95 = 0.0;
  double stddev = 0.0;
  double min = 0.0;
  double max = 0.0;
};

// Mean, nearest-rank percentiles, population stddev, min, max.
SummaryStats summary_stats(const Sample& sample);

}  // namespace topoprobe::stats
