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

#include "topoprobe/stats.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include "topoprobe/errors.hpp"

namespace topoprobe::stats {

namespace {

void check_sample(const Sample& s, const char* op) {
  if (s.empty()) throw InputError(std::string(op) + ": empty sample");
  for (double v : s) {
    if (!std::isfinite(v) || v < 0.0)
      throw InputError(std::string(op) + ": sample values must be finite and >= 0");
  }
}

}  // namespace

double ks_statistic(const Sample& a, const Sample& b) {
  check_sample(a, "ks_statistic");
  check_sample(b, "ks_statistic");

  Sample sa = a;
  Sample sb = b;
  std::sort(sa.begin(), sa.end());
  std::sort(sb.begin(), sb.end());

  const double n = static_cast<double>(sa.size());
  const double m = static_cast<double>(sb.size());
  std::size_t i = 0;
  std::size_t j = 0;
  double d = 0.0;
  // Walk the merged breakpoints; consume every element equal to the current
  // value from both sides before evaluating |F - G|.
  while (i < sa.size() || j < sb.size()) {
    double v;
    if (i < sa.size() && j < sb.size())
      v = std::min(sa[i], sb[j]);
    else if (i < sa.size())
      v = sa[i];
    else
      v = sb[j];
    while (i < sa.size() && sa[i] <= v) ++i;
    while (j < sb.size() && sb[j] <= v) ++j;
    d = std::max(d, std::abs(static_cast<double>(i) / n - static_cast<double>(j) / m));
  }
  return d;
}

double ks_critical_value(std::size_t n, std::size_t m, double alpha) {
  if (n < 1 || m < 1) throw InputError("ks_critical_value: sample sizes must be >= 1");
  if (!(alpha > 0.0 && alpha < 1.0))
    throw InputError("ks_critical_value: alpha must be in (0, 1)");
  const double nm = static_cast<double>(n) * static_cast<double>(m);
  const double sum = static_cast<double>(n + m);
  return std::sqrt(0.5 * (sum / nm) * std::abs(std::log(alpha / 2.0)));
}

KsTestResult ks_two_sample_test(const Sample& a, const Sample& b, double alpha) {
  KsTestResult r;
  r.statistic = ks_statistic(a, b);
  r.critical = ks_critical_value(a.size(), b.size(), alpha);
  r.reject = r.statistic > r.critical;
  return r;
}

ReducedSeries reduce_geometric(const LatencyMatrix& matrix) {
  if (matrix.rows.empty()) throw InputError("reduce_geometric: empty matrix");
  const std::size_t width = matrix.rows.front().latencies.size();
  double global_min = std::numeric_limits<double>::infinity();
  std::uint64_t prev_size = 0;
  bool first = true;
  for (const auto& row : matrix.rows) {
    check_sample(row.latencies, "reduce_geometric");
    if (row.latencies.size() != width)
      throw InputError("reduce_geometric: rows have differing lengths");
    if (!first && row.array_size_bytes <= prev_size)
      throw InputError("reduce_geometric: array sizes must be strictly increasing");
    prev_size = row.array_size_bytes;
    first = false;
    for (double v : row.latencies) global_min = std::min(global_min, v);
  }

  ReducedSeries out;
  out.points.reserve(matrix.rows.size());
  for (const auto& row : matrix.rows) {
    double acc = 0.0;
    for (double v : row.latencies) {
      const double d = v - global_min;
      acc += d * d;
    }
    out.points.push_back({row.array_size_bytes, std::sqrt(acc)});
  }
  return out;
}

namespace {

constexpr std::size_t kMinSegment = 4;

// K-S statistic for every admissible split of `values`, computed from one
// global sort: for each split, one pass over the value groups counting
// left/right membership.
std::vector<double> split_statistics(const std::vector<double>& values) {
  const std::size_t n = values.size();
  std::vector<std::size_t> order(n);
  for (std::size_t i = 0; i < n; ++i) order[i] = i;
  std::sort(order.begin(), order.end(), [&](std::size_t x, std::size_t y) {
    if (values[x] != values[y]) return values[x] < values[y];
    return x < y;
  });

  std::vector<double> d(n, 0.0);
  for (std::size_t split = kMinSegment; split + kMinSegment <= n; ++split) {
    const double ln = static_cast<double>(split);
    const double rn = static_cast<double>(n - split);
    std::size_t lcount = 0;
    std::size_t rcount = 0;
    double best = 0.0;
    std::size_t p = 0;
    while (p < n) {
      const double v = values[order[p]];
      while (p < n && values[order[p]] == v) {
        if (order[p] < split)
          ++lcount;
        else
          ++rcount;
        ++p;
      }
      best = std::max(best, std::abs(static_cast<double>(lcount) / ln -
                                     static_cast<double>(rcount) / rn));
    }
    d[split] = best;
  }
  return d;
}

}  // namespace

std::optional<ChangePointResult> detect_change_point(
    const ReducedSeries& series, const std::vector<double>& alpha_grid) {
  const std::size_t n = series.points.size();
  if (n < 8) throw InputError("detect_change_point: series needs at least 8 points");
  if (alpha_grid.empty()) throw InputError("detect_change_point: empty alpha grid");
  for (std::size_t i = 0; i < alpha_grid.size(); ++i) {
    if (!(alpha_grid[i] > 0.0 && alpha_grid[i] < 1.0))
      throw InputError("detect_change_point: alpha values must be in (0, 1)");
    if (i > 0 && alpha_grid[i] <= alpha_grid[i - 1])
      throw InputError("detect_change_point: alpha grid must be strictly ascending");
  }

  std::vector<double> values(n);
  for (std::size_t i = 0; i < n; ++i) values[i] = series.points[i].score;
  const std::vector<double> d = split_statistics(values);

  // Weighted Bonferroni across candidate splits: weight 1/min(i, n-i)^2.
  // The weight series converges, so the family-wise rate stays below the
  // grid alpha for any series length, while the extreme splits keep a fixed
  // budget share and a disjoint-support junction (statistic 1.0) remains
  // detectable at the loosest grid level.
  double weight_sum = 0.0;
  for (std::size_t split = kMinSegment; split + kMinSegment <= n; ++split) {
    const double seg = static_cast<double>(std::min(split, n - split));
    weight_sum += 1.0 / (seg * seg);
  }

  for (double alpha : alpha_grid) {
    bool found = false;
    std::size_t best_index = 0;
    double best_margin = -1.0;
    for (std::size_t split = kMinSegment; split + kMinSegment <= n; ++split) {
      const double seg = static_cast<double>(std::min(split, n - split));
      const double split_alpha = alpha * (1.0 / (seg * seg)) / weight_sum;
      const double crit = ks_critical_value(split, n - split, split_alpha);
      if (d[split] > crit) {
        const double margin = d[split] - crit;
        if (!found || margin > best_margin) {
          found = true;
          best_margin = margin;
          best_index = split;
        }
      }
    }
    if (found) {
      return ChangePointResult{best_index, series.points[best_index].array_size_bytes,
                               alpha, d[best_index]};
    }
  }
  return std::nullopt;
}

BoundaryVerdict boundary_outlier_check(const ReducedSeries& series,
                                       const std::optional<ChangePointResult>& cp,
                                       IntervalBytes interval,
                                       double boundary_margin_fraction,
                                       double flatness_epsilon) {
  if (interval.lo_bytes >= interval.hi_bytes) {
    // Degenerate interval: nothing sensible to widen relative to.
    return BoundaryVerdict::kAccept;
  }
  const double width = static_cast<double>(interval.hi_bytes - interval.lo_bytes);
  const double margin = boundary_margin_fraction * width;

  std::uint64_t position = 0;
  if (cp.has_value()) {
    position = cp->value_bytes;
  } else {
    if (series.points.size() < 2) return BoundaryVerdict::kAccept;
    double lo_score = series.points.front().score;
    double hi_score = lo_score;
    for (const auto& p : series.points) {
      lo_score = std::min(lo_score, p.score);
      hi_score = std::max(hi_score, p.score);
    }
    if (hi_score - lo_score <= flatness_epsilon) return BoundaryVerdict::kAccept;
    // Dominant transition: largest jump between adjacent scores.
    double best_jump = -1.0;
    std::size_t best_i = 1;
    for (std::size_t i = 1; i < series.points.size(); ++i) {
      const double jump = std::abs(series.points[i].score - series.points[i - 1].score);
      if (jump > best_jump) {
        best_jump = jump;
        best_i = i;
      }
    }
    position = series.points[best_i].array_size_bytes;
    const bool near_low =
        static_cast<double>(position) <= static_cast<double>(interval.lo_bytes) + margin;
    const bool near_high =
        static_cast<double>(position) >= static_cast<double>(interval.hi_bytes) - margin;
    if (near_low) return BoundaryVerdict::kWidenLow;
    if (near_high) return BoundaryVerdict::kWidenHigh;
    return BoundaryVerdict::kWidenBoth;
  }

  if (static_cast<double>(position) <= static_cast<double>(interval.lo_bytes) + margin)
    return BoundaryVerdict::kWidenLow;
  if (static_cast<double>(position) >= static_cast<double>(interval.hi_bytes) - margin)
    return BoundaryVerdict::kWidenHigh;
  return BoundaryVerdict::kAccept;
}

SummaryStats summary_stats(const Sample& sample) {
  check_sample(sample, "summary_stats");
  Sample sorted = sample;
  std::sort(sorted.begin(), sorted.end());
  const std::size_t n = sorted.size();

  auto nearest_rank = [&](double pct) {
    std::size_t rank = static_cast<std::size_t>(
        std::ceil(pct * static_cast<double>(n)));
    if (rank < 1) rank = 1;
    if (rank > n) rank = n;
    return sorted[rank - 1];
  };

  double sum = 0.0;
  for (double v : sorted) sum += v;
  const double mean = sum / static_cast<double>(n);
  double var = 0.0;
  for (double v : sorted) {
    const double d = v - mean;
    var += d * d;
  }
  var /= static_cast<double>(n);

  SummaryStats s;
  s.mean = mean;
  s.p50 = nearest_rank(0.50);
  s.p95 = nearest_rank(0.95);
  s.stddev = std::sqrt(var);
  s.min = sorted.front();
  s.max = sorted.back();
  return s;
}

}  // namespace topoprobe::stats
