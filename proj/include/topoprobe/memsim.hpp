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
#include <memory>
#include <optional>
#include <set>
#include <string>
#include <utility>
#include <vector>

#include "json.hpp"

namespace topoprobe::sim {

enum class Vendor { kNvidiaLike, kAmdLike };
enum class Scope { kPerSm, kPerGpu };
enum class Direction { kRead, kWrite };

std::string to_string(Vendor v);
std::string to_string(Scope s);

struct ComputeSpec {
  std::uint32_t num_sm = 0;
  std::uint32_t cores_per_sm = 0;
  std::uint32_t max_blocks_per_sm = 0;
  std::uint32_t max_threads_per_block = 0;
  std::uint32_t max_threads_per_sm = 0;
  std::uint32_t warp_size = 0;
  std::uint64_t registers_per_block = 0;
  std::uint64_t registers_per_sm = 0;
};

// One memory level. For caches, size_bytes is the capacity of a single
// segment; `amount` counts independent segments within the scope.
struct MemoryLevelSpec {
  std::string name;
  std::uint64_t size_bytes = 0;
  std::uint32_t line_size_bytes = 0;
  std::uint32_t fetch_granularity_bytes = 0;
  std::uint32_t associativity = 0;
  std::uint32_t hit_latency_cycles = 0;
  Scope scope = Scope::kPerGpu;
  std::uint32_t amount = 1;
  std::optional<double> peak_read_gibps;
  std::optional<double> peak_write_gibps;
  bool is_cache = false;
};

struct CuTopologySpec {
  std::vector<int> physical_cu_ids;
  std::vector<int> active_cu_ids;
  std::vector<std::vector<int>> sl1d_groups;  // partition into groups of 1-3
};

struct NoiseSpec {
  double jitter_stddev_fraction = 0.02;
  double spike_probability = 0.001;
  double spike_multiplier_low = 5.0;
  double spike_multiplier_high = 20.0;
  std::uint64_t seed = 0;
};

struct DeviceSpec {
  Vendor vendor = Vendor::kNvidiaLike;
  std::string model;
  std::uint64_t clock_rate_khz = 0;
  ComputeSpec compute;
  std::vector<MemoryLevelSpec> levels;  // lowest first, last is device memory
  // Ordered space name -> traversal (level names, ending at device memory).
  std::vector<std::pair<std::string, std::vector<std::string>>> logical_spaces;
  CuTopologySpec cu_topology;
  NoiseSpec noise;
  // (level, attribute) values the backend reports via the API role.
  // Attributes: size, line_size, fetch_granularity, amount.
  std::vector<std::pair<std::string, std::string>> api_exposed;

  const MemoryLevelSpec* find_level(const std::string& name) const;
  const std::vector<std::string>* find_space(const std::string& name) const;
};

// Throws ValidationError listing every violated invariant.
void validate_device_spec(const DeviceSpec& spec);

// Strict parse: unknown keys rejected, messages carry field paths.
DeviceSpec device_spec_from_json(const nlohmann::ordered_json& j);
nlohmann::ordered_json device_spec_to_json(const DeviceSpec& spec);

// The general + compute information plus the api_exposed values, nothing else.
struct ApiInfo {
  Vendor vendor = Vendor::kNvidiaLike;
  std::string model;
  std::uint64_t clock_rate_khz = 0;
  std::string compute_capability;
  ComputeSpec compute;
  std::vector<int> physical_cu_ids;  // amd-like only
  std::vector<int> active_cu_ids;    // amd-like only
  std::map<std::pair<std::string, std::string>, double> memory_attributes;

  bool has(const std::string& level, const std::string& attribute) const;
  double get(const std::string& level, const std::string& attribute) const;
};

ApiInfo device_info(const DeviceSpec& spec);

struct Actor {
  int sm_id = 0;
  int core_index = 0;
  int cu_physical_id = 0;
};

struct AccessResult {
  std::int64_t latency_cycles = 0;
  std::string serviced_by;
  bool was_hit_at_first_level = false;
};

// Deterministic simulated device: sectored set-associative LRU caches with
// per-scope segmentation and a seeded noise stream. Single-actor object: at
// most one in-flight operation; concurrent users need separate sessions.
class SimSession {
 public:
  SimSession(DeviceSpec spec, std::uint64_t seed);
  ~SimSession();
  SimSession(SimSession&&) noexcept;
  SimSession& operator=(SimSession&&) noexcept;

  const DeviceSpec& spec() const;

  AccessResult access(const std::string& space, const Actor& actor,
                      std::uint64_t address, const std::set<std::string>& bypass,
                      bool timed);

  // Prepared fast path for benchmark loops: the traversal, bypass filtering
  // and cache-instance selection are resolved once per chase.
  class PreparedChase {
   public:
    ~PreparedChase();
    PreparedChase(PreparedChase&&) noexcept;
    PreparedChase& operator=(PreparedChase&&) noexcept;

   private:
    friend class SimSession;
    PreparedChase();
    struct Impl;
    std::unique_ptr<Impl> impl_;
  };

  PreparedChase prepare(const std::string& space, const Actor& actor,
                        const std::set<std::string>& bypass);

  struct RawAccess {
    std::int64_t latency_cycles = 0;
    std::uint32_t level_index = 0;
    bool was_hit_at_first_level = false;
  };

  RawAccess access_prepared(PreparedChase& chase, std::uint64_t address, bool timed);

  // Streaming-bandwidth model for the first level of the space's traversal.
  double bandwidth(const std::string& space, Direction direction,
                   std::uint32_t threads_per_block, std::uint32_t num_blocks,
                   std::uint64_t bytes_total);

  void reset();                              // invalidate everything
  void flush_level(const std::string& name); // no-op for non-cache levels

  std::uint64_t total_accesses() const;
  const std::string& level_name(std::uint32_t index) const;
  std::uint64_t device_memory_bytes() const;

 private:
  struct Impl;
  std::unique_ptr<Impl> impl_;
};

}  // namespace topoprobe::sim
