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

#include "topoprobe/profiles.hpp"

#include <fstream>
#include <sstream>

#include "topoprobe/errors.hpp"

namespace topoprobe::profiles {

namespace {

using sim::DeviceSpec;
using sim::MemoryLevelSpec;
using sim::Scope;
using sim::Vendor;

MemoryLevelSpec cache_level(std::string name, std::uint64_t size, std::uint32_t line,
                            std::uint32_t fg, std::uint32_t latency, Scope scope,
                            std::uint32_t amount) {
  MemoryLevelSpec l;
  l.name = std::move(name);
  l.size_bytes = size;
  l.line_size_bytes = line;
  l.fetch_granularity_bytes = fg;
  // Fully associative: a cyclic chase past capacity then misses on every
  // load, which is the step-shaped transition the change-point detector is
  // built around.
  l.associativity = static_cast<std::uint32_t>(size / line);
  l.hit_latency_cycles = latency;
  l.scope = scope;
  l.amount = amount;
  l.is_cache = true;
  return l;
}

MemoryLevelSpec plain_level(std::string name, std::uint64_t size, std::uint32_t latency,
                            Scope scope) {
  MemoryLevelSpec l;
  l.name = std::move(name);
  l.size_bytes = size;
  l.hit_latency_cycles = latency;
  l.scope = scope;
  l.amount = 1;
  l.is_cache = false;
  return l;
}

DeviceSpec make_h100() {
  DeviceSpec s;
  s.vendor = Vendor::kNvidiaLike;
  s.model = "synthetic-h100";
  s.clock_rate_khz = 1980000;
  s.compute = {132, 128, 32, 1024, 2048, 32, 65536, 65536};

  auto l1 = cache_level("l1", 243712, 128, 32, 38, Scope::kPerSm, 1);
  auto const_l1 = cache_level("const-l1", 2048, 64, 64, 21, Scope::kPerSm, 1);
  auto smem = plain_level("smem", 233472, 30, Scope::kPerSm);
  auto l2 = cache_level("l2", 24998400, 128, 32, 220, Scope::kPerGpu, 2);
  l2.peak_read_gibps = 4505.6;   // 4.4 TiB/s
  l2.peak_write_gibps = 3481.6;  // 3.4 TiB/s
  auto dram = plain_level("dram", 85899345920ull, 843, Scope::kPerGpu);
  dram.peak_read_gibps = 2560.0;   // 2.5 TiB/s
  dram.peak_write_gibps = 2764.8;  // 2.7 TiB/s
  s.levels = {l1, const_l1, smem, l2, dram};

  s.logical_spaces = {
      {"global", {"l1", "l2", "dram"}},
      {"readonly", {"l1", "l2", "dram"}},
      {"texture", {"l1", "l2", "dram"}},
      {"constant", {"const-l1", "l2", "dram"}},
      {"shared", {"smem", "dram"}},
      {"l2", {"l2", "dram"}},
      {"device", {"dram"}},
  };

  for (int i = 0; i < 132; ++i) s.cu_topology.physical_cu_ids.push_back(i);
  s.cu_topology.active_cu_ids = s.cu_topology.physical_cu_ids;

  s.noise.seed = 1;
  s.api_exposed = {{"l2", "size"}, {"smem", "size"}, {"dram", "size"}};
  return s;
}

std::vector<ExpectedElement> h100_expected() {
  return {
      {"L1", 243712, 128, 32, 38, 1, std::vector<std::string>{"L1", "Readonly", "Texture"},
       std::nullopt, std::nullopt},
      {"L2", 49996800, 128, 32, 220, 2, std::nullopt, 4505.6, 3481.6},
      {"Texture", 243712, 128, 32, 38, 1,
       std::vector<std::string>{"L1", "Readonly", "Texture"}, std::nullopt, std::nullopt},
      {"Readonly", 243712, 128, 32, 38, 1,
       std::vector<std::string>{"L1", "Readonly", "Texture"}, std::nullopt, std::nullopt},
      {"Const L1", 2048, 64, 64, 21, 1, std::vector<std::string>{"Const L1"}, std::nullopt,
       std::nullopt},
      {"Shared Memory", 233472, std::nullopt, std::nullopt, 30, std::nullopt, std::nullopt,
       std::nullopt, std::nullopt},
      {"Device Memory", 85899345920ull, std::nullopt, std::nullopt, 843, std::nullopt,
       std::nullopt, 2560.0, 2764.8},
  };
}

DeviceSpec make_mi210() {
  DeviceSpec s;
  s.vendor = Vendor::kAmdLike;
  s.model = "synthetic-mi210";
  s.clock_rate_khz = 1700000;
  s.compute = {104, 64, 8, 1024, 2048, 64, 65536, 65536};

  auto vl1 = cache_level("vl1", 16384, 64, 64, 125, Scope::kPerSm, 1);
  auto sl1d = cache_level("sl1d", 15872, 64, 64, 50, Scope::kPerSm, 1);
  auto l2 = cache_level("l2", 8388608, 128, 64, 310, Scope::kPerGpu, 1);
  l2.peak_read_gibps = 4290.56;  // 4.19 TiB/s
  l2.peak_write_gibps = 2457.6;  // 2.4 TiB/s
  auto lds = plain_level("lds", 65536, 55, Scope::kPerSm);
  auto dram = plain_level("dram", 68719476736ull, 748, Scope::kPerGpu);
  dram.peak_read_gibps = 1024.0;  // 1.0 TiB/s
  dram.peak_write_gibps = 921.6;  // 0.9 TiB/s
  s.levels = {sl1d, vl1, lds, l2, dram};

  s.logical_spaces = {
      {"global", {"vl1", "l2", "dram"}},
      {"scalar", {"sl1d", "l2", "dram"}},
      {"lds", {"lds", "dram"}},
      {"l2", {"l2", "dram"}},
      {"device", {"dram"}},
  };

  // 128 physical CU ids in sL1d pairs; 104 active. Leaving 103 and 105
  // inactive gives CUs 102 and 104 exclusive use of their caches.
  for (int i = 0; i < 128; ++i) s.cu_topology.physical_cu_ids.push_back(i);
  for (int i = 0; i < 128; ++i) {
    const bool inactive = (i == 103) || (i >= 105);
    if (!inactive) s.cu_topology.active_cu_ids.push_back(i);
  }
  for (int g = 0; g < 64; ++g) s.cu_topology.sl1d_groups.push_back({2 * g, 2 * g + 1});

  s.noise.seed = 2;
  s.api_exposed = {
      {"vl1", "size"}, {"sl1d", "size"}, {"l2", "size"}, {"lds", "size"}, {"dram", "size"},
      {"vl1", "line_size"}, {"sl1d", "line_size"}, {"l2", "line_size"}, {"l2", "amount"},
  };
  return s;
}

std::vector<ExpectedElement> mi210_expected() {
  return {
      {"vL1", 16384, 64, 64, 125, 1, std::nullopt, std::nullopt, std::nullopt},
      {"sL1d", 15872, 64, 64, 50, std::nullopt, std::nullopt, std::nullopt, std::nullopt},
      {"L2", 8388608, 128, 64, 310, 1, std::nullopt, 4290.56, 2457.6},
      {"LDS", 65536, std::nullopt, std::nullopt, 55, std::nullopt, std::nullopt, std::nullopt,
       std::nullopt},
      {"Device Memory", 68719476736ull, std::nullopt, std::nullopt, 748, std::nullopt,
       std::nullopt, 1024.0, 921.6},
  };
}

DeviceSpec make_tiny() {
  DeviceSpec s;
  s.vendor = Vendor::kNvidiaLike;
  s.model = "tiny-test";
  s.clock_rate_khz = 1000000;
  s.compute = {4, 64, 8, 256, 1024, 32, 32768, 65536};

  auto l1 = cache_level("l1", 8192, 64, 32, 40, Scope::kPerSm, 1);
  auto dram = plain_level("dram", 1073741824ull, 400, Scope::kPerGpu);
  dram.peak_read_gibps = 100.0;
  dram.peak_write_gibps = 80.0;
  s.levels = {l1, dram};

  s.logical_spaces = {
      {"global", {"l1", "dram"}},
      {"device", {"dram"}},
  };
  for (int i = 0; i < 4; ++i) s.cu_topology.physical_cu_ids.push_back(i);
  s.cu_topology.active_cu_ids = s.cu_topology.physical_cu_ids;
  s.noise.seed = 3;
  s.api_exposed = {{"dram", "size"}};
  return s;
}

std::vector<ExpectedElement> tiny_expected() {
  return {
      {"L1", 8192, 64, 32, 40, 1, std::nullopt, std::nullopt, std::nullopt},
      {"Device Memory", 1073741824ull, std::nullopt, std::nullopt, 400, std::nullopt,
       std::nullopt, 100.0, 80.0},
  };
}

}  // namespace

const std::vector<ReferenceProfile>& builtin_profiles() {
  static const std::vector<ReferenceProfile> profiles = [] {
    std::vector<ReferenceProfile> p;
    p.push_back({"synthetic-h100", make_h100(), h100_expected()});
    p.push_back({"synthetic-mi210", make_mi210(), mi210_expected()});
    p.push_back({"tiny-test", make_tiny(), tiny_expected()});
    for (const auto& profile : p) sim::validate_device_spec(profile.spec);
    return p;
  }();
  return profiles;
}

const ReferenceProfile* find_builtin_profile(const std::string& name) {
  for (const auto& p : builtin_profiles())
    if (p.name == name) return &p;
  return nullptr;
}

sim::DeviceSpec scale_device_spec(const sim::DeviceSpec& spec, std::uint32_t factor,
                                  const std::set<std::string>& level_filter) {
  if (factor == 0) throw InputError("scale factor must be positive");
  sim::DeviceSpec scaled = spec;
  for (auto& level : scaled.levels) {
    if (!level.is_cache) continue;
    if (!level_filter.empty() && !level_filter.count(level.name)) continue;
    if (level.size_bytes % factor != 0)
      throw InputError("level '" + level.name + "': size " +
                       std::to_string(level.size_bytes) + " is not divisible by " +
                       std::to_string(factor));
    const std::uint64_t sets =
        level.size_bytes / (static_cast<std::uint64_t>(level.line_size_bytes) *
                            level.associativity);
    const std::uint64_t size = level.size_bytes / factor;
    if (size % (static_cast<std::uint64_t>(level.line_size_bytes) * sets) != 0)
      throw InputError("level '" + level.name + "': scaled size " + std::to_string(size) +
                       " no longer splits into " + std::to_string(sets) + " sets of " +
                       std::to_string(level.line_size_bytes) + "-byte lines");
    level.size_bytes = size;
    // Set count preserved; the ways per set shrink with the size.
    level.associativity = static_cast<std::uint32_t>(
        size / (static_cast<std::uint64_t>(level.line_size_bytes) * sets));
  }
  sim::validate_device_spec(scaled);
  return scaled;
}

sim::DeviceSpec load_device_spec(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw InputError("cannot open device spec '" + path + "'");
  nlohmann::ordered_json j;
  try {
    in >> j;
  } catch (const nlohmann::json::exception& e) {
    throw InputError("cannot parse '" + path + "': " + e.what());
  }
  return sim::device_spec_from_json(j);
}

}  // namespace topoprobe::profiles
