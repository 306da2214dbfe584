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

#include "topoprobe/memsim.hpp"

#include <algorithm>
#include <cmath>
#include <random>

#include "topoprobe/errors.hpp"

namespace topoprobe::sim {

std::string to_string(Vendor v) {
  return v == Vendor::kNvidiaLike ? "nvidia-like" : "amd-like";
}

std::string to_string(Scope s) { return s == Scope::kPerSm ? "per-sm" : "per-gpu"; }

const MemoryLevelSpec* DeviceSpec::find_level(const std::string& name) const {
  for (const auto& l : levels)
    if (l.name == name) return &l;
  return nullptr;
}

const std::vector<std::string>* DeviceSpec::find_space(const std::string& name) const {
  for (const auto& [n, t] : logical_spaces)
    if (n == name) return &t;
  return nullptr;
}

// ---------------------------------------------------------------------------
// Validation

void validate_device_spec(const DeviceSpec& spec) {
  std::vector<std::string> bad;
  auto complain = [&](std::string msg) { bad.push_back(std::move(msg)); };

  if (spec.clock_rate_khz == 0) complain("clock_rate_khz must be positive");

  const auto& c = spec.compute;
  if (c.num_sm == 0) complain("compute.num_sm must be positive");
  if (c.cores_per_sm == 0) complain("compute.cores_per_sm must be positive");
  if (c.max_blocks_per_sm == 0) complain("compute.max_blocks_per_sm must be positive");
  if (c.max_threads_per_block == 0) complain("compute.max_threads_per_block must be positive");
  if (c.max_threads_per_sm == 0) complain("compute.max_threads_per_sm must be positive");
  if (c.warp_size == 0) complain("compute.warp_size must be positive");
  if (c.registers_per_block == 0) complain("compute.registers_per_block must be positive");
  if (c.registers_per_sm == 0) complain("compute.registers_per_sm must be positive");
  if (c.warp_size != 0 && c.cores_per_sm != 0 && c.cores_per_sm % c.warp_size != 0)
    complain("compute.warp_size must divide cores_per_sm");

  if (spec.levels.empty()) {
    complain("levels must not be empty");
    throw ValidationError(bad);
  }

  std::set<std::string> names;
  for (std::size_t i = 0; i < spec.levels.size(); ++i) {
    const auto& l = spec.levels[i];
    const std::string at = "levels[" + std::to_string(i) + "] (" + l.name + ")";
    if (l.name.empty()) complain(at + ": name must not be empty");
    if (!names.insert(l.name).second) complain(at + ": duplicate level name");
    if (l.size_bytes == 0) complain(at + ": size_bytes must be positive");
    if (l.hit_latency_cycles == 0) complain(at + ": hit_latency_cycles must be positive");
    if (l.amount == 0) complain(at + ": amount must be positive");
    if (l.is_cache) {
      if (l.line_size_bytes == 0 || l.fetch_granularity_bytes == 0 || l.associativity == 0) {
        complain(at + ": cache levels need line_size_bytes, fetch_granularity_bytes "
                      "and associativity");
        continue;
      }
      if (l.line_size_bytes % l.fetch_granularity_bytes != 0)
        complain(at + ": fetch_granularity_bytes must divide line_size_bytes");
      if (l.line_size_bytes / l.fetch_granularity_bytes > 64)
        complain(at + ": more than 64 sectors per line is not supported");
      if (l.size_bytes % l.line_size_bytes != 0)
        complain(at + ": size_bytes must be a multiple of line_size_bytes");
      if (l.size_bytes % (static_cast<std::uint64_t>(l.line_size_bytes) * l.associativity) != 0)
        complain(at + ": size_bytes must split into whole sets "
                      "(line_size_bytes * associativity must divide size_bytes)");
    }
  }
  if (spec.levels.back().is_cache)
    complain("last level must be device memory (is_cache = false)");

  if (spec.logical_spaces.empty()) complain("logical_spaces must not be empty");
  for (const auto& [space, traversal] : spec.logical_spaces) {
    const std::string at = "logical_spaces." + space;
    if (traversal.empty()) {
      complain(at + ": traversal must not be empty");
      continue;
    }
    bool ok = true;
    for (const auto& n : traversal) {
      if (!spec.find_level(n)) {
        complain(at + ": unknown level '" + n + "'");
        ok = false;
      }
    }
    if (!ok) continue;
    if (traversal.back() != spec.levels.back().name)
      complain(at + ": traversal must end at device memory ('" +
               spec.levels.back().name + "')");
    for (std::size_t i = 0; i + 1 < traversal.size(); ++i) {
      const auto* a = spec.find_level(traversal[i]);
      const auto* b = spec.find_level(traversal[i + 1]);
      if (a->hit_latency_cycles >= b->hit_latency_cycles)
        complain(at + ": hit latencies must strictly increase along the traversal ('" +
                 a->name + "' vs '" + b->name + "')");
    }
  }

  const auto& cu = spec.cu_topology;
  {
    std::set<int> phys(cu.physical_cu_ids.begin(), cu.physical_cu_ids.end());
    if (phys.size() != cu.physical_cu_ids.size())
      complain("cu_topology.physical_cu_ids must be unique");
    for (int id : cu.active_cu_ids)
      if (!phys.count(id))
        complain("cu_topology.active_cu_ids contains unknown id " + std::to_string(id));
    if (!cu.sl1d_groups.empty()) {
      std::set<int> seen;
      for (const auto& g : cu.sl1d_groups) {
        if (g.empty() || g.size() > 3)
          complain("cu_topology.sl1d_groups must have 1-3 members per group");
        for (int id : g) {
          if (!phys.count(id))
            complain("cu_topology.sl1d_groups contains unknown id " + std::to_string(id));
          if (!seen.insert(id).second)
            complain("cu_topology.sl1d_groups: id " + std::to_string(id) +
                     " appears in more than one group");
        }
      }
      if (seen.size() != phys.size())
        complain("cu_topology.sl1d_groups must partition physical_cu_ids");
    }
  }

  const auto& n = spec.noise;
  if (n.jitter_stddev_fraction < 0) complain("noise.jitter_stddev_fraction must be >= 0");
  if (!(n.spike_probability >= 0 && n.spike_probability < 1))
    complain("noise.spike_probability must be in [0, 1)");
  if (n.spike_multiplier_low <= 0 || n.spike_multiplier_high < n.spike_multiplier_low)
    complain("noise.spike_multiplier_range must satisfy 0 < low <= high");

  static const std::set<std::string> kAttrs = {"size", "line_size", "fetch_granularity",
                                               "amount"};
  for (const auto& [level, attr] : spec.api_exposed) {
    if (!spec.find_level(level))
      complain("api_exposed: unknown level '" + level + "'");
    if (!kAttrs.count(attr)) complain("api_exposed: unknown attribute '" + attr + "'");
  }

  if (!bad.empty()) throw ValidationError(bad);
}

// ---------------------------------------------------------------------------
// JSON

namespace {

void check_keys(const nlohmann::ordered_json& j, const std::set<std::string>& allowed,
                const std::string& path) {
  if (!j.is_object()) throw InputError(path + ": expected an object");
  for (auto it = j.begin(); it != j.end(); ++it) {
    if (!allowed.count(it.key()))
      throw InputError(path + ": unknown key '" + it.key() + "'");
  }
}

const nlohmann::ordered_json& require(const nlohmann::ordered_json& j, const std::string& key,
                              const std::string& path) {
  auto it = j.find(key);
  if (it == j.end()) throw InputError(path + ": missing key '" + key + "'");
  return *it;
}

std::uint64_t as_uint(const nlohmann::ordered_json& j, const std::string& path) {
  if (!j.is_number_unsigned() && !(j.is_number_integer() && j.get<std::int64_t>() >= 0))
    throw InputError(path + ": expected a non-negative integer");
  return j.get<std::uint64_t>();
}

double as_double(const nlohmann::ordered_json& j, const std::string& path) {
  if (!j.is_number()) throw InputError(path + ": expected a number");
  return j.get<double>();
}

std::string as_string(const nlohmann::ordered_json& j, const std::string& path) {
  if (!j.is_string()) throw InputError(path + ": expected a string");
  return j.get<std::string>();
}

ComputeSpec compute_from_json(const nlohmann::ordered_json& j, const std::string& path) {
  check_keys(j,
             {"num_sm", "cores_per_sm", "max_blocks_per_sm", "max_threads_per_block",
              "max_threads_per_sm", "warp_size", "registers_per_block", "registers_per_sm"},
             path);
  ComputeSpec c;
  c.num_sm = static_cast<std::uint32_t>(as_uint(require(j, "num_sm", path), path + ".num_sm"));
  c.cores_per_sm = static_cast<std::uint32_t>(
      as_uint(require(j, "cores_per_sm", path), path + ".cores_per_sm"));
  c.max_blocks_per_sm = static_cast<std::uint32_t>(
      as_uint(require(j, "max_blocks_per_sm", path), path + ".max_blocks_per_sm"));
  c.max_threads_per_block = static_cast<std::uint32_t>(
      as_uint(require(j, "max_threads_per_block", path), path + ".max_threads_per_block"));
  c.max_threads_per_sm = static_cast<std::uint32_t>(
      as_uint(require(j, "max_threads_per_sm", path), path + ".max_threads_per_sm"));
  c.warp_size =
      static_cast<std::uint32_t>(as_uint(require(j, "warp_size", path), path + ".warp_size"));
  c.registers_per_block =
      as_uint(require(j, "registers_per_block", path), path + ".registers_per_block");
  c.registers_per_sm =
      as_uint(require(j, "registers_per_sm", path), path + ".registers_per_sm");
  return c;
}

MemoryLevelSpec level_from_json(const nlohmann::ordered_json& j, const std::string& path) {
  check_keys(j,
             {"name", "size_bytes", "line_size_bytes", "fetch_granularity_bytes",
              "associativity", "hit_latency_cycles", "scope", "amount", "peak_read_gibps",
              "peak_write_gibps", "is_cache"},
             path);
  MemoryLevelSpec l;
  l.name = as_string(require(j, "name", path), path + ".name");
  l.size_bytes = as_uint(require(j, "size_bytes", path), path + ".size_bytes");
  if (j.contains("line_size_bytes"))
    l.line_size_bytes =
        static_cast<std::uint32_t>(as_uint(j["line_size_bytes"], path + ".line_size_bytes"));
  if (j.contains("fetch_granularity_bytes"))
    l.fetch_granularity_bytes = static_cast<std::uint32_t>(
        as_uint(j["fetch_granularity_bytes"], path + ".fetch_granularity_bytes"));
  if (j.contains("associativity"))
    l.associativity =
        static_cast<std::uint32_t>(as_uint(j["associativity"], path + ".associativity"));
  l.hit_latency_cycles = static_cast<std::uint32_t>(
      as_uint(require(j, "hit_latency_cycles", path), path + ".hit_latency_cycles"));
  const std::string scope = as_string(require(j, "scope", path), path + ".scope");
  if (scope == "per-sm")
    l.scope = Scope::kPerSm;
  else if (scope == "per-gpu")
    l.scope = Scope::kPerGpu;
  else
    throw InputError(path + ".scope: expected 'per-sm' or 'per-gpu'");
  l.amount = static_cast<std::uint32_t>(as_uint(require(j, "amount", path), path + ".amount"));
  if (j.contains("peak_read_gibps"))
    l.peak_read_gibps = as_double(j["peak_read_gibps"], path + ".peak_read_gibps");
  if (j.contains("peak_write_gibps"))
    l.peak_write_gibps = as_double(j["peak_write_gibps"], path + ".peak_write_gibps");
  const auto& cache = require(j, "is_cache", path);
  if (!cache.is_boolean()) throw InputError(path + ".is_cache: expected a boolean");
  l.is_cache = cache.get<bool>();
  return l;
}

}  // namespace

DeviceSpec device_spec_from_json(const nlohmann::ordered_json& j) {
  check_keys(j,
             {"vendor", "model", "clock_rate_khz", "compute", "levels", "logical_spaces",
              "cu_topology", "noise", "api_exposed"},
             "spec");
  DeviceSpec s;
  const std::string vendor = as_string(require(j, "vendor", "spec"), "spec.vendor");
  if (vendor == "nvidia-like")
    s.vendor = Vendor::kNvidiaLike;
  else if (vendor == "amd-like")
    s.vendor = Vendor::kAmdLike;
  else
    throw InputError("spec.vendor: expected 'nvidia-like' or 'amd-like'");
  s.model = as_string(require(j, "model", "spec"), "spec.model");
  s.clock_rate_khz = as_uint(require(j, "clock_rate_khz", "spec"), "spec.clock_rate_khz");
  s.compute = compute_from_json(require(j, "compute", "spec"), "spec.compute");

  const auto& levels = require(j, "levels", "spec");
  if (!levels.is_array()) throw InputError("spec.levels: expected an array");
  for (std::size_t i = 0; i < levels.size(); ++i)
    s.levels.push_back(level_from_json(levels[i], "spec.levels[" + std::to_string(i) + "]"));

  const auto& spaces = require(j, "logical_spaces", "spec");
  if (!spaces.is_object()) throw InputError("spec.logical_spaces: expected an object");
  for (auto it = spaces.begin(); it != spaces.end(); ++it) {
    const std::string path = "spec.logical_spaces." + it.key();
    if (!it.value().is_array()) throw InputError(path + ": expected an array");
    std::vector<std::string> traversal;
    for (const auto& e : it.value()) traversal.push_back(as_string(e, path));
    s.logical_spaces.emplace_back(it.key(), std::move(traversal));
  }

  const auto& cu = require(j, "cu_topology", "spec");
  check_keys(cu, {"physical_cu_ids", "active_cu_ids", "sl1d_groups"}, "spec.cu_topology");
  auto int_list = [](const nlohmann::ordered_json& a, const std::string& path) {
    if (!a.is_array()) throw InputError(path + ": expected an array");
    std::vector<int> out;
    for (const auto& e : a)
      out.push_back(static_cast<int>(as_uint(e, path)));
    return out;
  };
  s.cu_topology.physical_cu_ids = int_list(require(cu, "physical_cu_ids", "spec.cu_topology"),
                                           "spec.cu_topology.physical_cu_ids");
  s.cu_topology.active_cu_ids = int_list(require(cu, "active_cu_ids", "spec.cu_topology"),
                                         "spec.cu_topology.active_cu_ids");
  const auto& groups = require(cu, "sl1d_groups", "spec.cu_topology");
  if (!groups.is_array()) throw InputError("spec.cu_topology.sl1d_groups: expected an array");
  for (const auto& g : groups)
    s.cu_topology.sl1d_groups.push_back(int_list(g, "spec.cu_topology.sl1d_groups[]"));

  const auto& noise = require(j, "noise", "spec");
  check_keys(noise,
             {"jitter_stddev_fraction", "spike_probability", "spike_multiplier_range", "seed"},
             "spec.noise");
  s.noise.jitter_stddev_fraction = as_double(require(noise, "jitter_stddev_fraction", "spec.noise"),
                                             "spec.noise.jitter_stddev_fraction");
  s.noise.spike_probability = as_double(require(noise, "spike_probability", "spec.noise"),
                                        "spec.noise.spike_probability");
  const auto& range = require(noise, "spike_multiplier_range", "spec.noise");
  if (!range.is_array() || range.size() != 2)
    throw InputError("spec.noise.spike_multiplier_range: expected [low, high]");
  s.noise.spike_multiplier_low = as_double(range[0], "spec.noise.spike_multiplier_range[0]");
  s.noise.spike_multiplier_high = as_double(range[1], "spec.noise.spike_multiplier_range[1]");
  s.noise.seed = as_uint(require(noise, "seed", "spec.noise"), "spec.noise.seed");

  const auto& api = require(j, "api_exposed", "spec");
  if (!api.is_array()) throw InputError("spec.api_exposed: expected an array");
  for (const auto& e : api) {
    if (!e.is_array() || e.size() != 2)
      throw InputError("spec.api_exposed: expected [level, attribute] pairs");
    s.api_exposed.emplace_back(as_string(e[0], "spec.api_exposed[][0]"),
                               as_string(e[1], "spec.api_exposed[][1]"));
  }

  validate_device_spec(s);
  return s;
}

nlohmann::ordered_json device_spec_to_json(const DeviceSpec& s) {
  nlohmann::ordered_json j;
  j["vendor"] = to_string(s.vendor);
  j["model"] = s.model;
  j["clock_rate_khz"] = s.clock_rate_khz;
  nlohmann::ordered_json c;
  c["num_sm"] = s.compute.num_sm;
  c["cores_per_sm"] = s.compute.cores_per_sm;
  c["max_blocks_per_sm"] = s.compute.max_blocks_per_sm;
  c["max_threads_per_block"] = s.compute.max_threads_per_block;
  c["max_threads_per_sm"] = s.compute.max_threads_per_sm;
  c["warp_size"] = s.compute.warp_size;
  c["registers_per_block"] = s.compute.registers_per_block;
  c["registers_per_sm"] = s.compute.registers_per_sm;
  j["compute"] = std::move(c);
  j["levels"] = nlohmann::ordered_json::array();
  for (const auto& l : s.levels) {
    nlohmann::ordered_json e;
    e["name"] = l.name;
    e["size_bytes"] = l.size_bytes;
    e["line_size_bytes"] = l.line_size_bytes;
    e["fetch_granularity_bytes"] = l.fetch_granularity_bytes;
    e["associativity"] = l.associativity;
    e["hit_latency_cycles"] = l.hit_latency_cycles;
    e["scope"] = to_string(l.scope);
    e["amount"] = l.amount;
    if (l.peak_read_gibps) e["peak_read_gibps"] = *l.peak_read_gibps;
    if (l.peak_write_gibps) e["peak_write_gibps"] = *l.peak_write_gibps;
    e["is_cache"] = l.is_cache;
    j["levels"].push_back(std::move(e));
  }
  j["logical_spaces"] = nlohmann::ordered_json::object();
  for (const auto& [name, traversal] : s.logical_spaces)
    j["logical_spaces"][name] = traversal;
  nlohmann::ordered_json cu;
  cu["physical_cu_ids"] = s.cu_topology.physical_cu_ids;
  cu["active_cu_ids"] = s.cu_topology.active_cu_ids;
  cu["sl1d_groups"] = s.cu_topology.sl1d_groups;
  j["cu_topology"] = std::move(cu);
  nlohmann::ordered_json n;
  n["jitter_stddev_fraction"] = s.noise.jitter_stddev_fraction;
  n["spike_probability"] = s.noise.spike_probability;
  n["spike_multiplier_range"] = {s.noise.spike_multiplier_low, s.noise.spike_multiplier_high};
  n["seed"] = s.noise.seed;
  j["noise"] = std::move(n);
  j["api_exposed"] = nlohmann::ordered_json::array();
  for (const auto& [level, attr] : s.api_exposed)
    j["api_exposed"].push_back({level, attr});
  return j;
}

// ---------------------------------------------------------------------------
// ApiInfo

bool ApiInfo::has(const std::string& level, const std::string& attribute) const {
  return memory_attributes.count({level, attribute}) > 0;
}

double ApiInfo::get(const std::string& level, const std::string& attribute) const {
  auto it = memory_attributes.find({level, attribute});
  if (it == memory_attributes.end())
    throw InputError("api info does not expose " + level + "." + attribute);
  return it->second;
}

ApiInfo device_info(const DeviceSpec& spec) {
  validate_device_spec(spec);
  ApiInfo info;
  info.vendor = spec.vendor;
  info.model = spec.model;
  info.clock_rate_khz = spec.clock_rate_khz;
  info.compute_capability = "simulated";
  info.compute = spec.compute;
  if (spec.vendor == Vendor::kAmdLike) {
    info.physical_cu_ids = spec.cu_topology.physical_cu_ids;
    info.active_cu_ids = spec.cu_topology.active_cu_ids;
  }
  for (const auto& [level, attr] : spec.api_exposed) {
    const auto* l = spec.find_level(level);
    double value = 0.0;
    if (attr == "size")
      value = static_cast<double>(l->size_bytes) * l->amount;
    else if (attr == "line_size")
      value = l->line_size_bytes;
    else if (attr == "fetch_granularity")
      value = l->fetch_granularity_bytes;
    else if (attr == "amount")
      value = l->amount;
    info.memory_attributes[{level, attr}] = value;
  }
  return info;
}

// ---------------------------------------------------------------------------
// Simulator internals

namespace {

constexpr std::uint64_t kNoLine = ~0ull;

std::uint64_t mix64(std::uint64_t x) {
  x += 0x9E3779B97F4A7C15ull;
  x = (x ^ (x >> 30)) * 0xBF58476D1CE4E5B9ull;
  x = (x ^ (x >> 27)) * 0x94D049BB133111EBull;
  return x ^ (x >> 31);
}

// line id -> way slot; linear probing with backward-shift deletion.
class OpenMap {
 public:
  void init(std::size_t capacity_hint) {
    std::size_t cap = 16;
    while (cap < capacity_hint * 2) cap <<= 1;
    keys_.assign(cap, kNoLine);
    vals_.assign(cap, -1);
    mask_ = cap - 1;
  }

  std::int32_t find(std::uint64_t key) const {
    std::size_t i = mix64(key) & mask_;
    while (keys_[i] != kNoLine) {
      if (keys_[i] == key) return vals_[i];
      i = (i + 1) & mask_;
    }
    return -1;
  }

  void insert(std::uint64_t key, std::int32_t val) {
    std::size_t i = mix64(key) & mask_;
    while (keys_[i] != kNoLine) i = (i + 1) & mask_;
    keys_[i] = key;
    vals_[i] = val;
  }

  void erase(std::uint64_t key) {
    std::size_t i = mix64(key) & mask_;
    while (keys_[i] != key) {
      if (keys_[i] == kNoLine) return;
      i = (i + 1) & mask_;
    }
    std::size_t j = i;
    for (;;) {
      j = (j + 1) & mask_;
      if (keys_[j] == kNoLine) break;
      const std::size_t h = mix64(keys_[j]) & mask_;
      // Entry j may move to i only if its home slot does not sit between
      // i (exclusive) and j (inclusive) in probe order.
      if (((j - h) & mask_) >= ((j - i) & mask_)) {
        keys_[i] = keys_[j];
        vals_[i] = vals_[j];
        i = j;
      }
    }
    keys_[i] = kNoLine;
    vals_[i] = -1;
  }

  void clear() {
    std::fill(keys_.begin(), keys_.end(), kNoLine);
    std::fill(vals_.begin(), vals_.end(), -1);
  }

 private:
  std::vector<std::uint64_t> keys_;
  std::vector<std::int32_t> vals_;
  std::size_t mask_ = 0;
};

constexpr std::uint32_t kScanWays = 8;  // linear lookup below, hashed above

struct CacheState {
  std::uint32_t line = 0;
  std::uint32_t fg = 0;
  std::uint32_t assoc = 0;
  std::uint32_t sets = 0;
  bool use_map = false;

  std::vector<std::uint64_t> way_line;
  std::vector<std::uint64_t> way_sectors;
  std::vector<std::int32_t> prev;
  std::vector<std::int32_t> next;
  std::vector<std::int32_t> head;
  std::vector<std::int32_t> tail;
  std::vector<std::int32_t> used;  // occupied ways per set
  OpenMap map;

  void init(const MemoryLevelSpec& l) {
    line = l.line_size_bytes;
    fg = l.fetch_granularity_bytes;
    assoc = l.associativity;
    sets = static_cast<std::uint32_t>(
        l.size_bytes / (static_cast<std::uint64_t>(line) * assoc));
    const std::size_t ways = static_cast<std::size_t>(sets) * assoc;
    way_line.assign(ways, kNoLine);
    way_sectors.assign(ways, 0);
    prev.assign(ways, -1);
    next.assign(ways, -1);
    head.assign(sets, -1);
    tail.assign(sets, -1);
    used.assign(sets, 0);
    use_map = assoc > kScanWays;
    if (use_map) map.init(ways);
  }

  void invalidate() {
    std::fill(way_line.begin(), way_line.end(), kNoLine);
    std::fill(way_sectors.begin(), way_sectors.end(), 0);
    std::fill(head.begin(), head.end(), -1);
    std::fill(tail.begin(), tail.end(), -1);
    std::fill(used.begin(), used.end(), 0);
    if (use_map) map.clear();
  }

  void unlink(std::uint32_t set, std::int32_t way) {
    if (prev[way] >= 0)
      next[prev[way]] = next[way];
    else
      head[set] = next[way];
    if (next[way] >= 0)
      prev[next[way]] = prev[way];
    else
      tail[set] = prev[way];
  }

  void push_front(std::uint32_t set, std::int32_t way) {
    prev[way] = -1;
    next[way] = head[set];
    if (head[set] >= 0) prev[head[set]] = way;
    head[set] = way;
    if (tail[set] < 0) tail[set] = way;
  }

  // Sector-granular lookup with line-granular LRU; fills on miss.
  bool touch(std::uint64_t addr) {
    const std::uint64_t line_id = addr / line;
    const std::uint64_t sector_bit = 1ull << ((addr % line) / fg);
    const std::uint32_t set = static_cast<std::uint32_t>(line_id % sets);

    std::int32_t way = -1;
    if (use_map) {
      way = map.find(line_id);
    } else {
      const std::int32_t base = static_cast<std::int32_t>(set * assoc);
      for (std::int32_t w = base; w < base + static_cast<std::int32_t>(used[set]); ++w) {
        if (way_line[w] == line_id) {
          way = w;
          break;
        }
      }
    }

    if (way >= 0) {
      if (head[set] != way) {
        unlink(set, way);
        push_front(set, way);
      }
      if (way_sectors[way] & sector_bit) return true;
      way_sectors[way] |= sector_bit;  // sector fill, line already resident
      return false;
    }

    if (used[set] < static_cast<std::int32_t>(assoc)) {
      way = static_cast<std::int32_t>(set * assoc) + used[set];
      ++used[set];
    } else {
      way = tail[set];  // evict LRU line
      unlink(set, way);
      if (use_map) map.erase(way_line[way]);
    }
    way_line[way] = line_id;
    way_sectors[way] = sector_bit;
    push_front(set, way);
    if (use_map) map.insert(line_id, way);
    return false;
  }
};

// Deterministic noise stream: raw mt19937_64 bits mapped by hand so the
// sequence does not depend on the standard library's distribution choices.
class NoiseStream {
 public:
  explicit NoiseStream(std::uint64_t seed) : gen_(seed) {}

  double uniform() {  // [0, 1)
    return static_cast<double>(gen_() >> 11) * 0x1.0p-53;
  }

  double gauss() {  // Box-Muller, one variate per call
    const double u1 = (static_cast<double>(gen_() >> 11) + 1.0) * 0x1.0p-53;
    const double u2 = static_cast<double>(gen_() >> 11) * 0x1.0p-53;
    return std::sqrt(-2.0 * std::log(u1)) * std::cos(2.0 * M_PI * u2);
  }

 private:
  std::mt19937_64 gen_;
};

}  // namespace

struct SimSession::Impl {
  DeviceSpec spec;
  NoiseStream noise;
  bool noisy = false;
  std::uint64_t device_bytes = 0;
  std::uint64_t total_accesses = 0;

  // level index -> instance*amount+segment -> state (lazy)
  std::vector<std::vector<std::unique_ptr<CacheState>>> states;
  std::vector<std::uint32_t> instances_per_level;
  int scalar_shared_level = -1;
  std::vector<int> group_of_cu;  // indexed by physical id
  std::uint32_t num_groups = 0;

  Impl(DeviceSpec s, std::uint64_t seed)
      : spec(std::move(s)), noise(mix64(seed ^ mix64(spec.noise.seed))) {
    validate_device_spec(spec);
    noisy = spec.noise.jitter_stddev_fraction > 0 || spec.noise.spike_probability > 0;
    device_bytes = spec.levels.back().size_bytes;

    // sL1d groups (explicit, or singletons when unspecified)
    int max_id = -1;
    for (int id : spec.cu_topology.physical_cu_ids) max_id = std::max(max_id, id);
    group_of_cu.assign(static_cast<std::size_t>(max_id + 1), -1);
    if (!spec.cu_topology.sl1d_groups.empty()) {
      num_groups = static_cast<std::uint32_t>(spec.cu_topology.sl1d_groups.size());
      for (std::size_t g = 0; g < spec.cu_topology.sl1d_groups.size(); ++g)
        for (int id : spec.cu_topology.sl1d_groups[g]) group_of_cu[id] = static_cast<int>(g);
    } else {
      num_groups = static_cast<std::uint32_t>(spec.cu_topology.physical_cu_ids.size());
      for (std::size_t g = 0; g < spec.cu_topology.physical_cu_ids.size(); ++g)
        group_of_cu[spec.cu_topology.physical_cu_ids[g]] = static_cast<int>(g);
    }

    // The first cache level of the "scalar" space is shared per sL1d group
    // on amd-like devices.
    if (spec.vendor == Vendor::kAmdLike) {
      if (const auto* traversal = spec.find_space("scalar"); traversal && !traversal->empty()) {
        const int idx = level_index(traversal->front());
        if (spec.levels[idx].is_cache && spec.levels[idx].scope == Scope::kPerSm)
          scalar_shared_level = idx;
      }
    }

    states.resize(spec.levels.size());
    instances_per_level.resize(spec.levels.size(), 0);
    for (std::size_t i = 0; i < spec.levels.size(); ++i) {
      const auto& l = spec.levels[i];
      if (!l.is_cache) continue;
      std::uint32_t instances = 1;
      if (l.scope == Scope::kPerSm)
        instances = (static_cast<int>(i) == scalar_shared_level) ? num_groups
                                                                 : spec.compute.num_sm;
      instances_per_level[i] = instances;
      states[i].resize(static_cast<std::size_t>(instances) * l.amount);
    }
  }

  int level_index(const std::string& name) const {
    for (std::size_t i = 0; i < spec.levels.size(); ++i)
      if (spec.levels[i].name == name) return static_cast<int>(i);
    throw InputError("unknown level '" + name + "'");
  }

  CacheState* state_for(int level, const Actor& actor) {
    const auto& l = spec.levels[level];
    std::uint32_t instance = 0;
    std::uint32_t segment = 0;
    if (l.scope == Scope::kPerSm) {
      if (level == scalar_shared_level) {
        if (actor.cu_physical_id < 0 ||
            actor.cu_physical_id >= static_cast<int>(group_of_cu.size()) ||
            group_of_cu[actor.cu_physical_id] < 0)
          throw InputError("actor cu_physical_id " + std::to_string(actor.cu_physical_id) +
                           " is not a physical CU id");
        instance = static_cast<std::uint32_t>(group_of_cu[actor.cu_physical_id]);
      } else {
        instance = static_cast<std::uint32_t>(actor.sm_id);
      }
      segment = static_cast<std::uint32_t>(
          static_cast<std::uint64_t>(actor.core_index) * l.amount / spec.compute.cores_per_sm);
    } else {
      segment = static_cast<std::uint32_t>(static_cast<std::uint64_t>(actor.sm_id) * l.amount /
                                           spec.compute.num_sm);
    }
    auto& slot = states[level][static_cast<std::size_t>(instance) * l.amount + segment];
    if (!slot) {
      slot = std::make_unique<CacheState>();
      slot->init(l);
    }
    return slot.get();
  }

  void check_actor(const Actor& actor) const {
    if (actor.sm_id < 0 || actor.sm_id >= static_cast<int>(spec.compute.num_sm))
      throw InputError("actor sm_id out of range");
    if (actor.core_index < 0 || actor.core_index >= static_cast<int>(spec.compute.cores_per_sm))
      throw InputError("actor core_index out of range");
  }

  std::int64_t apply_noise(std::uint32_t base, bool timed) {
    if (!timed || !noisy) return base;
    const double z = noise.gauss();
    double lat = base * (1.0 + spec.noise.jitter_stddev_fraction * z);
    const double u = noise.uniform();
    if (u < spec.noise.spike_probability) {
      const double m = spec.noise.spike_multiplier_low +
                       (spec.noise.spike_multiplier_high - spec.noise.spike_multiplier_low) *
                           noise.uniform();
      lat *= m;
    }
    return std::max<std::int64_t>(1, std::llround(lat));
  }
};

struct SimSession::PreparedChase::Impl {
  struct Step {
    CacheState* cache = nullptr;  // null -> always services (scratchpad / memory)
    std::uint32_t level_index = 0;
    std::uint32_t hit_latency = 0;
  };
  std::vector<Step> steps;
};

SimSession::PreparedChase::PreparedChase() : impl_(new Impl) {}
SimSession::PreparedChase::~PreparedChase() = default;
SimSession::PreparedChase::PreparedChase(PreparedChase&&) noexcept = default;
SimSession::PreparedChase& SimSession::PreparedChase::operator=(PreparedChase&&) noexcept =
    default;

SimSession::SimSession(DeviceSpec spec, std::uint64_t seed)
    : impl_(new Impl(std::move(spec), seed)) {}
SimSession::~SimSession() = default;
SimSession::SimSession(SimSession&&) noexcept = default;
SimSession& SimSession::operator=(SimSession&&) noexcept = default;

const DeviceSpec& SimSession::spec() const { return impl_->spec; }

SimSession::PreparedChase SimSession::prepare(const std::string& space, const Actor& actor,
                                              const std::set<std::string>& bypass) {
  const auto* traversal = impl_->spec.find_space(space);
  if (!traversal) throw InputError("unknown logical space '" + space + "'");
  for (const auto& n : bypass) impl_->level_index(n);  // name check
  impl_->check_actor(actor);

  PreparedChase chase;
  for (std::size_t i = 0; i < traversal->size(); ++i) {
    const std::string& name = (*traversal)[i];
    const bool last = i + 1 == traversal->size();
    if (!last && bypass.count(name)) continue;  // final level always serviceable
    const int idx = impl_->level_index(name);
    const auto& l = impl_->spec.levels[idx];
    PreparedChase::Impl::Step step;
    step.level_index = static_cast<std::uint32_t>(idx);
    step.hit_latency = l.hit_latency_cycles;
    step.cache = l.is_cache ? impl_->state_for(idx, actor) : nullptr;
    chase.impl_->steps.push_back(step);
  }
  return chase;
}

SimSession::RawAccess SimSession::access_prepared(PreparedChase& chase, std::uint64_t address,
                                                  bool timed) {
  if (address >= impl_->device_bytes)
    throw InputError("address " + std::to_string(address) + " outside device memory");
  ++impl_->total_accesses;

  const auto& steps = chase.impl_->steps;
  for (std::size_t i = 0; i < steps.size(); ++i) {
    const auto& step = steps[i];
    const bool serviced = step.cache ? step.cache->touch(address) : true;
    if (serviced) {
      RawAccess r;
      r.level_index = step.level_index;
      r.was_hit_at_first_level = (i == 0) && step.cache != nullptr;
      r.latency_cycles = impl_->apply_noise(step.hit_latency, timed);
      return r;
    }
  }
  // Unreachable: traversals end at device memory, which always services.
  throw Error("traversal ended without a servicing level");
}

AccessResult SimSession::access(const std::string& space, const Actor& actor,
                                std::uint64_t address, const std::set<std::string>& bypass,
                                bool timed) {
  PreparedChase chase = prepare(space, actor, bypass);
  const RawAccess raw = access_prepared(chase, address, timed);
  AccessResult r;
  r.latency_cycles = raw.latency_cycles;
  r.serviced_by = impl_->spec.levels[raw.level_index].name;
  r.was_hit_at_first_level = raw.was_hit_at_first_level;
  return r;
}

double SimSession::bandwidth(const std::string& space, Direction direction,
                             std::uint32_t threads_per_block, std::uint32_t num_blocks,
                             std::uint64_t bytes_total) {
  if (threads_per_block == 0 || num_blocks == 0 || bytes_total == 0)
    throw InputError("bandwidth arguments must be positive");
  const auto* traversal = impl_->spec.find_space(space);
  if (!traversal) throw InputError("unknown logical space '" + space + "'");
  const auto& target = impl_->spec.levels[impl_->level_index(traversal->front())];
  const auto peak =
      direction == Direction::kRead ? target.peak_read_gibps : target.peak_write_gibps;
  if (!peak)
    throw UnsupportedMeasurementError("level '" + target.name +
                                      "' has no peak bandwidth for this direction");

  const auto& c = impl_->spec.compute;
  const double saturating = static_cast<double>(c.num_sm) * c.max_blocks_per_sm;
  const double occupancy =
      std::min(1.0, (static_cast<double>(threads_per_block) * num_blocks) /
                        (saturating * c.max_threads_per_block));
  double contention =
      std::max(0.0, static_cast<double>(num_blocks) - saturating) / (4.0 * saturating);
  contention = std::min(contention, 0.5);
  return *peak * occupancy * (1.0 - contention);
}

void SimSession::reset() {
  for (auto& per_level : impl_->states)
    for (auto& state : per_level)
      if (state) state->invalidate();
}

void SimSession::flush_level(const std::string& name) {
  const int idx = impl_->level_index(name);
  if (!impl_->spec.levels[idx].is_cache) return;  // scratchpads have no tags
  for (auto& state : impl_->states[idx])
    if (state) state->invalidate();
}

std::uint64_t SimSession::total_accesses() const { return impl_->total_accesses; }

const std::string& SimSession::level_name(std::uint32_t index) const {
  return impl_->spec.levels.at(index).name;
}

std::uint64_t SimSession::device_memory_bytes() const { return impl_->device_bytes; }

}  // namespace topoprobe::sim
