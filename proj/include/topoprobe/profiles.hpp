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

#include <optional>
#include <set>
#include <string>
#include <vector>

#include "topoprobe/memsim.hpp"

namespace topoprobe::profiles {

// Golden expectations for one memory element, consistent with the profile's
// ground truth.
struct ExpectedElement {
  std::string element;
  std::optional<std::uint64_t> size_bytes;
  std::optional<std::uint32_t> line_size_bytes;
  std::optional<std::uint32_t> fetch_granularity_bytes;
  std::optional<std::uint32_t> latency_cycles;
  std::optional<std::uint32_t> amount;
  std::optional<std::vector<std::string>> shared_with;
  std::optional<double> read_gibps;
  std::optional<double> write_gibps;
};

struct ReferenceProfile {
  std::string name;
  sim::DeviceSpec spec;
  std::vector<ExpectedElement> expected;
};

// synthetic-h100, synthetic-mi210 and the 2-level tiny-test toy.
const std::vector<ReferenceProfile>& builtin_profiles();

const ReferenceProfile* find_builtin_profile(const std::string& name);

// Divides cache sizes (not latencies, line sizes or fetch granularities) by
// `factor`, preserving the set count. An empty filter scales every cache
// level. Throws InputError on divisibility violations.
sim::DeviceSpec scale_device_spec(const sim::DeviceSpec& spec, std::uint32_t factor,
                                  const std::set<std::string>& level_filter = {});

// Parses and validates a device-spec JSON file.
sim::DeviceSpec load_device_spec(const std::string& path);

}  // namespace topoprobe::profiles
