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

#include "topoprobe/backend.hpp"

#include <algorithm>

#include "topoprobe/errors.hpp"

namespace topoprobe::probes {

SimulatorBackend::SimulatorBackend(sim::DeviceSpec spec, std::uint64_t seed)
    : session_(std::move(spec), seed) {
  // Fixed-size buffer slots keep distinct buffer ids on disjoint, reusable
  // address ranges.
  std::uint64_t slot = 1;
  while (slot * 2 <= session_.device_memory_bytes() / 8) slot *= 2;
  buffer_slot_bytes_ = slot;
}

BackendCapabilities SimulatorBackend::capabilities() const {
  BackendCapabilities caps;
  caps.spaces = session_.spec().logical_spaces;
  caps.paired_actors = true;
  caps.device_memory_bytes = session_.device_memory_bytes();
  return caps;
}

sim::ApiInfo SimulatorBackend::query_api_info() { return sim::device_info(session_.spec()); }

std::uint64_t SimulatorBackend::buffer_base(int buffer_id, std::uint64_t array_bytes) const {
  if (buffer_id < 0 || buffer_id > 7)
    throw InputError("buffer_id must be in [0, 7]");
  if (array_bytes > buffer_slot_bytes_)
    throw InputError("array of " + std::to_string(array_bytes) +
                     " bytes exceeds the backend buffer slot");
  return static_cast<std::uint64_t>(buffer_id) * buffer_slot_bytes_;
}

void SimulatorBackend::run_phase(const PChasePlan& plan, Trace* out) {
  if (plan.stride_bytes < 4) throw InputError("chase stride must be >= 4 bytes");
  if (plan.array_bytes < plan.stride_bytes)
    throw InputError("array must cover at least one stride");
  const std::uint64_t chain = plan.array_bytes / plan.stride_bytes;
  if (plan.timed_count > chain)
    throw InputError("timed_count exceeds the chase chain length");

  const std::uint64_t base = buffer_base(plan.buffer_id, plan.array_bytes);
  auto chase = session_.prepare(plan.space, plan.actor, plan.bypass);

  if (plan.warmup) {
    for (std::uint64_t i = 0; i < chain; ++i)
      session_.access_prepared(chase, base + i * plan.stride_bytes, false);
  }
  if (plan.timed_count > 0) {
    out->latencies.reserve(plan.timed_count);
    for (std::uint64_t i = 0; i < plan.timed_count; ++i) {
      const auto r = session_.access_prepared(chase, base + i * plan.stride_bytes, true);
      out->latencies.push_back(static_cast<double>(r.latency_cycles));
    }
  }
}

Trace SimulatorBackend::run_pchase(const PChasePlan& plan) {
  if (plan.timed_count == 0)
    throw InputError("run_pchase needs timed_count >= 1 (warm-only phases belong in "
                     "phase sequences)");
  Trace trace;
  trace.plan = plan;
  run_phase(plan, &trace);
  return trace;
}

std::vector<Trace> SimulatorBackend::run_paired_phase_sequence(
    const std::vector<PChasePlan>& plans) {
  std::vector<Trace> traces;
  for (const auto& plan : plans) {
    Trace trace;
    trace.plan = plan;
    run_phase(plan, &trace);
    if (plan.timed_count > 0) traces.push_back(std::move(trace));
  }
  return traces;
}

double SimulatorBackend::run_stream(const StreamPlan& plan) {
  return session_.bandwidth(plan.space, plan.direction, plan.threads_per_block,
                            plan.num_blocks, plan.bytes_total);
}

std::uint64_t SimulatorBackend::work_units() const { return session_.total_accesses(); }

}  // namespace topoprobe::probes
