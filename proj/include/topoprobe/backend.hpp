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
#include <memory>
#include <set>
#include <string>
#include <utility>
#include <vector>

#include "topoprobe/memsim.hpp"
#include "topoprobe/stats.hpp"

namespace topoprobe::probes {

// One pointer-chase: a cyclic chain of dependent loads over array_bytes with
// the given stride. warmup runs one untimed full pass first; timed_count
// loads are then timed from the start of the chain. timed_count 0 makes a
// warm-only phase (valid inside phase sequences).
struct PChasePlan {
  std::string space;
  std::uint64_t array_bytes = 0;
  std::uint32_t stride_bytes = 32;
  std::uint32_t timed_count = 512;
  bool warmup = true;
  std::set<std::string> bypass;
  sim::Actor actor;
  int buffer_id = 0;  // phases sharing a buffer id touch the same allocation
};

struct Trace {
  stats::Sample latencies;
  PChasePlan plan;
};

struct StreamPlan {
  std::string space;
  sim::Direction direction = sim::Direction::kRead;
  std::uint32_t threads_per_block = 0;
  std::uint32_t num_blocks = 0;
  std::uint64_t bytes_total = 0;
};

struct BackendCapabilities {
  // space name -> ordered level names its loads traverse
  std::vector<std::pair<std::string, std::vector<std::string>>> spaces;
  bool paired_actors = false;
  std::uint64_t device_memory_bytes = 0;

  const std::vector<std::string>* levels_for(const std::string& space) const {
    for (const auto& [name, levels] : spaces)
      if (name == space) return &levels;
    return nullptr;
  }
};

// The measurement contract the probe engine drives. The shipped
// implementation simulates a device; a real-GPU backend is the extension
// point.
class MeasurementBackend {
 public:
  virtual ~MeasurementBackend() = default;

  virtual BackendCapabilities capabilities() const = 0;
  virtual sim::ApiInfo query_api_info() = 0;
  virtual Trace run_pchase(const PChasePlan& plan) = 0;
  // Deterministic lockstep phases on one device state; returns one trace per
  // plan with timed_count > 0, in order.
  virtual std::vector<Trace> run_paired_phase_sequence(const std::vector<PChasePlan>& plans) = 0;
  virtual double run_stream(const StreamPlan& plan) = 0;

  // Monotone count of issued accesses; a cost proxy for tests.
  virtual std::uint64_t work_units() const { return 0; }
};

class SimulatorBackend : public MeasurementBackend {
 public:
  SimulatorBackend(sim::DeviceSpec spec, std::uint64_t seed);

  BackendCapabilities capabilities() const override;
  sim::ApiInfo query_api_info() override;
  Trace run_pchase(const PChasePlan& plan) override;
  std::vector<Trace> run_paired_phase_sequence(const std::vector<PChasePlan>& plans) override;
  double run_stream(const StreamPlan& plan) override;
  std::uint64_t work_units() const override;

  sim::SimSession& session() { return session_; }

 private:
  std::uint64_t buffer_base(int buffer_id, std::uint64_t array_bytes) const;
  void run_phase(const PChasePlan& plan, Trace* out);

  sim::SimSession session_;
  std::uint64_t buffer_slot_bytes_ = 0;
};

}  // namespace topoprobe::probes
