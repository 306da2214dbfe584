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
#include <ostream>
#include <string>
#include <utility>
#include <vector>

namespace topoprobe::cli {

struct RunConfig {
  std::string device = "synthetic-h100";  // builtin profile name or spec path
  std::optional<std::uint64_t> seed;      // fallback: TOPOPROBE_SEED, then 42
  std::vector<double> alpha_grid;         // empty -> default grid
  bool json_file = false;                 // -j
  bool markdown = false;                  // -p
  bool raw_csv = false;                   // -o
  bool graphs = false;                    // -g (reduced-series CSVs)
  bool quiet = false;                     // -q
  bool no_timestamp = false;
  std::optional<std::string> only;
  std::string out_dir = ".";
  std::vector<std::pair<std::string, std::uint32_t>> scale_levels;
  std::optional<std::uint32_t> scale_all;
  std::string backend = "sim";
};

// Exit codes: 0 success, 2 at least one inconclusive benchmark (report still
// emitted), 1 configuration or backend errors.
int run(const RunConfig& config, std::ostream& out, std::ostream& err);

}  // namespace topoprobe::cli
