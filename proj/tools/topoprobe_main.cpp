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

#include <iostream>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "topoprobe/cli.hpp"
#include "topoprobe/profiles.hpp"

int main(int argc, char** argv) {
  topoprobe::cli::RunConfig config;

  CLI::App app{"topoprobe - auto-discovery of compute and memory topologies"};
  app.add_option("--device", config.device,
                 "builtin profile (synthetic-h100, synthetic-mi210, tiny-test) or a "
                 "device-spec JSON file")
      ->capture_default_str();

  std::uint64_t seed = 0;
  auto* seed_opt = app.add_option("--seed", seed, "noise / session seed (env TOPOPROBE_SEED)");

  std::vector<double> alphas;
  app.add_option("--alpha-grid", alphas,
                 "significance levels for the change-point test, strictest first")
      ->delimiter(',');

  app.add_flag("-j,--json", config.json_file, "write the JSON report into the output dir");
  app.add_flag("-p,--markdown", config.markdown, "write a Markdown report");
  app.add_flag("-o,--raw", config.raw_csv, "store raw timing CSVs per size benchmark");
  app.add_flag("-g,--graphs", config.graphs, "store reduced-series CSVs for plotting");
  app.add_flag("-q,--quiet", config.quiet, "suppress diagnostics; files silence stdout");
  app.add_flag("--no-timestamp", config.no_timestamp,
               "omit the timestamp for reproducible output");

  std::string only;
  auto* only_opt = app.add_option("--only", only, "limit the run to one memory element");

  app.add_option("--out-dir", config.out_dir, "directory for file outputs")
      ->capture_default_str();

  std::uint32_t scale_all = 0;
  app.add_option("--scale", scale_all, "divide every cache size by this factor");
  std::vector<std::string> scale_levels;
  app.add_option("--scale-level", scale_levels,
                 "divide one level's size: NAME=FACTOR (repeatable)");

  app.add_option("--backend", config.backend, "measurement backend (sim)")
      ->capture_default_str();

  CLI11_PARSE(app, argc, argv);

  if (seed_opt->count() > 0) config.seed = seed;
  if (only_opt->count() > 0) config.only = only;
  config.alpha_grid = alphas;
  if (scale_all > 0) config.scale_all = scale_all;
  for (const auto& entry : scale_levels) {
    const auto eq = entry.find('=');
    if (eq == std::string::npos) {
      std::cerr << "topoprobe: --scale-level expects NAME=FACTOR, got '" << entry << "'\n";
      return 1;
    }
    config.scale_levels.emplace_back(
        entry.substr(0, eq),
        static_cast<std::uint32_t>(std::stoul(entry.substr(eq + 1))));
  }

  return topoprobe::cli::run(config, std::cout, std::cerr);
}
