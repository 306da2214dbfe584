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

#include "topoprobe/cli.hpp"

#include <cstdlib>
#include <ctime>
#include <filesystem>

#include "topoprobe/errors.hpp"
#include "topoprobe/pipeline.hpp"
#include "topoprobe/profiles.hpp"

namespace topoprobe::cli {

namespace {

std::uint64_t resolve_seed(const RunConfig& config) {
  if (config.seed) return *config.seed;
  if (const char* env = std::getenv("TOPOPROBE_SEED")) {
    char* end = nullptr;
    const unsigned long long v = std::strtoull(env, &end, 10);
    if (end && *end == '\0') return v;
  }
  return 42;
}

std::string utc_timestamp() {
  const std::time_t now = std::time(nullptr);
  std::tm tm{};
  gmtime_r(&now, &tm);
  char buf[32];
  std::strftime(buf, sizeof(buf), "%Y-%m-%dT%H:%M:%SZ", &tm);
  return buf;
}

sim::DeviceSpec resolve_device(const RunConfig& config) {
  sim::DeviceSpec spec;
  if (const auto* profile = profiles::find_builtin_profile(config.device)) {
    spec = profile->spec;
  } else if (std::filesystem::exists(config.device)) {
    spec = profiles::load_device_spec(config.device);
  } else {
    throw InputError("'" + config.device +
                     "' is neither a builtin profile nor a readable spec file");
  }
  if (config.scale_all) spec = profiles::scale_device_spec(spec, *config.scale_all);
  for (const auto& [level, factor] : config.scale_levels)
    spec = profiles::scale_device_spec(spec, factor, {level});
  return spec;
}

}  // namespace

int run(const RunConfig& config, std::ostream& out, std::ostream& err) {
  try {
    if (config.backend != "sim") {
      err << "topoprobe: unknown backend '" << config.backend
          << "' (only the simulator backend ships today)\n";
      return 1;
    }

    const sim::DeviceSpec spec = resolve_device(config);

    pipeline::DiscoveryOptions options;
    options.seed = resolve_seed(config);
    options.alpha_grid = config.alpha_grid;
    options.only_element = config.only;
    options.collect_artifacts = config.raw_csv || config.graphs;
    if (!config.no_timestamp) options.timestamp = utc_timestamp();

    const auto result = pipeline::run_discovery(spec, options);
    const std::string json = report::emit_json(result.report);

    const bool file_output =
        config.json_file || config.markdown || config.raw_csv || config.graphs;
    if (file_output) std::filesystem::create_directories(config.out_dir);
    const auto path = [&](const std::string& name) {
      return (std::filesystem::path(config.out_dir) / name).string();
    };

    if (config.json_file)
      report::write_file(path(pipeline::element_slug(spec.model) + ".json"), json);
    if (config.markdown)
      report::write_file(path(pipeline::element_slug(spec.model) + ".md"),
                         report::emit_markdown(result.report));
    for (const auto& artifact : result.artifacts) {
      const std::string slug = pipeline::element_slug(artifact.element);
      if (config.raw_csv)
        report::write_file(path(slug + "_size_raw.csv"),
                           report::render_raw_csv(artifact.matrix));
      if (config.graphs)
        report::write_file(path(slug + "_size_reduced.csv"),
                           report::render_reduced_csv(artifact.series));
    }

    // JSON goes to stdout unless quiet mode has somewhere else to put it.
    if (!(config.quiet && file_output)) out << json;

    if (result.any_inconclusive) {
      if (!config.quiet)
        err << "topoprobe: one or more benchmarks were inconclusive (confidence 0)\n";
      return 2;
    }
    return 0;
  } catch (const Error& e) {
    err << "topoprobe: " << e.what() << "\n";
    return 1;
  } catch (const std::exception& e) {
    err << "topoprobe: unexpected error: " << e.what() << "\n";
    return 1;
  }
}

}  // namespace topoprobe::cli
