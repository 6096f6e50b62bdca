// Copyright 2026 The GradLab Authors
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

#include <cstdint>
#include <string>

#include "CLI11.hpp"

#include "gradlab/cli.hpp"

int main(int argc, char** argv) {
  CLI::App app{"gradlab: gradient-leakage inference games, defenses, and audits"};
  std::string config_path;
  std::uint64_t seed = 0;
  std::string out_dir;
  int repeats = 1;
  app.add_option("--config", config_path, "experiment config file (JSON)")
      ->required();
  CLI::Option* seed_opt =
      app.add_option("--seed", seed, "master seed (overrides the config)");
  CLI::Option* out_opt =
      app.add_option("--out", out_dir, "output directory (overrides the config)");
  CLI::Option* repeats_opt =
      app.add_option("--repeats", repeats, "repeat count (overrides the config)");
  CLI11_PARSE(app, argc, argv);

  gradlab::cli::RunOverrides overrides;
  if (seed_opt->count() > 0) overrides.seed = seed;
  if (out_opt->count() > 0) overrides.out_dir = out_dir;
  if (repeats_opt->count() > 0) overrides.repeats = repeats;
  return gradlab::cli::RunExperiment(config_path, overrides);
}
