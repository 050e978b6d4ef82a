// Copyright 2026 The CLOL Authors
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
#include <optional>
#include <string>

#include <CLI11.hpp>

#include "clol/commands.hpp"
#include "clol/config.hpp"

int main(int argc, char** argv) {
  CLI::App app{"Closed-loop designed, open-loop executed control: sweeps and verification"};
  app.require_subcommand(1);

  std::string config_path;
  std::optional<std::string> out_dir;
  std::optional<unsigned> workers;
  std::optional<std::uint64_t> seed;

  for (const char* name : {"sweep", "trace", "verify", "bound"}) {
    CLI::App* sub = app.add_subcommand(name);
    sub->add_option("--config", config_path, "configuration file")->required();
    sub->add_option("--out", out_dir, "output directory");
    sub->add_option("--workers", workers, "worker threads");
    sub->add_option("--seed", seed, "seed for randomized spot checks");
  }

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : clol::kExitConfig;
  }

  clol::RunConfig cfg;
  try {
    cfg = clol::load_config(config_path);
    if (out_dir) cfg.out_dir = *out_dir;
    if (workers) cfg.workers = *workers;
    if (seed) cfg.seed = *seed;
    cfg.validate();
  } catch (const clol::ConfigError& e) {
    std::cerr << "config error: " << e.what() << '\n';
    return clol::kExitConfig;
  }
  return clol::run_command(app.get_subcommands().front()->get_name(), cfg, std::cerr);
}
