// Copyright 2026 The decouple Authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//      http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

// decouple run --config path [--samples N] [--seed S]
// decouple validate --config path

#include <cstdint>
#include <iostream>
#include <optional>
#include <string>

#include "CLI11.hpp"
#include "decouple/experiment.hpp"

int main(int argc, char** argv) {
  CLI::App app{"Seeded decoupling experiments"};
  app.set_version_flag("--version", std::string(DECOUPLE_VERSION));
  app.require_subcommand(1);

  std::string run_config;
  std::optional<std::size_t> samples;
  std::optional<std::uint64_t> seed;
  auto* run = app.add_subcommand("run", "run an experiment and write its artifacts");
  run->add_option("--config", run_config, "experiment config (JSON)")->required();
  run->add_option("--samples", samples, "override the config's sample count");
  run->add_option("--seed", seed, "override the config's root seed");

  std::string validate_path;
  auto* validate = app.add_subcommand("validate", "check a config without computing anything");
  validate->add_option("--config", validate_path, "experiment config (JSON)")->required();

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : decouple::kExitConfig;
  }

  try {
    if (*validate) {
      const auto diags = decouple::validate_config(decouple::load_config_file(validate_path));
      for (const auto& d : diags) std::cerr << validate_path << ": " << d << "\n";
      if (!diags.empty()) return decouple::kExitConfig;
      std::cout << validate_path << ": ok\n";
      return decouple::kExitOk;
    }
    auto config = decouple::load_config_file(run_config);
    if (samples && config.is_object()) config["samples"] = *samples;
    if (seed && config.is_object()) config["seed"] = *seed;
    const auto outcome = decouple::run_experiment(config);
    if (outcome.exit_code != decouple::kExitOk) {
      std::cerr << outcome.message << "\n";
    } else {
      std::cout << "wrote " << config["output_dir"].get<std::string>() << "/{results.csv,summary.json,manifest.json}\n";
    }
    return outcome.exit_code;
  } catch (const decouple::Error& e) {
    std::cerr << e.what() << "\n";
    return e.kind() == decouple::ErrorKind::config ? decouple::kExitConfig : decouple::kExitComputation;
  }
}
