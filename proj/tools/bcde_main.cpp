/* Copyright 2026 The BCDE Authors

Licensed under the Apache License, Version 2.0 (the "License");
you may not use this file except in compliance with the License.
You may obtain a copy of the License at

        https://www.apache.org/licenses/LICENSE-2.0

Unless required by applicable law or agreed to in writing, software
distributed under the License is distributed on an "AS IS" BASIS,
WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
See the License for the specific language governing permissions and
        limitations under the License.
==============================================================================*/

#include <iostream>
#include <string>
#include <utility>

#include "CLI11.hpp"
#include "bcde/commands.hpp"

int main(int argc, char** argv) {
  CLI::App app{"Bottleneck conditional density estimation"};
  app.require_subcommand(1);
  bcde::CommandOptions opts;
  std::string checkpoint;
  const std::pair<const char*, const char*> commands[] = {
      {"prepare", "Build and cache the data split"},
      {"train", "Train one model per configured seed"},
      {"eval", "Report the importance-weighted test bound"},
      {"diag", "Run gradient and oracle self-checks"},
      {"export", "Write conditional samples or latent means"},
  };
  for (const auto& [name, description] : commands) {
    const std::string n = name;
    CLI::App* sub = app.add_subcommand(n, description);
    sub->add_option("--config", opts.config_path, "Run configuration file")->required();
    if (n == "train") sub->add_flag("--resume", opts.resume, "Continue from the last saved epoch");
    if (n == "eval" || n == "export") {
      sub->add_option("--checkpoint", checkpoint, "Checkpoint to load instead of the per-seed defaults");
    }
    if (n == "export") {
      sub->add_option("--what", opts.what, "Export kind")->check(CLI::IsMember({"samples", "latents"}));
    }
  }
  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int rc = app.exit(e);
    return rc == 0 ? 0 : bcde::kExitUsage;
  }
  if (!checkpoint.empty()) opts.checkpoint = checkpoint;
  return bcde::run_command(app.get_subcommands().front()->get_name(), opts);
}
