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

#pragma once

#include <iosfwd>
#include <optional>
#include <string>

namespace bcde {

enum ExitCode : int { kExitOk = 0, kExitUsage = 1, kExitData = 2, kExitDiagnostic = 3 };

struct CommandOptions {
  std::string config_path;
  std::optional<std::string> checkpoint;
  bool resume = false;
  std::string what = "samples";  // export: samples | latents
  std::ostream* out = nullptr;   // defaults to std::cout
  std::ostream* err = nullptr;   // defaults to std::cerr
};

/// Writes the prepared-split cache.
int cmd_prepare(const CommandOptions& options);
/// Trains one model per configured seed.
int cmd_train(const CommandOptions& options);
/// Writes and prints the metrics record.
int cmd_eval(const CommandOptions& options);
/// Runs the diagnostic suite; exit 3 when any check fails.
int cmd_diag(const CommandOptions& options);
/// Writes a PGM sample grid or a CSV of latent means.
int cmd_export(const CommandOptions& options);

/// Dispatches by name and maps exceptions to exit codes.
int run_command(const std::string& name, const CommandOptions& options);

}  // namespace bcde
