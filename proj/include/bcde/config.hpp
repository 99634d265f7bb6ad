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

#include <cstddef>
#include <cstdint>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include "bcde/data.hpp"
#include "bcde/model.hpp"
#include "bcde/trainer.hpp"

namespace bcde {

/// Invalid, unknown, or duplicated configuration keys and values.
class ConfigError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Every setting of an experiment. Parsed from a flat `key = value` file
/// with `#` comments; keys not listed here are rejected.
struct RunConfig {
  // data
  std::string task = "quadrant1";
  std::size_t n_l = 50000;
  std::optional<std::size_t> n_u;  // "all" when unset
  std::size_t val_size = 10000;
  std::optional<std::size_t> test_size;  // "all" when unset
  std::size_t downsample = 1;
  int max_shift = kDefaultMaxShift;
  std::uint64_t data_seed = 0;
  // model
  std::size_t latent_dim = 50;
  std::vector<std::size_t> hidden = {256, 256};
  Activation activation = Activation::relu;
  DecoderKind decoder = DecoderKind::bernoulli;
  double decoder_var = 0.1;
  bool tie_init = true;
  // objective
  TrainMode mode = TrainMode::hybrid;
  double alpha = 0.5;
  double lambda = 1e-2;  // shift tasks default to 0.1
  // optimizer and schedule
  double lr = 1e-3;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double epsilon = 1e-8;
  std::size_t batch = 64;
  std::size_t patience = 20;
  std::size_t max_epochs = 500;
  std::size_t pretrain_max_epochs = 500;
  // evaluation and replicates
  std::size_t iw_eval = 100;
  std::vector<std::uint64_t> seeds = {0, 1, 2};
  std::size_t export_count = 8;
  // paths
  std::string data_dir;  // BCDE_DATA_DIR, else "data/mnist"
  std::string out_dir = "runs";
  std::string cache;  // default <out_dir>/split.bin

  bool operator==(const RunConfig&) const = default;

  std::string cache_path() const;
  /// Artifact directory of one replicate: <out_dir>/seed<k>.
  std::string seed_dir(std::uint64_t seed) const;
  std::string checkpoint_path(std::uint64_t seed) const;
  std::string log_path(std::uint64_t seed) const;

  PrepareOptions prepare_options() const;
  ModelConfig model_config(std::size_t x_dim, std::size_t y_dim, std::uint64_t seed) const;
  TrainConfig train_config(std::uint64_t seed) const;
};

/// `env_data_dir` supplies the data_dir default (normally $BCDE_DATA_DIR).
RunConfig parse_config(const std::string& text, const std::optional<std::string>& env_data_dir = std::nullopt);
RunConfig load_config(const std::string& path);

/// Every key with its effective value; parse_config(dump_config(c)) == c.
std::string dump_config(const RunConfig& config);

}  // namespace bcde
