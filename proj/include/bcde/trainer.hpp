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
#include <functional>
#include <map>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "bcde/data.hpp"
#include "bcde/model.hpp"
#include "bcde/objectives.hpp"
#include "bcde/tensor.hpp"

namespace bcde {

struct AdamConfig {
  double lr = 1e-3;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double epsilon = 1e-8;
};

struct AdamState {
  AdamConfig config;
  std::uint64_t step = 0;
  std::map<std::string, std::vector<double>> m;
  std::map<std::string, std::vector<double>> v;
};

/// One bias-corrected Adam descent step, params -= lr * m_hat /
/// (sqrt(v_hat) + eps), for every trainable parameter. Gradients missing
/// from `grads` count as zero.
void adam_step(AdamState& state, const Gradients& grads, ParameterStore& params);

enum class TrainMode { conditional, pretrain, hybrid, hybrid_factored };

TrainMode parse_train_mode(std::string_view name);
std::string to_string(TrainMode mode);

struct EpochRecord {
  std::size_t epoch = 0;
  std::string mode;  // training phase that produced the row
  double train_objective = 0.0;
  double val_bound = 0.0;
  double seconds = 0.0;
};

inline constexpr std::string_view kLogHeader = "epoch,mode,train_objective,val_bound_iw1,seconds";

std::string format_log_row(const EpochRecord& r);

struct TrainConfig {
  TrainMode mode = TrainMode::hybrid;
  HybridConfig hybrid;
  AdamConfig adam;
  std::size_t batch = 64;
  std::size_t patience = 20;
  std::size_t max_epochs = 500;
  /// Epoch cap for the marginal phase of pretrain mode.
  std::size_t pretrain_max_epochs = 500;
  std::uint64_t seed = 0;
  /// Best-validation checkpoint; "<path>.last" holds the latest epoch for
  /// resumption. Empty disables checkpoint files.
  std::string checkpoint_path;
  /// CSV training log; empty disables it.
  std::string log_path;
  bool resume = false;
  std::function<void(const EpochRecord&)> on_epoch;
};

struct TrainResult {
  std::vector<EpochRecord> log;
  std::size_t best_epoch = 0;
  double best_val = 0.0;
  std::size_t epochs = 0;  // epochs of the final (conditional or hybrid) phase
};

/// Runs the training loop and leaves `models` at the best-validation
/// parameters of the final phase. Throws std::invalid_argument for an empty
/// labeled set or a mode incompatible with the model's inference kind.
TrainResult train(ModelPair& models, const PreparedData& data, const TrainConfig& cfg);

/// Mean of the single-sample bound over a held-out set with fixed noise.
double validation_bound(const ModelPair& models, const Matrix& x, const Matrix& y,
                        std::uint64_t seed);

struct EvalResult {
  double loss = 0.0;    // mean of -iw_bound
  double std_error = 0.0;  // per-example, or across replicates when combined
  std::size_t count = 0;
  std::vector<double> per_example;  // -iw_bound for each pair
};

EvalResult evaluate(const ModelPair& models, const Matrix& x, const Matrix& y, std::size_t k,
                    std::uint64_t seed);

/// Mean and standard error across replicate evaluations.
EvalResult combine_replicates(const std::vector<EvalResult>& runs);

/// Training progress stored alongside parameters.
struct CheckpointMeta {
  std::size_t epoch = 0;  // last completed epoch (global numbering)
  std::string phase;
  std::size_t phase_start = 0;  // global epoch before the phase's first
  double best_val = 0.0;
  std::size_t best_epoch = 0;
  std::size_t since_best = 0;
};

void save_checkpoint(const std::string& path, const ParameterStore& params, const AdamState& adam,
                     const CheckpointMeta& meta);

/// Loads values into an existing store. Throws FormatError when parameter
/// names or shapes disagree with the store.
void load_checkpoint(const std::string& path, ParameterStore& params, AdamState* adam,
                     CheckpointMeta* meta);

}  // namespace bcde
