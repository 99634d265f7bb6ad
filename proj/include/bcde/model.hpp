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

#include <cstdint>
#include <optional>
#include <random>
#include <string>
#include <utility>
#include <vector>

#include "bcde/distributions.hpp"
#include "bcde/tensor.hpp"

namespace bcde {

enum class Activation { relu, tanh };
enum class HeadKind { diag_gaussian, bernoulli, fixed_var_gaussian, natural_gaussian };
/// standard: dedicated recognition networks per conditioning set.
/// factored: a likelihood network for y merged with a Gaussian in natural
/// parameter space.
enum class InferenceMode { standard, factored };
enum class DecoderKind { bernoulli, gaussian };

std::string to_string(InferenceMode m);
std::string to_string(Activation a);
std::string to_string(DecoderKind k);

/// Bounds applied to every log-variance a network emits.
inline constexpr double kLogVarMin = -8.0;
inline constexpr double kLogVarMax = 8.0;

struct MlpSpec {
  std::size_t input_dim = 0;
  std::vector<std::size_t> hidden_widths;
  HeadKind head = HeadKind::diag_gaussian;
  std::size_t output_dim = 0;
  Activation activation = Activation::relu;
  double fixed_var = 0.1;  // fixed_var_gaussian heads only
};

/// Resolves parameter names to tensors, watching them on a tape when one is
/// given and reading detached values otherwise.
class ParamView {
 public:
  explicit ParamView(const ParameterStore& store, Tape* tape = nullptr)
      : store_(&store), tape_(tape) {}
  Tensor operator()(const std::string& name) const;
  const ParameterStore& store() const { return *store_; }
  Tape* tape() const { return tape_; }

 private:
  const ParameterStore* store_;
  Tape* tape_;
};

class Mlp {
 public:
  Mlp() = default;
  Mlp(std::string prefix, MlpSpec spec);

  const std::string& prefix() const { return prefix_; }
  const MlpSpec& spec() const { return spec_; }
  std::size_t num_layers() const { return spec_.hidden_widths.size() + 1; }
  /// Width of the final linear layer (two blocks for Gaussian heads).
  std::size_t raw_output_dim() const;
  std::vector<std::string> parameter_names() const;
  std::string weight_name(std::size_t layer) const;
  std::string bias_name(std::size_t layer) const;

  /// Adds weights drawn uniformly from +-sqrt(6 / (fan_in + fan_out)) and
  /// zero biases.
  void init_parameters(ParameterStore& store, std::mt19937_64& rng) const;

  /// Output of the final linear layer.
  Tensor raw(const ParamView& params, const Tensor& input) const;

  DiagGaussianParams gaussian(const ParamView& params, const Tensor& input) const;
  GaussianNatParams natural(const ParamView& params, const Tensor& input) const;
  /// Log-likelihood of `target` under a Bernoulli or fixed-variance head.
  Tensor log_likelihood(const ParamView& params, const Tensor& input, const Tensor& target) const;
  /// Bernoulli probabilities or Gaussian means.
  Tensor mean_output(const ParamView& params, const Tensor& input) const;

 private:
  std::string prefix_;
  MlpSpec spec_;
};

struct ModelConfig {
  std::size_t x_dim = 0;
  std::size_t y_dim = 0;
  std::size_t latent_dim = 50;
  std::vector<std::size_t> hidden = {256, 256};
  Activation activation = Activation::relu;
  InferenceMode inference = InferenceMode::standard;
  DecoderKind decoder = DecoderKind::bernoulli;
  double decoder_var = 0.1;
  /// Start each tied BCDE network as a copy of its BJDE partner.
  bool tie_init = true;
  std::uint64_t seed = 0;
};

/// Joint sibling: z generates x and y independently.
struct BjdeModel {
  InferenceMode mode = InferenceMode::standard;
  std::optional<Mlp> q_z_given_xy;  // standard only
  Mlp q_z_given_x;
  std::optional<Mlp> q_z_given_y;  // standard only
  std::optional<Mlp> lhat_y;       // factored only
  Mlp p_x_given_z;
  Mlp p_y_given_z;
};

/// Conditional model with generative path x -> z -> y. The y decoder sees
/// only z.
struct BcdeModel {
  InferenceMode mode = InferenceMode::standard;
  Mlp p_z_given_x;
  std::optional<Mlp> q_z_given_xy;  // standard only
  std::optional<Mlp> lhat_y;        // factored only
  Mlp p_y_given_z;
};

struct NetworkPair {
  std::string bcde;  // network prefix in the conditional model
  std::string bjde;  // network prefix in the joint model
};

/// Correspondence between conditional parameters and joint parameters.
struct TyingRegistry {
  InferenceMode mode = InferenceMode::standard;
  std::vector<NetworkPair> networks;
  /// (bcde parameter name, bjde parameter name)
  std::vector<std::pair<std::string, std::string>> pairs;
};

struct ModelPair {
  ModelConfig config;
  ParameterStore params;
  BjdeModel bjde;
  BcdeModel bcde;
  TyingRegistry registry;
};

ModelPair build_models(const ModelConfig& config);

/// Copies each BJDE parameter onto its BCDE partner.
void copy_tied(const TyingRegistry& registry, ParameterStore& params);

/// (lambda / 2) * sum over tied pairs of ||gamma - gamma'||^2.
Tensor tying_penalty(const TyingRegistry& registry, const ParamView& params, double lambda);

/// Sum over tied pairs of ||gamma - gamma'||^2 on detached values.
double tied_distance(const TyingRegistry& registry, const ParameterStore& params);

/// Conditional prior p(z|x) and recognition q(z|x,y) of the BCDE.
struct BcdeInference {
  DiagGaussianParams prior;
  DiagGaussianParams posterior;
};

DiagGaussianParams bcde_prior(const BcdeModel& bcde, const ParamView& params, const Tensor& x);
BcdeInference bcde_infer(const BcdeModel& bcde, const ParamView& params, const Tensor& x,
                         const Tensor& y);
DiagGaussianParams bcde_recognition(const BcdeModel& bcde, const ParamView& params,
                                    const Tensor& x, const Tensor& y);

/// Recognition distribution of the BJDE given x, y, or both.
DiagGaussianParams bjde_recognition(const BjdeModel& bjde, const ParamView& params,
                                    const std::optional<Tensor>& x, const std::optional<Tensor>& y);

}  // namespace bcde
