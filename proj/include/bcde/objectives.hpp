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
#include <optional>
#include <vector>

#include "bcde/model.hpp"
#include "bcde/random.hpp"
#include "bcde/tensor.hpp"

namespace bcde {

/// How a bound's KL term is evaluated. `analytic` uses the closed form;
/// `sampled` uses the single-sample log-ratio at the reparameterized z.
enum class KlEstimator { analytic, sampled };

// Per-example bounds. Inputs are batches [B, d]; results have shape [B].

/// ln p(y|z) - KL(q(z|x,y) || p(z|x)) for the BCDE, z = reparam(q, eps).
Tensor elbo_conditional(const BcdeModel& bcde, const ParamView& params, const Tensor& x,
                        const Tensor& y, const Tensor& eps,
                        KlEstimator kl = KlEstimator::analytic);

/// ln p(x|z) + ln p(y|z) - KL(q'(z|x,y) || N(0, I)).
Tensor elbo_joint_xy(const BjdeModel& bjde, const ParamView& params, const Tensor& x,
                     const Tensor& y, const Tensor& eps);
Tensor elbo_marginal_x(const BjdeModel& bjde, const ParamView& params, const Tensor& x,
                       const Tensor& eps);
Tensor elbo_marginal_y(const BjdeModel& bjde, const ParamView& params, const Tensor& y,
                       const Tensor& eps);

/// Paired and unpaired inputs of one objective evaluation. Absent sets
/// contribute nothing.
struct ObjectiveData {
  std::optional<Tensor> x_labeled;
  std::optional<Tensor> y_labeled;
  std::optional<Tensor> x_unlabeled;
  std::optional<Tensor> y_unlabeled;
};

/// Multipliers on each per-set sum. Setting them to dataset size over batch
/// size makes a minibatch value an unbiased estimate of the dataset value.
struct ObjectiveWeights {
  double labeled = 1.0;
  double x_unlabeled = 1.0;
  double y_unlabeled = 1.0;
};

struct HybridConfig {
  double alpha = 0.5;
  double lambda = 1e-2;
  void validate() const;
};

/// Unweighted per-set sums that make up an objective value.
struct ObjectiveTerms {
  double jx_unlabeled = 0.0;
  double jy_unlabeled = 0.0;
  double jxy_labeled = 0.0;
  double jx_labeled = 0.0;
  double c_labeled = 0.0;
  double penalty = 0.0;
};

struct ObjectiveEstimate {
  Tensor value;  // scalar, attached when evaluated on a tape
  ObjectiveTerms terms;
  double scalar() const { return value.item(); }
};

/// Noise for every term of the hybrid objective, drawn in a fixed order
/// (x-unlabeled, y-unlabeled, joint-labeled, x-labeled, conditional-labeled)
/// so that all objectives built from one stream see identical samples.
struct HybridNoise {
  std::optional<Tensor> x_unlabeled;
  std::optional<Tensor> y_unlabeled;
  std::optional<Tensor> xy_labeled;
  std::optional<Tensor> x_labeled;
  std::optional<Tensor> c_labeled;
};

HybridNoise draw_hybrid_noise(NoiseStream& stream, const ObjectiveData& data, std::size_t latent_dim);

/// J_x(X_u) + J_y(Y_u) + J_xy(X_l, Y_l).
ObjectiveEstimate joint_objective(const ModelPair& models, const ParamView& params,
                                  const ObjectiveData& data, NoiseStream& stream,
                                  const ObjectiveWeights& weights = {});

/// -penalty + J_x(X_u) + J_y(Y_u) + alpha J_xy(X_l, Y_l)
///   + (1 - alpha) [J_x(X_l) + C(X_l, Y_l)].
ObjectiveEstimate hybrid_objective(const ModelPair& models, const ParamView& params,
                                   const ObjectiveData& data, const HybridConfig& cfg,
                                   NoiseStream& stream, const ObjectiveWeights& weights = {});

/// The blend with the labeled likelihood factorized as p(x) p(y|x) only:
/// -penalty + J_x(X_u) + J_y(Y_u) + J_x(X_l) + C(X_l, Y_l).
ObjectiveEstimate hybrid_objective_factorized(const ModelPair& models, const ParamView& params,
                                              const ObjectiveData& data, double lambda,
                                              NoiseStream& stream,
                                              const ObjectiveWeights& weights = {});

/// Sum of C over the labeled set.
ObjectiveEstimate conditional_objective(const ModelPair& models, const ParamView& params,
                                        const ObjectiveData& data, NoiseStream& stream,
                                        const ObjectiveWeights& weights = {});

/// Max-shifted log of the mean of exp(values).
double log_mean_exp(std::span<const double> values);

/// Importance-weighted bound on ln p(y|x) for one example with explicit
/// noise eps of shape [K, latent_dim].
double iw_bound_with_noise(const BcdeModel& bcde, const ParamView& params, const Tensor& x,
                           const Tensor& y, const Tensor& eps);

/// IW-K bound for one example (x, y given as [d] or [1, d]).
double iw_bound(const BcdeModel& bcde, const ParamView& params, const Tensor& x, const Tensor& y,
                std::size_t k, NoiseStream& stream);

/// IW-K bounds for every row of X, Y. Noise is drawn example by example, so
/// the result matches repeated single-example calls on the same stream.
std::vector<double> iw_bound_batch(const BcdeModel& bcde, const ParamView& params,
                                   const Tensor& x, const Tensor& y, std::size_t k,
                                   NoiseStream& stream);

}  // namespace bcde
