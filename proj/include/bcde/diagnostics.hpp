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
#include <string>
#include <utility>
#include <vector>

#include "bcde/distributions.hpp"
#include "bcde/model.hpp"
#include "bcde/tensor.hpp"

namespace bcde {

struct DiagCheck {
  std::string name;
  bool passed = false;
  double metric = 0.0;  // check-specific error or gap
  std::string detail;
};

struct DiagReport {
  std::vector<DiagCheck> checks;
  bool passed() const;
  /// One "PASS|FAIL name metric detail" line per check.
  std::string format() const;
};

using KlFunction = std::function<Tensor(const DiagGaussianParams&, const DiagGaussianParams&)>;

struct DiagOptions {
  std::uint64_t seed = 0;
  KlFunction kl = kl_diag_gaussians;
  std::size_t merge_trials = 1000;
  std::size_t bound_draws = 20000;
  std::size_t iw_samples = 10000;
  double grad_tol = 1e-4;
};

DiagReport run_diagnostics(const DiagOptions& options = {});

/// Nodes and weights of n-point Gauss-Hermite quadrature for the weight
/// exp(-t^2).
std::pair<std::vector<double>, std::vector<double>> gauss_hermite(std::size_t n);

/// Frozen model with a one-dimensional latent, linear networks, and
/// fixed-variance Gaussian decoders:
///   BJDE: z ~ N(0, 1), x | z ~ N(a z + b, s2 I), y | z ~ N(c z + d, s2 I)
///   BCDE: z | x ~ N(w.x + w0, exp(prior_log_var)), y | z ~ N(c z + d, s2 I)
/// Recognition networks are set to the exact posteriors shifted by
/// `recognition_mean_offset` and `recognition_log_var_offset`.
struct LinearGaussianSpec {
  std::vector<double> a, b;  // x decoder, size x_dim
  std::vector<double> c, d;  // y decoders, size y_dim
  std::vector<double> w;     // conditional prior weights, size x_dim
  double w0 = 0.0;
  double prior_log_var = 0.0;
  double noise_var = 0.1;
  double recognition_mean_offset = 0.1;
  double recognition_log_var_offset = 0.2;
};

/// A random but well-conditioned spec.
LinearGaussianSpec random_linear_gaussian(std::size_t x_dim, std::size_t y_dim, std::uint64_t seed);
ModelPair build_linear_gaussian(const LinearGaussianSpec& spec);

/// Tiny randomly initialized model pair (tanh, one hidden layer) used by
/// gradient checks.
ModelPair make_probe_models(InferenceMode mode, std::uint64_t seed);

/// Gradient checks of C, J_x, J_y, J_xy, H and the tying penalty on a probe
/// model with fixed noise. One check per objective.
std::vector<DiagCheck> objective_gradient_checks(InferenceMode mode, std::uint64_t seed, double tol);

/// Gradient check of each network head of a probe model.
std::vector<DiagCheck> head_gradient_checks(InferenceMode mode, std::uint64_t seed, double tol);

/// KL(q||p) >= 0 on random pairs and KL(p||p) = 0.
DiagCheck check_kl_nonnegative(const KlFunction& kl, std::uint64_t seed, std::size_t trials = 200);

}  // namespace bcde
