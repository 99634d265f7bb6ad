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

#include <vector>

#include "bcde/tensor.hpp"

namespace bcde {

// All densities reduce over the last axis: a [d] input yields a scalar, a
// batch [B, d] yields one value per row.

/// Diagonal Gaussian in mean / log-variance form.
struct DiagGaussianParams {
  Tensor mean;
  Tensor log_var;
};

/// Bernoulli parameterized by logits; the mean is sigmoid(logit).
struct BernoulliParams {
  Tensor logit;
};

/// Diagonal Gaussian in natural form: precision and precision-weighted mean.
/// A factor with prec >= 0 is bounded above as a function of z.
struct GaussianNatParams {
  Tensor prec;
  Tensor pwm;
};

/// Gaussian with a mean vector and one variance shared across dimensions.
struct FixedVarGaussianParams {
  Tensor mean;
  double var = 0.1;
};

/// Standard normal of the given shape.
DiagGaussianParams standard_normal(const Shape& shape);

/// z = mean + exp(log_var / 2) * eps.
Tensor sample_reparam(const DiagGaussianParams& g, const Tensor& eps);

Tensor log_prob_gaussian(const DiagGaussianParams& g, const Tensor& z);
Tensor log_prob_standard_normal(const Tensor& z);
/// Stable logit form sum(y * logit - softplus(logit)); y must lie in [0, 1].
Tensor log_prob_bernoulli(const BernoulliParams& b, const Tensor& y);
Tensor log_prob_fixed_var_gaussian(const FixedVarGaussianParams& g, const Tensor& y);

/// Closed-form KL(q || p) between diagonal Gaussians.
Tensor kl_diag_gaussians(const DiagGaussianParams& q, const DiagGaussianParams& p);
Tensor kl_to_standard_normal(const DiagGaussianParams& q);

/// Product of Gaussian factors by addition in natural-parameter space.
/// Throws DomainError if the summed precision is not positive everywhere.
DiagGaussianParams merge_precision_weighted(const std::vector<GaussianNatParams>& terms);

GaussianNatParams to_natural(const DiagGaussianParams& g);

}  // namespace bcde
