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

#include "bcde/distributions.hpp"

#include <cmath>
#include <numbers>
#include <string>

namespace bcde {
namespace {

constexpr double kHalfLog2Pi = 0.91893853320467274178;  // 0.5 * ln(2 pi)

void require_same_shape(const char* op, const Tensor& a, const Tensor& b) {
  if (a.shape() != b.shape()) {
    throw ShapeError(std::string(op) + ": dimension mismatch " + shape_to_string(a.shape()) +
                     " vs " + shape_to_string(b.shape()));
  }
}

Tensor sum_last(const Tensor& t) {
  if (t.rank() == 0) return t;
  return sum(t, {t.rank() - 1});
}

}  // namespace

DiagGaussianParams standard_normal(const Shape& shape) {
  return {Tensor::zeros(shape), Tensor::zeros(shape)};
}

Tensor sample_reparam(const DiagGaussianParams& g, const Tensor& eps) {
  require_same_shape("sample_reparam", g.mean, g.log_var);
  require_same_shape("sample_reparam", g.mean, eps);
  return g.mean + exp(scale(g.log_var, 0.5)) * eps;
}

Tensor log_prob_gaussian(const DiagGaussianParams& g, const Tensor& z) {
  require_same_shape("log_prob_gaussian", g.mean, g.log_var);
  require_same_shape("log_prob_gaussian", g.mean, z);
  // -0.5 ln 2pi - 0.5 log_var - 0.5 (z - mean)^2 exp(-log_var)
  Tensor quad = square(z - g.mean) * exp(negate(g.log_var));
  Tensor per_dim = scale(g.log_var + quad, -0.5);
  Tensor total = sum_last(per_dim);
  const double d = static_cast<double>(z.rank() ? z.shape().back() : 1);
  return add(total, Tensor::scalar(-kHalfLog2Pi * d));
}

Tensor log_prob_standard_normal(const Tensor& z) {
  const double d = static_cast<double>(z.rank() ? z.shape().back() : 1);
  return add(scale(sum_last(square(z)), -0.5), Tensor::scalar(-kHalfLog2Pi * d));
}

Tensor log_prob_bernoulli(const BernoulliParams& b, const Tensor& y) {
  require_same_shape("log_prob_bernoulli", b.logit, y);
  for (double v : y.values()) {
    if (!(v >= 0.0 && v <= 1.0)) {
      throw DomainError("log_prob_bernoulli: target entries must lie in [0, 1]");
    }
  }
  return sum_last(y * b.logit - softplus(b.logit));
}

Tensor log_prob_fixed_var_gaussian(const FixedVarGaussianParams& g, const Tensor& y) {
  require_same_shape("log_prob_fixed_var_gaussian", g.mean, y);
  if (!(g.var > 0.0)) throw DomainError("log_prob_fixed_var_gaussian: variance must be positive");
  const double d = static_cast<double>(y.rank() ? y.shape().back() : 1);
  Tensor quad = scale(sum_last(square(y - g.mean)), -0.5 / g.var);
  return add(quad, Tensor::scalar(-d * (kHalfLog2Pi + 0.5 * std::log(g.var))));
}

Tensor kl_diag_gaussians(const DiagGaussianParams& q, const DiagGaussianParams& p) {
  require_same_shape("kl_diag_gaussians", q.mean, q.log_var);
  require_same_shape("kl_diag_gaussians", p.mean, p.log_var);
  require_same_shape("kl_diag_gaussians", q.mean, p.mean);
  // 0.5 [lv_p - lv_q + (exp(lv_q) + (m_q - m_p)^2) exp(-lv_p) - 1]
  Tensor ratio = (exp(q.log_var) + square(q.mean - p.mean)) * exp(negate(p.log_var));
  Tensor per_dim = p.log_var - q.log_var + ratio;
  Tensor total = scale(sum_last(per_dim), 0.5);
  const double d = static_cast<double>(q.mean.rank() ? q.mean.shape().back() : 1);
  return add(total, Tensor::scalar(-0.5 * d));
}

Tensor kl_to_standard_normal(const DiagGaussianParams& q) {
  require_same_shape("kl_to_standard_normal", q.mean, q.log_var);
  // 0.5 [exp(lv) + m^2 - 1 - lv]
  Tensor per_dim = exp(q.log_var) + square(q.mean) - q.log_var;
  const double d = static_cast<double>(q.mean.rank() ? q.mean.shape().back() : 1);
  return add(scale(sum_last(per_dim), 0.5), Tensor::scalar(-0.5 * d));
}

DiagGaussianParams merge_precision_weighted(const std::vector<GaussianNatParams>& terms) {
  if (terms.empty()) throw std::invalid_argument("merge_precision_weighted: no terms");
  Tensor prec = terms.front().prec;
  Tensor pwm = terms.front().pwm;
  require_same_shape("merge_precision_weighted", prec, pwm);
  for (std::size_t i = 1; i < terms.size(); ++i) {
    require_same_shape("merge_precision_weighted", terms[i].prec, prec);
    require_same_shape("merge_precision_weighted", terms[i].pwm, pwm);
    prec = prec + terms[i].prec;
    pwm = pwm + terms[i].pwm;
  }
  for (double v : prec.values()) {
    if (!(v > 0.0)) throw DomainError("merge_precision_weighted: total precision must be positive");
  }
  Tensor log_var = negate(log(prec));
  return {pwm * exp(log_var), log_var};
}

GaussianNatParams to_natural(const DiagGaussianParams& g) {
  require_same_shape("to_natural", g.mean, g.log_var);
  Tensor prec = exp(negate(g.log_var));
  return {prec, prec * g.mean};
}

}  // namespace bcde
