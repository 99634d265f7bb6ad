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

#include "bcde/objectives.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <stdexcept>

namespace bcde {
namespace {

void require_batch(const char* op, const Tensor& t, std::size_t dim, const char* what) {
  if (t.rank() != 2 || t.dim(1) != dim) {
    throw ShapeError(std::string(op) + ": " + what + " must be [batch, " + std::to_string(dim) +
                     "], got " + shape_to_string(t.shape()));
  }
}

void require_eps(const char* op, const Tensor& eps, std::size_t batch, std::size_t latent) {
  if (eps.rank() != 2 || eps.dim(0) != batch || eps.dim(1) != latent) {
    throw ShapeError(std::string(op) + ": noise must be [" + std::to_string(batch) + ", " +
                     std::to_string(latent) + "], got " + shape_to_string(eps.shape()));
  }
}

std::size_t latent_dim_of(const BcdeModel& bcde) { return bcde.p_z_given_x.spec().output_dim; }
std::size_t latent_dim_of(const BjdeModel& bjde) { return bjde.q_z_given_x.spec().output_dim; }

Tensor as_row(const Tensor& t) {
  if (t.rank() == 2) return t;
  if (t.rank() == 1) return Tensor::matrix(1, t.dim(0), {t.values().begin(), t.values().end()});
  throw ShapeError("expected a vector or a single-row batch, got " + shape_to_string(t.shape()));
}

std::optional<Tensor> noise_for(NoiseStream& stream, const std::optional<Tensor>& data,
                                std::size_t latent) {
  if (!data) return std::nullopt;
  return stream.normal({data->dim(0), latent});
}

struct SetSum {
  Tensor value = Tensor::scalar(0.0);
  double scalar = 0.0;
};

SetSum total(const Tensor& per_example) {
  Tensor s = sum(per_example);
  return {s, s.item()};
}

void check_pairing(const ObjectiveData& data) {
  if (data.x_labeled.has_value() != data.y_labeled.has_value()) {
    throw std::invalid_argument("labeled x and y must be given together");
  }
  if (data.x_labeled && data.x_labeled->dim(0) != data.y_labeled->dim(0)) {
    throw ShapeError("labeled x and y batches differ in size");
  }
}

// Shared core of the hybrid family. `alpha` is unset for the factorized form.
ObjectiveEstimate blended(const ModelPair& m, const ParamView& params, const ObjectiveData& data,
                          std::optional<double> alpha, double lambda, NoiseStream& stream,
                          const ObjectiveWeights& w) {
  check_pairing(data);
  const HybridNoise noise = draw_hybrid_noise(stream, data, m.config.latent_dim);
  ObjectiveEstimate est;
  Tensor penalty = tying_penalty(m.registry, params, lambda);
  est.terms.penalty = penalty.item();
  Tensor value = negate(penalty);

  if (data.x_unlabeled) {
    SetSum s = total(elbo_marginal_x(m.bjde, params, *data.x_unlabeled, *noise.x_unlabeled));
    est.terms.jx_unlabeled = s.scalar;
    value = value + scale(s.value, w.x_unlabeled);
  }
  if (data.y_unlabeled) {
    SetSum s = total(elbo_marginal_y(m.bjde, params, *data.y_unlabeled, *noise.y_unlabeled));
    est.terms.jy_unlabeled = s.scalar;
    value = value + scale(s.value, w.y_unlabeled);
  }
  if (data.x_labeled) {
    const double joint_weight = alpha ? *alpha : 0.0;
    const double factored_weight = alpha ? 1.0 - *alpha : 1.0;
    Tensor labeled = Tensor::scalar(0.0);
    if (joint_weight != 0.0) {
      SetSum s = total(elbo_joint_xy(m.bjde, params, *data.x_labeled, *data.y_labeled, *noise.xy_labeled));
      est.terms.jxy_labeled = s.scalar;
      labeled = scale(s.value, joint_weight);
    }
    if (factored_weight != 0.0) {
      SetSum jx = total(elbo_marginal_x(m.bjde, params, *data.x_labeled, *noise.x_labeled));
      SetSum c = total(elbo_conditional(m.bcde, params, *data.x_labeled, *data.y_labeled, *noise.c_labeled));
      est.terms.jx_labeled = jx.scalar;
      est.terms.c_labeled = c.scalar;
      labeled = labeled + scale(jx.value + c.value, factored_weight);
    }
    value = value + scale(labeled, w.labeled);
  }
  est.value = value;
  return est;
}

}  // namespace

Tensor elbo_conditional(const BcdeModel& bcde, const ParamView& params, const Tensor& x,
                        const Tensor& y, const Tensor& eps, KlEstimator kl) {
  require_batch("elbo_conditional", x, bcde.p_z_given_x.spec().input_dim, "x");
  require_batch("elbo_conditional", y, bcde.p_y_given_z.spec().output_dim, "y");
  require_eps("elbo_conditional", eps, x.dim(0), latent_dim_of(bcde));
  const BcdeInference inf = bcde_infer(bcde, params, x, y);
  Tensor z = sample_reparam(inf.posterior, eps);
  Tensor recon = bcde.p_y_given_z.log_likelihood(params, z, y);
  if (kl == KlEstimator::analytic) return recon - kl_diag_gaussians(inf.posterior, inf.prior);
  return recon + log_prob_gaussian(inf.prior, z) - log_prob_gaussian(inf.posterior, z);
}

Tensor elbo_joint_xy(const BjdeModel& bjde, const ParamView& params, const Tensor& x,
                     const Tensor& y, const Tensor& eps) {
  require_batch("elbo_joint_xy", x, bjde.p_x_given_z.spec().output_dim, "x");
  require_batch("elbo_joint_xy", y, bjde.p_y_given_z.spec().output_dim, "y");
  require_eps("elbo_joint_xy", eps, x.dim(0), latent_dim_of(bjde));
  const DiagGaussianParams q = bjde_recognition(bjde, params, x, y);
  Tensor z = sample_reparam(q, eps);
  return bjde.p_x_given_z.log_likelihood(params, z, x) + bjde.p_y_given_z.log_likelihood(params, z, y) -
         kl_to_standard_normal(q);
}

Tensor elbo_marginal_x(const BjdeModel& bjde, const ParamView& params, const Tensor& x,
                       const Tensor& eps) {
  require_batch("elbo_marginal_x", x, bjde.p_x_given_z.spec().output_dim, "x");
  require_eps("elbo_marginal_x", eps, x.dim(0), latent_dim_of(bjde));
  const DiagGaussianParams q = bjde_recognition(bjde, params, x, std::nullopt);
  Tensor z = sample_reparam(q, eps);
  return bjde.p_x_given_z.log_likelihood(params, z, x) - kl_to_standard_normal(q);
}

Tensor elbo_marginal_y(const BjdeModel& bjde, const ParamView& params, const Tensor& y,
                       const Tensor& eps) {
  require_batch("elbo_marginal_y", y, bjde.p_y_given_z.spec().output_dim, "y");
  require_eps("elbo_marginal_y", eps, y.dim(0), latent_dim_of(bjde));
  const DiagGaussianParams q = bjde_recognition(bjde, params, std::nullopt, y);
  Tensor z = sample_reparam(q, eps);
  return bjde.p_y_given_z.log_likelihood(params, z, y) - kl_to_standard_normal(q);
}

void HybridConfig::validate() const {
  if (!(alpha >= 0.0 && alpha <= 1.0)) throw std::invalid_argument("hybrid alpha must lie in [0, 1]");
  if (!(lambda >= 0.0)) throw std::invalid_argument("hybrid lambda must be nonnegative");
}

HybridNoise draw_hybrid_noise(NoiseStream& stream, const ObjectiveData& data, std::size_t latent_dim) {
  HybridNoise n;
  n.x_unlabeled = noise_for(stream, data.x_unlabeled, latent_dim);
  n.y_unlabeled = noise_for(stream, data.y_unlabeled, latent_dim);
  n.xy_labeled = noise_for(stream, data.x_labeled, latent_dim);
  n.x_labeled = noise_for(stream, data.x_labeled, latent_dim);
  n.c_labeled = noise_for(stream, data.x_labeled, latent_dim);
  return n;
}

ObjectiveEstimate joint_objective(const ModelPair& m, const ParamView& params,
                                  const ObjectiveData& data, NoiseStream& stream,
                                  const ObjectiveWeights& w) {
  check_pairing(data);
  const HybridNoise noise = draw_hybrid_noise(stream, data, m.config.latent_dim);
  ObjectiveEstimate est;
  Tensor value = Tensor::scalar(0.0);
  if (data.x_unlabeled) {
    SetSum s = total(elbo_marginal_x(m.bjde, params, *data.x_unlabeled, *noise.x_unlabeled));
    est.terms.jx_unlabeled = s.scalar;
    value = value + scale(s.value, w.x_unlabeled);
  }
  if (data.y_unlabeled) {
    SetSum s = total(elbo_marginal_y(m.bjde, params, *data.y_unlabeled, *noise.y_unlabeled));
    est.terms.jy_unlabeled = s.scalar;
    value = value + scale(s.value, w.y_unlabeled);
  }
  if (data.x_labeled) {
    SetSum s = total(elbo_joint_xy(m.bjde, params, *data.x_labeled, *data.y_labeled, *noise.xy_labeled));
    est.terms.jxy_labeled = s.scalar;
    value = value + scale(s.value, w.labeled);
  }
  est.value = value;
  return est;
}

ObjectiveEstimate hybrid_objective(const ModelPair& m, const ParamView& params,
                                   const ObjectiveData& data, const HybridConfig& cfg,
                                   NoiseStream& stream, const ObjectiveWeights& w) {
  cfg.validate();
  return blended(m, params, data, cfg.alpha, cfg.lambda, stream, w);
}

ObjectiveEstimate hybrid_objective_factorized(const ModelPair& m, const ParamView& params,
                                              const ObjectiveData& data, double lambda,
                                              NoiseStream& stream, const ObjectiveWeights& w) {
  HybridConfig{0.0, lambda}.validate();
  return blended(m, params, data, std::nullopt, lambda, stream, w);
}

ObjectiveEstimate conditional_objective(const ModelPair& m, const ParamView& params,
                                        const ObjectiveData& data, NoiseStream& stream,
                                        const ObjectiveWeights& w) {
  check_pairing(data);
  if (!data.x_labeled) throw std::invalid_argument("conditional_objective: labeled data required");
  const HybridNoise noise = draw_hybrid_noise(stream, ObjectiveData{data.x_labeled, data.y_labeled, {}, {}},
                                              m.config.latent_dim);
  ObjectiveEstimate est;
  SetSum c = total(elbo_conditional(m.bcde, params, *data.x_labeled, *data.y_labeled, *noise.c_labeled));
  est.terms.c_labeled = c.scalar;
  est.value = scale(c.value, w.labeled);
  return est;
}

double log_mean_exp(std::span<const double> values) {
  if (values.empty()) throw std::invalid_argument("log_mean_exp: no values");
  const double m = *std::max_element(values.begin(), values.end());
  if (!std::isfinite(m)) return m;
  double acc = 0.0;
  for (double v : values) acc += std::exp(v - m);
  return m + std::log(acc / static_cast<double>(values.size()));
}

namespace {

// Log importance weights ln p(z|x) + ln p(y|z) - ln q(z|x,y) for rows that
// already replicate each example.
std::vector<double> log_weights(const BcdeModel& bcde, const ParamView& params, const Tensor& x,
                                const Tensor& y, const Tensor& eps) {
  Tensor w = elbo_conditional(bcde, params, x, y, eps, KlEstimator::sampled);
  return {w.values().begin(), w.values().end()};
}

Tensor repeat_rows(const Tensor& t, std::size_t first, std::size_t count, std::size_t k) {
  const std::size_t d = t.dim(1);
  std::vector<double> out;
  out.reserve(count * k * d);
  const auto v = t.values();
  for (std::size_t i = first; i < first + count; ++i) {
    for (std::size_t r = 0; r < k; ++r) out.insert(out.end(), v.begin() + i * d, v.begin() + (i + 1) * d);
  }
  return Tensor::matrix(count * k, d, std::move(out));
}

}  // namespace

double iw_bound_with_noise(const BcdeModel& bcde, const ParamView& params, const Tensor& x,
                           const Tensor& y, const Tensor& eps) {
  const Tensor xr = as_row(x), yr = as_row(y);
  if (xr.dim(0) != 1 || yr.dim(0) != 1) throw ShapeError("iw_bound: expects a single example");
  if (eps.rank() != 2 || eps.dim(0) < 1) throw std::invalid_argument("iw_bound: K must be at least 1");
  const std::size_t k = eps.dim(0);
  const auto w = log_weights(bcde, params, repeat_rows(xr, 0, 1, k), repeat_rows(yr, 0, 1, k), eps);
  return log_mean_exp(w);
}

double iw_bound(const BcdeModel& bcde, const ParamView& params, const Tensor& x, const Tensor& y,
                std::size_t k, NoiseStream& stream) {
  if (k < 1) throw std::invalid_argument("iw_bound: K must be at least 1");
  return iw_bound_with_noise(bcde, params, x, y, stream.normal({k, latent_dim_of(bcde)}));
}

std::vector<double> iw_bound_batch(const BcdeModel& bcde, const ParamView& params,
                                   const Tensor& x, const Tensor& y, std::size_t k,
                                   NoiseStream& stream) {
  if (k < 1) throw std::invalid_argument("iw_bound: K must be at least 1");
  if (x.rank() != 2 || y.rank() != 2 || x.dim(0) != y.dim(0)) {
    throw ShapeError("iw_bound_batch: x and y must be batches of equal size");
  }
  const std::size_t n = x.dim(0);
  const std::size_t chunk = std::max<std::size_t>(1, 4096 / k);
  std::vector<double> out;
  out.reserve(n);
  for (std::size_t first = 0; first < n; first += chunk) {
    const std::size_t count = std::min(chunk, n - first);
    Tensor eps = stream.normal({count * k, latent_dim_of(bcde)});
    const auto w = log_weights(bcde, params, repeat_rows(x, first, count, k),
                               repeat_rows(y, first, count, k), eps);
    for (std::size_t i = 0; i < count; ++i) {
      out.push_back(log_mean_exp(std::span<const double>(w).subspan(i * k, k)));
    }
  }
  return out;
}

}  // namespace bcde
