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

#include "bcde/model.hpp"

#include <cmath>
#include <stdexcept>

namespace bcde {

std::string to_string(InferenceMode m) { return m == InferenceMode::standard ? "standard" : "factored"; }
std::string to_string(Activation a) { return a == Activation::relu ? "relu" : "tanh"; }
std::string to_string(DecoderKind k) { return k == DecoderKind::bernoulli ? "bernoulli" : "gaussian"; }

Tensor ParamView::operator()(const std::string& name) const {
  const Parameter& p = store_->get(name);
  return tape_ ? tape_->watch(p) : p.value;
}

// ---------------------------------------------------------------------------
// Mlp

Mlp::Mlp(std::string prefix, MlpSpec spec) : prefix_(std::move(prefix)), spec_(std::move(spec)) {
  if (spec_.input_dim == 0 || spec_.output_dim == 0) {
    throw std::invalid_argument("Mlp " + prefix_ + ": dimensions must be positive");
  }
  for (std::size_t w : spec_.hidden_widths) {
    if (w == 0) throw std::invalid_argument("Mlp " + prefix_ + ": hidden widths must be positive");
  }
}

std::size_t Mlp::raw_output_dim() const {
  const bool two_blocks =
      spec_.head == HeadKind::diag_gaussian || spec_.head == HeadKind::natural_gaussian;
  return two_blocks ? 2 * spec_.output_dim : spec_.output_dim;
}

std::string Mlp::weight_name(std::size_t layer) const {
  return prefix_ + "/layer" + std::to_string(layer) + "/weight";
}

std::string Mlp::bias_name(std::size_t layer) const {
  return prefix_ + "/layer" + std::to_string(layer) + "/bias";
}

std::vector<std::string> Mlp::parameter_names() const {
  std::vector<std::string> names;
  for (std::size_t l = 0; l < num_layers(); ++l) {
    names.push_back(weight_name(l));
    names.push_back(bias_name(l));
  }
  return names;
}

void Mlp::init_parameters(ParameterStore& store, std::mt19937_64& rng) const {
  std::size_t fan_in = spec_.input_dim;
  for (std::size_t l = 0; l < num_layers(); ++l) {
    const std::size_t fan_out = l < spec_.hidden_widths.size() ? spec_.hidden_widths[l] : raw_output_dim();
    const double limit = std::sqrt(6.0 / static_cast<double>(fan_in + fan_out));
    std::uniform_real_distribution<double> dist(-limit, limit);
    std::vector<double> w(fan_in * fan_out);
    for (double& v : w) v = dist(rng);
    store.add(weight_name(l), Tensor::matrix(fan_in, fan_out, std::move(w)));
    store.add(bias_name(l), Tensor::zeros({fan_out}));
    fan_in = fan_out;
  }
}

Tensor Mlp::raw(const ParamView& params, const Tensor& input) const {
  if (input.rank() != 2 || input.dim(1) != spec_.input_dim) {
    throw ShapeError(prefix_ + ": expected input [batch, " + std::to_string(spec_.input_dim) +
                     "], got " + shape_to_string(input.shape()));
  }
  Tensor h = input;
  for (std::size_t l = 0; l < num_layers(); ++l) {
    h = matmul(h, params(weight_name(l))) + params(bias_name(l));
    if (l + 1 < num_layers()) h = spec_.activation == Activation::relu ? relu(h) : tanh(h);
  }
  return h;
}

DiagGaussianParams Mlp::gaussian(const ParamView& params, const Tensor& input) const {
  if (spec_.head != HeadKind::diag_gaussian) throw std::logic_error(prefix_ + " is not a Gaussian head");
  const std::size_t d = spec_.output_dim;
  Tensor out = raw(params, input);
  return {slice(out, 1, 0, d), clamp(slice(out, 1, d, 2 * d), kLogVarMin, kLogVarMax)};
}

GaussianNatParams Mlp::natural(const ParamView& params, const Tensor& input) const {
  if (spec_.head != HeadKind::natural_gaussian) throw std::logic_error(prefix_ + " is not a natural head");
  const std::size_t d = spec_.output_dim;
  Tensor out = raw(params, input);
  return {softplus(slice(out, 1, 0, d)), slice(out, 1, d, 2 * d)};
}

Tensor Mlp::log_likelihood(const ParamView& params, const Tensor& input, const Tensor& target) const {
  switch (spec_.head) {
    case HeadKind::bernoulli:
      return log_prob_bernoulli({raw(params, input)}, target);
    case HeadKind::fixed_var_gaussian:
      return log_prob_fixed_var_gaussian({raw(params, input), spec_.fixed_var}, target);
    default:
      throw std::logic_error(prefix_ + " is not a decoder head");
  }
}

Tensor Mlp::mean_output(const ParamView& params, const Tensor& input) const {
  switch (spec_.head) {
    case HeadKind::bernoulli: return sigmoid(raw(params, input));
    case HeadKind::fixed_var_gaussian: return raw(params, input);
    default: throw std::logic_error(prefix_ + " is not a decoder head");
  }
}

// ---------------------------------------------------------------------------
// Construction

namespace {

MlpSpec encoder_spec(const ModelConfig& c, std::size_t in, HeadKind head) {
  return MlpSpec{in, c.hidden, head, c.latent_dim, c.activation, c.decoder_var};
}

MlpSpec decoder_spec(const ModelConfig& c, std::size_t out) {
  const HeadKind head =
      c.decoder == DecoderKind::bernoulli ? HeadKind::bernoulli : HeadKind::fixed_var_gaussian;
  return MlpSpec{c.latent_dim, c.hidden, head, out, c.activation, c.decoder_var};
}

}  // namespace

ModelPair build_models(const ModelConfig& config) {
  if (config.x_dim == 0 || config.y_dim == 0 || config.latent_dim == 0) {
    throw std::invalid_argument("build_models: x_dim, y_dim and latent_dim must be positive");
  }
  if (config.decoder == DecoderKind::gaussian && !(config.decoder_var > 0.0)) {
    throw std::invalid_argument("build_models: decoder variance must be positive");
  }
  ModelPair m;
  m.config = config;
  const auto dx = config.x_dim, dy = config.y_dim;
  const bool factored = config.inference == InferenceMode::factored;

  BjdeModel& j = m.bjde;
  j.mode = config.inference;
  if (!factored) {
    j.q_z_given_xy = Mlp("bjde/z_given_xy", encoder_spec(config, dx + dy, HeadKind::diag_gaussian));
    j.q_z_given_y = Mlp("bjde/z_given_y", encoder_spec(config, dy, HeadKind::diag_gaussian));
  } else {
    j.lhat_y = Mlp("bjde/lhat_y", encoder_spec(config, dy, HeadKind::natural_gaussian));
  }
  j.q_z_given_x = Mlp("bjde/z_given_x", encoder_spec(config, dx, HeadKind::diag_gaussian));
  j.p_x_given_z = Mlp("bjde/x_given_z", decoder_spec(config, dx));
  j.p_y_given_z = Mlp("bjde/y_given_z", decoder_spec(config, dy));

  BcdeModel& c = m.bcde;
  c.mode = config.inference;
  c.p_z_given_x = Mlp("bcde/z_given_x", encoder_spec(config, dx, HeadKind::diag_gaussian));
  if (!factored) {
    c.q_z_given_xy = Mlp("bcde/z_given_xy", encoder_spec(config, dx + dy, HeadKind::diag_gaussian));
  } else {
    c.lhat_y = Mlp("bcde/lhat_y", encoder_spec(config, dy, HeadKind::natural_gaussian));
  }
  c.p_y_given_z = Mlp("bcde/y_given_z", decoder_spec(config, dy));

  std::mt19937_64 rng(config.seed);
  std::vector<const Mlp*> nets;
  if (j.q_z_given_xy) nets.push_back(&*j.q_z_given_xy);
  if (j.q_z_given_y) nets.push_back(&*j.q_z_given_y);
  if (j.lhat_y) nets.push_back(&*j.lhat_y);
  nets.push_back(&j.q_z_given_x);
  nets.push_back(&j.p_x_given_z);
  nets.push_back(&j.p_y_given_z);
  nets.push_back(&c.p_z_given_x);
  if (c.q_z_given_xy) nets.push_back(&*c.q_z_given_xy);
  if (c.lhat_y) nets.push_back(&*c.lhat_y);
  nets.push_back(&c.p_y_given_z);
  for (const Mlp* net : nets) net->init_parameters(m.params, rng);

  TyingRegistry& reg = m.registry;
  reg.mode = config.inference;
  if (!factored) {
    reg.networks.push_back({c.q_z_given_xy->prefix(), j.q_z_given_xy->prefix()});
  } else {
    reg.networks.push_back({c.lhat_y->prefix(), j.lhat_y->prefix()});
  }
  reg.networks.push_back({c.p_z_given_x.prefix(), j.q_z_given_x.prefix()});
  reg.networks.push_back({c.p_y_given_z.prefix(), j.p_y_given_z.prefix()});
  for (const auto& np : reg.networks) {
    const Mlp* a = nullptr;
    const Mlp* b = nullptr;
    for (const Mlp* net : nets) {
      if (net->prefix() == np.bcde) a = net;
      if (net->prefix() == np.bjde) b = net;
    }
    const auto an = a->parameter_names();
    const auto bn = b->parameter_names();
    for (std::size_t i = 0; i < an.size(); ++i) {
      if (m.params.get(an[i]).value.shape() != m.params.get(bn[i]).value.shape()) {
        throw ShapeError("tied parameters " + an[i] + " and " + bn[i] + " differ in shape");
      }
      reg.pairs.emplace_back(an[i], bn[i]);
    }
  }
  if (config.tie_init) copy_tied(reg, m.params);
  return m;
}

void copy_tied(const TyingRegistry& registry, ParameterStore& params) {
  for (const auto& [conditional, joint] : registry.pairs) {
    params.set_value(conditional, params.get(joint).value);
  }
}

Tensor tying_penalty(const TyingRegistry& registry, const ParamView& params, double lambda) {
  if (!(lambda >= 0.0)) throw std::invalid_argument("tying_penalty: lambda must be nonnegative");
  Tensor total = Tensor::scalar(0.0);
  for (const auto& [conditional, joint] : registry.pairs) {
    Tensor a = params(conditional);
    Tensor b = params(joint);
    if (a.shape() != b.shape()) {
      throw ShapeError("tying_penalty: " + conditional + " " + shape_to_string(a.shape()) + " vs " +
                       joint + " " + shape_to_string(b.shape()));
    }
    total = total + sum(square(a - b));
  }
  return scale(total, 0.5 * lambda);
}

double tied_distance(const TyingRegistry& registry, const ParameterStore& params) {
  double total = 0.0;
  for (const auto& [conditional, joint] : registry.pairs) {
    const auto a = params.get(conditional).value.values();
    const auto b = params.get(joint).value.values();
    for (std::size_t i = 0; i < a.size(); ++i) total += (a[i] - b[i]) * (a[i] - b[i]);
  }
  return total;
}

// ---------------------------------------------------------------------------
// Inference

DiagGaussianParams bcde_prior(const BcdeModel& bcde, const ParamView& params, const Tensor& x) {
  return bcde.p_z_given_x.gaussian(params, x);
}

BcdeInference bcde_infer(const BcdeModel& bcde, const ParamView& params, const Tensor& x,
                         const Tensor& y) {
  if (x.rank() != 2 || y.rank() != 2 || x.dim(0) != y.dim(0)) {
    throw ShapeError("bcde_infer: x and y must be batches of equal size, got " +
                     shape_to_string(x.shape()) + " and " + shape_to_string(y.shape()));
  }
  BcdeInference out;
  out.prior = bcde_prior(bcde, params, x);
  if (bcde.mode == InferenceMode::standard) {
    out.posterior = bcde.q_z_given_xy->gaussian(params, concat({x, y}, 1));
  } else {
    out.posterior = merge_precision_weighted({to_natural(out.prior), bcde.lhat_y->natural(params, y)});
  }
  return out;
}

DiagGaussianParams bcde_recognition(const BcdeModel& bcde, const ParamView& params,
                                    const Tensor& x, const Tensor& y) {
  return bcde_infer(bcde, params, x, y).posterior;
}

DiagGaussianParams bjde_recognition(const BjdeModel& bjde, const ParamView& params,
                                    const std::optional<Tensor>& x, const std::optional<Tensor>& y) {
  if (!x && !y) throw std::invalid_argument("bjde_recognition: at least one of x, y is required");
  if (x && y && (x->rank() != 2 || y->rank() != 2 || x->dim(0) != y->dim(0))) {
    throw ShapeError("bjde_recognition: x and y must be batches of equal size");
  }
  if (bjde.mode == InferenceMode::standard) {
    if (x && y) return bjde.q_z_given_xy->gaussian(params, concat({*x, *y}, 1));
    if (x) return bjde.q_z_given_x.gaussian(params, *x);
    return bjde.q_z_given_y->gaussian(params, *y);
  }
  if (!y) return bjde.q_z_given_x.gaussian(params, *x);
  GaussianNatParams lik = bjde.lhat_y->natural(params, *y);
  if (x) return merge_precision_weighted({to_natural(bjde.q_z_given_x.gaussian(params, *x)), lik});
  const Shape shape = lik.prec.shape();
  return merge_precision_weighted({GaussianNatParams{Tensor::filled(shape, 1.0), Tensor::zeros(shape)}, lik});
}

}  // namespace bcde
