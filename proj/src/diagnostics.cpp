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

#include "bcde/diagnostics.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <numeric>
#include <random>
#include <sstream>

#include "bcde/objectives.hpp"
#include "bcde/random.hpp"

namespace bcde {

bool DiagReport::passed() const {
  return std::all_of(checks.begin(), checks.end(), [](const DiagCheck& c) { return c.passed; });
}

std::string DiagReport::format() const {
  std::ostringstream os;
  os.precision(4);
  for (const auto& c : checks) {
    os << (c.passed ? "PASS " : "FAIL ") << c.name << " " << std::scientific << c.metric;
    if (!c.detail.empty()) os << " " << c.detail;
    os << "\n";
  }
  return os.str();
}

std::pair<std::vector<double>, std::vector<double>> gauss_hermite(std::size_t n) {
  if (n == 0) throw std::invalid_argument("gauss_hermite: n must be positive");
  const double pim4 = std::pow(std::numbers::pi, -0.25);
  const double dn = static_cast<double>(n);
  std::vector<double> x(n), w(n);
  double z = 0.0;
  for (std::size_t i = 0; i < (n + 1) / 2; ++i) {
    // Asymptotic starting guesses for the largest roots, then extrapolation.
    if (i == 0) z = std::sqrt(2 * dn + 1) - 1.85575 * std::pow(2 * dn + 1, -1.0 / 6.0);
    else if (i == 1) z -= 1.14 * std::pow(dn, 0.426) / z;
    else if (i == 2) z = 1.86 * z - 0.86 * x[0];
    else if (i == 3) z = 1.91 * z - 0.91 * x[1];
    else z = 2.0 * z - x[i - 2];
    double pp = 0.0;
    for (int it = 0; it < 100; ++it) {
      // Orthonormal Hermite recurrence.
      double p1 = pim4, p2 = 0.0;
      for (std::size_t j = 0; j < n; ++j) {
        const double p3 = p2;
        p2 = p1;
        const double dj = static_cast<double>(j);
        p1 = z * std::sqrt(2.0 / (dj + 1.0)) * p2 - std::sqrt(dj / (dj + 1.0)) * p3;
      }
      pp = std::sqrt(2.0 * dn) * p2;
      const double z1 = z;
      z = z1 - p1 / pp;
      if (std::abs(z - z1) <= 1e-15 * std::max(1.0, std::abs(z))) break;
    }
    x[i] = z;
    x[n - 1 - i] = -z;
    w[i] = w[n - 1 - i] = 2.0 / (pp * pp);
  }
  return {x, w};
}

// ---------------------------------------------------------------------------
// Linear-Gaussian reference model

LinearGaussianSpec random_linear_gaussian(std::size_t x_dim, std::size_t y_dim, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> coef(-1.0, 1.0), bias(-0.5, 0.5);
  LinearGaussianSpec s;
  for (std::size_t i = 0; i < x_dim; ++i) {
    s.a.push_back(coef(rng));
    s.b.push_back(bias(rng));
    s.w.push_back(0.5 * coef(rng));
  }
  for (std::size_t i = 0; i < y_dim; ++i) {
    s.c.push_back(coef(rng));
    s.d.push_back(bias(rng));
  }
  s.w0 = bias(rng);
  s.prior_log_var = std::log(0.5 + std::uniform_real_distribution<double>(0.0, 1.0)(rng));
  s.noise_var = 0.3;
  return s;
}

namespace {

double dot(const std::vector<double>& u, const std::vector<double>& v) {
  return std::inner_product(u.begin(), u.end(), v.begin(), 0.0);
}

// Sets a one-layer diagonal-Gaussian encoder with a 1-D latent to
// mean = wm . input + bm, log_var = lv.
void set_encoder(ParameterStore& p, const std::string& prefix, const std::vector<double>& wm, double bm,
                 double lv) {
  std::vector<double> weight;
  for (double v : wm) {
    weight.push_back(v);
    weight.push_back(0.0);
  }
  p.set_value(prefix + "/layer0/weight", Tensor::matrix(wm.size(), 2, weight));
  p.set_value(prefix + "/layer0/bias", Tensor::vector({bm, lv}));
}

void set_decoder(ParameterStore& p, const std::string& prefix, const std::vector<double>& slope,
                 const std::vector<double>& offset) {
  p.set_value(prefix + "/layer0/weight", Tensor::matrix(1, slope.size(), slope));
  p.set_value(prefix + "/layer0/bias", Tensor::vector(offset));
}

std::vector<double> scaled(const std::vector<double>& v, double f) {
  std::vector<double> out;
  for (double x : v) out.push_back(x * f);
  return out;
}

std::vector<double> joined(std::vector<double> a, const std::vector<double>& b) {
  a.insert(a.end(), b.begin(), b.end());
  return a;
}

}  // namespace

ModelPair build_linear_gaussian(const LinearGaussianSpec& s) {
  const std::size_t dx = s.a.size(), dy = s.c.size();
  if (dx == 0 || dy == 0 || s.b.size() != dx || s.w.size() != dx || s.d.size() != dy) {
    throw std::invalid_argument("build_linear_gaussian: inconsistent spec sizes");
  }
  ModelConfig cfg;
  cfg.x_dim = dx;
  cfg.y_dim = dy;
  cfg.latent_dim = 1;
  cfg.hidden = {};
  cfg.decoder = DecoderKind::gaussian;
  cfg.decoder_var = s.noise_var;
  cfg.tie_init = false;
  ModelPair m = build_models(cfg);
  ParameterStore& p = m.params;
  const double s2 = s.noise_var, dm = s.recognition_mean_offset, dl = s.recognition_log_var_offset;

  set_decoder(p, "bjde/x_given_z", s.a, s.b);
  set_decoder(p, "bjde/y_given_z", s.c, s.d);
  set_decoder(p, "bcde/y_given_z", s.c, s.d);
  set_encoder(p, "bcde/z_given_x", s.w, s.w0, s.prior_log_var);

  // Exact Gaussian posteriors are linear in the conditioning variables:
  // precision P = prior precision + sum(slope^2) / s2 and
  // mean = (prior pwm + slope . (obs - offset) / s2) / P.
  const double aa = dot(s.a, s.a) / s2, cc = dot(s.c, s.c) / s2;
  {
    const double P = 1.0 + aa + cc;
    const auto wx = scaled(s.a, 1.0 / (s2 * P)), wy = scaled(s.c, 1.0 / (s2 * P));
    const double b0 = -(dot(s.a, s.b) + dot(s.c, s.d)) / (s2 * P);
    set_encoder(p, "bjde/z_given_xy", joined(wx, wy), b0 + dm, -std::log(P) + dl);
  }
  {
    const double P = 1.0 + aa;
    set_encoder(p, "bjde/z_given_x", scaled(s.a, 1.0 / (s2 * P)), -dot(s.a, s.b) / (s2 * P) + dm,
                -std::log(P) + dl);
  }
  {
    const double P = 1.0 + cc;
    set_encoder(p, "bjde/z_given_y", scaled(s.c, 1.0 / (s2 * P)), -dot(s.c, s.d) / (s2 * P) + dm,
                -std::log(P) + dl);
  }
  {
    const double prior_prec = std::exp(-s.prior_log_var);
    const double P = prior_prec + cc;
    const auto wx = scaled(s.w, prior_prec / P), wy = scaled(s.c, 1.0 / (s2 * P));
    const double b0 = (prior_prec * s.w0 - dot(s.c, s.d) / s2) / P;
    set_encoder(p, "bcde/z_given_xy", joined(wx, wy), b0 + dm, -std::log(P) + dl);
  }
  return m;
}

// ---------------------------------------------------------------------------
// Gradient checks

ModelPair make_probe_models(InferenceMode mode, std::uint64_t seed) {
  ModelConfig cfg;
  cfg.x_dim = 3;
  cfg.y_dim = 2;
  cfg.latent_dim = 2;
  cfg.hidden = {4};
  cfg.activation = Activation::tanh;
  cfg.inference = mode;
  cfg.tie_init = false;
  cfg.seed = seed;
  return build_models(cfg);
}

namespace {

Tensor uniform_tensor(std::mt19937_64& rng, Shape shape, double lo, double hi) {
  std::uniform_real_distribution<double> u(lo, hi);
  std::vector<double> v(shape_numel(shape));
  for (double& x : v) x = u(rng);
  return Tensor(std::move(shape), std::move(v));
}

DiagCheck from_report(const std::string& name, const GradCheckReport& r) {
  DiagCheck c;
  c.name = name;
  c.passed = r.passed();
  c.metric = r.max_rel_error();
  c.detail = "max_rel_error";
  return c;
}

std::vector<std::string> all_names(const ParameterStore& p) { return p.names(); }

}  // namespace

std::vector<DiagCheck> objective_gradient_checks(InferenceMode mode, std::uint64_t seed, double tol) {
  ModelPair m = make_probe_models(mode, seed);
  std::mt19937_64 rng(derive_seed({seed, 7}));
  const std::size_t b = 3;
  const Tensor x = uniform_tensor(rng, {b, 3}, 0.0, 1.0), y = uniform_tensor(rng, {b, 2}, 0.0, 1.0);
  const Tensor xu = uniform_tensor(rng, {b, 3}, 0.0, 1.0), yu = uniform_tensor(rng, {b, 2}, 0.0, 1.0);
  const std::uint64_t noise_seed = derive_seed({seed, 8});
  const double alpha = std::uniform_real_distribution<double>(0.0, 1.0)(rng);
  const double lambda = std::uniform_real_distribution<double>(0.1, 2.0)(rng);
  const std::vector<std::pair<std::string, ScalarFunction>> objectives = {
      {"C", [&](Tape& t) {
         NoiseStream n(noise_seed);
         return sum(elbo_conditional(m.bcde, ParamView(m.params, &t), x, y, n.normal({b, 2})));
       }},
      {"J_x", [&](Tape& t) {
         NoiseStream n(noise_seed);
         return sum(elbo_marginal_x(m.bjde, ParamView(m.params, &t), x, n.normal({b, 2})));
       }},
      {"J_y", [&](Tape& t) {
         NoiseStream n(noise_seed);
         return sum(elbo_marginal_y(m.bjde, ParamView(m.params, &t), y, n.normal({b, 2})));
       }},
      {"J_xy", [&](Tape& t) {
         NoiseStream n(noise_seed);
         return sum(elbo_joint_xy(m.bjde, ParamView(m.params, &t), x, y, n.normal({b, 2})));
       }},
      {"H", [&](Tape& t) {
         NoiseStream n(noise_seed);
         return hybrid_objective(m, ParamView(m.params, &t), ObjectiveData{x, y, xu, yu}, {alpha, lambda}, n)
             .value;
       }},
      {"tying_penalty", [&](Tape& t) { return tying_penalty(m.registry, ParamView(m.params, &t), lambda); }},
  };
  std::vector<DiagCheck> out;
  const std::string suffix = mode == InferenceMode::factored ? "[factored]" : "";
  for (const auto& [name, f] : objectives) {
    out.push_back(from_report("grad/objective/" + name + suffix,
                              grad_check(f, m.params, all_names(m.params), 1e-5, tol)));
  }
  return out;
}

std::vector<DiagCheck> head_gradient_checks(InferenceMode mode, std::uint64_t seed, double tol) {
  ModelPair m = make_probe_models(mode, seed);
  std::vector<const Mlp*> nets = {&m.bjde.q_z_given_x, &m.bjde.p_x_given_z, &m.bjde.p_y_given_z,
                                  &m.bcde.p_z_given_x, &m.bcde.p_y_given_z};
  for (const auto* opt : {&m.bjde.q_z_given_xy, &m.bjde.q_z_given_y, &m.bjde.lhat_y, &m.bcde.q_z_given_xy,
                          &m.bcde.lhat_y}) {
    if (opt->has_value()) nets.push_back(&opt->value());
  }
  std::mt19937_64 rng(derive_seed({seed, 9}));
  std::vector<DiagCheck> out;
  for (const Mlp* net : nets) {
    const MlpSpec& spec = net->spec();
    const Tensor input = uniform_tensor(rng, {3, spec.input_dim}, -1.0, 1.0);
    const Tensor target = uniform_tensor(rng, {3, spec.output_dim}, 0.0, 1.0);
    const Tensor probe = uniform_tensor(rng, {3, spec.output_dim}, -1.0, 1.0);
    ScalarFunction f;
    switch (spec.head) {
      case HeadKind::diag_gaussian:
        f = [&, net](Tape& t) { return sum(log_prob_gaussian(net->gaussian(ParamView(m.params, &t), input), probe)); };
        break;
      case HeadKind::natural_gaussian:
        f = [&, net](Tape& t) {
          const GaussianNatParams g = net->natural(ParamView(m.params, &t), input);
          return sum(g.prec * probe + g.pwm * target);
        };
        break;
      default:
        f = [&, net](Tape& t) { return sum(net->log_likelihood(ParamView(m.params, &t), input, target)); };
    }
    out.push_back(from_report("grad/head/" + net->prefix(), grad_check(f, m.params, net->parameter_names(), 1e-5, tol)));
  }
  return out;
}

// ---------------------------------------------------------------------------
// Closed-form checks

DiagCheck check_kl_nonnegative(const KlFunction& kl, std::uint64_t seed, std::size_t trials) {
  std::mt19937_64 rng(seed);
  DiagCheck c;
  c.name = "kl_nonnegative";
  c.passed = true;
  double worst = 0.0;
  for (std::size_t i = 0; i < trials; ++i) {
    const DiagGaussianParams q{uniform_tensor(rng, {1, 3}, -2, 2), uniform_tensor(rng, {1, 3}, -2, 2)};
    const DiagGaussianParams p{uniform_tensor(rng, {1, 3}, -2, 2), uniform_tensor(rng, {1, 3}, -2, 2)};
    const double v = kl(q, p).item();
    const double self = kl(p, p).item();
    worst = std::min({worst, v, -std::abs(self)});
    if (v < 0.0 || std::abs(self) > 1e-12) c.passed = false;
  }
  c.metric = worst;
  c.detail = "most_negative";
  return c;
}

namespace {

DiagCheck merge_oracle(std::uint64_t seed, std::size_t trials) {
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> mean(-3.0, 3.0), logv(-2.0, 2.0), prec(0.0, 5.0);
  double worst = 0.0;
  for (std::size_t i = 0; i < trials; ++i) {
    const double m0 = mean(rng), v0 = std::exp(logv(rng)), ml = mean(rng);
    const double tau = i % 10 == 0 ? 0.0 : prec(rng);  // every tenth: uninformative likelihood
    const auto merged = merge_precision_weighted(
        {to_natural({Tensor::vector({m0}), Tensor::vector({std::log(v0)})}),
         {Tensor::vector({tau}), Tensor::vector({tau * ml})}});
    // Kalman-gain form of the conjugate update.
    const double gain = v0 * tau / (1.0 + v0 * tau);
    const double post_mean = m0 + gain * (ml - m0);
    const double post_var = (1.0 - gain) * v0;
    worst = std::max({worst, std::abs(merged.mean[0] - post_mean),
                      std::abs(std::exp(merged.log_var[0]) - post_var)});
  }
  return {"merge_conjugate_oracle", worst <= 1e-10, worst, "max_abs_error"};
}

double log_sum_exp(const std::vector<double>& v) {
  const double m = *std::max_element(v.begin(), v.end());
  double s = 0.0;
  for (double x : v) s += std::exp(x - m);
  return m + std::log(s);
}

double log_normal(const std::vector<double>& obs, const std::vector<double>& mean, double var) {
  double out = 0.0;
  for (std::size_t i = 0; i < obs.size(); ++i) {
    out += -0.5 * std::log(2.0 * std::numbers::pi * var) - 0.5 * (obs[i] - mean[i]) * (obs[i] - mean[i]) / var;
  }
  return out;
}

std::vector<double> affine(const std::vector<double>& slope, const std::vector<double>& offset, double z) {
  std::vector<double> out;
  for (std::size_t i = 0; i < slope.size(); ++i) out.push_back(slope[i] * z + offset[i]);
  return out;
}

std::pair<double, double> mean_and_se(std::span<const double> v) {
  const double n = static_cast<double>(v.size());
  const double m = std::accumulate(v.begin(), v.end(), 0.0) / n;
  double ss = 0.0;
  for (double x : v) ss += (x - m) * (x - m);
  return {m, std::sqrt(ss / (n - 1.0) / n)};
}

Tensor repeat(const std::vector<double>& row, std::size_t n) {
  std::vector<double> v;
  for (std::size_t i = 0; i < n; ++i) v.insert(v.end(), row.begin(), row.end());
  return Tensor::matrix(n, row.size(), v);
}

std::vector<DiagCheck> quadrature_oracle(std::uint64_t seed, std::size_t draws, std::size_t iw_k) {
  const LinearGaussianSpec s = random_linear_gaussian(2, 2, seed);
  const ModelPair m = build_linear_gaussian(s);
  std::mt19937_64 rng(derive_seed({seed, 3}));
  std::uniform_real_distribution<double> u(-1.0, 1.0);
  const std::vector<double> x = {u(rng), u(rng)}, y = {u(rng), u(rng)};

  const auto [nodes, weights] = gauss_hermite(64);
  auto integrate = [&](double mu, double var, auto log_f) {
    std::vector<double> terms;
    for (std::size_t i = 0; i < nodes.size(); ++i) {
      const double z = mu + std::sqrt(2.0 * var) * nodes[i];
      terms.push_back(std::log(weights[i] / std::sqrt(std::numbers::pi)) + log_f(z));
    }
    return log_sum_exp(terms);
  };
  const double v = s.noise_var;
  const double ln_px = integrate(0.0, 1.0, [&](double z) { return log_normal(x, affine(s.a, s.b, z), v); });
  const double ln_pxy = integrate(0.0, 1.0, [&](double z) {
    return log_normal(x, affine(s.a, s.b, z), v) + log_normal(y, affine(s.c, s.d, z), v);
  });
  const double ln_py_x = integrate(dot(s.w, x) + s.w0, std::exp(s.prior_log_var),
                                   [&](double z) { return log_normal(y, affine(s.c, s.d, z), v); });

  const ParamView view(m.params);
  NoiseStream noise(derive_seed({seed, 4}));
  const Tensor xs = repeat(x, draws), ys = repeat(y, draws);
  std::vector<DiagCheck> out;
  auto bound_check = [&](const std::string& name, const Tensor& per_draw, double exact) {
    const auto [mean, se] = mean_and_se(per_draw.values());
    std::ostringstream d;
    d.precision(6);
    d << "estimate=" << mean << " se=" << se << " exact=" << exact;
    out.push_back({name, mean <= exact + 3.0 * se, exact - mean, d.str()});
  };
  bound_check("bound/J_x<=ln_p(x)", elbo_marginal_x(m.bjde, view, xs, noise.normal({draws, 1})), ln_px);
  bound_check("bound/C<=ln_p(y|x)", elbo_conditional(m.bcde, view, xs, ys, noise.normal({draws, 1})), ln_py_x);
  bound_check("bound/J_xy<=ln_p(x,y)", elbo_joint_xy(m.bjde, view, xs, ys, noise.normal({draws, 1})), ln_pxy);
  const double iw = iw_bound(m.bcde, view, Tensor::vector(x), Tensor::vector(y), iw_k, noise);
  std::ostringstream d;
  d.precision(8);
  d << "iw=" << iw << " exact=" << ln_py_x << " K=" << iw_k;
  out.push_back({"bound/iw_close_to_ln_p(y|x)", std::abs(iw - ln_py_x) <= 0.01, std::abs(iw - ln_py_x), d.str()});
  return out;
}

std::vector<DiagCheck> alpha_identity(std::uint64_t seed) {
  const ModelPair m = make_probe_models(InferenceMode::standard, seed);
  std::mt19937_64 rng(derive_seed({seed, 5}));
  const ObjectiveData data{uniform_tensor(rng, {4, 3}, 0, 1), uniform_tensor(rng, {4, 2}, 0, 1),
                           uniform_tensor(rng, {4, 3}, 0, 1), uniform_tensor(rng, {4, 2}, 0, 1)};
  const ParamView view(m.params);
  const std::uint64_t ns = derive_seed({seed, 6});
  auto h = [&](double alpha) {
    NoiseStream n(ns);
    return hybrid_objective(m, view, data, {alpha, 0.3}, n).scalar();
  };
  const double h0 = h(0.0), h1 = h(1.0);
  double worst = 0.0;
  for (double a : {0.1, 0.25, 0.5, 0.75, 0.9}) worst = std::max(worst, std::abs(h(a) - ((1 - a) * h0 + a * h1)));
  NoiseStream n(ns);
  const double factorized = hybrid_objective_factorized(m, view, data, 0.3, n).scalar();
  return {{"hybrid/alpha_affine", worst <= 1e-10, worst, "max_abs_error"},
          {"hybrid/alpha0_reduction", std::abs(h0 - factorized) <= 1e-10, std::abs(h0 - factorized),
           "abs_error"}};
}

}  // namespace

DiagReport run_diagnostics(const DiagOptions& o) {
  DiagReport r;
  auto append = [&](std::vector<DiagCheck> v) { r.checks.insert(r.checks.end(), v.begin(), v.end()); };
  for (InferenceMode mode : {InferenceMode::standard, InferenceMode::factored}) {
    append(head_gradient_checks(mode, o.seed, o.grad_tol));
    append(objective_gradient_checks(mode, o.seed, o.grad_tol));
  }
  r.checks.push_back(merge_oracle(derive_seed({o.seed, 20}), o.merge_trials));
  append(quadrature_oracle(derive_seed({o.seed, 21}), o.bound_draws, o.iw_samples));
  append(alpha_identity(derive_seed({o.seed, 22})));
  r.checks.push_back(check_kl_nonnegative(o.kl, derive_seed({o.seed, 23})));
  return r;
}

}  // namespace bcde
