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

#include <gtest/gtest.h>

#include <cmath>
#include <numbers>
#include <random>

#include "bcde/distributions.hpp"
#include "oracles.hpp"

namespace bcde {
namespace {

TEST(DistributionsTest, GaussianLogProbMatchesClosedForm) {
  const DiagGaussianParams g{Tensor::vector({0.5, -1.0}), Tensor::vector({0.2, -0.7})};
  const Tensor z = Tensor::vector({1.1, -0.4});
  const double expected = oracle::log_normal(1.1, 0.5, std::exp(0.2)) + oracle::log_normal(-0.4, -1.0, std::exp(-0.7));
  EXPECT_NEAR(log_prob_gaussian(g, z).item(), expected, 1e-13);
  EXPECT_NEAR(log_prob_standard_normal(z).item(),
              oracle::log_normal(1.1, 0, 1) + oracle::log_normal(-0.4, 0, 1), 1e-13);
}

TEST(DistributionsTest, BatchReducesOverLastAxis) {
  const DiagGaussianParams g = standard_normal({3, 2});
  const Tensor z = Tensor::matrix(3, 2, {0, 0, 1, 1, 2, 0});
  const Tensor lp = log_prob_gaussian(g, z);
  ASSERT_EQ(lp.shape(), (Shape{3}));
  EXPECT_NEAR(lp[0], -std::log(2 * std::numbers::pi), 1e-13);
  EXPECT_NEAR(lp[1], -std::log(2 * std::numbers::pi) - 1.0, 1e-13);
}

TEST(DistributionsTest, BernoulliIsStableAtExtremeLogits) {
  const BernoulliParams b{Tensor::vector({-800.0, 800.0, 0.0})};
  const double lp = log_prob_bernoulli(b, Tensor::vector({0.0, 1.0, 1.0})).item();
  EXPECT_TRUE(std::isfinite(lp));
  EXPECT_NEAR(lp, -std::log(2.0), 1e-12);
  const double wrong = log_prob_bernoulli(b, Tensor::vector({1.0, 1.0, 1.0})).item();
  EXPECT_NEAR(wrong, -800.0 - std::log(2.0), 1e-9);
}

TEST(DistributionsTest, BernoulliMatchesProbabilityForm) {
  const double logit = 0.8, p = 1.0 / (1.0 + std::exp(-logit));
  const BernoulliParams b{Tensor::vector({logit, logit})};
  EXPECT_NEAR(log_prob_bernoulli(b, Tensor::vector({1.0, 0.0})).item(), std::log(p) + std::log(1 - p), 1e-14);
}

TEST(DistributionsTest, BernoulliRejectsTargetsOutsideUnitInterval) {
  const BernoulliParams b{Tensor::vector({0.0})};
  EXPECT_THROW(log_prob_bernoulli(b, Tensor::vector({1.5})), DomainError);
}

TEST(DistributionsTest, FixedVarianceGaussian) {
  const FixedVarGaussianParams g{Tensor::vector({0.2, 0.4}), 0.1};
  const double expected = oracle::log_normal(0.0, 0.2, 0.1) + oracle::log_normal(1.0, 0.4, 0.1);
  EXPECT_NEAR(log_prob_fixed_var_gaussian(g, Tensor::vector({0.0, 1.0})).item(), expected, 1e-13);
}

TEST(DistributionsTest, KlOfUnitShiftIsExactlyOneHalf) {
  const DiagGaussianParams q{Tensor::vector({1.0}), Tensor::vector({0.0})};
  EXPECT_NEAR(kl_to_standard_normal(q).item(), 0.5, 1e-12);
  EXPECT_NEAR(kl_diag_gaussians(q, standard_normal({1})).item(), 0.5, 1e-12);
}

TEST(DistributionsTest, KlMatchesScalarFormula) {
  std::mt19937_64 rng(3);
  std::uniform_real_distribution<double> u(-1.5, 1.5);
  for (int t = 0; t < 50; ++t) {
    const double mq = u(rng), lq = u(rng), mp = u(rng), lp = u(rng);
    const double vq = std::exp(lq), vp = std::exp(lp);
    const double expected = 0.5 * (std::log(vp / vq) + (vq + (mq - mp) * (mq - mp)) / vp - 1.0);
    const DiagGaussianParams q{Tensor::vector({mq}), Tensor::vector({lq})};
    const DiagGaussianParams p{Tensor::vector({mp}), Tensor::vector({lp})};
    EXPECT_NEAR(kl_diag_gaussians(q, p).item(), expected, 1e-12);
    EXPECT_GE(kl_diag_gaussians(q, p).item(), 0.0);
  }
}

TEST(DistributionsTest, ReparamSample) {
  const DiagGaussianParams g{Tensor::vector({1.0, -2.0}), Tensor::vector({std::log(4.0), 0.0})};
  const Tensor z = sample_reparam(g, Tensor::vector({0.5, -1.0}));
  EXPECT_NEAR(z[0], 2.0, 1e-14);
  EXPECT_NEAR(z[1], -3.0, 1e-14);
}

TEST(DistributionsTest, MergeMatchesConjugatePosterior) {
  std::mt19937_64 rng(5);
  std::uniform_real_distribution<double> u(-2.0, 2.0);
  for (int t = 0; t < 200; ++t) {
    const double m0 = u(rng), v0 = std::exp(u(rng)), m1 = u(rng), tau = std::exp(u(rng));
    const DiagGaussianParams prior{Tensor::vector({m0}), Tensor::vector({std::log(v0)})};
    const GaussianNatParams like{Tensor::vector({tau}), Tensor::vector({tau * m1})};
    const DiagGaussianParams post = merge_precision_weighted({to_natural(prior), like});
    const auto ref = oracle::conjugate_posterior(m0, v0, m1, tau);
    EXPECT_NEAR(post.mean[0], ref.mean, 1e-10);
    EXPECT_NEAR(std::exp(post.log_var[0]), ref.var, 1e-10);
  }
}

TEST(DistributionsTest, ZeroPrecisionFactorRecoversPrior) {
  const DiagGaussianParams prior{Tensor::vector({0.3, -0.6}), Tensor::vector({0.4, -0.2})};
  const GaussianNatParams flat{Tensor::vector({0.0, 0.0}), Tensor::vector({0.0, 0.0})};
  const DiagGaussianParams post = merge_precision_weighted({to_natural(prior), flat});
  for (std::size_t i = 0; i < 2; ++i) {
    EXPECT_NEAR(post.mean[i], prior.mean[i], 1e-14);
    EXPECT_NEAR(post.log_var[i], prior.log_var[i], 1e-14);
  }
}

TEST(DistributionsTest, MergeRejectsNonPositiveTotalPrecision) {
  const GaussianNatParams a{Tensor::vector({0.0}), Tensor::vector({1.0})};
  EXPECT_THROW(merge_precision_weighted({a, a}), DomainError);
  EXPECT_THROW(merge_precision_weighted({}), std::invalid_argument);
}

}  // namespace
}  // namespace bcde
