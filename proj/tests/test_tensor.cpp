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
#include <limits>
#include <random>

#include "bcde/tensor.hpp"
#include "oracles.hpp"
#include "primitive_cases.hpp"

namespace bcde {
namespace {

TEST(TensorTest, ConstructionChecksShape) {
  EXPECT_THROW(Tensor({2, 3}, {1, 2, 3}), ShapeError);
  EXPECT_THROW(Tensor({2, 0}, {}), ShapeError);
  const Tensor t = Tensor::matrix(2, 2, {1, 2, 3, 4});
  EXPECT_EQ(t.rank(), 2u);
  EXPECT_DOUBLE_EQ(t.at(1, 0), 3.0);
  EXPECT_THROW(t.item(), ShapeError);
  EXPECT_DOUBLE_EQ(Tensor().item(), 0.0);
}

TEST(TensorTest, CopiesShareStorage) {
  const Tensor a = Tensor::vector({1, 2, 3});
  const Tensor b = a;
  EXPECT_EQ(a.storage(), b.storage());
}

TEST(TensorTest, MatmulMatchesLoops) {
  std::mt19937_64 rng(1);
  const Tensor a = cases::random_tensor(rng, {3, 4}, -1, 1), b = cases::random_tensor(rng, {4, 2}, -1, 1);
  const Tensor c = matmul(a, b);
  for (std::size_t i = 0; i < 3; ++i) {
    for (std::size_t j = 0; j < 2; ++j) {
      double s = 0.0;
      for (std::size_t k = 0; k < 4; ++k) s += a.at(i, k) * b.at(k, j);
      EXPECT_NEAR(c.at(i, j), s, 1e-14);
    }
  }
  EXPECT_THROW(matmul(a, a), ShapeError);
}

TEST(TensorTest, BroadcastsSuffixAndScalar) {
  const Tensor m = Tensor::matrix(2, 3, {1, 2, 3, 4, 5, 6});
  const Tensor row = Tensor::vector({10, 20, 30});
  const Tensor r = m + row;
  EXPECT_DOUBLE_EQ(r.at(1, 2), 36.0);
  EXPECT_DOUBLE_EQ((m * Tensor::scalar(2.0)).at(0, 1), 4.0);
  EXPECT_THROW(m + Tensor::vector({1, 2}), ShapeError);
}

TEST(TensorTest, SoftplusIsStableForLargeInputs) {
  const Tensor s = softplus(Tensor::vector({-800.0, 0.0, 800.0}));
  EXPECT_NEAR(s[0], 0.0, 1e-300);
  EXPECT_NEAR(s[1], std::log(2.0), 1e-15);
  EXPECT_DOUBLE_EQ(s[2], 800.0);
}

TEST(TensorTest, DomainErrors) {
  EXPECT_THROW(log(Tensor::vector({1.0, 0.0})), DomainError);
  EXPECT_THROW(log(Tensor::vector({-1.0})), DomainError);
  EXPECT_THROW(exp(Tensor::vector({1000.0})), DomainError);
}

TEST(TensorTest, ReluGradientIsZeroAtZero) {
  ParameterStore store;
  store.add("x", Tensor::vector({-1.0, 0.0, 2.0}));
  Tape tape;
  const Tensor root = sum(relu(tape.watch(store.get("x"))));
  const Gradients g = backward(tape, root);
  EXPECT_DOUBLE_EQ(g.at("x")[0], 0.0);
  EXPECT_DOUBLE_EQ(g.at("x")[1], 0.0);
  EXPECT_DOUBLE_EQ(g.at("x")[2], 1.0);
}

TEST(TensorTest, ClampGradientOnlyInside) {
  ParameterStore store;
  store.add("x", Tensor::vector({-3.0, 0.5, 3.0}));
  Tape tape;
  const Gradients g = backward(tape, sum(clamp(tape.watch(store.get("x")), -1.0, 1.0)));
  EXPECT_DOUBLE_EQ(g.at("x")[0], 0.0);
  EXPECT_DOUBLE_EQ(g.at("x")[1], 1.0);
  EXPECT_DOUBLE_EQ(g.at("x")[2], 0.0);
}

TEST(TensorTest, BackwardRequiresAttachedScalarRoot) {
  ParameterStore store;
  store.add("x", Tensor::vector({1.0, 2.0}));
  Tape tape;
  const Tensor x = tape.watch(store.get("x"));
  EXPECT_THROW(backward(tape, x * x), ShapeError);
  EXPECT_THROW(backward(tape, Tensor::scalar(1.0)), std::invalid_argument);
}

TEST(TensorTest, UnreachedParametersGetZeroGradients) {
  ParameterStore store;
  store.add("a", Tensor::vector({1.0, 2.0}));
  store.add("b", Tensor::matrix(1, 2, {3.0, 4.0}));
  Tape tape;
  const Gradients g = backward(tape, sum(square(tape.watch(store.get("a")))), store);
  ASSERT_EQ(g.count("b"), 1u);
  EXPECT_EQ(g.at("b").shape(), (Shape{1, 2}));
  EXPECT_DOUBLE_EQ(g.at("b")[0], 0.0);
  EXPECT_DOUBLE_EQ(g.at("a")[1], 4.0);
}

TEST(TensorTest, ReusedNodeAccumulatesGradient) {
  ParameterStore store;
  store.add("x", Tensor::scalar(3.0));
  Tape tape;
  const Tensor x = tape.watch(store.get("x"));
  const Gradients g = backward(tape, x * x + x);
  EXPECT_DOUBLE_EQ(g.at("x").item(), 7.0);
}

TEST(TensorTest, PrimitiveNamesRoundTrip) {
  for (Primitive p : all_primitives()) EXPECT_EQ(primitive_from_name(primitive_name(p)), p);
  EXPECT_THROW(primitive_from_name("conv2d"), std::invalid_argument);
  EXPECT_EQ(all_primitives().size(), 17u);
}

class PrimitiveGradientTest : public ::testing::TestWithParam<Primitive> {};

TEST_P(PrimitiveGradientTest, MatchesCentralDifferences) {
  std::mt19937_64 rng(static_cast<std::uint64_t>(GetParam()) + 100);
  for (int trial = 0; trial < 10; ++trial) {
    const auto c = cases::make_case(GetParam(), rng);
    const auto cmp = cases::compare_primitive_gradient(c, rng);
    EXPECT_LT(cmp.max_rel_error, 1e-6) << primitive_name(GetParam()) << " trial " << trial;
  }
}

INSTANTIATE_TEST_SUITE_P(AllPrimitives, PrimitiveGradientTest, ::testing::ValuesIn(all_primitives()),
                         [](const auto& info) { return std::string(primitive_name(info.param)); });

TEST(GradCheckTest, PassesOnCorrectGradients) {
  ParameterStore store;
  store.add("w", Tensor::matrix(2, 2, {0.3, -0.2, 0.5, 0.1}));
  const Tensor x = Tensor::matrix(3, 2, {1, 2, 3, 4, 5, 6});
  const auto report = grad_check(
      [&](Tape& t) { return sum(tanh(matmul(x, t.watch(store.get("w"))))); }, store, {"w"}, 1e-5, 1e-4);
  EXPECT_TRUE(report.passed());
  EXPECT_LT(report.max_rel_error(), 1e-8);
}

TEST(GradCheckTest, DetectsWrongBackwardRule) {
  ParameterStore store;
  store.add("x", Tensor::vector({0.5, -1.5}));
  // y = x^2 with a backward rule that forgets the factor 2.
  auto wrong_square = [](const Tensor& x) {
    std::vector<double> v;
    for (double e : x.values()) v.push_back(e * e);
    const Tensor xin = x;
    return x.tape()->record("wrong_square", {&x}, x.shape(), v,
                            [xin](std::span<const double> g, Tape& tape) {
                              std::vector<double> gx;
                              for (std::size_t i = 0; i < g.size(); ++i) gx.push_back(g[i] * xin[i]);
                              tape.accumulate(xin.node(), gx);
                            });
  };
  const auto report =
      grad_check([&](Tape& t) { return sum(wrong_square(t.watch(store.get("x")))); }, store, {"x"}, 1e-5, 1e-4);
  EXPECT_FALSE(report.passed());
  EXPECT_GT(report.max_rel_error(), 0.1);
}

TEST(GradCheckTest, RestoresParameterValues) {
  ParameterStore store;
  store.add("x", Tensor::vector({0.25, 0.75}));
  const auto before = store.get("x").value.storage();
  grad_check([&](Tape& t) { return sum(exp(t.watch(store.get("x")))); }, store, {"x"}, 1e-5, 1e-4);
  const auto after = store.get("x").value.values();
  EXPECT_DOUBLE_EQ(after[0], (*before)[0]);
  EXPECT_DOUBLE_EQ(after[1], (*before)[1]);
}

TEST(ParameterStoreTest, RejectsDuplicatesAndShapeChanges) {
  ParameterStore store;
  store.add("a", Tensor::vector({1.0}));
  EXPECT_THROW(store.add("a", Tensor::vector({2.0})), std::invalid_argument);
  EXPECT_THROW(store.set_value("a", Tensor::vector({1.0, 2.0})), ShapeError);
  EXPECT_THROW(store.get("missing"), std::out_of_range);
}

}  // namespace
}  // namespace bcde
