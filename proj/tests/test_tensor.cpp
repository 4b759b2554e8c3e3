// SPDX-License-Identifier: Apache-2.0
#include <gtest/gtest.h>

#include <cmath>
#include <numeric>

#include "genre/error.hpp"
#include "genre/gradcheck.hpp"
#include "genre/ops.hpp"
#include "support.hpp"

using namespace genre;
using oracle::Vec;

TEST(Tensor, ShapeMismatchOnConstruction) {
  EXPECT_THROW(Tensor::constant({2, 3}, Vec(5)), DimensionError);
}

TEST(Tensor, OpOutputsAreImmutable) {
  Tensor a = Tensor::parameter({2}, {1, 2});
  Tensor b = scale(a, 2.0);
  EXPECT_NO_THROW(a.mutable_data());
  EXPECT_THROW(b.mutable_data(), ContractError);
}

TEST(Backward, SumGivesOnes) {
  Tensor x = Tensor::parameter({2, 3}, {1, -2, 3, 4, 5, -6});
  backward(sum(x));
  EXPECT_EQ(oracle::Vec(x.grad().begin(), x.grad().end()), Vec(6, 1.0));
}

TEST(Backward, HalfSquareGivesX) {
  const Vec v{0.5, -1.25, 3.0};
  Tensor x = Tensor::parameter({3}, v);
  backward(scale(sum(mul(x, x)), 0.5));
  EXPECT_EQ(Vec(x.grad().begin(), x.grad().end()), v);
}

TEST(Backward, NonScalarLossRejected) {
  Tensor x = Tensor::parameter({2}, {1, 2});
  EXPECT_THROW(backward(scale(x, 2.0)), ContractError);
}

TEST(Backward, DisconnectedLossRejected) {
  Tensor x = Tensor::constant({2}, {1, 2});
  EXPECT_THROW(backward(sum(x)), ContractError);
}

TEST(Backward, SecondCallOnSameGraphRejected) {
  Tensor x = Tensor::parameter({2}, {1, 2});
  Tensor loss = sum(mul(x, x));
  backward(loss);
  EXPECT_THROW(backward(loss), ContractError);
}

TEST(Backward, AccumulatesAcrossGraphsUntilZeroGrad) {
  Tensor x = Tensor::parameter({2}, {1, 2});
  backward(sum(x));
  backward(sum(x));
  EXPECT_EQ(x.grad()[0], 2.0);
  x.zero_grad();
  EXPECT_FALSE(x.has_grad());
}

TEST(Backward, SharedSubgraphGetsBothPaths) {
  Tensor x = Tensor::parameter({1}, {3.0});
  Tensor y = mul(x, x);
  backward(sum(add(y, y)));
  EXPECT_DOUBLE_EQ(x.grad()[0], 12.0);
}

TEST(Backward, DeterministicBitwise) {
  auto gen = oracle::make_gen(4);
  const Vec a = oracle::random_vec(12, gen), b = oracle::random_vec(12, gen);
  auto run = [&] {
    Tensor x = Tensor::parameter({3, 4}, a);
    Tensor w = Tensor::parameter({3, 4}, b);
    backward(sum(tanh(linear(x, w))));
    return std::pair(oracle::to_vec(x), Vec(x.grad().begin(), x.grad().end()));
  };
  EXPECT_EQ(run(), run());
}

TEST(GradMode, NoGradRecordsNothing) {
  Tensor x = Tensor::parameter({2}, {1, 2});
  Tensor y;
  {
    NoGradGuard guard;
    y = sum(mul(x, x));
  }
  EXPECT_FALSE(y.requires_grad());
  EXPECT_TRUE(GradMode::enabled());
}

TEST(NumericGuard, NonFiniteOutputRaises) {
  Tensor x = Tensor::parameter({1}, {1e300});
  EXPECT_THROW(mul(x, x), NumericError);
}

TEST(GradCheck, LinearFunctionIsExact) {
  auto gen = oracle::make_gen(1);
  Tensor w = oracle::random_param({5}, gen);
  const Tensor c = oracle::random_const({5}, gen);
  const auto r = grad_check([&] { return sum(mul(w, c)); }, {{"w", w}});
  EXPECT_LT(r.max_rel_error, 1e-10);
  EXPECT_EQ(r.coords_checked, 5u);
}

TEST(GradCheck, SoftmaxCrossEntropyComposite) {
  auto gen = oracle::make_gen(2);
  Tensor logits = oracle::random_param({3, 5}, gen, -2, 2);
  const std::vector<int> labels{0, 4, 2};
  const auto r = grad_check([&] { return softmax_cross_entropy(logits, labels); }, {{"logits", logits}});
  EXPECT_LT(r.max_rel_error, 1e-6);
}

TEST(GradCheck, DetectsInjectedFault) {
  auto gen = oracle::make_gen(3);
  Tensor x = oracle::random_param({4}, gen);
  genre::testing::set_backward_fault(OpKind::tanh);
  const auto r = grad_check([&] { return sum(tanh(x)); }, {{"x", x}});
  genre::testing::set_backward_fault(OpKind::leaf);
  EXPECT_GT(r.max_rel_error, 0.1);
  EXPECT_EQ(r.worst_param, "x");
}

TEST(GradCheck, SamplesWhenLarge) {
  auto gen = oracle::make_gen(5);
  Tensor x = oracle::random_param({40, 40}, gen);
  const auto r = grad_check([&] { return sum(mul(x, x)); }, {{"x", x}}, 1e-5, 100, 9);
  EXPECT_EQ(r.coords_checked, 100u);
  EXPECT_LT(r.max_rel_error, 1e-6);
}
