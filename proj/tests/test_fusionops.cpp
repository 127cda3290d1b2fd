// Copyright 2026 The lowres Authors.
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#include <gtest/gtest.h>

#include <random>

#include "lowres/fusionops.hpp"
#include "test_util.hpp"

namespace lowres {
namespace {

using testing::dot;
using testing::fd_worst;
using testing::random_tensor;
using TD = Tensor<double>;

TEST(FuseSum, Examples) {
  EXPECT_EQ(fuse_sum(TD::vector({1, 2}), TD::vector({3, 4})).storage(), (std::vector<double>{4, 6}));
  std::mt19937_64 rng(1);
  const auto x = random_tensor<double>({9}, rng);
  EXPECT_EQ(fuse_sum(x, TD({9}, 0.0)), x);
}

TEST(FuseSum, MatchesLoopOracleExactly) {
  std::mt19937_64 rng(2);
  const auto a = random_tensor<double>({33}, rng), b = random_tensor<double>({33}, rng);
  const TD y = fuse_sum(a, b);
  for (std::size_t i = 0; i < 33; ++i) EXPECT_EQ(y[i], a[i] + b[i]);
  EXPECT_EQ(fuse_sum(b, a), y);
}

TEST(FuseSum, HomogeneousAndBackward) {
  std::mt19937_64 rng(3);
  const auto a = random_tensor<double>({8}, rng), b = random_tensor<double>({8}, rng);
  TD ca = a, cb = b;
  for (auto& v : ca.data()) v *= 2.5;
  for (auto& v : cb.data()) v *= 2.5;
  const TD lhs = fuse_sum(ca, cb), rhs = fuse_sum(a, b);
  for (std::size_t i = 0; i < 8; ++i) EXPECT_NEAR(lhs[i], 2.5 * rhs[i], 1e-12);
  const auto g = fuse_sum_backward(rhs);
  EXPECT_EQ(g.a, rhs);
  EXPECT_EQ(g.b, rhs);
}

TEST(FuseMax, ExamplesAndProperties) {
  EXPECT_EQ(fuse_max(TD::vector({1, 5}), TD::vector({3, 2})).storage(), (std::vector<double>{3, 5}));
  std::mt19937_64 rng(4);
  const auto a = random_tensor<double>({12}, rng), b = random_tensor<double>({12}, rng);
  EXPECT_EQ(fuse_max(a, a), a);
  EXPECT_EQ(fuse_max(a, b), fuse_max(b, a));
  TD ca = a, cb = b;
  for (auto& v : ca.data()) v *= 3.0;
  for (auto& v : cb.data()) v *= 3.0;
  const TD lhs = fuse_max(ca, cb), rhs = fuse_max(a, b);
  for (std::size_t i = 0; i < 12; ++i) EXPECT_NEAR(lhs[i], 3.0 * rhs[i], 1e-12);
}

TEST(FuseMax, TiesRouteToFirstOperand) {
  const TD a = TD::vector({1, 2}), g = TD::vector({5, 7});
  const auto r = fuse_max_backward(a, a, g);
  EXPECT_EQ(r.a, g);
  EXPECT_EQ(r.b.storage(), (std::vector<double>{0, 0}));
}

TEST(FuseMax, GradientsMatchFiniteDifferences) {
  for (std::uint64_t seed = 1; seed <= 10; ++seed) {
    std::mt19937_64 rng(seed);
    auto a = random_tensor<double>({10}, rng), b = random_tensor<double>({10}, rng);
    for (std::size_t i = 0; i < 10; ++i)
      if (std::abs(a[i] - b[i]) < 1e-3) b[i] += 0.1;  // keep every pair away from a tie
    const auto w = random_tensor<double>({10}, rng);
    const auto g = fuse_max_backward(a, b, w);
    auto loss = [&] { return dot(w, fuse_max(a, b)); };
    EXPECT_LT(fd_worst(a, g.a, loss), 1e-6);
    EXPECT_LT(fd_worst(b, g.b, loss), 1e-6);
  }
}

TEST(FuseCat, InterleavesWithSecondOperandFirst) {
  EXPECT_EQ(fuse_cat(TD::vector({1, 2}), TD::vector({3, 4})).storage(), (std::vector<double>{3, 1, 4, 2}));
  std::mt19937_64 rng(5);
  const auto a = random_tensor<double>({7}, rng), b = random_tensor<double>({7}, rng);
  const TD y = fuse_cat(a, b);
  ASSERT_EQ(y.dims(), (Dims{14}));
  // 1-indexed: y_{2d} = a_d, y_{2d-1} = b_d.
  for (std::size_t d = 1; d <= 7; ++d) {
    EXPECT_EQ(y[2 * d - 1], a[d - 1]);
    EXPECT_EQ(y[2 * d - 2], b[d - 1]);
  }
  const auto back = deinterleave(y);
  EXPECT_EQ(back.a, a);
  EXPECT_EQ(back.b, b);
  const auto g = fuse_cat_backward(y);
  EXPECT_EQ(g.a, a);
  EXPECT_EQ(g.b, b);
}

FusionParams<double> pair_sum_filter(std::size_t d) {
  FusionParams<double> p;
  p.kind = FusionKind::Conv;
  p.filters = TD({2 * d, d}, 0.0);
  p.bias = TD({d}, 0.0);
  // Output channel o reads cat slots 2o (b_o) and 2o+1 (a_o).
  for (std::size_t o = 0; o < d; ++o) {
    p.filters[(2 * o) * d + o] = 1.0;
    p.filters[(2 * o + 1) * d + o] = 1.0;
  }
  return p;
}

TEST(FuseConv, PairSummingFilterEqualsSum) {
  std::mt19937_64 rng(6);
  for (int trial = 0; trial < 5; ++trial) {
    const auto a = random_tensor<double>({16}, rng), b = random_tensor<double>({16}, rng);
    EXPECT_LT(testing::max_abs_diff(fuse_conv(a, b, pair_sum_filter(16)), fuse_sum(a, b)), 1e-12);
  }
}

TEST(FuseConv, ZeroFilterGivesBias) {
  std::mt19937_64 rng(7);
  auto p = init_fusion_params<double>(FusionKind::Conv, 5, 10, rng);
  EXPECT_EQ(p.filters.dims(), (Dims{10, 10}));
  p.filters.fill(0.0);
  p.bias.fill(0.75);
  const TD y = fuse_conv(random_tensor<double>({5}, rng), random_tensor<double>({5}, rng), p);
  EXPECT_EQ(y.storage(), std::vector<double>(10, 0.75));
}

TEST(FuseConv, MatchesLinearMapOverConcatenation) {
  std::mt19937_64 rng(8);
  const auto p = init_fusion_params<double>(FusionKind::Conv, 4, 3, rng);
  const auto a = random_tensor<double>({4}, rng), b = random_tensor<double>({4}, rng);
  const TD x = fuse_cat(a, b), y = fuse_conv(a, b, p);
  for (std::size_t o = 0; o < 3; ++o) {
    double s = p.bias[o];
    for (std::size_t i = 0; i < 8; ++i) s += p.filters[i * 3 + o] * x[i];
    EXPECT_NEAR(y[o], s, 1e-14);
  }
}

TEST(FuseConv, GradientsMatchFiniteDifferences) {
  for (std::uint64_t seed = 1; seed <= 10; ++seed) {
    std::mt19937_64 rng(seed);
    auto p = init_fusion_params<double>(FusionKind::Conv, 6, 12, rng);
    p.bias = random_tensor<double>({12}, rng);
    auto a = random_tensor<double>({6}, rng), b = random_tensor<double>({6}, rng);
    const auto w = random_tensor<double>({12}, rng);
    FusionParams<double> grads{FusionKind::Conv, TD(p.filters.dims()), TD(p.bias.dims())};
    const auto g = fuse_conv_backward(a, b, p, w, grads);
    auto loss = [&] { return dot(w, fuse_conv(a, b, p)); };
    EXPECT_LT(fd_worst(a, g.a, loss), 1e-5);
    EXPECT_LT(fd_worst(b, g.b, loss), 1e-5);
    EXPECT_LT(fd_worst(p.filters, grads.filters, loss), 1e-5);
    EXPECT_LT(fd_worst(p.bias, grads.bias, loss), 1e-5);
  }
}

TEST(Fusion, DispatchAndDims) {
  std::mt19937_64 rng(9);
  const auto a = random_tensor<double>({4}, rng), b = random_tensor<double>({4}, rng);
  for (FusionKind k : {FusionKind::Sum, FusionKind::Max, FusionKind::Cat, FusionKind::Conv}) {
    const auto p = init_fusion_params<double>(k, 4, 8, rng);
    EXPECT_EQ(fuse(a, b, p).size(), fused_dim(k, 4, 8)) << fusion_name(k);
    EXPECT_EQ(parse_fusion(fusion_name(k)), k);
  }
  EXPECT_EQ(fused_dim(FusionKind::Cat, 4, 0), 8u);
  EXPECT_EQ(fused_dim(FusionKind::Sum, 4, 0), 4u);
  EXPECT_THROW(parse_fusion("avg"), std::invalid_argument);
}

TEST(Fusion, RejectsLengthMismatch) {
  const TD a({3}), b({4});
  EXPECT_THROW(fuse_sum(a, b), std::invalid_argument);
  EXPECT_THROW(fuse_max(a, b), std::invalid_argument);
  EXPECT_THROW(fuse_cat(a, b), std::invalid_argument);
  EXPECT_THROW(fuse_conv(a, b, pair_sum_filter(3)), std::invalid_argument);
  EXPECT_THROW(fuse_conv(a, a, pair_sum_filter(4)), std::invalid_argument);
  EXPECT_THROW(fuse_conv(a, a, FusionParams<double>{}), std::invalid_argument);
}

}  // namespace
}  // namespace lowres
