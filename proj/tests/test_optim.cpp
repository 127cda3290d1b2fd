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

#include <cmath>
#include <limits>
#include <random>

#include "lowres/optim.hpp"
#include "test_util.hpp"

namespace lowres {
namespace {

using TD = Tensor<double>;

struct Problem {
  TD theta, grad;
  std::vector<ParamRef<double>> p, g;

  Problem(const std::vector<double>& t, const std::vector<double>& gr) : theta({t.size()}, t), grad({gr.size()}, gr) {
    p = {{"theta", &theta}};
    g = {{"theta", &grad}};
  }
  void step(RmspropState<double>& s, const RmspropConfig& c) { rmsprop_step<double>(p, g, s, c); }
};

TEST(Rmsprop, HandComputedFirstStep) {
  Problem pr({0.0}, {1.0});
  RmspropState<double> s;
  RmspropConfig c;
  c.weight_decay = 0.0;
  pr.step(s, c);
  EXPECT_NEAR(pr.theta[0], -1e-3 / (std::sqrt(0.01) + 1e-8), 1e-15);
  EXPECT_NEAR(pr.theta[0], -9.99999e-3, 1e-8);
  EXPECT_NEAR(s.mean_square[0][0], 0.01, 1e-15);
}

TEST(Rmsprop, ZeroGradientKeepsThetaAndDecaysState) {
  Problem pr({0.5, -2.0}, {3.0, -4.0});
  RmspropState<double> s;
  RmspropConfig c;
  c.weight_decay = 0.0;
  pr.step(s, c);
  const TD after = pr.theta;
  const TD v = s.mean_square[0];
  pr.grad.fill(0.0);
  pr.step(s, c);
  EXPECT_EQ(pr.theta, after);
  for (std::size_t i = 0; i < 2; ++i) EXPECT_NEAR(s.mean_square[0][i], 0.99 * v[i], 1e-15);
}

TEST(Rmsprop, CoupledWeightDecay) {
  // The decay term joins the gradient before the running average: g' = g + wd * theta.
  Problem pr({2.0}, {0.5});
  RmspropState<double> s;
  RmspropConfig c;
  c.weight_decay = 0.1;
  c.learning_rate = 0.01;
  pr.step(s, c);
  const double g = 0.5 + 0.1 * 2.0;
  const double v = 0.01 * g * g;
  EXPECT_NEAR(s.mean_square[0][0], v, 1e-15);
  EXPECT_NEAR(pr.theta[0], 2.0 - 0.01 * g / (std::sqrt(v) + 1e-8), 1e-14);
}

TEST(Rmsprop, MatchesReferenceRecurrence) {
  std::mt19937_64 rng(1);
  std::normal_distribution<double> n(0.0, 1.0);
  Problem pr({0.3, -0.1, 0.8}, {0, 0, 0});
  std::vector<double> theta{0.3, -0.1, 0.8}, v(3, 0.0);
  RmspropState<double> s;
  RmspropConfig c;
  for (int step = 0; step < 20; ++step) {
    for (std::size_t i = 0; i < 3; ++i) pr.grad[i] = n(rng);
    for (std::size_t i = 0; i < 3; ++i) {
      const double g = pr.grad[i] + c.weight_decay * theta[i];
      v[i] = c.decay * v[i] + (1 - c.decay) * g * g;
      theta[i] -= c.learning_rate * g / (std::sqrt(v[i]) + c.eps);
    }
    pr.step(s, c);
    for (std::size_t i = 0; i < 3; ++i) {
      ASSERT_NEAR(pr.theta[i], theta[i], 1e-14);
      ASSERT_GE(s.mean_square[0][i], 0.0);
    }
  }
}

TEST(Rmsprop, Deterministic) {
  Problem a({0.1, 0.2}, {0.3, -0.4}), b({0.1, 0.2}, {0.3, -0.4});
  RmspropState<double> sa, sb;
  a.step(sa, {});
  b.step(sb, {});
  EXPECT_EQ(a.theta, b.theta);
  EXPECT_EQ(sa.mean_square, sb.mean_square);
}

TEST(Rmsprop, RejectsNonFiniteGradient) {
  Problem pr({1.0, 1.0}, {0.0, std::numeric_limits<double>::infinity()});
  RmspropState<double> s;
  try {
    pr.step(s, {});
    FAIL() << "expected NumericError";
  } catch (const NumericError& e) {
    EXPECT_NE(std::string(e.what()).find("theta"), std::string::npos);
  }
  EXPECT_EQ(pr.theta[0], 1.0);  // nothing was applied
  pr.grad[1] = std::numeric_limits<double>::quiet_NaN();
  EXPECT_THROW(pr.step(s, {}), NumericError);
}

TEST(Rmsprop, RejectsShapeMismatch) {
  TD theta({2}), grad({3});
  std::vector<ParamRef<double>> p{{"t", &theta}}, g{{"t", &grad}};
  RmspropState<double> s;
  EXPECT_THROW(rmsprop_step<double>(p, g, s, {}), std::invalid_argument);
}

}  // namespace
}  // namespace lowres
