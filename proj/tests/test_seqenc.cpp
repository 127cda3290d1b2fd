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
#include <random>

#include "lowres/netops.hpp"
#include "lowres/seqenc.hpp"
#include "test_util.hpp"

namespace lowres {
namespace {

using testing::dot;
using testing::fd_worst;
using testing::random_tensor;
using TD = Tensor<double>;

// Eq. 1 written out element by element from raw arrays.
struct ScalarGru {
  std::size_t F, H;
  std::vector<double> Wz, Wr, Wh, Uz, Ur, Uh, bz, br, bh;

  explicit ScalarGru(const GruParams<double>& p) : F(p.input_dim()), H(p.hidden_dim()) {
    auto copy = [](const TD& t) { return std::vector<double>(t.data().begin(), t.data().end()); };
    Wz = copy(p.Wz), Wr = copy(p.Wr), Wh = copy(p.Wh);
    Uz = copy(p.Uz), Ur = copy(p.Ur), Uh = copy(p.Uh);
    bz = copy(p.bz), br = copy(p.br), bh = copy(p.bh);
  }

  std::vector<double> step(const std::vector<double>& x, const std::vector<double>& h) const {
    std::vector<double> z(H), r(H), out(H);
    for (std::size_t i = 0; i < H; ++i) {
      double az = bz[i], ar = br[i];
      for (std::size_t j = 0; j < F; ++j) {
        az += Wz[i * F + j] * x[j];
        ar += Wr[i * F + j] * x[j];
      }
      for (std::size_t j = 0; j < H; ++j) {
        az += Uz[i * H + j] * h[j];
        ar += Ur[i * H + j] * h[j];
      }
      z[i] = 1.0 / (1.0 + std::exp(-az));
      r[i] = 1.0 / (1.0 + std::exp(-ar));
    }
    for (std::size_t i = 0; i < H; ++i) {
      double an = bh[i];
      for (std::size_t j = 0; j < F; ++j) an += Wh[i * F + j] * x[j];
      for (std::size_t j = 0; j < H; ++j) an += Uh[i * H + j] * (r[j] * h[j]);
      const double n = std::tanh(an);
      out[i] = z[i] * h[i] + (1.0 - z[i]) * n;
    }
    return out;
  }
};

std::vector<double> as_vec(const TD& t) { return {t.data().begin(), t.data().end()}; }

GruParams<double> random_gru(std::size_t F, std::size_t H, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  return init_gru_params<double>(F, H, rng);
}

std::vector<TD> random_xs(std::size_t T, std::size_t F, std::mt19937_64& rng) {
  std::vector<TD> xs;
  for (std::size_t t = 0; t < T; ++t) xs.push_back(random_tensor<double>({F}, rng));
  return xs;
}

TEST(GruCell, ZeroParamsHalveState) {
  const auto p = zero_gru_params<double>(3, 4);
  const TD v = TD::vector({1, -2, 0.5, 4});
  const auto s = gru_cell(TD::vector({9, 9, 9}), v, p);
  for (int i = 0; i < 4; ++i) {
    EXPECT_EQ(s.z[i], 0.5);
    EXPECT_EQ(s.r[i], 0.5);
    EXPECT_EQ(s.n[i], 0.0);
    EXPECT_EQ(s.h[i], 0.5 * v[i]);
  }
}

TEST(GruCell, SaturatedUpdateGateCopiesState) {
  auto p = zero_gru_params<double>(3, 4);
  p.bz.fill(20.0);
  p.Wh.fill(1.0);
  const TD v = TD::vector({0.3, -0.7, 0.1, 0.9});
  const auto s = gru_cell(TD::vector({1, 2, 3}), v, p);
  for (int i = 0; i < 4; ++i) EXPECT_NEAR(s.h[i], v[i], 1e-8);
}

TEST(GruCell, MatchesScalarOracle) {
  for (std::uint64_t seed = 1; seed <= 10; ++seed) {
    auto p = random_gru(6, 5, seed);
    std::mt19937_64 rng(seed + 100);
    // Larger weights exercise the nonlinear range of both gates.
    for (auto& r : p.refs("")) for (auto& v : r.tensor->data()) v *= 3.0;
    const auto x = random_tensor<double>({6}, rng), h = random_tensor<double>({5}, rng);
    const auto s = gru_cell(x, h, p);
    const auto ref = ScalarGru(p).step(as_vec(x), as_vec(h));
    for (std::size_t i = 0; i < 5; ++i) EXPECT_NEAR(s.h[i], ref[i], 1e-10);
  }
}

TEST(GruCell, GateRangesAndConvexHull) {
  std::mt19937_64 rng(3);
  for (int trial = 0; trial < 20; ++trial) {
    auto p = random_gru(4, 6, 50 + trial);
    // Pre-activations stay within a few units, where double tanh/sigmoid do not round to +-1.
    for (auto& r : p.refs("")) for (auto& v : r.tensor->data()) v *= 2.0;
    const auto x = random_tensor<double>({4}, rng, -2, 2), h = random_tensor<double>({6}, rng, -3, 3);
    const auto s = gru_cell(x, h, p);
    for (std::size_t i = 0; i < 6; ++i) {
      EXPECT_GT(s.z[i], 0.0);
      EXPECT_LT(s.z[i], 1.0);
      EXPECT_GT(s.r[i], 0.0);
      EXPECT_LT(s.r[i], 1.0);
      EXPECT_GT(s.n[i], -1.0);
      EXPECT_LT(s.n[i], 1.0);
      EXPECT_GE(s.h[i], std::min(h[i], s.n[i]) - 1e-15);
      EXPECT_LE(s.h[i], std::max(h[i], s.n[i]) + 1e-15);
    }
  }
}

TEST(GruCell, RejectsShapeMismatch) {
  const auto p = zero_gru_params<double>(3, 4);
  EXPECT_THROW(gru_cell(TD({2}), TD({4}), p), std::invalid_argument);
  EXPECT_THROW(gru_cell(TD({3}), TD({5}), p), std::invalid_argument);
}

TEST(GruCell, GradientsMatchFiniteDifferences) {
  for (std::uint64_t seed = 1; seed <= 10; ++seed) {
    auto p = random_gru(5, 4, seed);
    std::mt19937_64 rng(seed + 7);
    auto x = random_tensor<double>({5}, rng), h = random_tensor<double>({4}, rng);
    const auto w = random_tensor<double>({4}, rng);
    auto grads = zero_gru_params<double>(5, 4);
    const auto in = gru_cell_backward(x, h, gru_cell(x, h, p), p, w, grads);
    auto loss = [&] { return dot(w, gru_cell(x, h, p).h); };
    EXPECT_LT(fd_worst(x, in.x, loss), 1e-4);
    EXPECT_LT(fd_worst(h, in.h_prev, loss), 1e-4);
    auto pr = p.refs("");
    auto gr = grads.refs("");
    for (std::size_t k = 0; k < pr.size(); ++k) EXPECT_LT(fd_worst(*pr[k].tensor, *gr[k].tensor, loss), 1e-4) << pr[k].name;
  }
}

TEST(GruSequence, SingleStepEqualsCell) {
  const auto p = random_gru(3, 4, 8);
  const std::vector<TD> xs{TD::vector({0.1, -0.2, 0.3})};
  for (Direction d : {Direction::Forward, Direction::Backward}) {
    const auto seq = gru_sequence<double>(xs, p, d);
    ASSERT_EQ(seq.states.size(), 1u);
    EXPECT_EQ(seq.final_state(), gru_cell(xs[0], TD({4}), p).h);
  }
}

TEST(GruSequence, ZeroParamsStayAtZero) {
  std::mt19937_64 rng(1);
  const auto xs = random_xs(5, 3, rng);
  const auto seq = gru_sequence<double>(xs, zero_gru_params<double>(3, 4), Direction::Forward);
  for (const auto& s : seq.states)
    for (double v : s.h.data()) EXPECT_EQ(v, 0.0);
}

TEST(GruSequence, MatchesScalarRecurrence) {
  std::mt19937_64 rng(2);
  const auto p = random_gru(4, 3, 9);
  const auto xs = random_xs(6, 4, rng);
  const ScalarGru oracle(p);
  std::vector<double> hf(3, 0.0), hb(3, 0.0);
  for (std::size_t t = 0; t < 6; ++t) {
    hf = oracle.step(as_vec(xs[t]), hf);
    hb = oracle.step(as_vec(xs[5 - t]), hb);
  }
  const auto f = gru_sequence<double>(xs, p, Direction::Forward).final_state();
  const auto b = gru_sequence<double>(xs, p, Direction::Backward).final_state();
  for (std::size_t i = 0; i < 3; ++i) {
    EXPECT_NEAR(f[i], hf[i], 1e-10);
    EXPECT_NEAR(b[i], hb[i], 1e-10);
  }
}

TEST(GruSequence, RejectsEmpty) {
  const std::vector<TD> none;
  EXPECT_THROW(gru_sequence<double>(none, zero_gru_params<double>(3, 4), Direction::Forward), std::invalid_argument);
}

TEST(GruSequence, BackpropThroughTimeMatchesFiniteDifferences) {
  for (std::uint64_t seed = 1; seed <= 10; ++seed)
    for (Direction d : {Direction::Forward, Direction::Backward}) {
      auto p = random_gru(3, 4, seed);
      std::mt19937_64 rng(seed + 11);
      auto xs = random_xs(3, 3, rng);
      std::vector<TD> ws;
      for (int t = 0; t < 3; ++t) ws.push_back(random_tensor<double>({4}, rng));
      auto loss = [&] {
        const auto seq = gru_sequence<double>(xs, p, d);
        double s = 0.0;
        for (std::size_t k = 0; k < 3; ++k) s += dot(ws[k], seq.states[k].h);
        return s;
      };
      auto grads = zero_gru_params<double>(3, 4);
      const auto dxs = gru_sequence_backward<double>(xs, gru_sequence<double>(xs, p, d), p, ws, grads);
      for (std::size_t t = 0; t < 3; ++t) EXPECT_LT(fd_worst(xs[t], dxs[t], loss), 1e-4) << "x" << t;
      auto pr = p.refs("");
      auto gr = grads.refs("");
      for (std::size_t k = 0; k < pr.size(); ++k) EXPECT_LT(fd_worst(*pr[k].tensor, *gr[k].tensor, loss), 1e-4) << pr[k].name;
    }
}

TEST(EncodeFinal, Shapes) {
  std::mt19937_64 rng(3);
  const auto xs2 = random_xs(2, 5, rng);
  const auto zero = zero_gru_params<double>(5, 4);
  const TD uni = encode_final<double>(xs2, zero);
  EXPECT_EQ(uni.dims(), (Dims{4}));
  for (double v : uni.data()) EXPECT_EQ(v, 0.0);
  const auto a = random_gru(5, 4, 1), b = random_gru(5, 4, 2);
  EXPECT_EQ(encode_final<double>(random_xs(7, 5, rng), a, &b).dims(), (Dims{8}));
}

TEST(EncodeFinal, TimeReversalSymmetry) {
  std::mt19937_64 rng(4);
  const auto a = random_gru(5, 4, 1), b = random_gru(5, 4, 2);
  const auto xs = random_xs(6, 5, rng);
  const std::vector<TD> rev(xs.rbegin(), xs.rend());
  const TD e = encode_final<double>(xs, a, &b), r = encode_final<double>(rev, b, &a);
  for (std::size_t i = 0; i < 4; ++i) {
    EXPECT_NEAR(e[i], r[4 + i], 1e-14);
    EXPECT_NEAR(e[4 + i], r[i], 1e-14);
  }
}

TEST(EncodeFinal, Deterministic) {
  std::mt19937_64 rng(5);
  const auto a = random_gru(5, 4, 1), b = random_gru(5, 4, 2);
  const auto xs = random_xs(4, 5, rng);
  EXPECT_EQ(encode_final<double>(xs, a, &b), encode_final<double>(xs, a, &b));
}

TEST(Classify, IdentityAndZeroHeads) {
  const TD rep = TD::vector({0.5, -1, 2});
  HeadParams<double> head{TD({3, 3}, 0.0), TD({3}, 0.0)};
  head.weight[0] = head.weight[4] = head.weight[8] = 1.0;
  EXPECT_EQ(classify(rep, head).storage(), rep.storage());
  head.weight.fill(0.0);
  const TD logits = classify(rep, head);
  for (double v : logits.data()) EXPECT_EQ(v, 0.0);
  const auto s = softmax_xent(logits, 0);
  for (double p : s.probabilities.data()) EXPECT_NEAR(p, 1.0 / 3, 1e-15);
  EXPECT_THROW(classify(TD({4}), HeadParams<double>{TD({3, 3}), TD({3})}), std::invalid_argument);
}

TEST(Classify, GradientsMatchFiniteDifferences) {
  std::mt19937_64 rng(6);
  for (int trial = 0; trial < 10; ++trial) {
    auto rep = random_tensor<double>({6}, rng);
    HeadParams<double> head{random_tensor<double>({4, 6}, rng), random_tensor<double>({4}, rng)};
    const int label = trial % 4;
    const auto g = softmax_xent(classify(rep, head), label).grad_logits;
    const auto lg = linear_backward(rep, head.weight, g);
    auto loss = [&] { return softmax_xent(classify(rep, head), label).loss; };
    EXPECT_LT(fd_worst(rep, lg.input, loss), 1e-6);
    EXPECT_LT(fd_worst(head.weight, lg.weight, loss), 1e-6);
    EXPECT_LT(fd_worst(head.bias, lg.bias, loss), 1e-6);
  }
}

TEST(GruParams, NamesAndValidation) {
  auto p = random_gru(3, 2, 1);
  const auto refs = p.refs("gru.fwd.");
  std::vector<std::string> names;
  for (const auto& r : refs) names.push_back(r.name);
  EXPECT_EQ(names, (std::vector<std::string>{"gru.fwd.Wz", "gru.fwd.Wr", "gru.fwd.Wh", "gru.fwd.Uz", "gru.fwd.Ur",
                                             "gru.fwd.Uh", "gru.fwd.bz", "gru.fwd.br", "gru.fwd.bh"}));
  p.validate();
  p.Uh = TD({2, 3});
  EXPECT_THROW(p.validate(), std::invalid_argument);
}

}  // namespace
}  // namespace lowres
