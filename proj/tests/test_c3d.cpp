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

#include <chrono>
#include <random>

#include "lowres/c3d.hpp"
#include "test_util.hpp"

namespace lowres {
namespace {

using testing::random_tensor;
using testing::rel_err;

TEST(C3dSpec, PresetLayerCounts) {
  const C3dSpec full = make_c3d_spec(Preset::Full, 51);
  EXPECT_EQ(full.count(LayerKind::Conv), 8u);
  EXPECT_EQ(full.count(LayerKind::Pool), 5u);
  EXPECT_EQ(full.count(LayerKind::Fc), 2u);
  EXPECT_EQ(full.feature_dim(), 4096u);
  const C3dSpec tiny = make_c3d_spec(Preset::Tiny, 4);
  EXPECT_EQ(tiny.count(LayerKind::Conv), 3u);
  EXPECT_EQ(tiny.count(LayerKind::Pool), 3u);
  EXPECT_EQ(tiny.count(LayerKind::Fc), 2u);
  EXPECT_EQ(tiny.feature_dim(), 128u);
  EXPECT_THROW(make_c3d_spec(Preset::Tiny, 1), std::invalid_argument);
  EXPECT_EQ(parse_preset("full"), Preset::Full);
  EXPECT_STREQ(preset_name(Preset::Tiny), "tiny");
  EXPECT_THROW(parse_preset("huge"), std::invalid_argument);
}

TEST(C3dSpec, FullPresetShapeTrace) {
  const C3dSpec spec = make_c3d_spec(Preset::Full, 51);
  const auto shapes = infer_layer_shapes(spec);
  ASSERT_EQ(shapes.size(), spec.layers.size());
  EXPECT_EQ(shapes[spec.feature_layer], (Dims{4096}));
  EXPECT_EQ(shapes.back(), (Dims{51}));
  EXPECT_EQ(shapes[0], (Dims{64, 16, 112, 112}));
  EXPECT_EQ(shapes[1], (Dims{64, 16, 56, 56}));
  EXPECT_EQ(shapes[12], (Dims{512, 1, 4, 4}));  // pool5 with spatial padding
}

TEST(C3dSpec, ObservedShapesMatchDeclared) {
  for (Preset preset : {Preset::Tiny, Preset::Full}) {
    const C3dSpec spec = make_c3d_spec(preset, 5);
    const auto params = init_c3d_params<float>(spec, 1);
    std::mt19937_64 rng(2);
    C3dTrace<float> trace;
    const auto out = c3d_forward(random_tensor<float>(spec.input, rng, 0, 1), params, &trace);
    EXPECT_EQ(trace.outputs, infer_layer_shapes(spec)) << preset_name(preset);
    EXPECT_EQ(out.feature.size(), spec.feature_dim());
    EXPECT_EQ(out.logits.size(), 5u);
  }
}

TEST(C3dParams, KaimingUniformInit) {
  const auto p = init_c3d_params<float>(make_c3d_spec(Preset::Tiny, 4), 3);
  std::size_t count = 0;
  for (std::size_t i = 0; i < p.weights.size(); ++i) {
    if (p.weights[i].empty()) continue;
    const double fan_in = double(p.weights[i].size()) / double(p.weights[i].dim(0));
    const double bound = std::sqrt(6.0 / fan_in);
    double sq = 0.0;
    for (float w : p.weights[i].data()) {
      EXPECT_LE(std::abs(w), bound);
      sq += double(w) * w;
    }
    // Uniform(-b, b) has variance b^2 / 3.
    EXPECT_NEAR(sq / double(p.weights[i].size()), bound * bound / 3, 0.25 * bound * bound / 3);
    count += p.weights[i].size() + p.biases[i].size();
  }
  EXPECT_EQ(count, p.parameter_count());
  EXPECT_EQ(init_c3d_params<float>(p.spec, 3).weights, p.weights);
  EXPECT_NE(init_c3d_params<float>(p.spec, 4).weights, p.weights);
}

TEST(C3dForward, ZeroInputPropagatesBiases) {
  const C3dSpec spec = make_c3d_spec(Preset::Tiny, 4);
  const auto params = init_c3d_params<double>(spec, 5);
  const Tensor<double> zero(spec.input, 0.0);
  C3dTrace<double> trace;
  const auto out = c3d_forward(zero, params, &trace);
  // The first conv sees only zeros, so every output position equals its channel bias.
  const auto& pre = trace.pre_activation[0];
  const std::size_t per_channel = pre.size() / pre.dim(0);
  for (std::size_t i = 0; i < pre.size(); ++i) ASSERT_EQ(pre[i], params.biases[0][i / per_channel]);
  const auto again = c3d_forward(zero, params);
  EXPECT_EQ(out.feature, again.feature);
  EXPECT_EQ(out.logits, again.logits);

  // With every weight zeroed the feature is relu(b_fc6) and the logits are the output bias.
  auto biases_only = params;
  for (auto& w : biases_only.weights) w.fill(0.0);
  const auto b = c3d_forward(zero, biases_only);
  const auto& b6 = params.biases[spec.feature_layer];
  for (std::size_t i = 0; i < b.feature.size(); ++i) EXPECT_EQ(b.feature[i], std::max(0.0, b6[i]));
  EXPECT_EQ(b.logits, params.biases.back());
}

TEST(C3dForward, RejectsWrongShape) {
  const auto params = init_c3d_params<float>(make_c3d_spec(Preset::Tiny, 4), 1);
  EXPECT_THROW(c3d_forward(Tensor<float>({3, 8, 112, 112}), params), std::invalid_argument);
  EXPECT_THROW(c3d_forward(Tensor<float>({3, 16, 56, 56}), params), std::invalid_argument);
}

// Central differences of the loss for sampled parameters. Probes whose perturbation crosses a ReLU or
// pooling boundary are skipped. Returns {worst error, checked probes}.
template <typename Pick>
std::pair<double, std::size_t> probe_network(C3dParams<double>& params, const Tensor<double>& unit, int label,
                                             Pick&& pick, std::size_t probes) {
  C3dTrace<double> trace;
  const auto out = c3d_forward(unit, params, &trace);
  auto grads = params.zeros_like();
  c3d_backward(params, trace, softmax_xent(out.logits, label).grad_logits, grads);
  const auto base = trace.pattern_signature();
  auto pr = params.refs();
  auto gr = grads.refs();
  const double h = 1e-5;
  double worst = 0.0;
  std::size_t checked = 0;
  for (std::size_t k = 0; k < probes; ++k) {
    const auto [ti, ei] = pick(k, pr, gr);
    double& w = (*pr[ti].tensor)[ei];
    const double keep = w;
    auto eval = [&](double v) {
      w = v;
      C3dTrace<double> t;
      const auto o = c3d_forward(unit, params, &t);
      return std::pair{softmax_xent(o.logits, label).loss, t.pattern_signature()};
    };
    const auto up = eval(keep + h);
    const auto down = eval(keep - h);
    w = keep;
    if (up.second != base || down.second != base) continue;
    worst = std::max(worst, rel_err((*gr[ti].tensor)[ei], (up.first - down.first) / (2 * h)));
    ++checked;
  }
  return {worst, checked};
}

TEST(C3dBackward, TinyNetworkSampledParameters) {
  const C3dSpec spec = make_c3d_spec(Preset::Tiny, 4);
  auto params = init_c3d_params<double>(spec, 11);
  std::mt19937_64 rng(12);
  const auto unit = random_tensor<double>(spec.input, rng, 0, 1);
  const std::size_t total = params.parameter_count();
  const std::size_t probes = total / 100;
  std::vector<std::size_t> offsets;
  for (auto& r : params.refs()) offsets.push_back(r.tensor->size());
  std::uniform_int_distribution<std::size_t> flat(0, total - 1);
  auto pick = [&](std::size_t, auto&, auto&) {
    std::size_t f = flat(rng), t = 0;
    while (f >= offsets[t]) f -= offsets[t++];
    return std::pair{t, f};
  };
  const auto [worst, checked] = probe_network(params, unit, 2, pick, probes);
  RecordProperty("checked", int(checked));
  EXPECT_GT(checked, probes * 9 / 10);
  EXPECT_LT(worst, 1e-3);
}

TEST(C3dBackward, FullNetworkDirectionalDerivative) {
  const C3dSpec spec = make_c3d_spec(Preset::Full, 6);
  auto params = init_c3d_params<double>(spec, 13);
  std::mt19937_64 rng(14);
  const auto unit = random_tensor<double>(spec.input, rng, 0, 1);
  C3dTrace<double> trace;
  const auto out = c3d_forward(unit, params, &trace);
  auto grads = params.zeros_like();
  c3d_backward(params, trace, softmax_xent(out.logits, 1).grad_logits, grads);
  trace = {};

  // Compare g . d against central differences along one random unit direction d over every parameter.
  std::vector<Tensor<double>> dirs;
  double norm = 0.0, analytic = 0.0;
  auto pr = params.refs();
  auto gr = grads.refs();
  for (std::size_t k = 0; k < pr.size(); ++k) {
    dirs.push_back(random_tensor<double>(pr[k].tensor->dims(), rng));
    for (double v : dirs.back().data()) norm += v * v;
  }
  norm = std::sqrt(norm);
  for (std::size_t k = 0; k < pr.size(); ++k) {
    for (auto& v : dirs[k].data()) v /= norm;
    analytic += testing::dot(dirs[k], *gr[k].tensor);
  }
  const double h = 1e-5;
  auto loss_at = [&](double t) {
    auto moved = params;
    auto mr = moved.refs();
    for (std::size_t k = 0; k < mr.size(); ++k)
      for (std::size_t i = 0; i < dirs[k].size(); ++i) (*mr[k].tensor)[i] += t * dirs[k][i];
    return softmax_xent(c3d_forward(unit, moved).logits, 1).loss;
  };
  const double numeric = (loss_at(h) - loss_at(-h)) / (2 * h);
  EXPECT_LT(rel_err(analytic, numeric), 1e-4) << analytic << " vs " << numeric;
}

TEST(C3dBundle, RoundTrip) {
  const auto p = init_c3d_params<float>(make_c3d_spec(Preset::Tiny, 7, 8), 21);
  const auto q = c3d_from_bundle(c3d_to_bundle(p));
  EXPECT_EQ(q.spec.num_classes, 7u);
  EXPECT_EQ(q.spec.input, p.spec.input);
  EXPECT_EQ(q.weights, p.weights);
  EXPECT_EQ(q.biases, p.biases);
}

TEST(C3dBundle, RejectsMissingTensor) {
  auto bundle = c3d_to_bundle(init_c3d_params<float>(make_c3d_spec(Preset::Tiny, 3), 1));
  bundle.pop_back();
  EXPECT_ANY_THROW(c3d_from_bundle(bundle));
}

}  // namespace
}  // namespace lowres
