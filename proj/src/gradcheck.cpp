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

#include "lowres/gradcheck.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <functional>
#include <random>
#include <utility>

#include "lowres/checkpoint.hpp"
#include "lowres/fusionops.hpp"
#include "lowres/netops.hpp"
#include "lowres/seqenc.hpp"
#include "lowres/twostream.hpp"

namespace lowres {

namespace {

using Eval = std::function<std::pair<double, std::uint64_t>()>;

class Prober {
 public:
  Prober(const GradcheckOptions& opt, OpCheck& out) : step_(opt.step), floor_(opt.floor), out_(out) {}

  /// Perturbs `coord` by +-step; probes whose region signature changes are skipped.
  void probe(double& coord, double analytic, const Eval& eval, std::uint64_t base_region) {
    const double saved = coord;
    coord = saved + step_;
    const auto plus = eval();
    coord = saved - step_;
    const auto minus = eval();
    coord = saved;
    if (plus.second != base_region || minus.second != base_region) {
      ++out_.skipped;
      return;
    }
    const double numeric = (plus.first - minus.first) / (2.0 * step_);
    out_.worst_rel_err = std::max(out_.worst_rel_err, relative_error(analytic, numeric, floor_));
    ++out_.checked;
  }

  void probe_all(Tensor<double>& t, const Tensor<double>& analytic, const Eval& eval, std::uint64_t base_region = 0) {
    if (!t.same_shape(analytic)) throw std::logic_error("gradcheck: analytic gradient shape mismatch");
    for (std::size_t i = 0; i < t.size(); ++i) probe(t[i], analytic[i], eval, base_region);
  }

 private:
  double step_;
  double floor_;
  OpCheck& out_;
};

Tensor<double> random_tensor(const Dims& dims, std::mt19937_64& rng, double lo = -1.0, double hi = 1.0) {
  std::uniform_real_distribution<double> u(lo, hi);
  Tensor<double> t(dims);
  for (double& v : t.data()) v = u(rng);
  return t;
}

double dot(const Tensor<double>& a, const Tensor<double>& b) {
  double s = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) s += a[i] * b[i];
  return s;
}

std::uint64_t sign_signature(const Tensor<double>& t, std::uint64_t h = 0xcbf29ce484222325ULL) {
  for (double v : t.data()) {
    const unsigned char bit = v > 0.0 ? 1 : 0;
    h = fnv1a(&bit, 1, h);
  }
  return h;
}

std::uint64_t draw_seed(std::uint64_t base, int draw, std::uint64_t op) {
  std::uint64_t x = base ^ (op << 32) ^ static_cast<std::uint64_t>(draw);
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

void check_conv3d(std::mt19937_64& rng, Prober& p) {
  Tensor<double> x = random_tensor({2, 4, 5, 5}, rng);
  Tensor<double> w = random_tensor({3, 2, 2, 3, 3}, rng);
  Tensor<double> b = random_tensor({3}, rng);
  const Conv3dGeometry geom{{1, 2, 1}, {1, 1, 0}};
  const Tensor<double> proj = random_tensor(conv3d_output_dims(x.dims(), w.dims(), geom), rng);
  const auto g = conv3d_backward(x, w, proj, geom);
  const Eval eval = [&] { return std::pair{dot(proj, conv3d_forward(x, w, b, geom)), std::uint64_t{0}}; };
  p.probe_all(x, g.input, eval);
  p.probe_all(w, g.weight, eval);
  p.probe_all(b, g.bias, eval);
}

void check_maxpool(std::mt19937_64& rng, Prober& p) {
  Tensor<double> x = random_tensor({2, 4, 6, 6}, rng);
  const Pool3dGeometry geom{{2, 3, 3}, {2, 2, 2}, {0, 1, 1}};
  const auto base = maxpool3d_forward(x, geom);
  const Tensor<double> proj = random_tensor(base.output.dims(), rng);
  const Tensor<double> g = maxpool3d_backward(x.dims(), base.argmax, proj);
  auto region = [](const std::vector<std::size_t>& am) { return fnv1a(am.data(), am.size() * sizeof(std::size_t)); };
  const Eval eval = [&] {
    const auto r = maxpool3d_forward(x, geom);
    return std::pair{dot(proj, r.output), region(r.argmax)};
  };
  p.probe_all(x, g, eval, region(base.argmax));
}

void check_linear(std::mt19937_64& rng, Prober& p) {
  Tensor<double> x = random_tensor({5}, rng);
  Tensor<double> w = random_tensor({4, 5}, rng);
  Tensor<double> b = random_tensor({4}, rng);
  const Tensor<double> proj = random_tensor({4}, rng);
  const auto g = linear_backward(x, w, proj);
  const Eval eval = [&] { return std::pair{dot(proj, linear_forward(x, w, b)), std::uint64_t{0}}; };
  p.probe_all(x, g.input, eval);
  p.probe_all(w, g.weight, eval);
  p.probe_all(b, g.bias, eval);
}

void check_relu(std::mt19937_64& rng, Prober& p) {
  Tensor<double> x = random_tensor({24}, rng);
  const Tensor<double> proj = random_tensor({24}, rng);
  const Tensor<double> g = relu_backward(x, proj);
  const Eval eval = [&] { return std::pair{dot(proj, relu_forward(x)), sign_signature(x)}; };
  p.probe_all(x, g, eval, sign_signature(x));
}

void check_softmax(std::mt19937_64& rng, Prober& p) {
  Tensor<double> logits = random_tensor({6}, rng, -3.0, 3.0);
  const int label = static_cast<int>(rng() % 6);
  const auto base = softmax_xent(logits, label);
  const Eval eval = [&] { return std::pair{softmax_xent(logits, label).loss, std::uint64_t{0}}; };
  p.probe_all(logits, base.grad_logits, eval);
}

void check_gru_cell(std::mt19937_64& rng, Prober& p) {
  const std::size_t F = 5, H = 4;
  Tensor<double> x = random_tensor({F}, rng);
  Tensor<double> h = random_tensor({H}, rng);
  GruParams<double> params = init_gru_params<double>(F, H, rng);
  const Tensor<double> proj = random_tensor({H}, rng);
  GruParams<double> grads = zero_gru_params<double>(F, H);
  const auto state = gru_cell(x, h, params);
  const auto gi = gru_cell_backward(x, h, state, params, proj, grads);
  const Eval eval = [&] { return std::pair{dot(proj, gru_cell(x, h, params).h), std::uint64_t{0}}; };
  p.probe_all(x, gi.x, eval);
  p.probe_all(h, gi.h_prev, eval);
  auto pr = params.refs("");
  auto gr = grads.refs("");
  for (std::size_t i = 0; i < pr.size(); ++i) p.probe_all(*pr[i].tensor, *gr[i].tensor, eval);
}

void check_gru_sequence(std::mt19937_64& rng, Prober& p) {
  const std::size_t F = 5, H = 4, T = 4;
  for (Direction dir : {Direction::Forward, Direction::Backward}) {
    std::vector<Tensor<double>> xs;
    std::vector<Tensor<double>> proj;
    for (std::size_t t = 0; t < T; ++t) {
      xs.push_back(random_tensor({F}, rng));
      proj.push_back(random_tensor({H}, rng));
    }
    GruParams<double> params = init_gru_params<double>(F, H, rng);
    GruParams<double> grads = zero_gru_params<double>(F, H);
    const auto seq = gru_sequence<double>(xs, params, dir);
    const auto dxs = gru_sequence_backward<double>(xs, seq, params, proj, grads);
    const Eval eval = [&] {
      const auto s = gru_sequence<double>(xs, params, dir);
      double loss = 0.0;
      for (std::size_t k = 0; k < T; ++k) loss += dot(proj[k], s.states[k].h);
      return std::pair{loss, std::uint64_t{0}};
    };
    for (std::size_t t = 0; t < T; ++t) p.probe_all(xs[t], dxs[t], eval);
    auto pr = params.refs("");
    auto gr = grads.refs("");
    for (std::size_t i = 0; i < pr.size(); ++i) p.probe_all(*pr[i].tensor, *gr[i].tensor, eval);
  }
}

void check_fusion(FusionKind kind, std::mt19937_64& rng, Prober& p) {
  const std::size_t D = 6, Dout = 5;
  Tensor<double> a = random_tensor({D}, rng);
  Tensor<double> b = random_tensor({D}, rng);
  FusionParams<double> params = init_fusion_params<double>(kind, D, Dout, rng);
  FusionParams<double> grads = params;
  for (auto& r : grads.refs("")) r.tensor->fill(0.0);
  const Tensor<double> proj = random_tensor({fused_dim(kind, D, Dout)}, rng);
  const auto g = fuse_backward(a, b, params, proj, grads);
  auto region = [&] {
    if (kind != FusionKind::Max) return std::uint64_t{0};
    Tensor<double> diff = a;
    for (std::size_t i = 0; i < D; ++i) diff[i] = a[i] - b[i];
    return sign_signature(diff);
  };
  const Eval eval = [&] { return std::pair{dot(proj, fuse(a, b, params)), region()}; };
  const std::uint64_t base = region();
  p.probe_all(a, g.a, eval, base);
  p.probe_all(b, g.b, eval, base);
  auto pr = params.refs("");
  auto gr = grads.refs("");
  for (std::size_t i = 0; i < pr.size(); ++i) p.probe_all(*pr[i].tensor, *gr[i].tensor, eval, base);
}

void check_network(const GradcheckOptions& opt, std::uint64_t seed, Prober& p) {
  std::mt19937_64 rng(seed);
  const std::size_t K = 4;
  const C3dSpec spec = make_c3d_spec(opt.preset, K);
  C3dParams<double> params = init_c3d_params<double>(spec, seed);
  const Tensor<double> unit = random_tensor(spec.input, rng, 0.0, 1.0);
  const int label = static_cast<int>(rng() % K);

  C3dTrace<double> trace;
  const auto out = c3d_forward(unit, params, &trace);
  const auto xent = softmax_xent(out.logits, label);
  C3dParams<double> grads = params.zeros_like();
  c3d_backward(params, trace, xent.grad_logits, grads);
  const std::uint64_t base = trace.pattern_signature();

  auto pr = params.refs();
  auto gr = grads.refs();
  std::vector<std::size_t> offsets{0};
  for (const auto& r : pr) offsets.push_back(offsets.back() + r.tensor->size());
  const std::size_t total = offsets.back();
  const auto probes = std::max<std::size_t>(1, static_cast<std::size_t>(std::ceil(opt.network_fraction * total)));
  std::uniform_int_distribution<std::size_t> pick(0, total - 1);
  const Eval eval = [&] {
    C3dTrace<double> tr;
    const auto o = c3d_forward(unit, params, &tr);
    return std::pair{softmax_xent(o.logits, label).loss, tr.pattern_signature()};
  };
  for (std::size_t k = 0; k < probes; ++k) {
    const std::size_t flat = pick(rng);
    const auto it = std::upper_bound(offsets.begin(), offsets.end(), flat) - 1;
    const std::size_t t = static_cast<std::size_t>(it - offsets.begin());
    const std::size_t i = flat - *it;
    p.probe((*pr[t].tensor)[i], (*gr[t].tensor)[i], eval, base);
  }
}

std::uint64_t twostream_region(const TwoStreamParams<double>& m, const TwoStreamTrace<double>& tr) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  if (m.config.gru == GruMode::None) {
    if (!tr.spatial.pre_activation.empty()) h = sign_signature(tr.spatial.pre_activation, h);
    if (!tr.temporal.pre_activation.empty()) h = sign_signature(tr.temporal.pre_activation, h);
  }
  if (m.config.streams == StreamSet::Both && m.config.fusion == FusionKind::Max) {
    Tensor<double> diff = tr.spatial.rep;
    for (std::size_t i = 0; i < diff.size(); ++i) diff[i] -= tr.temporal.rep[i];
    h = sign_signature(diff, h);
  }
  return h;
}

void check_twostream(std::mt19937_64& rng, std::uint64_t seed, Prober& p) {
  struct Variant {
    StreamSet streams;
    GruMode gru;
    FusionKind fusion;
    std::size_t fusion_out;
  };
  const Variant variants[] = {
      {StreamSet::Both, GruMode::Bi, FusionKind::Conv, 5},  {StreamSet::Both, GruMode::Uni, FusionKind::Max, 0},
      {StreamSet::Both, GruMode::Bi, FusionKind::Cat, 0},   {StreamSet::Both, GruMode::None, FusionKind::Sum, 0},
      {StreamSet::Spatial, GruMode::None, FusionKind::Sum, 0}, {StreamSet::Temporal, GruMode::Bi, FusionKind::Sum, 0},
  };
  for (const auto& v : variants) {
    ModelConfig cfg;
    cfg.streams = v.streams;
    cfg.gru = v.gru;
    cfg.fusion = v.fusion;
    cfg.feature_dim = 6;
    cfg.hidden_dim = 4;
    cfg.fusion_out_dim = v.fusion_out;
    cfg.num_classes = 3;
    TwoStreamParams<double> model = init_twostream_params<double>(cfg, seed);
    FeatureSeq<double> s, t;
    for (int k = 0; k < 3; ++k) {
      s.push_back(random_tensor({6}, rng, 0.0, 1.0));
      t.push_back(random_tensor({6}, rng, 0.0, 1.0));
    }
    const auto* sp = v.streams != StreamSet::Temporal ? &s : nullptr;
    const auto* tp = v.streams != StreamSet::Spatial ? &t : nullptr;
    const int label = static_cast<int>(rng() % 3);
    TwoStreamTrace<double> trace;
    const auto logits = twostream_forward(model, sp, tp, &trace);
    const auto xent = softmax_xent(logits, label);
    TwoStreamParams<double> grads = model.zeros_like();
    twostream_backward(model, sp, tp, trace, xent.grad_logits, grads);
    const Eval eval = [&] {
      TwoStreamTrace<double> tr;
      const auto l = twostream_forward(model, sp, tp, &tr);
      return std::pair{softmax_xent(l, label).loss, twostream_region(model, tr)};
    };
    const std::uint64_t base = twostream_region(model, trace);
    auto pr = model.refs();
    auto gr = grads.refs();
    for (std::size_t i = 0; i < pr.size(); ++i) p.probe_all(*pr[i].tensor, *gr[i].tensor, eval, base);
  }
}

}  // namespace

double relative_error(double analytic, double numeric, double floor) {
  const double denom = std::max({std::abs(analytic), std::abs(numeric), floor});
  return std::abs(analytic - numeric) / denom;
}

std::vector<OpCheck> run_gradcheck(const GradcheckOptions& opt) {
  if (opt.seeds < 1 || !(opt.step > 0.0) || !(opt.floor > 0.0) || !(opt.network_fraction > 0.0)) {
    throw std::invalid_argument("gradcheck: seeds, step, floor and network_fraction must be positive");
  }
  using Body = std::function<void(std::mt19937_64&, std::uint64_t, Prober&)>;
  const std::vector<std::pair<std::string, Body>> ops = {
      {"conv3d", [](auto& rng, auto, auto& p) { check_conv3d(rng, p); }},
      {"maxpool3d", [](auto& rng, auto, auto& p) { check_maxpool(rng, p); }},
      {"linear", [](auto& rng, auto, auto& p) { check_linear(rng, p); }},
      {"relu", [](auto& rng, auto, auto& p) { check_relu(rng, p); }},
      {"softmax_xent", [](auto& rng, auto, auto& p) { check_softmax(rng, p); }},
      {"gru_cell", [](auto& rng, auto, auto& p) { check_gru_cell(rng, p); }},
      {"gru_sequence", [](auto& rng, auto, auto& p) { check_gru_sequence(rng, p); }},
      {"fuse_sum", [](auto& rng, auto, auto& p) { check_fusion(FusionKind::Sum, rng, p); }},
      {"fuse_max", [](auto& rng, auto, auto& p) { check_fusion(FusionKind::Max, rng, p); }},
      {"fuse_cat", [](auto& rng, auto, auto& p) { check_fusion(FusionKind::Cat, rng, p); }},
      {"fuse_conv", [](auto& rng, auto, auto& p) { check_fusion(FusionKind::Conv, rng, p); }},
      {std::string("c3d_") + preset_name(opt.preset),
       [&opt](auto&, std::uint64_t seed, auto& p) { check_network(opt, seed, p); }},
      {"twostream", [](auto& rng, std::uint64_t seed, auto& p) { check_twostream(rng, seed, p); }},
  };
  std::vector<OpCheck> results;
  for (std::size_t k = 0; k < ops.size(); ++k) {
    OpCheck check{ops[k].first, 0.0, 0, 0};
    Prober prober(opt, check);
    for (int d = 0; d < opt.seeds; ++d) {
      const std::uint64_t seed = draw_seed(opt.seed, d, k);
      std::mt19937_64 rng(seed);
      ops[k].second(rng, seed, prober);
    }
    results.push_back(check);
  }
  return results;
}

std::string render_gradcheck(const std::vector<OpCheck>& checks) {
  std::string out = "op              worst_rel_err   checked   skipped\n";
  char line[128];
  for (const auto& c : checks) {
    std::snprintf(line, sizeof line, "%-15s %13.3e %9zu %9zu\n", c.op.c_str(), c.worst_rel_err, c.checked, c.skipped);
    out += line;
  }
  return out;
}

}  // namespace lowres
