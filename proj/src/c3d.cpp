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

#include "lowres/c3d.hpp"

#include <cmath>
#include <random>
#include <stdexcept>

namespace lowres {

const char* preset_name(Preset p) { return p == Preset::Tiny ? "tiny" : "full"; }

Preset parse_preset(const std::string& s) {
  if (s == "tiny") return Preset::Tiny;
  if (s == "full") return Preset::Full;
  throw std::invalid_argument("unknown preset '" + s + "' (expected tiny or full)");
}

std::size_t C3dSpec::count(LayerKind kind) const {
  std::size_t n = 0;
  for (const auto& l : layers) n += l.kind == kind;
  return n;
}

namespace {

LayerSpec conv(std::string name, std::size_t channels, Triple kernel = {3, 3, 3}, Triple stride = {1, 1, 1},
               Triple pad = {1, 1, 1}) {
  LayerSpec l;
  l.kind = LayerKind::Conv;
  l.name = std::move(name);
  l.channels = channels;
  l.kernel = kernel;
  l.conv = {stride, pad};
  l.relu = true;
  return l;
}

LayerSpec pool(std::string name, Triple window, Triple stride, Triple pad = {0, 0, 0}) {
  LayerSpec l;
  l.kind = LayerKind::Pool;
  l.name = std::move(name);
  l.pool = {window, stride, pad};
  return l;
}

LayerSpec fc(std::string name, std::size_t features, bool relu) {
  LayerSpec l;
  l.kind = LayerKind::Fc;
  l.name = std::move(name);
  l.channels = features;
  l.relu = relu;
  return l;
}

}  // namespace

C3dSpec make_c3d_spec(Preset preset, std::size_t num_classes, std::size_t unit_length) {
  if (num_classes < 2) throw std::invalid_argument("C3D needs at least 2 classes");
  C3dSpec s;
  s.preset = preset;
  s.num_classes = num_classes;
  s.input = {3, unit_length, static_cast<std::size_t>(kNetworkSize), static_cast<std::size_t>(kNetworkSize)};
  if (preset == Preset::Full) {
    s.layers = {conv("conv1a", 64),
                pool("pool1", {1, 2, 2}, {1, 2, 2}),
                conv("conv2a", 128),
                pool("pool2", {2, 2, 2}, {2, 2, 2}),
                conv("conv3a", 256),
                conv("conv3b", 256),
                pool("pool3", {2, 2, 2}, {2, 2, 2}),
                conv("conv4a", 512),
                conv("conv4b", 512),
                pool("pool4", {2, 2, 2}, {2, 2, 2}),
                conv("conv5a", 512),
                conv("conv5b", 512),
                pool("pool5", {2, 2, 2}, {2, 2, 2}, {0, 1, 1}),
                fc("fc6", 4096, true),
                fc("fc_out", num_classes, false)};
  } else {
    s.layers = {conv("conv1", 8, {3, 4, 4}, {1, 4, 4}, {1, 0, 0}),
                pool("pool1", {1, 2, 2}, {1, 2, 2}),
                conv("conv2", 16),
                pool("pool2", {2, 2, 2}, {2, 2, 2}),
                conv("conv3", 32),
                pool("pool3", {2, 2, 2}, {2, 2, 2}),
                fc("fc6", 128, true),
                fc("fc_out", num_classes, false)};
  }
  for (std::size_t i = 0; i < s.layers.size(); ++i) {
    if (s.layers[i].kind == LayerKind::Fc) {
      s.feature_layer = i;
      break;
    }
  }
  return s;
}

std::vector<Dims> infer_layer_shapes(const C3dSpec& spec) {
  std::vector<Dims> shapes;
  Dims cur = spec.input;
  for (const auto& l : spec.layers) {
    switch (l.kind) {
      case LayerKind::Conv: {
        if (cur.size() != 4) throw std::invalid_argument("conv layer '" + l.name + "' after flattening");
        cur = conv3d_output_dims(cur, {l.channels, cur[0], static_cast<std::size_t>(l.kernel[0]),
                                       static_cast<std::size_t>(l.kernel[1]), static_cast<std::size_t>(l.kernel[2])},
                                 l.conv);
        break;
      }
      case LayerKind::Pool:
        if (cur.size() != 4) throw std::invalid_argument("pool layer '" + l.name + "' after flattening");
        cur = pool3d_output_dims(cur, l.pool);
        break;
      case LayerKind::Fc:
        cur = {l.channels};
        break;
    }
    shapes.push_back(cur);
  }
  return shapes;
}

template <typename T>
std::vector<ParamRef<T>> C3dParams<T>::refs() {
  std::vector<ParamRef<T>> out;
  for (std::size_t i = 0; i < spec.layers.size(); ++i) {
    if (spec.layers[i].kind == LayerKind::Pool) continue;
    out.push_back({"c3d." + spec.layers[i].name + ".w", &weights[i]});
    out.push_back({"c3d." + spec.layers[i].name + ".b", &biases[i]});
  }
  return out;
}

template <typename T>
std::size_t C3dParams<T>::parameter_count() const {
  std::size_t n = 0;
  for (std::size_t i = 0; i < weights.size(); ++i) n += weights[i].size() + biases[i].size();
  return n;
}

template <typename T>
C3dParams<T> C3dParams<T>::zeros_like() const {
  C3dParams<T> z;
  z.spec = spec;
  for (const auto& w : weights) z.weights.emplace_back(w.dims());
  for (const auto& b : biases) z.biases.emplace_back(b.dims());
  return z;
}

template <typename T>
C3dParams<T> init_c3d_params(const C3dSpec& spec, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  C3dParams<T> p;
  p.spec = spec;
  Dims cur = spec.input;
  const auto shapes = infer_layer_shapes(spec);
  for (std::size_t i = 0; i < spec.layers.size(); ++i) {
    const auto& l = spec.layers[i];
    Dims wdims;
    if (l.kind == LayerKind::Conv) {
      wdims = {l.channels, cur[0], static_cast<std::size_t>(l.kernel[0]), static_cast<std::size_t>(l.kernel[1]),
               static_cast<std::size_t>(l.kernel[2])};
    } else if (l.kind == LayerKind::Fc) {
      wdims = {l.channels, element_count(cur)};
    }
    if (wdims.empty()) {
      p.weights.emplace_back();
      p.biases.emplace_back();
    } else {
      const std::size_t fan_in = element_count(wdims) / wdims[0];
      const double wb = std::sqrt(6.0 / static_cast<double>(fan_in));
      const double bb = 1.0 / std::sqrt(static_cast<double>(fan_in));
      Tensor<T> w(wdims);
      Tensor<T> b({l.channels});
      std::uniform_real_distribution<double> wd(-wb, wb);
      std::uniform_real_distribution<double> bd(-bb, bb);
      for (T& v : w.data()) v = static_cast<T>(wd(rng));
      for (T& v : b.data()) v = static_cast<T>(bd(rng));
      p.weights.push_back(std::move(w));
      p.biases.push_back(std::move(b));
    }
    cur = shapes[i];
  }
  return p;
}

template <typename T>
std::uint64_t C3dTrace<T>::pattern_signature() const {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (const auto& pre : pre_activation) {
    for (T v : pre.data()) {
      const unsigned char bit = v > T{0} ? 1 : 0;
      h = fnv1a(&bit, 1, h);
    }
  }
  for (const auto& am : argmax) {
    if (!am.empty()) h = fnv1a(am.data(), am.size() * sizeof(std::size_t), h);
  }
  return h;
}

template <typename T>
C3dOutput<T> c3d_forward(const Tensor<T>& unit, const C3dParams<T>& params, C3dTrace<T>* trace) {
  const C3dSpec& spec = params.spec;
  if (unit.dims() != spec.input) {
    throw std::invalid_argument("c3d_forward: unit shape " + dims_to_string(unit.dims()) + " does not match spec input " +
                                dims_to_string(spec.input));
  }
  if (params.weights.size() != spec.layers.size() || params.biases.size() != spec.layers.size()) {
    throw std::invalid_argument("c3d_forward: parameter list does not match the layer spec");
  }
  if (trace) *trace = C3dTrace<T>{};
  const std::size_t n = spec.layers.size();
  if (trace) {
    trace->inputs.resize(n);
    trace->pre_activation.resize(n);
    trace->argmax.resize(n);
  }
  C3dOutput<T> out;
  Tensor<T> cur = unit;
  for (std::size_t i = 0; i < n; ++i) {
    const auto& l = spec.layers[i];
    Tensor<T> next;
    if (l.kind == LayerKind::Conv) {
      next = conv3d_forward(cur, params.weights[i], params.biases[i], l.conv);
    } else if (l.kind == LayerKind::Pool) {
      auto r = maxpool3d_forward(cur, l.pool);
      if (trace) trace->argmax[i] = std::move(r.argmax);
      next = std::move(r.output);
    } else {
      next = linear_forward(cur, params.weights[i], params.biases[i]);
    }
    if (trace) trace->inputs[i] = std::move(cur);
    if (l.relu) {
      Tensor<T> act = relu_forward(next);
      if (trace) trace->pre_activation[i] = std::move(next);
      next = std::move(act);
    }
    if (trace) trace->outputs.push_back(next.dims());
    if (i == spec.feature_layer) out.feature = next;
    cur = std::move(next);
  }
  out.logits = std::move(cur);
  return out;
}

template <typename T>
void c3d_backward(const C3dParams<T>& params, const C3dTrace<T>& trace, const Tensor<T>& grad_logits,
                  C3dParams<T>& grads) {
  const C3dSpec& spec = params.spec;
  if (trace.inputs.size() != spec.layers.size()) throw std::invalid_argument("c3d_backward: trace does not match spec");
  require_shape(grad_logits, {spec.num_classes}, "c3d_backward grad_logits");
  Tensor<T> g = grad_logits;
  for (std::size_t i = spec.layers.size(); i-- > 0;) {
    const auto& l = spec.layers[i];
    if (l.relu) g = relu_backward(trace.pre_activation[i], g);
    const Tensor<T>& in = trace.inputs[i];
    if (l.kind == LayerKind::Conv) {
      auto cg = conv3d_backward(in, params.weights[i], g, l.conv, i > 0);
      grads.weights[i] += cg.weight;
      grads.biases[i] += cg.bias;
      g = std::move(cg.input);
    } else if (l.kind == LayerKind::Pool) {
      g = maxpool3d_backward(in.dims(), trace.argmax[i], g);
    } else {
      auto lg = linear_backward(in, params.weights[i], g);
      grads.weights[i] += lg.weight;
      grads.biases[i] += lg.bias;
      g = std::move(lg.input);
    }
    if (i == 0) break;
  }
}

TensorBundle c3d_to_bundle(const C3dParams<float>& params) {
  TensorBundle b;
  const auto& s = params.spec;
  b.push_back({"c3d.meta", Tensor<float>({3}, {static_cast<float>(s.preset == Preset::Tiny ? 0 : 1),
                                               static_cast<float>(s.num_classes), static_cast<float>(s.input[1])})});
  for (std::size_t i = 0; i < s.layers.size(); ++i) {
    if (s.layers[i].kind == LayerKind::Pool) continue;
    b.push_back({"c3d." + s.layers[i].name + ".w", params.weights[i]});
    b.push_back({"c3d." + s.layers[i].name + ".b", params.biases[i]});
  }
  return b;
}

C3dParams<float> c3d_from_bundle(const TensorBundle& bundle) {
  const Tensor<float>& meta = require_tensor(bundle, "c3d.meta");
  if (meta.size() != 3) throw std::invalid_argument("c3d.meta must hold 3 values");
  const Preset preset = meta[0] == 0.0f ? Preset::Tiny : Preset::Full;
  C3dParams<float> p = init_c3d_params<float>(
      make_c3d_spec(preset, static_cast<std::size_t>(meta[1]), static_cast<std::size_t>(meta[2])), 0);
  for (auto& ref : p.refs()) {
    const Tensor<float>& t = require_tensor(bundle, ref.name);
    require_shape(t, ref.tensor->dims(), ref.name);
    *ref.tensor = t;
  }
  return p;
}

#define LOWRES_INSTANTIATE_C3D(T)                                                                    \
  template struct C3dParams<T>;                                                                      \
  template struct C3dTrace<T>;                                                                       \
  template C3dParams<T> init_c3d_params<T>(const C3dSpec&, std::uint64_t);                           \
  template C3dOutput<T> c3d_forward(const Tensor<T>&, const C3dParams<T>&, C3dTrace<T>*);            \
  template void c3d_backward(const C3dParams<T>&, const C3dTrace<T>&, const Tensor<T>&, C3dParams<T>&);

LOWRES_INSTANTIATE_C3D(float)
LOWRES_INSTANTIATE_C3D(double)

}  // namespace lowres
