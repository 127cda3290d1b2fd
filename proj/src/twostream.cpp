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

#include "lowres/twostream.hpp"

#include <cmath>
#include <random>
#include <stdexcept>

#include "lowres/netops.hpp"

namespace lowres {

const char* streams_name(StreamSet s) {
  switch (s) {
    case StreamSet::Spatial: return "spatial";
    case StreamSet::Temporal: return "temporal";
    case StreamSet::Both: return "both";
  }
  return "?";
}

StreamSet parse_streams(const std::string& s) {
  if (s == "spatial") return StreamSet::Spatial;
  if (s == "temporal") return StreamSet::Temporal;
  if (s == "both" || s == "two-stream") return StreamSet::Both;
  throw std::invalid_argument("unknown stream set '" + s + "' (expected spatial, temporal or both)");
}

const char* gru_mode_name(GruMode g) {
  switch (g) {
    case GruMode::None: return "none";
    case GruMode::Uni: return "uni";
    case GruMode::Bi: return "bi";
  }
  return "?";
}

GruMode parse_gru_mode(const std::string& s) {
  if (s == "none") return GruMode::None;
  if (s == "uni") return GruMode::Uni;
  if (s == "bi") return GruMode::Bi;
  throw std::invalid_argument("unknown GRU mode '" + s + "' (expected none, uni or bi)");
}

std::size_t ModelConfig::head_input_dim() const {
  if (streams != StreamSet::Both) return stream_rep_dim();
  return fused_dim(fusion, stream_rep_dim(), fusion_out_dim == 0 ? stream_rep_dim() : fusion_out_dim);
}

void ModelConfig::validate() const {
  if (feature_dim == 0 || hidden_dim == 0) throw std::invalid_argument("model dims must be positive");
  if (num_classes < 2) throw std::invalid_argument("model needs at least 2 classes");
}

template <typename T>
std::vector<ParamRef<T>> StreamEncoder<T>::refs(const std::string& prefix) {
  std::vector<ParamRef<T>> out;
  if (mode == GruMode::None) {
    out.push_back({prefix + "nogru.fc.w", &fc_weight});
    out.push_back({prefix + "nogru.fc.b", &fc_bias});
    return out;
  }
  for (auto& r : forward.refs(prefix + "gru.fwd.")) out.push_back(r);
  if (mode == GruMode::Bi) {
    for (auto& r : backward.refs(prefix + "gru.bwd.")) out.push_back(r);
  }
  return out;
}

template <typename T>
std::vector<ParamRef<T>> TwoStreamParams<T>::refs() {
  std::vector<ParamRef<T>> out;
  if (config.streams != StreamSet::Temporal) {
    for (auto& r : spatial.refs("spatial.")) out.push_back(r);
  }
  if (config.streams != StreamSet::Spatial) {
    for (auto& r : temporal.refs("temporal.")) out.push_back(r);
  }
  if (config.streams == StreamSet::Both) {
    for (auto& r : fusion.refs("fusion.")) out.push_back(r);
  }
  for (auto& r : head.refs("head.")) out.push_back(r);
  return out;
}

template <typename T>
TwoStreamParams<T> TwoStreamParams<T>::zeros_like() const {
  TwoStreamParams<T> z = *this;
  for (auto& r : z.refs()) r.tensor->fill(T{0});
  return z;
}

namespace {

template <typename T>
StreamEncoder<T> init_encoder(const ModelConfig& c, std::mt19937_64& rng) {
  StreamEncoder<T> e;
  e.mode = c.gru;
  if (c.gru == GruMode::None) {
    const double wb = std::sqrt(6.0 / static_cast<double>(c.feature_dim));
    const double bb = 1.0 / std::sqrt(static_cast<double>(c.feature_dim));
    e.fc_weight = Tensor<T>({c.hidden_dim, c.feature_dim});
    e.fc_bias = Tensor<T>({c.hidden_dim});
    std::uniform_real_distribution<double> wd(-wb, wb), bd(-bb, bb);
    for (T& v : e.fc_weight.data()) v = static_cast<T>(wd(rng));
    for (T& v : e.fc_bias.data()) v = static_cast<T>(bd(rng));
  } else {
    e.forward = init_gru_params<T>(c.feature_dim, c.hidden_dim, rng);
    if (c.gru == GruMode::Bi) e.backward = init_gru_params<T>(c.feature_dim, c.hidden_dim, rng);
  }
  return e;
}

template <typename T>
Tensor<T> encode(const StreamEncoder<T>& e, const FeatureSeq<T>& xs, EncoderTrace<T>& tr) {
  if (xs.empty()) throw std::invalid_argument("stream encoder: empty feature sequence");
  if (e.mode == GruMode::None) {
    Tensor<T> mean(xs.front().dims());
    for (const auto& x : xs) mean += x;
    for (T& v : mean.data()) v /= static_cast<T>(xs.size());
    tr.pre_activation = linear_forward(mean, e.fc_weight, e.fc_bias);
    tr.mean = std::move(mean);
    tr.rep = relu_forward(tr.pre_activation);
    return tr.rep;
  }
  std::span<const Tensor<T>> span(xs);
  tr.forward = gru_sequence(span, e.forward, Direction::Forward);
  if (e.mode == GruMode::Uni) {
    tr.rep = tr.forward.final_state();
    return tr.rep;
  }
  tr.backward = gru_sequence(span, e.backward, Direction::Backward);
  const auto& f = tr.forward.final_state();
  const auto& b = tr.backward.final_state();
  std::vector<T> cat(f.data().begin(), f.data().end());
  cat.insert(cat.end(), b.data().begin(), b.data().end());
  const std::size_t n = cat.size();
  tr.rep = Tensor<T>({n}, std::move(cat));
  return tr.rep;
}

template <typename T>
void encode_backward(const StreamEncoder<T>& e, const FeatureSeq<T>& xs, const EncoderTrace<T>& tr,
                     const Tensor<T>& grad_rep, StreamEncoder<T>& grads) {
  if (e.mode == GruMode::None) {
    const Tensor<T> g = relu_backward(tr.pre_activation, grad_rep);
    auto lg = linear_backward(tr.mean, e.fc_weight, g);
    grads.fc_weight += lg.weight;
    grads.fc_bias += lg.bias;
    return;
  }
  std::span<const Tensor<T>> span(xs);
  const std::size_t h = e.forward.hidden_dim();
  const std::size_t steps = xs.size();
  auto final_grads = [&](std::size_t offset) {
    std::vector<Tensor<T>> gs(steps);
    std::vector<T> slice(grad_rep.data().begin() + static_cast<std::ptrdiff_t>(offset),
                         grad_rep.data().begin() + static_cast<std::ptrdiff_t>(offset + h));
    gs.back() = Tensor<T>({h}, std::move(slice));
    return gs;
  };
  const auto gf = final_grads(0);
  gru_sequence_backward(span, tr.forward, e.forward, std::span<const Tensor<T>>(gf), grads.forward);
  if (e.mode == GruMode::Bi) {
    const auto gb = final_grads(h);
    gru_sequence_backward(span, tr.backward, e.backward, std::span<const Tensor<T>>(gb), grads.backward);
  }
}

}  // namespace

template <typename T>
TwoStreamParams<T> init_twostream_params(const ModelConfig& config, std::uint64_t seed) {
  config.validate();
  std::mt19937_64 rng(seed);
  TwoStreamParams<T> p;
  p.config = config;
  p.spatial = init_encoder<T>(config, rng);
  p.temporal = init_encoder<T>(config, rng);
  const std::size_t rep = config.stream_rep_dim();
  p.fusion = init_fusion_params<T>(config.fusion, rep, config.fusion_out_dim == 0 ? rep : config.fusion_out_dim, rng);
  const std::size_t in = config.head_input_dim();
  p.head.weight = Tensor<T>({config.num_classes, in});
  p.head.bias = Tensor<T>({config.num_classes});
  const double wb = std::sqrt(1.0 / static_cast<double>(in));
  std::uniform_real_distribution<double> wd(-wb, wb);
  for (T& v : p.head.weight.data()) v = static_cast<T>(wd(rng));
  return p;
}

template <typename T>
Tensor<T> twostream_forward(const TwoStreamParams<T>& params, const FeatureSeq<T>* spatial,
                            const FeatureSeq<T>* temporal, TwoStreamTrace<T>* trace) {
  TwoStreamTrace<T> local;
  TwoStreamTrace<T>& tr = trace ? *trace : local;
  const auto streams = params.config.streams;
  if (streams != StreamSet::Temporal && !spatial) throw std::invalid_argument("model needs spatial features");
  if (streams != StreamSet::Spatial && !temporal) throw std::invalid_argument("model needs temporal features");
  if (streams == StreamSet::Spatial) {
    tr.fused = encode(params.spatial, *spatial, tr.spatial);
  } else if (streams == StreamSet::Temporal) {
    tr.fused = encode(params.temporal, *temporal, tr.temporal);
  } else {
    const Tensor<T> a = encode(params.spatial, *spatial, tr.spatial);
    const Tensor<T> b = encode(params.temporal, *temporal, tr.temporal);
    tr.fused = fuse(a, b, params.fusion);
  }
  tr.logits = classify(tr.fused, params.head);
  return tr.logits;
}

template <typename T>
void twostream_backward(const TwoStreamParams<T>& params, const FeatureSeq<T>* spatial, const FeatureSeq<T>* temporal,
                        const TwoStreamTrace<T>& tr, const Tensor<T>& grad_logits, TwoStreamParams<T>& grads) {
  auto hg = linear_backward(tr.fused, params.head.weight, grad_logits);
  grads.head.weight += hg.weight;
  grads.head.bias += hg.bias;
  const auto streams = params.config.streams;
  if (streams == StreamSet::Spatial) {
    encode_backward(params.spatial, *spatial, tr.spatial, hg.input, grads.spatial);
  } else if (streams == StreamSet::Temporal) {
    encode_backward(params.temporal, *temporal, tr.temporal, hg.input, grads.temporal);
  } else {
    auto fg = fuse_backward(tr.spatial.rep, tr.temporal.rep, params.fusion, hg.input, grads.fusion);
    encode_backward(params.spatial, *spatial, tr.spatial, fg.a, grads.spatial);
    encode_backward(params.temporal, *temporal, tr.temporal, fg.b, grads.temporal);
  }
}

TensorBundle twostream_to_bundle(const TwoStreamParams<float>& params) {
  const ModelConfig& c = params.config;
  TensorBundle b;
  b.push_back({"model.meta", Tensor<float>({7}, {static_cast<float>(c.streams), static_cast<float>(c.gru),
                                                 static_cast<float>(c.fusion), static_cast<float>(c.feature_dim),
                                                 static_cast<float>(c.hidden_dim),
                                                 static_cast<float>(c.fusion_out_dim),
                                                 static_cast<float>(c.num_classes)})});
  if (c.streams == StreamSet::Both) {
    b.push_back({"fusion.kind", Tensor<float>({1}, {static_cast<float>(c.fusion)})});
  }
  TwoStreamParams<float> copy = params;
  for (const auto& r : copy.refs()) b.push_back({r.name, *r.tensor});
  return b;
}

TwoStreamParams<float> twostream_from_bundle(const TensorBundle& bundle) {
  const Tensor<float>& meta = require_tensor(bundle, "model.meta");
  if (meta.size() != 7) throw std::invalid_argument("model.meta must hold 7 values");
  ModelConfig c;
  c.streams = static_cast<StreamSet>(static_cast<int>(meta[0]));
  c.gru = static_cast<GruMode>(static_cast<int>(meta[1]));
  c.fusion = static_cast<FusionKind>(static_cast<int>(meta[2]));
  c.feature_dim = static_cast<std::size_t>(meta[3]);
  c.hidden_dim = static_cast<std::size_t>(meta[4]);
  c.fusion_out_dim = static_cast<std::size_t>(meta[5]);
  c.num_classes = static_cast<std::size_t>(meta[6]);
  TwoStreamParams<float> p = init_twostream_params<float>(c, 0);
  for (auto& r : p.refs()) {
    const Tensor<float>& t = require_tensor(bundle, r.name);
    require_shape(t, r.tensor->dims(), r.name);
    *r.tensor = t;
  }
  return p;
}

#define LOWRES_INSTANTIATE_TWOSTREAM(T)                                                                        \
  template struct StreamEncoder<T>;                                                                            \
  template struct TwoStreamParams<T>;                                                                          \
  template TwoStreamParams<T> init_twostream_params<T>(const ModelConfig&, std::uint64_t);                     \
  template Tensor<T> twostream_forward(const TwoStreamParams<T>&, const FeatureSeq<T>*, const FeatureSeq<T>*,  \
                                       TwoStreamTrace<T>*);                                                    \
  template void twostream_backward(const TwoStreamParams<T>&, const FeatureSeq<T>*, const FeatureSeq<T>*,      \
                                   const TwoStreamTrace<T>&, const Tensor<T>&, TwoStreamParams<T>&);

LOWRES_INSTANTIATE_TWOSTREAM(float)
LOWRES_INSTANTIATE_TWOSTREAM(double)

}  // namespace lowres
