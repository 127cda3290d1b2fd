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

#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "lowres/checkpoint.hpp"
#include "lowres/fusionops.hpp"
#include "lowres/seqenc.hpp"

namespace lowres {

enum class StreamSet { Spatial, Temporal, Both };
enum class GruMode { None, Uni, Bi };

const char* streams_name(StreamSet s);
StreamSet parse_streams(const std::string& s);
const char* gru_mode_name(GruMode g);
GruMode parse_gru_mode(const std::string& s);

struct ModelConfig {
  StreamSet streams = StreamSet::Both;
  GruMode gru = GruMode::Bi;
  FusionKind fusion = FusionKind::Sum;
  std::size_t feature_dim = 128;
  std::size_t hidden_dim = 64;
  std::size_t fusion_out_dim = 0;  // conv fusion output; 0 means "same as input"
  std::size_t num_classes = 0;

  std::size_t stream_rep_dim() const { return gru == GruMode::Bi ? 2 * hidden_dim : hidden_dim; }
  std::size_t head_input_dim() const;
  void validate() const;
};

/// Unit features of one clip, in temporal order.
template <typename T>
using FeatureSeq = std::vector<Tensor<T>>;

/// Per-stream sequence encoder: a (bi-)GRU over unit features, or, in GruMode::None, the mean
/// unit feature through one fully-connected ReLU layer.
template <typename T>
struct StreamEncoder {
  GruMode mode = GruMode::Uni;
  GruParams<T> forward;
  GruParams<T> backward;
  Tensor<T> fc_weight;
  Tensor<T> fc_bias;

  std::vector<ParamRef<T>> refs(const std::string& prefix);
};

template <typename T>
struct TwoStreamParams {
  ModelConfig config;
  StreamEncoder<T> spatial;
  StreamEncoder<T> temporal;
  FusionParams<T> fusion;
  HeadParams<T> head;

  std::vector<ParamRef<T>> refs();
  TwoStreamParams zeros_like() const;
};

template <typename T>
TwoStreamParams<T> init_twostream_params(const ModelConfig& config, std::uint64_t seed);

template <typename T>
struct EncoderTrace {
  GruSequence<T> forward;
  GruSequence<T> backward;
  Tensor<T> mean;
  Tensor<T> pre_activation;
  Tensor<T> rep;
};

template <typename T>
struct TwoStreamTrace {
  EncoderTrace<T> spatial;
  EncoderTrace<T> temporal;
  Tensor<T> fused;
  Tensor<T> logits;
};

/// Null sequences are allowed only for streams the config does not use.
template <typename T>
Tensor<T> twostream_forward(const TwoStreamParams<T>& params, const FeatureSeq<T>* spatial,
                            const FeatureSeq<T>* temporal, TwoStreamTrace<T>* trace = nullptr);

template <typename T>
void twostream_backward(const TwoStreamParams<T>& params, const FeatureSeq<T>* spatial, const FeatureSeq<T>* temporal,
                        const TwoStreamTrace<T>& trace, const Tensor<T>& grad_logits, TwoStreamParams<T>& grads);

TensorBundle twostream_to_bundle(const TwoStreamParams<float>& params);
TwoStreamParams<float> twostream_from_bundle(const TensorBundle& bundle);

template <typename U, typename T>
TwoStreamParams<U> cast_params(TwoStreamParams<T> p) {
  TwoStreamParams<U> out = init_twostream_params<U>(p.config, 0);
  auto dst = out.refs();
  auto src = p.refs();
  for (std::size_t i = 0; i < dst.size(); ++i) *dst[i].tensor = src[i].tensor->template cast<U>();
  return out;
}

}  // namespace lowres
