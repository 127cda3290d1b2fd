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
#include "lowres/netops.hpp"
#include "lowres/vidprep.hpp"

namespace lowres {

enum class Preset { Tiny, Full };

const char* preset_name(Preset p);
Preset parse_preset(const std::string& s);

enum class LayerKind { Conv, Pool, Fc };

struct LayerSpec {
  LayerKind kind = LayerKind::Conv;
  std::string name;
  std::size_t channels = 0;  // conv output channels or fc output features
  Triple kernel{3, 3, 3};
  Conv3dGeometry conv;
  Pool3dGeometry pool;
  bool relu = false;
};

/// Layer stack of a C3D-style unit classifier. The layer at `feature_layer` is fc6: its
/// post-activation output is the per-unit feature.
struct C3dSpec {
  Preset preset = Preset::Tiny;
  Dims input;  // [3, unit_length, 112, 112]
  std::vector<LayerSpec> layers;
  std::size_t num_classes = 0;
  std::size_t feature_layer = 0;

  std::size_t feature_dim() const { return layers.at(feature_layer).channels; }
  std::size_t count(LayerKind kind) const;
};

/// "full": 8 conv / 5 pool / 2 fc with a 4096-wide fc6.
/// "tiny": 3 conv / 3 pool / 2 fc with a 128-wide fc6, sized for single-core training.
C3dSpec make_c3d_spec(Preset preset, std::size_t num_classes, std::size_t unit_length = 16);

/// Declared output dims of every layer, derived from the spec alone.
std::vector<Dims> infer_layer_shapes(const C3dSpec& spec);

template <typename T>
struct C3dParams {
  C3dSpec spec;
  std::vector<Tensor<T>> weights;  // empty tensor for pooling layers
  std::vector<Tensor<T>> biases;

  std::vector<ParamRef<T>> refs();
  std::size_t parameter_count() const;
  C3dParams zeros_like() const;
};

/// Kaiming-uniform weights (fan-in), biases uniform in +-1/sqrt(fan_in).
template <typename T>
C3dParams<T> init_c3d_params(const C3dSpec& spec, std::uint64_t seed);

template <typename T>
struct C3dTrace {
  std::vector<Tensor<T>> inputs;       // input to each layer
  std::vector<Tensor<T>> pre_activation;  // layer output before ReLU (relu layers only)
  std::vector<std::vector<std::size_t>> argmax;  // pooling layers only
  std::vector<Dims> outputs;

  /// Hash of every ReLU mask and pooling argmax: equal signatures mean the same linear region.
  std::uint64_t pattern_signature() const;
};

template <typename T>
struct C3dOutput {
  Tensor<T> feature;  // fc6 after ReLU
  Tensor<T> logits;
};

template <typename T>
C3dOutput<T> c3d_forward(const Tensor<T>& unit, const C3dParams<T>& params, C3dTrace<T>* trace = nullptr);

/// Accumulates d(loss)/d(params) into `grads` given d(loss)/d(logits).
template <typename T>
void c3d_backward(const C3dParams<T>& params, const C3dTrace<T>& trace, const Tensor<T>& grad_logits,
                  C3dParams<T>& grads);

TensorBundle c3d_to_bundle(const C3dParams<float>& params);
C3dParams<float> c3d_from_bundle(const TensorBundle& bundle);

template <typename U, typename T>
C3dParams<U> cast_params(const C3dParams<T>& p) {
  C3dParams<U> out;
  out.spec = p.spec;
  for (const auto& w : p.weights) out.weights.push_back(w.template cast<U>());
  for (const auto& b : p.biases) out.biases.push_back(b.template cast<U>());
  return out;
}

}  // namespace lowres
