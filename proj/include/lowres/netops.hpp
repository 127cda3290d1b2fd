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

#include <array>
#include <cstddef>
#include <vector>

#include "lowres/tensor.hpp"

namespace lowres {

using Triple = std::array<int, 3>;  // (time, height, width)

struct Conv3dGeometry {
  Triple stride{1, 1, 1};
  Triple pad{0, 0, 0};
};

struct Pool3dGeometry {
  Triple window{2, 2, 2};
  Triple stride{2, 2, 2};
  Triple pad{0, 0, 0};
};

/// Output extents of a sliding window; throws if the window does not fit.
Dims conv3d_output_dims(const Dims& input, const Dims& weight, const Conv3dGeometry& geom);
Dims pool3d_output_dims(const Dims& input, const Pool3dGeometry& geom);

template <typename T>
struct Conv3dGrads {
  Tensor<T> input;  // empty when not requested
  Tensor<T> weight;
  Tensor<T> bias;
};

/// Cross-correlation of input [C,T,H,W] with weight [O,C,kT,kH,kW] plus bias [O], zero padded.
template <typename T>
Tensor<T> conv3d_forward(const Tensor<T>& input, const Tensor<T>& weight, const Tensor<T>& bias,
                         const Conv3dGeometry& geom);

template <typename T>
Conv3dGrads<T> conv3d_backward(const Tensor<T>& input, const Tensor<T>& weight, const Tensor<T>& grad_out,
                               const Conv3dGeometry& geom, bool need_input_grad = true);

template <typename T>
struct PoolResult {
  Tensor<T> output;
  std::vector<std::size_t> argmax;  // linear input index per output element
};

/// Channel-wise max over windows; padding never wins. Ties go to the lowest linear index.
template <typename T>
PoolResult<T> maxpool3d_forward(const Tensor<T>& input, const Pool3dGeometry& geom);

template <typename T>
Tensor<T> maxpool3d_backward(const Dims& input_dims, const std::vector<std::size_t>& argmax,
                             const Tensor<T>& grad_out);

template <typename T>
struct LinearGrads {
  Tensor<T> input;
  Tensor<T> weight;
  Tensor<T> bias;
};

/// y = W x + b with W [D_out, D_in].
template <typename T>
Tensor<T> linear_forward(const Tensor<T>& input, const Tensor<T>& weight, const Tensor<T>& bias);

template <typename T>
LinearGrads<T> linear_backward(const Tensor<T>& input, const Tensor<T>& weight, const Tensor<T>& grad_out);

template <typename T>
Tensor<T> relu_forward(const Tensor<T>& input);

/// Subgradient at 0 is 0.
template <typename T>
Tensor<T> relu_backward(const Tensor<T>& input, const Tensor<T>& grad_out);

template <typename T>
struct SoftmaxXent {
  T loss;
  Tensor<T> grad_logits;
  Tensor<T> probabilities;
};

template <typename T>
SoftmaxXent<T> softmax_xent(const Tensor<T>& logits, int label);

/// Index of the largest entry; ties resolve to the lowest index.
template <typename T>
int argmax(const Tensor<T>& values);

}  // namespace lowres
