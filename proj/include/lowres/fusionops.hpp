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

#include <random>
#include <string>
#include <vector>

#include "lowres/tensor.hpp"

namespace lowres {

enum class FusionKind { Sum, Max, Cat, Conv };

const char* fusion_name(FusionKind kind);
FusionKind parse_fusion(const std::string& s);

/// Only Conv carries parameters: filters [2D, D_out] and bias [D_out].
template <typename T>
struct FusionParams {
  FusionKind kind = FusionKind::Sum;
  Tensor<T> filters;
  Tensor<T> bias;

  std::vector<ParamRef<T>> refs(const std::string& prefix);
};

template <typename T>
FusionParams<T> init_fusion_params(FusionKind kind, std::size_t input_dim, std::size_t output_dim, std::mt19937_64& rng);

/// Length of the fused vector for two inputs of length `input_dim`.
std::size_t fused_dim(FusionKind kind, std::size_t input_dim, std::size_t conv_output_dim);

template <typename T>
struct FusionGrads {
  Tensor<T> a;
  Tensor<T> b;
};

template <typename T>
Tensor<T> fuse_sum(const Tensor<T>& a, const Tensor<T>& b);
template <typename T>
FusionGrads<T> fuse_sum_backward(const Tensor<T>& grad_out);

template <typename T>
Tensor<T> fuse_max(const Tensor<T>& a, const Tensor<T>& b);
/// The gradient follows the larger operand; ties go to `a`.
template <typename T>
FusionGrads<T> fuse_max_backward(const Tensor<T>& a, const Tensor<T>& b, const Tensor<T>& grad_out);

/// Interleaved stacking: out = (b_0, a_0, b_1, a_1, ...).
template <typename T>
Tensor<T> fuse_cat(const Tensor<T>& a, const Tensor<T>& b);
template <typename T>
FusionGrads<T> fuse_cat_backward(const Tensor<T>& grad_out);
/// Inverse of fuse_cat.
template <typename T>
FusionGrads<T> deinterleave(const Tensor<T>& stacked);

/// out_o = sum_i filters[i, o] * fuse_cat(a, b)_i + bias_o
template <typename T>
Tensor<T> fuse_conv(const Tensor<T>& a, const Tensor<T>& b, const FusionParams<T>& params);
/// Accumulates filter/bias gradients into `grads`.
template <typename T>
FusionGrads<T> fuse_conv_backward(const Tensor<T>& a, const Tensor<T>& b, const FusionParams<T>& params,
                                  const Tensor<T>& grad_out, FusionParams<T>& grads);

template <typename T>
Tensor<T> fuse(const Tensor<T>& a, const Tensor<T>& b, const FusionParams<T>& params);
template <typename T>
FusionGrads<T> fuse_backward(const Tensor<T>& a, const Tensor<T>& b, const FusionParams<T>& params,
                             const Tensor<T>& grad_out, FusionParams<T>& grads);

}  // namespace lowres
