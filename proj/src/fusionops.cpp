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

#include "lowres/fusionops.hpp"

#include <cmath>
#include <stdexcept>

namespace lowres {

const char* fusion_name(FusionKind kind) {
  switch (kind) {
    case FusionKind::Sum: return "sum";
    case FusionKind::Max: return "max";
    case FusionKind::Cat: return "cat";
    case FusionKind::Conv: return "conv";
  }
  return "?";
}

FusionKind parse_fusion(const std::string& s) {
  if (s == "sum") return FusionKind::Sum;
  if (s == "max") return FusionKind::Max;
  if (s == "cat") return FusionKind::Cat;
  if (s == "conv") return FusionKind::Conv;
  throw std::invalid_argument("unknown fusion kind '" + s + "' (expected sum, max, cat or conv)");
}

namespace {

template <typename T>
std::size_t require_pair(const Tensor<T>& a, const Tensor<T>& b, const char* what) {
  if (a.size() != b.size()) {
    throw std::invalid_argument(std::string(what) + ": operand lengths differ (" + std::to_string(a.size()) + " vs " +
                                std::to_string(b.size()) + ")");
  }
  return a.size();
}

}  // namespace

template <typename T>
std::vector<ParamRef<T>> FusionParams<T>::refs(const std::string& prefix) {
  if (kind != FusionKind::Conv) return {};
  return {{prefix + "f", &filters}, {prefix + "b", &bias}};
}

template <typename T>
FusionParams<T> init_fusion_params(FusionKind kind, std::size_t input_dim, std::size_t output_dim,
                                   std::mt19937_64& rng) {
  FusionParams<T> p;
  p.kind = kind;
  if (kind == FusionKind::Conv) {
    if (output_dim == 0) throw std::invalid_argument("conv fusion needs a positive output dim");
    p.filters = Tensor<T>({2 * input_dim, output_dim});
    p.bias = Tensor<T>({output_dim});
    const double bound = std::sqrt(6.0 / static_cast<double>(2 * input_dim));
    std::uniform_real_distribution<double> dist(-bound, bound);
    for (T& v : p.filters.data()) v = static_cast<T>(dist(rng));
  }
  return p;
}

std::size_t fused_dim(FusionKind kind, std::size_t input_dim, std::size_t conv_output_dim) {
  switch (kind) {
    case FusionKind::Sum:
    case FusionKind::Max: return input_dim;
    case FusionKind::Cat: return 2 * input_dim;
    case FusionKind::Conv: return conv_output_dim;
  }
  return 0;
}

template <typename T>
Tensor<T> fuse_sum(const Tensor<T>& a, const Tensor<T>& b) {
  const std::size_t d = require_pair(a, b, "fuse_sum");
  Tensor<T> y({d});
  for (std::size_t i = 0; i < d; ++i) y[i] = a[i] + b[i];
  return y;
}

template <typename T>
FusionGrads<T> fuse_sum_backward(const Tensor<T>& grad_out) {
  return {grad_out, grad_out};
}

template <typename T>
Tensor<T> fuse_max(const Tensor<T>& a, const Tensor<T>& b) {
  const std::size_t d = require_pair(a, b, "fuse_max");
  Tensor<T> y({d});
  for (std::size_t i = 0; i < d; ++i) y[i] = a[i] >= b[i] ? a[i] : b[i];
  return y;
}

template <typename T>
FusionGrads<T> fuse_max_backward(const Tensor<T>& a, const Tensor<T>& b, const Tensor<T>& grad_out) {
  const std::size_t d = require_pair(a, b, "fuse_max_backward");
  FusionGrads<T> g{Tensor<T>({d}), Tensor<T>({d})};
  for (std::size_t i = 0; i < d; ++i) (a[i] >= b[i] ? g.a : g.b)[i] = grad_out[i];
  return g;
}

template <typename T>
Tensor<T> fuse_cat(const Tensor<T>& a, const Tensor<T>& b) {
  const std::size_t d = require_pair(a, b, "fuse_cat");
  Tensor<T> y({2 * d});
  for (std::size_t i = 0; i < d; ++i) {
    y[2 * i] = b[i];
    y[2 * i + 1] = a[i];
  }
  return y;
}

template <typename T>
FusionGrads<T> deinterleave(const Tensor<T>& stacked) {
  if (stacked.size() % 2 != 0) throw std::invalid_argument("deinterleave: odd length");
  const std::size_t d = stacked.size() / 2;
  FusionGrads<T> g{Tensor<T>({d}), Tensor<T>({d})};
  for (std::size_t i = 0; i < d; ++i) {
    g.b[i] = stacked[2 * i];
    g.a[i] = stacked[2 * i + 1];
  }
  return g;
}

template <typename T>
FusionGrads<T> fuse_cat_backward(const Tensor<T>& grad_out) {
  return deinterleave(grad_out);
}

template <typename T>
Tensor<T> fuse_conv(const Tensor<T>& a, const Tensor<T>& b, const FusionParams<T>& params) {
  const std::size_t d = require_pair(a, b, "fuse_conv");
  if (params.kind != FusionKind::Conv || params.filters.rank() != 2) {
    throw std::invalid_argument("fuse_conv: missing conv fusion parameters");
  }
  if (params.filters.dim(0) != 2 * d) {
    throw std::invalid_argument("fuse_conv: filters expect " + std::to_string(params.filters.dim(0) / 2) +
                                "-dim inputs, got " + std::to_string(d));
  }
  const std::size_t out_dim = params.filters.dim(1);
  require_shape(params.bias, {out_dim}, "fuse_conv bias");
  const Tensor<T> x = fuse_cat(a, b);
  Tensor<T> y = params.bias;
  for (std::size_t i = 0; i < 2 * d; ++i) {
    const T xi = x[i];
    const T* row = params.filters.raw() + i * out_dim;
    for (std::size_t o = 0; o < out_dim; ++o) y[o] += row[o] * xi;
  }
  return y;
}

template <typename T>
FusionGrads<T> fuse_conv_backward(const Tensor<T>& a, const Tensor<T>& b, const FusionParams<T>& params,
                                  const Tensor<T>& grad_out, FusionParams<T>& grads) {
  const std::size_t d = require_pair(a, b, "fuse_conv_backward");
  const std::size_t out_dim = params.filters.dim(1);
  require_shape(grad_out, {out_dim}, "fuse_conv grad_out");
  const Tensor<T> x = fuse_cat(a, b);
  Tensor<T> gx({2 * d});
  for (std::size_t i = 0; i < 2 * d; ++i) {
    const T* row = params.filters.raw() + i * out_dim;
    T* grow = grads.filters.raw() + i * out_dim;
    T acc = 0;
    for (std::size_t o = 0; o < out_dim; ++o) {
      grow[o] += x[i] * grad_out[o];
      acc += row[o] * grad_out[o];
    }
    gx[i] = acc;
  }
  grads.bias += grad_out;
  return deinterleave(gx);
}

template <typename T>
Tensor<T> fuse(const Tensor<T>& a, const Tensor<T>& b, const FusionParams<T>& params) {
  switch (params.kind) {
    case FusionKind::Sum: return fuse_sum(a, b);
    case FusionKind::Max: return fuse_max(a, b);
    case FusionKind::Cat: return fuse_cat(a, b);
    case FusionKind::Conv: return fuse_conv(a, b, params);
  }
  throw std::invalid_argument("unknown fusion kind");
}

template <typename T>
FusionGrads<T> fuse_backward(const Tensor<T>& a, const Tensor<T>& b, const FusionParams<T>& params,
                             const Tensor<T>& grad_out, FusionParams<T>& grads) {
  switch (params.kind) {
    case FusionKind::Sum: return fuse_sum_backward(grad_out);
    case FusionKind::Max: return fuse_max_backward(a, b, grad_out);
    case FusionKind::Cat: return fuse_cat_backward(grad_out);
    case FusionKind::Conv: return fuse_conv_backward(a, b, params, grad_out, grads);
  }
  throw std::invalid_argument("unknown fusion kind");
}

#define LOWRES_INSTANTIATE_FUSION(T)                                                                              \
  template struct FusionParams<T>;                                                                                \
  template FusionParams<T> init_fusion_params<T>(FusionKind, std::size_t, std::size_t, std::mt19937_64&);         \
  template Tensor<T> fuse_sum(const Tensor<T>&, const Tensor<T>&);                                                \
  template FusionGrads<T> fuse_sum_backward(const Tensor<T>&);                                                    \
  template Tensor<T> fuse_max(const Tensor<T>&, const Tensor<T>&);                                                \
  template FusionGrads<T> fuse_max_backward(const Tensor<T>&, const Tensor<T>&, const Tensor<T>&);                \
  template Tensor<T> fuse_cat(const Tensor<T>&, const Tensor<T>&);                                                \
  template FusionGrads<T> fuse_cat_backward(const Tensor<T>&);                                                    \
  template FusionGrads<T> deinterleave(const Tensor<T>&);                                                         \
  template Tensor<T> fuse_conv(const Tensor<T>&, const Tensor<T>&, const FusionParams<T>&);                       \
  template FusionGrads<T> fuse_conv_backward(const Tensor<T>&, const Tensor<T>&, const FusionParams<T>&,          \
                                             const Tensor<T>&, FusionParams<T>&);                                 \
  template Tensor<T> fuse(const Tensor<T>&, const Tensor<T>&, const FusionParams<T>&);                            \
  template FusionGrads<T> fuse_backward(const Tensor<T>&, const Tensor<T>&, const FusionParams<T>&,               \
                                        const Tensor<T>&, FusionParams<T>&);

LOWRES_INSTANTIATE_FUSION(float)
LOWRES_INSTANTIATE_FUSION(double)

}  // namespace lowres
