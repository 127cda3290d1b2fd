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

#include "lowres/netops.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <stdexcept>
#include <string>

#include <Eigen/Core>

namespace lowres {

namespace {

using Index = std::ptrdiff_t;

Index out_extent(Index in, Index k, Index stride, Index pad, const char* what) {
  if (stride < 1) throw std::invalid_argument(std::string(what) + ": stride must be >= 1");
  if (pad < 0) throw std::invalid_argument(std::string(what) + ": padding must be >= 0");
  if (k < 1 || k > in + 2 * pad) {
    throw std::invalid_argument(std::string(what) + ": window " + std::to_string(k) + " does not fit padded extent " +
                                std::to_string(in + 2 * pad));
  }
  return (in + 2 * pad - k) / stride + 1;
}

// Valid output range [lo, hi) along one axis for kernel tap k.
void valid_range(Index in, Index out, Index k, Index stride, Index pad, Index& lo, Index& hi) {
  // need 0 <= o*stride - pad + k <= in-1
  const Index num_lo = pad - k;
  lo = num_lo <= 0 ? 0 : (num_lo + stride - 1) / stride;
  const Index num_hi = in - 1 + pad - k;
  hi = num_hi < 0 ? 0 : std::min(out, num_hi / stride + 1);
  if (hi < lo) hi = lo;
}

}  // namespace

Dims conv3d_output_dims(const Dims& input, const Dims& weight, const Conv3dGeometry& g) {
  if (input.size() != 4) throw std::invalid_argument("conv3d: input must be [C,T,H,W], got " + dims_to_string(input));
  if (weight.size() != 5) {
    throw std::invalid_argument("conv3d: weight must be [O,C,kT,kH,kW], got " + dims_to_string(weight));
  }
  if (weight[1] != input[0]) {
    throw std::invalid_argument("conv3d: weight expects " + std::to_string(weight[1]) + " input channels, input has " +
                                std::to_string(input[0]));
  }
  Dims out{weight[0]};
  for (int a = 0; a < 3; ++a) {
    out.push_back(static_cast<std::size_t>(out_extent(static_cast<Index>(input[a + 1]), static_cast<Index>(weight[a + 2]),
                                                      g.stride[a], g.pad[a], "conv3d")));
  }
  return out;
}

Dims pool3d_output_dims(const Dims& input, const Pool3dGeometry& g) {
  if (input.size() != 4) throw std::invalid_argument("maxpool3d: input must be [C,T,H,W], got " + dims_to_string(input));
  Dims out{input[0]};
  for (int a = 0; a < 3; ++a) {
    if (g.pad[a] >= g.window[a]) throw std::invalid_argument("maxpool3d: padding must be smaller than the window");
    out.push_back(static_cast<std::size_t>(
        out_extent(static_cast<Index>(input[a + 1]), g.window[a], g.stride[a], g.pad[a], "maxpool3d")));
  }
  return out;
}

namespace {

// Unfolds input patches into a [C*kT*kH*kW, OT*OH*OW] column matrix (zero where padded).
template <typename T>
void im2col(const Tensor<T>& input, const Dims& wdims, const Dims& od, const Conv3dGeometry& g, std::vector<T>& cols) {
  const Index C = static_cast<Index>(input.dim(0)), IT = static_cast<Index>(input.dim(1)),
              IH = static_cast<Index>(input.dim(2)), IW = static_cast<Index>(input.dim(3));
  const Index OT = static_cast<Index>(od[1]), OH = static_cast<Index>(od[2]), OW = static_cast<Index>(od[3]);
  const Index KT = static_cast<Index>(wdims[2]), KH = static_cast<Index>(wdims[3]), KW = static_cast<Index>(wdims[4]);
  const Index P = OT * OH * OW;
  cols.assign(static_cast<std::size_t>(C * KT * KH * KW * P), T{0});
  const T* in = input.raw();
  Index row = 0;
  for (Index c = 0; c < C; ++c) {
    for (Index kt = 0; kt < KT; ++kt) {
      for (Index kh = 0; kh < KH; ++kh) {
        for (Index kw = 0; kw < KW; ++kw, ++row) {
          Index lo, hi;
          valid_range(IW, OW, kw, g.stride[2], g.pad[2], lo, hi);
          T* dst = cols.data() + row * P;
          for (Index ot = 0; ot < OT; ++ot) {
            const Index it = ot * g.stride[0] - g.pad[0] + kt;
            if (it < 0 || it >= IT) continue;
            for (Index oh = 0; oh < OH; ++oh) {
              const Index ih = oh * g.stride[1] - g.pad[1] + kh;
              if (ih < 0 || ih >= IH) continue;
              const T* src = in + ((c * IT + it) * IH + ih) * IW - g.pad[2] + kw;
              T* d = dst + (ot * OH + oh) * OW;
              for (Index ow = lo; ow < hi; ++ow) d[ow] = src[ow * g.stride[2]];
            }
          }
        }
      }
    }
  }
}

// Adjoint of im2col: scatters column gradients back onto the input grid.
template <typename T>
void col2im(const std::vector<T>& cols, const Dims& wdims, const Dims& od, const Conv3dGeometry& g, Tensor<T>& grad_in) {
  const Index C = static_cast<Index>(grad_in.dim(0)), IT = static_cast<Index>(grad_in.dim(1)),
              IH = static_cast<Index>(grad_in.dim(2)), IW = static_cast<Index>(grad_in.dim(3));
  const Index OT = static_cast<Index>(od[1]), OH = static_cast<Index>(od[2]), OW = static_cast<Index>(od[3]);
  const Index KT = static_cast<Index>(wdims[2]), KH = static_cast<Index>(wdims[3]), KW = static_cast<Index>(wdims[4]);
  const Index P = OT * OH * OW;
  T* gx = grad_in.raw();
  Index row = 0;
  for (Index c = 0; c < C; ++c) {
    for (Index kt = 0; kt < KT; ++kt) {
      for (Index kh = 0; kh < KH; ++kh) {
        for (Index kw = 0; kw < KW; ++kw, ++row) {
          Index lo, hi;
          valid_range(IW, OW, kw, g.stride[2], g.pad[2], lo, hi);
          const T* srcrow = cols.data() + row * P;
          for (Index ot = 0; ot < OT; ++ot) {
            const Index it = ot * g.stride[0] - g.pad[0] + kt;
            if (it < 0 || it >= IT) continue;
            for (Index oh = 0; oh < OH; ++oh) {
              const Index ih = oh * g.stride[1] - g.pad[1] + kh;
              if (ih < 0 || ih >= IH) continue;
              T* dst = gx + ((c * IT + it) * IH + ih) * IW - g.pad[2] + kw;
              const T* s = srcrow + (ot * OH + oh) * OW;
              for (Index ow = lo; ow < hi; ++ow) dst[ow * g.stride[2]] += s[ow];
            }
          }
        }
      }
    }
  }
}

template <typename T>
using RowMatrix = Eigen::Matrix<T, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
template <typename T>
using MatrixMap = Eigen::Map<RowMatrix<T>>;
template <typename T>
using ConstMatrixMap = Eigen::Map<const RowMatrix<T>>;

}  // namespace

template <typename T>
Tensor<T> conv3d_forward(const Tensor<T>& input, const Tensor<T>& weight, const Tensor<T>& bias,
                         const Conv3dGeometry& g) {
  const Dims od = conv3d_output_dims(input.dims(), weight.dims(), g);
  require_shape(bias, {weight.dim(0)}, "conv3d bias");
  const Index O = static_cast<Index>(od[0]);
  const Index P = static_cast<Index>(od[1] * od[2] * od[3]);
  const Index K = static_cast<Index>(weight.size()) / O;
  std::vector<T> cols;
  im2col(input, weight.dims(), od, g, cols);
  Tensor<T> out(od);
  MatrixMap<T> y(out.raw(), O, P);
  y.noalias() = ConstMatrixMap<T>(weight.raw(), O, K) * ConstMatrixMap<T>(cols.data(), K, P);
  for (Index o = 0; o < O; ++o) y.row(o).array() += bias[static_cast<std::size_t>(o)];
  return out;
}

template <typename T>
Conv3dGrads<T> conv3d_backward(const Tensor<T>& input, const Tensor<T>& weight, const Tensor<T>& grad_out,
                               const Conv3dGeometry& g, bool need_input_grad) {
  const Dims od = conv3d_output_dims(input.dims(), weight.dims(), g);
  require_shape(grad_out, od, "conv3d grad_out");
  const Index O = static_cast<Index>(od[0]);
  const Index P = static_cast<Index>(od[1] * od[2] * od[3]);
  const Index K = static_cast<Index>(weight.size()) / O;
  std::vector<T> cols;
  im2col(input, weight.dims(), od, g, cols);
  ConstMatrixMap<T> gy(grad_out.raw(), O, P);

  Conv3dGrads<T> grads;
  grads.weight = Tensor<T>(weight.dims());
  grads.bias = Tensor<T>({weight.dim(0)});
  MatrixMap<T>(grads.weight.raw(), O, K).noalias() = gy * ConstMatrixMap<T>(cols.data(), K, P).transpose();
  // Scalar reduction: Eigen's vectorized sum peels by buffer alignment, which breaks run-to-run equality.
  for (Index o = 0; o < O; ++o) {
    const T* row = grad_out.raw() + o * P;
    T acc{0};
    for (Index p = 0; p < P; ++p) acc += row[p];
    grads.bias[static_cast<std::size_t>(o)] = acc;
  }
  if (need_input_grad) {
    MatrixMap<T>(cols.data(), K, P).noalias() = ConstMatrixMap<T>(weight.raw(), O, K).transpose() * gy;
    grads.input = Tensor<T>(input.dims());
    col2im(cols, weight.dims(), od, g, grads.input);
  }
  return grads;
}

template <typename T>
PoolResult<T> maxpool3d_forward(const Tensor<T>& input, const Pool3dGeometry& g) {
  const Dims od = pool3d_output_dims(input.dims(), g);
  const Index C = static_cast<Index>(input.dim(0)), IT = static_cast<Index>(input.dim(1)),
              IH = static_cast<Index>(input.dim(2)), IW = static_cast<Index>(input.dim(3));
  const Index OT = static_cast<Index>(od[1]), OH = static_cast<Index>(od[2]), OW = static_cast<Index>(od[3]);
  PoolResult<T> r{Tensor<T>(od), std::vector<std::size_t>(element_count(od))};
  const T* in = input.raw();
  std::size_t oi = 0;
  for (Index c = 0; c < C; ++c) {
    for (Index ot = 0; ot < OT; ++ot) {
      for (Index oh = 0; oh < OH; ++oh) {
        for (Index ow = 0; ow < OW; ++ow, ++oi) {
          T best = -std::numeric_limits<T>::infinity();
          Index best_idx = -1;
          for (Index kt = 0; kt < g.window[0]; ++kt) {
            const Index it = ot * g.stride[0] - g.pad[0] + kt;
            if (it < 0 || it >= IT) continue;
            for (Index kh = 0; kh < g.window[1]; ++kh) {
              const Index ih = oh * g.stride[1] - g.pad[1] + kh;
              if (ih < 0 || ih >= IH) continue;
              for (Index kw = 0; kw < g.window[2]; ++kw) {
                const Index iw = ow * g.stride[2] - g.pad[2] + kw;
                if (iw < 0 || iw >= IW) continue;
                const Index idx = ((c * IT + it) * IH + ih) * IW + iw;
                if (best_idx < 0 || in[idx] > best) {
                  best = in[idx];
                  best_idx = idx;
                }
              }
            }
          }
          r.output[oi] = best;
          r.argmax[oi] = static_cast<std::size_t>(best_idx);
        }
      }
    }
  }
  return r;
}

template <typename T>
Tensor<T> maxpool3d_backward(const Dims& input_dims, const std::vector<std::size_t>& argmax, const Tensor<T>& grad_out) {
  if (argmax.size() != grad_out.size()) throw std::invalid_argument("maxpool3d_backward: argmax/grad size mismatch");
  Tensor<T> gx(input_dims);
  for (std::size_t i = 0; i < argmax.size(); ++i) {
    if (argmax[i] >= gx.size()) throw std::invalid_argument("maxpool3d_backward: argmax out of range");
    gx[argmax[i]] += grad_out[i];
  }
  return gx;
}

template <typename T>
Tensor<T> linear_forward(const Tensor<T>& input, const Tensor<T>& weight, const Tensor<T>& bias) {
  if (weight.rank() != 2) throw std::invalid_argument("linear: weight must be rank 2, got " + dims_to_string(weight.dims()));
  const std::size_t out_dim = weight.dim(0);
  const std::size_t in_dim = weight.dim(1);
  if (input.size() != in_dim) {
    throw std::invalid_argument("linear: input has " + std::to_string(input.size()) + " elements, weight expects " +
                                std::to_string(in_dim));
  }
  require_shape(bias, {out_dim}, "linear bias");
  Tensor<T> y({out_dim});
  const T* x = input.raw();
  for (std::size_t o = 0; o < out_dim; ++o) {
    const T* wr = weight.raw() + o * in_dim;
    T acc = 0;
    for (std::size_t i = 0; i < in_dim; ++i) acc += wr[i] * x[i];
    y[o] = acc + bias[o];
  }
  return y;
}

template <typename T>
LinearGrads<T> linear_backward(const Tensor<T>& input, const Tensor<T>& weight, const Tensor<T>& grad_out) {
  if (weight.rank() != 2) throw std::invalid_argument("linear: weight must be rank 2");
  const std::size_t out_dim = weight.dim(0);
  const std::size_t in_dim = weight.dim(1);
  if (input.size() != in_dim || grad_out.size() != out_dim) throw std::invalid_argument("linear_backward: shape mismatch");
  LinearGrads<T> g{Tensor<T>(input.dims()), Tensor<T>(weight.dims()), Tensor<T>({out_dim})};
  for (std::size_t o = 0; o < out_dim; ++o) {
    const T go = grad_out[o];
    g.bias[o] = go;
    if (go == T{0}) continue;
    const T* wr = weight.raw() + o * in_dim;
    T* gwr = g.weight.raw() + o * in_dim;
    for (std::size_t i = 0; i < in_dim; ++i) {
      gwr[i] = go * input[i];
      g.input[i] += go * wr[i];
    }
  }
  return g;
}

template <typename T>
Tensor<T> relu_forward(const Tensor<T>& input) {
  Tensor<T> y = input;
  for (T& v : y.data()) v = v > T{0} ? v : T{0};
  return y;
}

template <typename T>
Tensor<T> relu_backward(const Tensor<T>& input, const Tensor<T>& grad_out) {
  if (!input.same_shape(grad_out)) throw std::invalid_argument("relu_backward: shape mismatch");
  Tensor<T> g(input.dims());
  for (std::size_t i = 0; i < input.size(); ++i) g[i] = input[i] > T{0} ? grad_out[i] : T{0};
  return g;
}

template <typename T>
SoftmaxXent<T> softmax_xent(const Tensor<T>& logits, int label) {
  const std::size_t k = logits.size();
  if (k == 0) throw std::invalid_argument("softmax_xent: empty logits");
  if (label < 0 || static_cast<std::size_t>(label) >= k) {
    throw std::invalid_argument("softmax_xent: label " + std::to_string(label) + " out of range [0," +
                                std::to_string(k) + ")");
  }
  const T mx = *std::max_element(logits.data().begin(), logits.data().end());
  Tensor<T> p({k});
  T sum = 0;
  for (std::size_t i = 0; i < k; ++i) {
    p[i] = std::exp(logits[i] - mx);
    sum += p[i];
  }
  for (std::size_t i = 0; i < k; ++i) p[i] /= sum;
  const T loss = -(logits[static_cast<std::size_t>(label)] - mx - std::log(sum));
  Tensor<T> grad = p;
  grad[static_cast<std::size_t>(label)] -= T{1};
  return {loss, std::move(grad), std::move(p)};
}

template <typename T>
int argmax(const Tensor<T>& values) {
  if (values.empty()) throw std::invalid_argument("argmax of empty tensor");
  std::size_t best = 0;
  for (std::size_t i = 1; i < values.size(); ++i) {
    if (values[i] > values[best]) best = i;
  }
  return static_cast<int>(best);
}

#define LOWRES_INSTANTIATE_NETOPS(T)                                                                             \
  template Tensor<T> conv3d_forward(const Tensor<T>&, const Tensor<T>&, const Tensor<T>&, const Conv3dGeometry&); \
  template Conv3dGrads<T> conv3d_backward(const Tensor<T>&, const Tensor<T>&, const Tensor<T>&,                  \
                                          const Conv3dGeometry&, bool);                                          \
  template PoolResult<T> maxpool3d_forward(const Tensor<T>&, const Pool3dGeometry&);                             \
  template Tensor<T> maxpool3d_backward(const Dims&, const std::vector<std::size_t>&, const Tensor<T>&);         \
  template Tensor<T> linear_forward(const Tensor<T>&, const Tensor<T>&, const Tensor<T>&);                       \
  template LinearGrads<T> linear_backward(const Tensor<T>&, const Tensor<T>&, const Tensor<T>&);                 \
  template Tensor<T> relu_forward(const Tensor<T>&);                                                             \
  template Tensor<T> relu_backward(const Tensor<T>&, const Tensor<T>&);                                          \
  template SoftmaxXent<T> softmax_xent(const Tensor<T>&, int);                                                   \
  template int argmax(const Tensor<T>&);

LOWRES_INSTANTIATE_NETOPS(float)
LOWRES_INSTANTIATE_NETOPS(double)

}  // namespace lowres
