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

#include "lowres/seqenc.hpp"

#include <cmath>
#include <stdexcept>

#include "lowres/netops.hpp"

namespace lowres {

namespace {

template <typename T>
void matvec_add(const Tensor<T>& m, const Tensor<T>& x, Tensor<T>& y) {
  const std::size_t rows = m.dim(0), cols = m.dim(1);
  for (std::size_t i = 0; i < rows; ++i) {
    const T* row = m.raw() + i * cols;
    T acc = 0;
    for (std::size_t j = 0; j < cols; ++j) acc += row[j] * x[j];
    y[i] += acc;
  }
}

// y += m^T g
template <typename T>
void matvec_t_add(const Tensor<T>& m, const Tensor<T>& g, Tensor<T>& y) {
  const std::size_t rows = m.dim(0), cols = m.dim(1);
  for (std::size_t i = 0; i < rows; ++i) {
    const T gi = g[i];
    if (gi == T{0}) continue;
    const T* row = m.raw() + i * cols;
    for (std::size_t j = 0; j < cols; ++j) y[j] += row[j] * gi;
  }
}

// m += g a^T
template <typename T>
void outer_add(const Tensor<T>& g, const Tensor<T>& a, Tensor<T>& m) {
  const std::size_t rows = m.dim(0), cols = m.dim(1);
  for (std::size_t i = 0; i < rows; ++i) {
    const T gi = g[i];
    if (gi == T{0}) continue;
    T* row = m.raw() + i * cols;
    for (std::size_t j = 0; j < cols; ++j) row[j] += gi * a[j];
  }
}

template <typename T>
T sigmoid(T x) {
  return T{1} / (T{1} + std::exp(-x));
}

}  // namespace

template <typename T>
std::vector<ParamRef<T>> GruParams<T>::refs(const std::string& prefix) {
  return {{prefix + "Wz", &Wz}, {prefix + "Wr", &Wr}, {prefix + "Wh", &Wh}, {prefix + "Uz", &Uz}, {prefix + "Ur", &Ur},
          {prefix + "Uh", &Uh}, {prefix + "bz", &bz}, {prefix + "br", &br}, {prefix + "bh", &bh}};
}

template <typename T>
void GruParams<T>::validate() const {
  const std::size_t h = hidden_dim(), f = input_dim();
  if (h == 0 || f == 0) throw std::invalid_argument("GRU parameters are empty");
  for (const Tensor<T>* w : {&Wz, &Wr, &Wh}) require_shape(*w, {h, f}, "GRU input weight");
  for (const Tensor<T>* u : {&Uz, &Ur, &Uh}) require_shape(*u, {h, h}, "GRU recurrent weight");
  for (const Tensor<T>* b : {&bz, &br, &bh}) require_shape(*b, {h}, "GRU bias");
}

template <typename T>
GruParams<T> zero_gru_params(std::size_t input_dim, std::size_t hidden_dim) {
  GruParams<T> p;
  p.Wz = p.Wr = p.Wh = Tensor<T>({hidden_dim, input_dim});
  p.Uz = p.Ur = p.Uh = Tensor<T>({hidden_dim, hidden_dim});
  p.bz = p.br = p.bh = Tensor<T>({hidden_dim});
  return p;
}

template <typename T>
GruParams<T> init_gru_params(std::size_t input_dim, std::size_t hidden_dim, std::mt19937_64& rng) {
  GruParams<T> p = zero_gru_params<T>(input_dim, hidden_dim);
  const double bound = 1.0 / std::sqrt(static_cast<double>(hidden_dim));
  std::uniform_real_distribution<double> dist(-bound, bound);
  for (auto& ref : p.refs("")) {
    for (T& v : ref.tensor->data()) v = static_cast<T>(dist(rng));
  }
  return p;
}

template <typename T>
GruState<T> gru_cell(const Tensor<T>& x, const Tensor<T>& h_prev, const GruParams<T>& params) {
  params.validate();
  const std::size_t hd = params.hidden_dim();
  if (x.size() != params.input_dim()) {
    throw std::invalid_argument("gru_cell: input has " + std::to_string(x.size()) + " features, expected " +
                                std::to_string(params.input_dim()));
  }
  if (h_prev.size() != hd) throw std::invalid_argument("gru_cell: hidden state size mismatch");

  GruState<T> s;
  s.z = params.bz;
  s.r = params.br;
  s.n = params.bh;
  matvec_add(params.Wz, x, s.z);
  matvec_add(params.Uz, h_prev, s.z);
  matvec_add(params.Wr, x, s.r);
  matvec_add(params.Ur, h_prev, s.r);
  for (std::size_t i = 0; i < hd; ++i) {
    s.z[i] = sigmoid(s.z[i]);
    s.r[i] = sigmoid(s.r[i]);
  }
  Tensor<T> gated({hd});
  for (std::size_t i = 0; i < hd; ++i) gated[i] = s.r[i] * h_prev[i];
  matvec_add(params.Wh, x, s.n);
  matvec_add(params.Uh, gated, s.n);
  s.h = Tensor<T>({hd});
  for (std::size_t i = 0; i < hd; ++i) {
    s.n[i] = std::tanh(s.n[i]);
    s.h[i] = s.z[i] * h_prev[i] + (T{1} - s.z[i]) * s.n[i];
  }
  return s;
}

template <typename T>
GruCellInputGrads<T> gru_cell_backward(const Tensor<T>& x, const Tensor<T>& h_prev, const GruState<T>& s,
                                       const GruParams<T>& params, const Tensor<T>& grad_h, GruParams<T>& grads) {
  const std::size_t hd = params.hidden_dim();
  if (grad_h.size() != hd) throw std::invalid_argument("gru_cell_backward: grad_h size mismatch");
  Tensor<T> da_z({hd}), da_r({hd}), da_n({hd}), gated({hd});
  GruCellInputGrads<T> out{Tensor<T>(x.dims()), Tensor<T>({hd})};
  for (std::size_t i = 0; i < hd; ++i) {
    const T g = grad_h[i];
    out.h_prev[i] = g * s.z[i];
    da_z[i] = g * (h_prev[i] - s.n[i]) * s.z[i] * (T{1} - s.z[i]);
    da_n[i] = g * (T{1} - s.z[i]) * (T{1} - s.n[i] * s.n[i]);
    gated[i] = s.r[i] * h_prev[i];
  }
  // n = tanh(Wh x + Uh (r o h_prev) + bh)
  outer_add(da_n, x, grads.Wh);
  outer_add(da_n, gated, grads.Uh);
  grads.bh += da_n;
  Tensor<T> d_gated({hd});
  matvec_t_add(params.Uh, da_n, d_gated);
  for (std::size_t i = 0; i < hd; ++i) {
    out.h_prev[i] += d_gated[i] * s.r[i];
    da_r[i] = d_gated[i] * h_prev[i] * s.r[i] * (T{1} - s.r[i]);
  }
  outer_add(da_z, x, grads.Wz);
  outer_add(da_z, h_prev, grads.Uz);
  grads.bz += da_z;
  outer_add(da_r, x, grads.Wr);
  outer_add(da_r, h_prev, grads.Ur);
  grads.br += da_r;

  matvec_t_add(params.Wz, da_z, out.x);
  matvec_t_add(params.Wr, da_r, out.x);
  matvec_t_add(params.Wh, da_n, out.x);
  matvec_t_add(params.Uz, da_z, out.h_prev);
  matvec_t_add(params.Ur, da_r, out.h_prev);
  return out;
}

template <typename T>
GruSequence<T> gru_sequence(std::span<const Tensor<T>> xs, const GruParams<T>& params, Direction direction) {
  if (xs.empty()) throw std::invalid_argument("gru_sequence: empty input sequence");
  GruSequence<T> seq;
  seq.direction = direction;
  seq.states.reserve(xs.size());
  Tensor<T> h({params.hidden_dim()});
  for (std::size_t k = 0; k < xs.size(); ++k) {
    const std::size_t t = direction == Direction::Forward ? k : xs.size() - 1 - k;
    seq.states.push_back(gru_cell(xs[t], h, params));
    h = seq.states.back().h;
  }
  return seq;
}

template <typename T>
std::vector<Tensor<T>> gru_sequence_backward(std::span<const Tensor<T>> xs, const GruSequence<T>& seq,
                                             const GruParams<T>& params, std::span<const Tensor<T>> grad_states,
                                             GruParams<T>& grads) {
  const std::size_t steps = seq.states.size();
  if (steps != xs.size() || grad_states.size() != steps) {
    throw std::invalid_argument("gru_sequence_backward: sequence length mismatch");
  }
  const std::size_t hd = params.hidden_dim();
  std::vector<Tensor<T>> dxs(xs.size());
  Tensor<T> carry({hd});
  const Tensor<T> zero({hd});
  for (std::size_t k = steps; k-- > 0;) {
    const std::size_t t = seq.direction == Direction::Forward ? k : xs.size() - 1 - k;
    Tensor<T> g = carry;
    if (!grad_states[k].empty()) g += grad_states[k];
    const Tensor<T>& h_prev = k == 0 ? zero : seq.states[k - 1].h;
    auto cell = gru_cell_backward(xs[t], h_prev, seq.states[k], params, g, grads);
    dxs[t] = std::move(cell.x);
    carry = std::move(cell.h_prev);
  }
  return dxs;
}

template <typename T>
Tensor<T> encode_final(std::span<const Tensor<T>> xs, const GruParams<T>& forward, const GruParams<T>* backward) {
  Tensor<T> fwd = gru_sequence(xs, forward, Direction::Forward).final_state();
  if (!backward) return fwd;
  const Tensor<T> bwd = gru_sequence(xs, *backward, Direction::Backward).final_state();
  std::vector<T> cat(fwd.data().begin(), fwd.data().end());
  cat.insert(cat.end(), bwd.data().begin(), bwd.data().end());
  const std::size_t n = cat.size();
  return Tensor<T>({n}, std::move(cat));
}

template <typename T>
std::vector<ParamRef<T>> HeadParams<T>::refs(const std::string& prefix) {
  return {{prefix + "w", &weight}, {prefix + "b", &bias}};
}

template <typename T>
Tensor<T> classify(const Tensor<T>& rep, const HeadParams<T>& head) {
  return linear_forward(rep, head.weight, head.bias);
}

#define LOWRES_INSTANTIATE_SEQENC(T)                                                                              \
  template struct GruParams<T>;                                                                                   \
  template struct HeadParams<T>;                                                                                  \
  template GruParams<T> zero_gru_params<T>(std::size_t, std::size_t);                                             \
  template GruParams<T> init_gru_params<T>(std::size_t, std::size_t, std::mt19937_64&);                           \
  template GruState<T> gru_cell(const Tensor<T>&, const Tensor<T>&, const GruParams<T>&);                         \
  template GruCellInputGrads<T> gru_cell_backward(const Tensor<T>&, const Tensor<T>&, const GruState<T>&,         \
                                                  const GruParams<T>&, const Tensor<T>&, GruParams<T>&);          \
  template GruSequence<T> gru_sequence(std::span<const Tensor<T>>, const GruParams<T>&, Direction);               \
  template std::vector<Tensor<T>> gru_sequence_backward(std::span<const Tensor<T>>, const GruSequence<T>&,        \
                                                        const GruParams<T>&, std::span<const Tensor<T>>,          \
                                                        GruParams<T>&);                                           \
  template Tensor<T> encode_final(std::span<const Tensor<T>>, const GruParams<T>&, const GruParams<T>*);          \
  template Tensor<T> classify(const Tensor<T>&, const HeadParams<T>&);

LOWRES_INSTANTIATE_SEQENC(float)
LOWRES_INSTANTIATE_SEQENC(double)

}  // namespace lowres
