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
#include <optional>
#include <random>
#include <span>
#include <string>
#include <vector>

#include "lowres/tensor.hpp"

namespace lowres {

/// Input-to-hidden W* [H, F], hidden-to-hidden U* [H, H], biases b* [H].
template <typename T>
struct GruParams {
  Tensor<T> Wz, Wr, Wh;
  Tensor<T> Uz, Ur, Uh;
  Tensor<T> bz, br, bh;

  std::size_t input_dim() const { return Wz.rank() == 2 ? Wz.dim(1) : 0; }
  std::size_t hidden_dim() const { return Wz.rank() == 2 ? Wz.dim(0) : 0; }

  /// Names follow `<prefix>{Wz,Wr,Wh,Uz,Ur,Uh,bz,br,bh}`.
  std::vector<ParamRef<T>> refs(const std::string& prefix);
  void validate() const;
};

template <typename T>
GruParams<T> zero_gru_params(std::size_t input_dim, std::size_t hidden_dim);

/// Uniform in +-1/sqrt(hidden_dim).
template <typename T>
GruParams<T> init_gru_params(std::size_t input_dim, std::size_t hidden_dim, std::mt19937_64& rng);

/// One step of the recurrence, with the gate activations kept for backprop:
///   z = sigmoid(Wz x + Uz h_prev + bz)
///   r = sigmoid(Wr x + Ur h_prev + br)
///   n = tanh(Wh x + Uh (r o h_prev) + bh)
///   h = z o h_prev + (1 - z) o n
template <typename T>
struct GruState {
  Tensor<T> h;
  Tensor<T> z, r, n;
};

template <typename T>
GruState<T> gru_cell(const Tensor<T>& x, const Tensor<T>& h_prev, const GruParams<T>& params);

template <typename T>
struct GruCellInputGrads {
  Tensor<T> x;
  Tensor<T> h_prev;
};

/// Accumulates parameter gradients into `grads`; returns gradients wrt x and h_prev.
template <typename T>
GruCellInputGrads<T> gru_cell_backward(const Tensor<T>& x, const Tensor<T>& h_prev, const GruState<T>& state,
                                       const GruParams<T>& params, const Tensor<T>& grad_h, GruParams<T>& grads);

enum class Direction { Forward, Backward };

template <typename T>
struct GruSequence {
  Direction direction = Direction::Forward;
  std::vector<GruState<T>> states;  // processing order: states.back() is the final state

  const Tensor<T>& final_state() const { return states.back().h; }
};

/// Runs the cell over xs from h_0 = 0, in reverse input order for Direction::Backward.
template <typename T>
GruSequence<T> gru_sequence(std::span<const Tensor<T>> xs, const GruParams<T>& params, Direction direction);

/// Backprop through time. grad_states[k] is d(loss)/d(states[k].h) in processing order (empty tensors
/// count as zero). Returns d(loss)/d(xs) in input order.
template <typename T>
std::vector<Tensor<T>> gru_sequence_backward(std::span<const Tensor<T>> xs, const GruSequence<T>& seq,
                                             const GruParams<T>& params, std::span<const Tensor<T>> grad_states,
                                             GruParams<T>& grads);

/// Uni-directional: h_T. Bi-directional: [forward h_T, backward h_T].
template <typename T>
Tensor<T> encode_final(std::span<const Tensor<T>> xs, const GruParams<T>& forward,
                       const GruParams<T>* backward = nullptr);

template <typename T>
struct HeadParams {
  Tensor<T> weight;  // [K, D]
  Tensor<T> bias;    // [K]

  std::vector<ParamRef<T>> refs(const std::string& prefix);
};

template <typename T>
Tensor<T> classify(const Tensor<T>& rep, const HeadParams<T>& head);

}  // namespace lowres
