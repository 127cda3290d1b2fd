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

#include "lowres/optim.hpp"

#include <cmath>

namespace lowres {

template <typename T>
void rmsprop_step(std::span<const ParamRef<T>> params, std::span<const ParamRef<T>> grads, RmspropState<T>& state,
                  const RmspropConfig& config) {
  if (params.size() != grads.size()) throw std::invalid_argument("rmsprop_step: params/grads count mismatch");
  for (std::size_t i = 0; i < params.size(); ++i) {
    if (!params[i].tensor->same_shape(*grads[i].tensor)) {
      throw std::invalid_argument("rmsprop_step: gradient shape mismatch for " + params[i].name);
    }
    const auto g = grads[i].tensor->data();
    for (std::size_t k = 0; k < g.size(); ++k) {
      if (!std::isfinite(g[k])) {
        throw NumericError("non-finite gradient " + std::to_string(static_cast<double>(g[k])) + " in " +
                           params[i].name + " at flat index " + std::to_string(k));
      }
    }
  }
  if (state.mean_square.empty()) {
    for (const auto& p : params) state.mean_square.emplace_back(p.tensor->dims());
  }
  if (state.mean_square.size() != params.size()) throw std::invalid_argument("rmsprop_step: state does not match params");

  const T lr = static_cast<T>(config.learning_rate);
  const T wd = static_cast<T>(config.weight_decay);
  const T rho = static_cast<T>(config.decay);
  const T eps = static_cast<T>(config.eps);
  for (std::size_t i = 0; i < params.size(); ++i) {
    auto theta = params[i].tensor->data();
    const auto grad = grads[i].tensor->data();
    auto v = state.mean_square[i].data();
    if (v.size() != theta.size()) throw std::invalid_argument("rmsprop_step: state shape mismatch for " + params[i].name);
    for (std::size_t k = 0; k < theta.size(); ++k) {
      const T g = grad[k] + wd * theta[k];
      v[k] = rho * v[k] + (T{1} - rho) * g * g;
      theta[k] -= lr * g / (std::sqrt(v[k]) + eps);
    }
  }
}

template void rmsprop_step(std::span<const ParamRef<float>>, std::span<const ParamRef<float>>, RmspropState<float>&,
                           const RmspropConfig&);
template void rmsprop_step(std::span<const ParamRef<double>>, std::span<const ParamRef<double>>,
                           RmspropState<double>&, const RmspropConfig&);

}  // namespace lowres
