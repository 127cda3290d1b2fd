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

#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include "lowres/tensor.hpp"

namespace lowres {

/// Raised when training hits a non-finite gradient or loss.
class NumericError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

struct RmspropConfig {
  double learning_rate = 1e-3;
  double weight_decay = 5e-4;  // coupled L2: added to the gradient before the running average
  double decay = 0.99;
  double eps = 1e-8;
};

template <typename T>
struct RmspropState {
  std::vector<Tensor<T>> mean_square;  // allocated lazily, zero-initialized
};

/// v <- rho v + (1 - rho) g^2 ;  theta <- theta - lr g / (sqrt(v) + eps), with g = grad + wd theta.
/// Throws NumericError (before touching any parameter) if a gradient entry is not finite.
template <typename T>
void rmsprop_step(std::span<const ParamRef<T>> params, std::span<const ParamRef<T>> grads, RmspropState<T>& state,
                  const RmspropConfig& config);

}  // namespace lowres
