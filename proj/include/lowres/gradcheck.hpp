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

#include "lowres/c3d.hpp"

namespace lowres {

/// Largest accepted worst-case relative error.
inline constexpr double kGradcheckTolerance = 1e-4;

struct GradcheckOptions {
  std::uint64_t seed = 7;
  int seeds = 10;                 // independent random draws per op
  double step = 1e-5;             // central-difference step
  double floor = 1e-6;            // relative-error denominator floor
  double network_fraction = 0.002;  // share of C3D parameters probed per draw
  Preset preset = Preset::Tiny;
};

struct OpCheck {
  std::string op;
  double worst_rel_err = 0.0;
  std::size_t checked = 0;
  std::size_t skipped = 0;  // probes whose +-step crossed a ReLU / max boundary
};

/// |a - n| / max(|a|, |n|, floor)
double relative_error(double analytic, double numeric, double floor);

/// Central finite differences at 64-bit against every backward pass: conv3d, maxpool3d,
/// linear, relu, softmax_xent, gru_cell, gru_sequence, the four fusions, the C3D network
/// and the stage-2 model.
std::vector<OpCheck> run_gradcheck(const GradcheckOptions& options);

std::string render_gradcheck(const std::vector<OpCheck>& checks);

}  // namespace lowres
