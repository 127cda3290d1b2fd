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

#include <vector>

#include "lowres/vidprep.hpp"

namespace lowres {

/// Single-channel float image.
struct Plane {
  int height = 0;
  int width = 0;
  std::vector<float> values;

  Plane() = default;
  Plane(int h, int w, float fill = 0.0f)
      : height(h), width(w), values(static_cast<std::size_t>(h) * w, fill) {}

  float& at(int y, int x) { return values[static_cast<std::size_t>(y) * width + x]; }
  float at(int y, int x) const { return values[static_cast<std::size_t>(y) * width + x]; }
};

struct FlowField {
  Plane u;  // x displacement, px
  Plane v;  // y displacement, px
};

/// Coarse-to-fine Horn-Schunck parameters. Energy per level:
///   sum (I2(x + w) - I1(x))^2 + alpha^2 (|grad u|^2 + |grad v|^2)
struct FlowParams {
  double alpha = 0.02;
  int max_levels = 5;
  int min_level_size = 16;  // coarsest level keeps min(h, w) >= this
  double scale_factor = 0.5;
  int warps = 3;
  int iterations = 30;  // SOR sweeps per warp
  double sor_omega = 1.9;
  double presmooth_sigma = 0.8;
  double saturation_max = 8.0;  // px magnitude mapped to saturation 1

  void validate() const;
  friend bool operator==(const FlowParams&, const FlowParams&) = default;
};

Plane to_luminance(const Frame& frame);

/// Number of pyramid levels used for an h x w image.
int pyramid_levels(int height, int width, const FlowParams& params);

FlowField estimate_flow(const Frame& prev, const Frame& next, const FlowParams& params = {});

/// HSL encoding: channel 0 hue in [0,1), channel 1 saturation in [0,1], channel 2 lightness = 1.
Frame flow_to_hsl_image(const FlowField& flow, double saturation_max = FlowParams{}.saturation_max);

/// L frames in, L flow images out (the last one repeated so units align with RGB).
VideoClip flow_clip(const VideoClip& clip, const FlowParams& params = {});

}  // namespace lowres
