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
#include <string>
#include <vector>

#include "lowres/tensor.hpp"

namespace lowres {

inline constexpr int kLowResHeight = 12;
inline constexpr int kLowResWidth = 16;
inline constexpr int kNetworkSize = 112;
inline constexpr int kDefaultUnitLength = 16;

/// Height x width x 3 float image, row-major, channel-last, values in [0,1].
struct Frame {
  int height = 0;
  int width = 0;
  std::vector<float> pixels;

  Frame() = default;
  Frame(int h, int w, float fill = 0.0f);

  float& at(int y, int x, int c) { return pixels[(static_cast<std::size_t>(y) * width + x) * 3 + c]; }
  float at(int y, int x, int c) const { return pixels[(static_cast<std::size_t>(y) * width + x) * 3 + c]; }

  friend bool operator==(const Frame&, const Frame&) = default;
};

enum class Resolution { High, Low };

const char* resolution_name(Resolution r);
Resolution parse_resolution(const std::string& s);

struct VideoClip {
  std::vector<Frame> frames;
  int label = 0;
  Resolution resolution = Resolution::High;
  std::string source_id;

  int height() const { return frames.empty() ? 0 : frames.front().height; }
  int width() const { return frames.empty() ? 0 : frames.front().width; }
};

struct VideoUnit {
  std::vector<Frame> frames;
  int unit_index = 0;  // 1-based position within the clip
  int padded_frames = 0;
};

/// Throws std::invalid_argument unless every frame has the same positive dims and finite pixels.
void validate_clip(const VideoClip& clip);

/// Area-weighted mean over (possibly fractional) source blocks.
Frame average_downsample(const Frame& frame, int out_h, int out_w);

/// Cubic convolution kernel with a = -0.5 (Catmull-Rom).
double cubic_kernel(double x);
/// The four tap weights for a sample at fractional offset t in [0,1) past the left-center tap.
std::array<double, 4> cubic_weights(double t);

/// Separable bicubic resampling, half-pixel centers, edge-clamped taps.
Frame bicubic_upsample(const Frame& frame, int out_h, int out_w);

/// Degrades a HIGH clip to the 12x16 information budget and brings it back to 112x112.
VideoClip make_lr_clip(const VideoClip& clip);

/// Brings a HIGH clip to the network input size with area averaging (no degradation).
VideoClip resize_clip_to_network(const VideoClip& clip);

/// Non-overlapping units of `unit_length` frames; the tail unit repeats the last frame.
std::vector<VideoUnit> unitize(const VideoClip& clip, int unit_length);

/// Packs a unit as a [3, frames, H, W] tensor.
Tensor<float> unit_to_tensor(const VideoUnit& unit);

}  // namespace lowres
