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

#include "lowres/vidprep.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

namespace lowres {

Frame::Frame(int h, int w, float fill) : height(h), width(w) {
  if (h <= 0 || w <= 0) throw std::invalid_argument("frame dims must be positive");
  pixels.assign(static_cast<std::size_t>(h) * w * 3, fill);
}

const char* resolution_name(Resolution r) { return r == Resolution::High ? "high" : "low"; }

Resolution parse_resolution(const std::string& s) {
  if (s == "high" || s == "HIGH") return Resolution::High;
  if (s == "low" || s == "LOW") return Resolution::Low;
  throw std::invalid_argument("unknown resolution tag '" + s + "'");
}

void validate_clip(const VideoClip& clip) {
  if (clip.frames.empty()) throw std::invalid_argument("clip '" + clip.source_id + "' has no frames");
  const int h = clip.frames.front().height;
  const int w = clip.frames.front().width;
  for (const Frame& f : clip.frames) {
    if (f.height != h || f.width != w || f.height <= 0 || f.width <= 0 ||
        f.pixels.size() != static_cast<std::size_t>(h) * w * 3) {
      throw std::invalid_argument("clip '" + clip.source_id + "' has inconsistent frame dims");
    }
    for (float v : f.pixels) {
      if (!std::isfinite(v)) throw std::invalid_argument("clip '" + clip.source_id + "' has non-finite pixels");
    }
  }
}

namespace {

// Sparse resampling matrix along one axis: out[i] = sum_k weight[k] * in[first + k].
struct AxisTaps {
  std::vector<int> first;
  std::vector<std::vector<double>> weights;
};

AxisTaps area_taps(int in, int out) {
  AxisTaps taps;
  const double scale = static_cast<double>(in) / out;
  for (int i = 0; i < out; ++i) {
    const double lo = i * scale;
    const double hi = (i + 1) * scale;
    const int first = static_cast<int>(std::floor(lo));
    const int last = std::min(in - 1, static_cast<int>(std::ceil(hi)) - 1);
    std::vector<double> w;
    for (int s = first; s <= last; ++s) {
      const double overlap = std::min<double>(hi, s + 1) - std::max<double>(lo, s);
      w.push_back(std::max(0.0, overlap) / scale);
    }
    taps.first.push_back(first);
    taps.weights.push_back(std::move(w));
  }
  return taps;
}

AxisTaps cubic_taps(int in, int out) {
  AxisTaps taps;
  const double scale = static_cast<double>(in) / out;
  for (int i = 0; i < out; ++i) {
    const double src = (i + 0.5) * scale - 0.5;
    const int base = static_cast<int>(std::floor(src));
    const auto w = cubic_weights(src - base);
    // Clamped taps fold their weight onto the edge sample.
    const int first = std::clamp(base - 1, 0, in - 1);
    const int last = std::clamp(base + 2, 0, in - 1);
    std::vector<double> folded(static_cast<std::size_t>(last - first + 1), 0.0);
    for (int k = 0; k < 4; ++k) {
      const int s = std::clamp(base - 1 + k, 0, in - 1);
      folded[static_cast<std::size_t>(s - first)] += w[static_cast<std::size_t>(k)];
    }
    taps.first.push_back(first);
    taps.weights.push_back(std::move(folded));
  }
  return taps;
}

Frame apply_separable(const Frame& frame, const AxisTaps& rows, const AxisTaps& cols) {
  const int out_h = static_cast<int>(rows.first.size());
  const int out_w = static_cast<int>(cols.first.size());
  // Horizontal pass into a double buffer, then vertical.
  std::vector<double> tmp(static_cast<std::size_t>(frame.height) * out_w * 3, 0.0);
  for (int y = 0; y < frame.height; ++y) {
    for (int x = 0; x < out_w; ++x) {
      const auto& w = cols.weights[static_cast<std::size_t>(x)];
      const int first = cols.first[static_cast<std::size_t>(x)];
      for (int c = 0; c < 3; ++c) {
        double acc = 0.0;
        for (std::size_t k = 0; k < w.size(); ++k) acc += w[k] * frame.at(y, first + static_cast<int>(k), c);
        tmp[(static_cast<std::size_t>(y) * out_w + x) * 3 + c] = acc;
      }
    }
  }
  Frame out(out_h, out_w);
  for (int y = 0; y < out_h; ++y) {
    const auto& w = rows.weights[static_cast<std::size_t>(y)];
    const int first = rows.first[static_cast<std::size_t>(y)];
    for (int x = 0; x < out_w; ++x) {
      for (int c = 0; c < 3; ++c) {
        double acc = 0.0;
        for (std::size_t k = 0; k < w.size(); ++k) {
          acc += w[k] * tmp[((static_cast<std::size_t>(first) + k) * out_w + x) * 3 + c];
        }
        out.at(y, x, c) = static_cast<float>(acc);
      }
    }
  }
  return out;
}

}  // namespace

Frame average_downsample(const Frame& frame, int out_h, int out_w) {
  if (out_h <= 0 || out_w <= 0) throw std::invalid_argument("average_downsample: output dims must be positive");
  if (out_h > frame.height || out_w > frame.width) {
    throw std::invalid_argument("average_downsample: output " + std::to_string(out_h) + "x" + std::to_string(out_w) +
                                " larger than input " + std::to_string(frame.height) + "x" +
                                std::to_string(frame.width));
  }
  return apply_separable(frame, area_taps(frame.height, out_h), area_taps(frame.width, out_w));
}

double cubic_kernel(double x) {
  constexpr double a = -0.5;
  x = std::abs(x);
  if (x <= 1.0) return ((a + 2.0) * x - (a + 3.0)) * x * x + 1.0;
  if (x < 2.0) return ((a * x - 5.0 * a) * x + 8.0 * a) * x - 4.0 * a;
  return 0.0;
}

std::array<double, 4> cubic_weights(double t) {
  return {cubic_kernel(1.0 + t), cubic_kernel(t), cubic_kernel(1.0 - t), cubic_kernel(2.0 - t)};
}

Frame bicubic_upsample(const Frame& frame, int out_h, int out_w) {
  if (out_h <= 0 || out_w <= 0) throw std::invalid_argument("bicubic_upsample: output dims must be positive");
  if (frame.height < 2 || frame.width < 2) throw std::invalid_argument("bicubic_upsample: input must be at least 2x2");
  return apply_separable(frame, cubic_taps(frame.height, out_h), cubic_taps(frame.width, out_w));
}

VideoClip make_lr_clip(const VideoClip& clip) {
  if (clip.resolution != Resolution::High) throw std::invalid_argument("make_lr_clip expects a HIGH clip");
  validate_clip(clip);
  VideoClip out;
  out.label = clip.label;
  out.resolution = Resolution::Low;
  out.source_id = clip.source_id;
  out.frames.reserve(clip.frames.size());
  for (const Frame& f : clip.frames) {
    Frame small = average_downsample(f, kLowResHeight, kLowResWidth);
    Frame up = bicubic_upsample(small, kNetworkSize, kNetworkSize);
    // Cubic overshoot can leave [0,1]; keep the pixel-range invariant.
    for (float& v : up.pixels) v = std::clamp(v, 0.0f, 1.0f);
    out.frames.push_back(std::move(up));
  }
  return out;
}

VideoClip resize_clip_to_network(const VideoClip& clip) {
  validate_clip(clip);
  VideoClip out = clip;
  if (clip.height() == kNetworkSize && clip.width() == kNetworkSize) return out;
  for (Frame& f : out.frames) f = average_downsample(f, kNetworkSize, kNetworkSize);
  return out;
}

std::vector<VideoUnit> unitize(const VideoClip& clip, int unit_length) {
  if (clip.frames.empty()) throw std::invalid_argument("unitize: empty clip");
  if (unit_length < 1) throw std::invalid_argument("unitize: unit length must be >= 1");
  const std::size_t len = clip.frames.size();
  const std::size_t delta = static_cast<std::size_t>(unit_length);
  const std::size_t count = (len + delta - 1) / delta;
  std::vector<VideoUnit> units(count);
  for (std::size_t t = 0; t < count; ++t) {
    VideoUnit& u = units[t];
    u.unit_index = static_cast<int>(t + 1);
    for (std::size_t k = 0; k < delta; ++k) {
      const std::size_t idx = t * delta + k;
      if (idx < len) {
        u.frames.push_back(clip.frames[idx]);
      } else {
        u.frames.push_back(clip.frames.back());
        ++u.padded_frames;
      }
    }
  }
  return units;
}

Tensor<float> unit_to_tensor(const VideoUnit& unit) {
  if (unit.frames.empty()) throw std::invalid_argument("unit_to_tensor: empty unit");
  const int h = unit.frames.front().height;
  const int w = unit.frames.front().width;
  const std::size_t frames = unit.frames.size();
  Tensor<float> t({3, frames, static_cast<std::size_t>(h), static_cast<std::size_t>(w)});
  const std::size_t plane = static_cast<std::size_t>(h) * w;
  for (std::size_t f = 0; f < frames; ++f) {
    const Frame& fr = unit.frames[f];
    if (fr.height != h || fr.width != w) throw std::invalid_argument("unit_to_tensor: ragged frames");
    for (std::size_t p = 0; p < plane; ++p) {
      for (std::size_t c = 0; c < 3; ++c) t[(c * frames + f) * plane + p] = fr.pixels[p * 3 + c];
    }
  }
  return t;
}

}  // namespace lowres
