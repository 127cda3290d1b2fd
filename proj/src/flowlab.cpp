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

#include "lowres/flowlab.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <stdexcept>
#include <string>

namespace lowres {

void FlowParams::validate() const {
  if (!(alpha > 0.0)) throw std::invalid_argument("flow.alpha must be positive");
  if (max_levels < 1) throw std::invalid_argument("flow.max_levels must be >= 1");
  if (min_level_size < 2) throw std::invalid_argument("flow.min_level_size must be >= 2");
  if (!(scale_factor > 0.0 && scale_factor < 1.0)) throw std::invalid_argument("flow.scale_factor must be in (0,1)");
  if (warps < 1 || iterations < 1) throw std::invalid_argument("flow.warps and flow.iterations must be >= 1");
  if (!(sor_omega > 0.0 && sor_omega < 2.0)) throw std::invalid_argument("flow.sor_omega must be in (0,2)");
  if (presmooth_sigma < 0.0) throw std::invalid_argument("flow.presmooth_sigma must be >= 0");
  if (!(saturation_max > 0.0)) throw std::invalid_argument("flow.saturation_max must be positive");
}

Plane to_luminance(const Frame& frame) {
  Plane out(frame.height, frame.width);
  for (std::size_t p = 0; p < out.values.size(); ++p) {
    const float* px = &frame.pixels[p * 3];
    out.values[p] = 0.299f * px[0] + 0.587f * px[1] + 0.114f * px[2];
  }
  return out;
}

namespace {

Plane gaussian_blur(const Plane& in, double sigma) {
  if (sigma <= 0.0) return in;
  const int radius = std::max(1, static_cast<int>(std::ceil(3.0 * sigma)));
  std::vector<double> kernel(static_cast<std::size_t>(2 * radius + 1));
  double sum = 0.0;
  for (int k = -radius; k <= radius; ++k) {
    kernel[static_cast<std::size_t>(k + radius)] = std::exp(-0.5 * k * k / (sigma * sigma));
    sum += kernel[static_cast<std::size_t>(k + radius)];
  }
  for (double& k : kernel) k /= sum;

  Plane tmp(in.height, in.width);
  for (int y = 0; y < in.height; ++y) {
    for (int x = 0; x < in.width; ++x) {
      double acc = 0.0;
      for (int k = -radius; k <= radius; ++k) {
        acc += kernel[static_cast<std::size_t>(k + radius)] * in.at(y, std::clamp(x + k, 0, in.width - 1));
      }
      tmp.at(y, x) = static_cast<float>(acc);
    }
  }
  Plane out(in.height, in.width);
  for (int y = 0; y < in.height; ++y) {
    for (int x = 0; x < in.width; ++x) {
      double acc = 0.0;
      for (int k = -radius; k <= radius; ++k) {
        acc += kernel[static_cast<std::size_t>(k + radius)] * tmp.at(std::clamp(y + k, 0, in.height - 1), x);
      }
      out.at(y, x) = static_cast<float>(acc);
    }
  }
  return out;
}

float sample_bilinear(const Plane& p, double y, double x) {
  y = std::clamp(y, 0.0, static_cast<double>(p.height - 1));
  x = std::clamp(x, 0.0, static_cast<double>(p.width - 1));
  const int y0 = static_cast<int>(std::floor(y));
  const int x0 = static_cast<int>(std::floor(x));
  const int y1 = std::min(y0 + 1, p.height - 1);
  const int x1 = std::min(x0 + 1, p.width - 1);
  const double fy = y - y0;
  const double fx = x - x0;
  const double top = (1.0 - fx) * p.at(y0, x0) + fx * p.at(y0, x1);
  const double bottom = (1.0 - fx) * p.at(y1, x0) + fx * p.at(y1, x1);
  return static_cast<float>((1.0 - fy) * top + fy * bottom);
}

Plane resize_bilinear(const Plane& in, int out_h, int out_w) {
  Plane out(out_h, out_w);
  const double sy = static_cast<double>(in.height) / out_h;
  const double sx = static_cast<double>(in.width) / out_w;
  for (int y = 0; y < out_h; ++y) {
    for (int x = 0; x < out_w; ++x) {
      out.at(y, x) = sample_bilinear(in, (y + 0.5) * sy - 0.5, (x + 0.5) * sx - 0.5);
    }
  }
  return out;
}

Plane downscale(const Plane& in, int out_h, int out_w, double factor) {
  const double sigma = 0.6 * std::sqrt(1.0 / (factor * factor) - 1.0);
  return resize_bilinear(gaussian_blur(in, sigma), out_h, out_w);
}

void gradients(const Plane& in, Plane& gx, Plane& gy) {
  gx = Plane(in.height, in.width);
  gy = Plane(in.height, in.width);
  for (int y = 0; y < in.height; ++y) {
    const int ym = std::max(y - 1, 0);
    const int yp = std::min(y + 1, in.height - 1);
    for (int x = 0; x < in.width; ++x) {
      const int xm = std::max(x - 1, 0);
      const int xp = std::min(x + 1, in.width - 1);
      gx.at(y, x) = 0.5f * (in.at(y, xp) - in.at(y, xm));
      gy.at(y, x) = 0.5f * (in.at(yp, x) - in.at(ym, x));
    }
  }
}

Plane warp(const Plane& in, const Plane& u, const Plane& v) {
  Plane out(in.height, in.width);
  for (int y = 0; y < in.height; ++y) {
    for (int x = 0; x < in.width; ++x) out.at(y, x) = sample_bilinear(in, y + v.at(y, x), x + u.at(y, x));
  }
  return out;
}

// Warped-linearized Horn-Schunck at a single pyramid level; refines u, v in place.
void refine_level(const Plane& i1, const Plane& i2, Plane& u, Plane& v, const FlowParams& params) {
  const int h = i1.height;
  const int w = i1.width;
  const double a2 = params.alpha * params.alpha;
  const double omega = params.sor_omega;
  Plane i2x, i2y;
  gradients(i2, i2x, i2y);

  std::vector<double> ix(u.values.size()), iy(u.values.size()), c(u.values.size());
  std::vector<double> inv_du(u.values.size()), inv_dv(u.values.size());
  for (int wi = 0; wi < params.warps; ++wi) {
    const Plane i2w = warp(i2, u, v);
    const Plane i2xw = warp(i2x, u, v);
    const Plane i2yw = warp(i2y, u, v);
    for (std::size_t p = 0; p < ix.size(); ++p) {
      ix[p] = i2xw.values[p];
      iy[p] = i2yw.values[p];
      c[p] = i2w.values[p] - i1.values[p] - ix[p] * u.values[p] - iy[p] * v.values[p];
      inv_du[p] = 1.0 / (a2 + ix[p] * ix[p]);
      inv_dv[p] = 1.0 / (a2 + iy[p] * iy[p]);
    }
    float* U = u.values.data();
    float* V = v.values.data();
    auto relax = [&](std::size_t p, std::size_t n, std::size_t s_, std::size_t w_, std::size_t e, std::size_t nw,
                     std::size_t ne, std::size_t sw, std::size_t se) {
      const double ubar = (U[n] + U[s_] + U[w_] + U[e]) * (1.0 / 6.0) + (U[nw] + U[ne] + U[sw] + U[se]) * (1.0 / 12.0);
      const double vbar = (V[n] + V[s_] + V[w_] + V[e]) * (1.0 / 6.0) + (V[nw] + V[ne] + V[sw] + V[se]) * (1.0 / 12.0);
      const double un = (a2 * ubar - ix[p] * (iy[p] * V[p] + c[p])) * inv_du[p];
      const double ur = (1.0 - omega) * U[p] + omega * un;
      U[p] = static_cast<float>(ur);
      const double vn = (a2 * vbar - iy[p] * (ix[p] * ur + c[p])) * inv_dv[p];
      V[p] = static_cast<float>((1.0 - omega) * V[p] + omega * vn);
    };
    const auto idx = [w](int y, int x) { return static_cast<std::size_t>(y) * w + x; };
    auto relax_clamped = [&](int y, int x) {
      const int ym = std::max(y - 1, 0), yp = std::min(y + 1, h - 1);
      const int xm = std::max(x - 1, 0), xp = std::min(x + 1, w - 1);
      relax(idx(y, x), idx(ym, x), idx(yp, x), idx(y, xm), idx(y, xp), idx(ym, xm), idx(ym, xp), idx(yp, xm),
            idx(yp, xp));
    };
    const std::size_t W = static_cast<std::size_t>(w);
    for (int it = 0; it < params.iterations; ++it) {
      for (int y = 0; y < h; ++y) {
        if (y == 0 || y == h - 1) {
          for (int x = 0; x < w; ++x) relax_clamped(y, x);
          continue;
        }
        relax_clamped(y, 0);
        for (int x = 1; x < w - 1; ++x) {
          const std::size_t p = idx(y, x);
          relax(p, p - W, p + W, p - 1, p + 1, p - W - 1, p - W + 1, p + W - 1, p + W + 1);
        }
        relax_clamped(y, w - 1);
      }
    }
  }
}

void require_finite(const Frame& f, const char* which) {
  for (float p : f.pixels) {
    if (!std::isfinite(p)) throw std::invalid_argument(std::string("estimate_flow: non-finite pixel in ") + which);
  }
}

}  // namespace

int pyramid_levels(int height, int width, const FlowParams& params) {
  int levels = 1;
  double h = height;
  double w = width;
  while (levels < params.max_levels) {
    h = std::round(h * params.scale_factor);
    w = std::round(w * params.scale_factor);
    if (std::min(h, w) < params.min_level_size) break;
    ++levels;
  }
  return levels;
}

FlowField estimate_flow(const Frame& prev, const Frame& next, const FlowParams& params) {
  params.validate();
  if (prev.height != next.height || prev.width != next.width) {
    throw std::invalid_argument("estimate_flow: frame dims differ");
  }
  if (std::min(prev.height, prev.width) < params.min_level_size) {
    throw std::invalid_argument("estimate_flow: frames smaller than " + std::to_string(params.min_level_size) + " px");
  }
  require_finite(prev, "prev");
  require_finite(next, "next");

  const int levels = pyramid_levels(prev.height, prev.width, params);
  std::vector<Plane> p1{gaussian_blur(to_luminance(prev), params.presmooth_sigma)};
  std::vector<Plane> p2{gaussian_blur(to_luminance(next), params.presmooth_sigma)};
  for (int l = 1; l < levels; ++l) {
    const int h = static_cast<int>(std::round(p1.back().height * params.scale_factor));
    const int w = static_cast<int>(std::round(p1.back().width * params.scale_factor));
    p1.push_back(downscale(p1.back(), h, w, params.scale_factor));
    p2.push_back(downscale(p2.back(), h, w, params.scale_factor));
  }

  Plane u(p1.back().height, p1.back().width);
  Plane v(p1.back().height, p1.back().width);
  for (int l = levels - 1; l >= 0; --l) {
    const Plane& i1 = p1[static_cast<std::size_t>(l)];
    if (u.height != i1.height || u.width != i1.width) {
      const float sx = static_cast<float>(i1.width) / u.width;
      const float sy = static_cast<float>(i1.height) / u.height;
      u = resize_bilinear(u, i1.height, i1.width);
      v = resize_bilinear(v, i1.height, i1.width);
      for (float& x : u.values) x *= sx;
      for (float& y : v.values) y *= sy;
    }
    refine_level(i1, p2[static_cast<std::size_t>(l)], u, v, params);
  }
  return {std::move(u), std::move(v)};
}

Frame flow_to_hsl_image(const FlowField& flow, double saturation_max) {
  if (!(saturation_max > 0.0)) throw std::invalid_argument("flow_to_hsl_image: saturation_max must be positive");
  if (flow.u.height != flow.v.height || flow.u.width != flow.v.width) {
    throw std::invalid_argument("flow_to_hsl_image: u/v dims differ");
  }
  Frame out(flow.u.height, flow.u.width);
  constexpr double two_pi = 2.0 * std::numbers::pi;
  for (std::size_t p = 0; p < flow.u.values.size(); ++p) {
    const double u = flow.u.values[p];
    const double v = flow.v.values[p];
    if (!std::isfinite(u) || !std::isfinite(v)) throw std::invalid_argument("flow_to_hsl_image: non-finite flow");
    double hue = 0.0;
    double sat = 0.0;
    if (u != 0.0 || v != 0.0) {
      hue = std::atan2(v, u) / two_pi;
      if (hue < 0.0) hue += 1.0;
      if (hue >= 1.0) hue -= 1.0;
      sat = std::min(1.0, std::hypot(u, v) / saturation_max);
    }
    out.pixels[p * 3 + 0] = static_cast<float>(hue);
    out.pixels[p * 3 + 1] = static_cast<float>(sat);
    out.pixels[p * 3 + 2] = 1.0f;
  }
  // float rounding can land hue exactly on 1.0
  for (std::size_t p = 0; p < flow.u.values.size(); ++p) {
    if (out.pixels[p * 3] >= 1.0f) out.pixels[p * 3] = 0.0f;
  }
  return out;
}

VideoClip flow_clip(const VideoClip& clip, const FlowParams& params) {
  if (clip.frames.size() < 2) throw std::invalid_argument("flow_clip: clip needs at least 2 frames");
  validate_clip(clip);
  if (clip.height() != kNetworkSize || clip.width() != kNetworkSize) {
    throw std::invalid_argument("flow_clip: frames must be 112x112, got " + std::to_string(clip.height()) + "x" +
                                std::to_string(clip.width()));
  }
  VideoClip out;
  out.label = clip.label;
  out.resolution = clip.resolution;
  out.source_id = clip.source_id;
  out.frames.reserve(clip.frames.size());
  for (std::size_t t = 0; t + 1 < clip.frames.size(); ++t) {
    out.frames.push_back(
        flow_to_hsl_image(estimate_flow(clip.frames[t], clip.frames[t + 1], params), params.saturation_max));
  }
  out.frames.push_back(out.frames.back());
  return out;
}

}  // namespace lowres
