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

#include <gtest/gtest.h>

#include <cmath>
#include <numeric>

#include "lowres/vidprep.hpp"
#include "test_util.hpp"

namespace lowres {
namespace {

using testing::random_frame;

// Naive block mean with exact integer blocks.
Frame block_mean_oracle(const Frame& in, int out_h, int out_w) {
  const int bh = in.height / out_h, bw = in.width / out_w;
  Frame out(out_h, out_w);
  for (int y = 0; y < out_h; ++y)
    for (int x = 0; x < out_w; ++x)
      for (int c = 0; c < 3; ++c) {
        double s = 0.0;
        for (int dy = 0; dy < bh; ++dy)
          for (int dx = 0; dx < bw; ++dx) s += in.at(y * bh + dy, x * bw + dx, c);
        out.at(y, x, c) = static_cast<float>(s / (bh * bw));
      }
  return out;
}

// Area averaging for any size pair: replicate every source pixel out_h x out_w times, then take
// exact in_h x in_w block means of the replicated grid.
Frame replicated_area_oracle(const Frame& in, int out_h, int out_w) {
  Frame out(out_h, out_w);
  for (int y = 0; y < out_h; ++y)
    for (int x = 0; x < out_w; ++x)
      for (int c = 0; c < 3; ++c) {
        double s = 0.0;
        for (int sy = y * in.height; sy < (y + 1) * in.height; ++sy)
          for (int sx = x * in.width; sx < (x + 1) * in.width; ++sx) s += in.at(sy / out_h, sx / out_w, c);
        out.at(y, x, c) = static_cast<float>(s / (static_cast<double>(in.height) * in.width));
      }
  return out;
}

double frame_mean(const Frame& f) {
  return std::accumulate(f.pixels.begin(), f.pixels.end(), 0.0) / static_cast<double>(f.pixels.size());
}

double max_diff(const Frame& a, const Frame& b) {
  double m = 0.0;
  for (std::size_t i = 0; i < a.pixels.size(); ++i) m = std::max(m, std::abs(double(a.pixels[i]) - b.pixels[i]));
  return m;
}

TEST(AverageDownsample, ConstantFrameStaysConstant) {
  const Frame f(240, 320, 0.7f);
  const Frame out = average_downsample(f, 12, 16);
  ASSERT_EQ(out.height, 12);
  ASSERT_EQ(out.width, 16);
  for (float v : out.pixels) EXPECT_NEAR(v, 0.7f, 1e-6);
}

TEST(AverageDownsample, TwoByTwoMean) {
  Frame f(2, 2);
  const float vals[] = {0, 1, 2, 3};
  for (int i = 0; i < 4; ++i)
    for (int c = 0; c < 3; ++c) f.at(i / 2, i % 2, c) = vals[i];
  const Frame out = average_downsample(f, 1, 1);
  for (float v : out.pixels) EXPECT_FLOAT_EQ(v, 1.5f);
}

TEST(AverageDownsample, MatchesBlockMeanOracle) {
  for (std::uint64_t seed : {1u, 2u, 3u}) {
    const Frame f = random_frame(240, 320, seed);
    const Frame out = average_downsample(f, 12, 16);
    EXPECT_LT(max_diff(out, block_mean_oracle(f, 12, 16)), 1e-6);
    EXPECT_LT(std::abs(frame_mean(out) - frame_mean(f)), 1e-6);
  }
}

TEST(AverageDownsample, FractionalBlocksMatchAreaOracle) {
  const Frame f = random_frame(23, 17, 9);
  for (auto [oh, ow] : {std::pair{7, 5}, std::pair{10, 16}, std::pair{23, 3}, std::pair{1, 1}}) {
    EXPECT_LT(max_diff(average_downsample(f, oh, ow), replicated_area_oracle(f, oh, ow)), 1e-6) << oh << "x" << ow;
  }
}

TEST(AverageDownsample, RejectsBadDims) {
  const Frame f(10, 10);
  EXPECT_THROW(average_downsample(f, 0, 5), std::invalid_argument);
  EXPECT_THROW(average_downsample(f, 5, -1), std::invalid_argument);
  EXPECT_THROW(average_downsample(f, 11, 5), std::invalid_argument);
  EXPECT_THROW(average_downsample(f, 5, 12), std::invalid_argument);
}

TEST(CubicKernel, WeightsAtHalfOffset) {
  const auto w = cubic_weights(0.5);
  EXPECT_DOUBLE_EQ(w[0], -0.0625);
  EXPECT_DOUBLE_EQ(w[1], 0.5625);
  EXPECT_DOUBLE_EQ(w[2], 0.5625);
  EXPECT_DOUBLE_EQ(w[3], -0.0625);
}

TEST(CubicKernel, InterpolatesAndSumsToOne) {
  EXPECT_DOUBLE_EQ(cubic_kernel(0.0), 1.0);
  EXPECT_DOUBLE_EQ(cubic_kernel(1.0), 0.0);
  EXPECT_DOUBLE_EQ(cubic_kernel(2.0), 0.0);
  EXPECT_DOUBLE_EQ(cubic_kernel(2.5), 0.0);
  EXPECT_DOUBLE_EQ(cubic_kernel(-0.5), cubic_kernel(0.5));
  for (double t = 0.0; t < 1.0; t += 0.0625) {
    const auto w = cubic_weights(t);
    EXPECT_NEAR(w[0] + w[1] + w[2] + w[3], 1.0, 1e-15);
    // First moment: the kernel reproduces linear signals.
    EXPECT_NEAR(-1 * w[0] + 0 * w[1] + 1 * w[2] + 2 * w[3], t, 1e-15);
  }
}

TEST(BicubicUpsample, ConstantFrameStaysConstant) {
  const Frame f(12, 16, 0.3f);
  const Frame out = bicubic_upsample(f, 112, 112);
  for (float v : out.pixels) EXPECT_NEAR(v, 0.3f, 1e-6);
}

TEST(BicubicUpsample, LinearRampReproducedInInterior) {
  Frame f(12, 16);
  for (int y = 0; y < 12; ++y)
    for (int x = 0; x < 16; ++x)
      for (int c = 0; c < 3; ++c) f.at(y, x, c) = 0.05f * x + 0.1f;
  const Frame out = bicubic_upsample(f, 112, 112);
  const double scale = 16.0 / 112.0;
  double worst = 0.0;
  for (int y = 0; y < 112; ++y)
    for (int x = 0; x < 112; ++x) {
      const double src = (x + 0.5) * scale - 0.5;
      if (src < 1.0 || src > 14.0) continue;  // taps would touch the clamped border
      worst = std::max(worst, std::abs(out.at(y, x, 0) - (0.05 * src + 0.1)));
    }
  EXPECT_LT(worst, 1e-6);
}

// Direct per-pixel evaluation with clamped taps.
Frame bicubic_oracle(const Frame& in, int out_h, int out_w) {
  auto k = [](double x) {
    x = std::abs(x);
    const double a = -0.5;
    if (x < 1) return (a + 2) * x * x * x - (a + 3) * x * x + 1;
    if (x < 2) return a * x * x * x - 5 * a * x * x + 8 * a * x - 4 * a;
    return 0.0;
  };
  Frame out(out_h, out_w);
  for (int y = 0; y < out_h; ++y)
    for (int x = 0; x < out_w; ++x) {
      const double sy = (y + 0.5) * in.height / out_h - 0.5;
      const double sx = (x + 0.5) * in.width / out_w - 0.5;
      const int y0 = static_cast<int>(std::floor(sy)), x0 = static_cast<int>(std::floor(sx));
      for (int c = 0; c < 3; ++c) {
        double s = 0.0;
        for (int j = y0 - 1; j <= y0 + 2; ++j)
          for (int i = x0 - 1; i <= x0 + 2; ++i) {
            const int cj = std::clamp(j, 0, in.height - 1), ci = std::clamp(i, 0, in.width - 1);
            s += k(sy - j) * k(sx - i) * in.at(cj, ci, c);
          }
        out.at(y, x, c) = static_cast<float>(s);
      }
    }
  return out;
}

TEST(BicubicUpsample, MatchesDirectEvaluation) {
  const Frame f = random_frame(12, 16, 4);
  EXPECT_LT(max_diff(bicubic_upsample(f, 112, 112), bicubic_oracle(f, 112, 112)), 1e-5);
  const Frame g = random_frame(5, 3, 5);
  EXPECT_LT(max_diff(bicubic_upsample(g, 9, 13), bicubic_oracle(g, 9, 13)), 1e-5);
}

TEST(BicubicUpsample, RejectsBadDims) {
  EXPECT_THROW(bicubic_upsample(Frame(12, 16), 0, 10), std::invalid_argument);
  EXPECT_THROW(bicubic_upsample(Frame(1, 16), 10, 10), std::invalid_argument);
}

VideoClip make_clip(int frames, int h, int w, std::uint64_t seed) {
  VideoClip c;
  c.label = 2;
  c.source_id = "clip";
  for (int i = 0; i < frames; ++i) c.frames.push_back(random_frame(h, w, seed + i));
  return c;
}

TEST(MakeLrClip, ShapeLabelAndTag) {
  const VideoClip hr = make_clip(32, 240, 320, 10);
  const VideoClip lr = make_lr_clip(hr);
  EXPECT_EQ(lr.frames.size(), 32u);
  EXPECT_EQ(lr.height(), 112);
  EXPECT_EQ(lr.width(), 112);
  EXPECT_EQ(lr.label, 2);
  EXPECT_EQ(lr.resolution, Resolution::Low);
  EXPECT_EQ(make_lr_clip(hr).frames, lr.frames);  // deterministic
}

TEST(MakeLrClip, ConstantClipStaysConstant) {
  VideoClip hr;
  hr.frames.assign(3, Frame(240, 320, 0.42f));
  for (const auto& f : make_lr_clip(hr).frames)
    for (float v : f.pixels) EXPECT_NEAR(v, 0.42f, 1e-6);
}

TEST(MakeLrClip, CarriesOnlyTheLowResolutionInformation) {
  // Two HIGH frames with identical 20x20 block means must degrade to the same LOW frame.
  VideoClip a = make_clip(1, 240, 320, 20);
  VideoClip b = a;
  Frame& fb = b.frames[0];
  for (int y = 0; y < 240; y += 2)
    for (int x = 0; x < 320; x += 2)
      for (int c = 0; c < 3; ++c) {
        // Zero-mean perturbation inside each 2x2 cell keeps every 20x20 mean unchanged.
        const float d = 0.01f;
        fb.at(y, x, c) += d;
        fb.at(y + 1, x + 1, c) += d;
        fb.at(y, x + 1, c) -= d;
        fb.at(y + 1, x, c) -= d;
      }
  EXPECT_LT(max_diff(make_lr_clip(a).frames[0], make_lr_clip(b).frames[0]), 1e-6);
}

TEST(MakeLrClip, RoundTripConsistencyIsLogged) {
  const VideoClip hr = make_clip(2, 240, 320, 30);
  const VideoClip lr = make_lr_clip(hr);
  double worst = 0.0;
  for (std::size_t i = 0; i < hr.frames.size(); ++i) {
    const Frame small = average_downsample(hr.frames[i], 12, 16);
    worst = std::max(worst, max_diff(average_downsample(lr.frames[i], 12, 16), small));
  }
  RecordProperty("lr_roundtrip_max_abs_diff", std::to_string(worst));
  std::printf("LOW clip re-downsampled vs 12x16 intermediate: max abs diff %.4f\n", worst);
}

TEST(MakeLrClip, RejectsLowInput) {
  VideoClip lr = make_clip(1, 112, 112, 1);
  lr.resolution = Resolution::Low;
  EXPECT_THROW(make_lr_clip(lr), std::invalid_argument);
}

TEST(Unitize, ThirtyTwoFramesGiveTwoUnits) {
  const VideoClip c = make_clip(32, 4, 4, 1);
  const auto units = unitize(c, 16);
  ASSERT_EQ(units.size(), 2u);
  for (int t = 0; t < 2; ++t) {
    EXPECT_EQ(units[t].unit_index, t + 1);
    EXPECT_EQ(units[t].padded_frames, 0);
    for (int i = 0; i < 16; ++i) EXPECT_EQ(units[t].frames[i], c.frames[t * 16 + i]);
  }
}

TEST(Unitize, SingleUnitEqualsClip) {
  const VideoClip c = make_clip(16, 4, 4, 2);
  const auto units = unitize(c, 16);
  ASSERT_EQ(units.size(), 1u);
  EXPECT_EQ(units[0].frames, c.frames);
}

TEST(Unitize, TailIsPaddedWithLastFrame) {
  const VideoClip c = make_clip(40, 4, 4, 3);
  const auto units = unitize(c, 16);
  ASSERT_EQ(units.size(), 3u);
  EXPECT_EQ(units[2].padded_frames, 8);
  for (int i = 0; i < 8; ++i) EXPECT_EQ(units[2].frames[i], c.frames[32 + i]);
  for (int i = 8; i < 16; ++i) EXPECT_EQ(units[2].frames[i], c.frames[39]);
}

TEST(Unitize, ConcatenationReconstructsClip) {
  for (int L : {1, 7, 16, 17, 33, 48}) {
    const VideoClip c = make_clip(L, 3, 3, 40);
    std::vector<Frame> joined;
    for (const auto& u : unitize(c, 16)) {
      EXPECT_EQ(u.frames.size(), 16u);
      joined.insert(joined.end(), u.frames.begin(), u.frames.end() - u.padded_frames);
    }
    EXPECT_EQ(joined, c.frames) << "L=" << L;
    EXPECT_EQ(unitize(c, 16).size(), static_cast<std::size_t>((L + 15) / 16));
  }
}

TEST(Unitize, RejectsEmptyClip) {
  EXPECT_THROW(unitize(VideoClip{}, 16), std::invalid_argument);
  EXPECT_THROW(unitize(make_clip(4, 2, 2, 1), 0), std::invalid_argument);
}

TEST(UnitToTensor, ChannelFirstLayout) {
  const VideoClip c = make_clip(16, 5, 6, 50);
  const auto t = unit_to_tensor(unitize(c, 16)[0]);
  ASSERT_EQ(t.dims(), (Dims{3, 16, 5, 6}));
  for (int ch = 0; ch < 3; ++ch)
    for (int f = 0; f < 16; ++f)
      EXPECT_EQ(t[((static_cast<std::size_t>(ch) * 16 + f) * 5 + 4) * 6 + 2], c.frames[f].at(4, 2, ch));
}

}  // namespace
}  // namespace lowres
