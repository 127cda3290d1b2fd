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

#include "lowres/clip_io.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>
#include <cstdio>

#include "lowres/checkpoint.hpp"

namespace lowres {

namespace {

std::string frame_name(std::size_t index) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "frame_%05zu.ppm", index);
  return buf;
}

}  // namespace

Frame quantize_frame(const Frame& frame) {
  Frame out = frame;
  for (float& v : out.pixels) v = static_cast<float>(std::lround(std::clamp(v, 0.0f, 1.0f) * 255.0f)) / 255.0f;
  return out;
}

VideoClip quantize_clip(const VideoClip& clip) {
  VideoClip out = clip;
  for (auto& f : out.frames) f = quantize_frame(f);
  return out;
}

void write_ppm(const std::filesystem::path& path, const Frame& frame) {
  const std::string header = "P6\n" + std::to_string(frame.width) + " " + std::to_string(frame.height) + "\n255\n";
  std::vector<std::uint8_t> bytes(header.begin(), header.end());
  bytes.reserve(bytes.size() + frame.pixels.size());
  for (float v : frame.pixels) {
    bytes.push_back(static_cast<std::uint8_t>(std::lround(std::clamp(v, 0.0f, 1.0f) * 255.0f)));
  }
  write_file_bytes(path, bytes);
}

Frame read_ppm(const std::filesystem::path& path) {
  const std::vector<std::uint8_t> bytes = read_file_bytes(path);
  std::size_t pos = 0;
  auto fail = [&](const std::string& why) -> IoError { return IoError(path, "bad PPM: " + why); };
  auto skip_space = [&] {
    while (pos < bytes.size()) {
      if (bytes[pos] == '#') {
        while (pos < bytes.size() && bytes[pos] != '\n') ++pos;
      } else if (std::isspace(bytes[pos])) {
        ++pos;
      } else {
        break;
      }
    }
  };
  auto read_int = [&] {
    skip_space();
    long value = 0;
    std::size_t digits = 0;
    while (pos < bytes.size() && std::isdigit(bytes[pos])) {
      value = value * 10 + (bytes[pos] - '0');
      if (value > 1'000'000) throw fail("header value too large");
      ++pos;
      ++digits;
    }
    if (digits == 0) throw fail("expected integer");
    return static_cast<int>(value);
  };
  if (bytes.size() < 2 || bytes[0] != 'P' || bytes[1] != '6') throw fail("missing P6 magic");
  pos = 2;
  const int w = read_int();
  const int h = read_int();
  const int maxval = read_int();
  if (w <= 0 || h <= 0 || maxval <= 0 || maxval > 65535) throw fail("invalid header");
  ++pos;  // single whitespace before raster
  const std::size_t samples = static_cast<std::size_t>(w) * h * 3;
  const std::size_t width_bytes = maxval < 256 ? 1 : 2;
  if (bytes.size() < pos + samples * width_bytes) throw fail("truncated raster");
  Frame frame(h, w);
  for (std::size_t i = 0; i < samples; ++i) {
    unsigned v = bytes[pos + i * width_bytes];
    if (width_bytes == 2) v = (v << 8) | bytes[pos + i * 2 + 1];
    frame.pixels[i] = static_cast<float>(v) / static_cast<float>(maxval);
  }
  return frame;
}

void save_clip(const std::filesystem::path& dir, const VideoClip& clip) {
  validate_clip(clip);
  for (std::size_t i = 0; i < clip.frames.size(); ++i) write_ppm(dir / frame_name(i + 1), clip.frames[i]);
}

VideoClip load_clip(const std::filesystem::path& dir, int label, Resolution resolution, const std::string& source_id) {
  VideoClip clip;
  clip.label = label;
  clip.resolution = resolution;
  clip.source_id = source_id;
  for (std::size_t i = 1;; ++i) {
    const auto path = dir / frame_name(i);
    if (!std::filesystem::exists(path)) break;
    clip.frames.push_back(read_ppm(path));
  }
  if (clip.frames.empty()) throw IoError(dir, "no frames found");
  validate_clip(clip);
  return clip;
}

}  // namespace lowres
