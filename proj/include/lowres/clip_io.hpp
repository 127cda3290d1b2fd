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

#include <filesystem>
#include <string>

#include "lowres/vidprep.hpp"

namespace lowres {

/// Rounds every pixel to the nearest of 256 levels (what an 8-bit frame file stores).
Frame quantize_frame(const Frame& frame);
VideoClip quantize_clip(const VideoClip& clip);

/// Binary PPM (P6). Writes 8-bit; reads maxval up to 65535.
void write_ppm(const std::filesystem::path& path, const Frame& frame);
Frame read_ppm(const std::filesystem::path& path);

/// Frames as dir/frame_00001.ppm, frame_00002.ppm, ...
void save_clip(const std::filesystem::path& dir, const VideoClip& clip);
VideoClip load_clip(const std::filesystem::path& dir, int label, Resolution resolution, const std::string& source_id);

}  // namespace lowres
