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
#include <filesystem>
#include <string>
#include <utility>
#include <vector>

#include "lowres/vidprep.hpp"

namespace lowres {

enum class MotionClass { MoveLeft, MoveRight, MoveUp, MoveDown, Grow, Shrink, Bounce, Spin };

const char* motion_name(MotionClass m);
MotionClass parse_motion(const std::string& s);
/// MOVE_LEFT, MOVE_RIGHT, MOVE_UP, MOVE_DOWN.
std::vector<MotionClass> directional_classes();

struct SynthSpec {
  std::vector<MotionClass> classes = directional_classes();
  int clips_per_class = 10;
  int frames_per_clip = 32;
  int height = 240;
  int width = 320;
  int unit_length = kDefaultUnitLength;
  double sprite_min = 48.0;  // sprite extent, px
  double sprite_max = 72.0;
  double speed_min = 4.0;  // px per frame
  double speed_max = 5.0;
  double texture_contrast = 0.35;
  double class_hue_bias = 0.0;  // 0: sprite hue ignores the class; 1: one fixed hue per class
  double noise = 0.01;          // Gaussian pixel noise sigma
  std::uint64_t seed = 1;

  void validate() const;
  /// Stable one-line text form; the manifest header hashes it.
  std::string canonical() const;
  std::uint64_t hash() const;

  friend bool operator==(const SynthSpec&, const SynthSpec&) = default;
};

/// HIGH-resolution clip `index` of class `motion`, quantized to 8 bits; label = position of
/// `motion` in spec.classes.
VideoClip render_clip(const SynthSpec& spec, MotionClass motion, int index);

struct RenderedClip {
  std::string stem;
  int label = 0;
  VideoClip high;
};

/// Every clip of the spec, class-major. Rendering order does not affect pixels.
std::vector<RenderedClip> generate_clips(const SynthSpec& spec, int threads = 1);

std::string clip_stem_for(MotionClass motion, int index);
std::string clip_id_for(const std::string& stem, Resolution resolution);
/// Strips the "-hr" / "-lr" suffix.
std::string clip_stem(const std::string& clip_id);

struct ManifestEntry {
  std::string clip_id;
  int label = 0;
  std::string path;  // relative to the manifest's directory
  std::string split = "none";
  Resolution resolution = Resolution::High;

  friend bool operator==(const ManifestEntry&, const ManifestEntry&) = default;
};

struct DatasetManifest {
  std::uint64_t spec_hash = 0;
  std::vector<std::string> class_names;
  std::vector<ManifestEntry> entries;

  void validate() const;
  std::vector<ManifestEntry> select(const std::string& split, Resolution resolution) const;

  friend bool operator==(const DatasetManifest&, const DatasetManifest&) = default;
};

/// Renders every clip, writes HIGH frames to root/clips/<stem>-hr and LOW frames to
/// root/clips/<stem>-lr, and writes root/manifest.tsv (split tag "none").
DatasetManifest generate_dataset(const SynthSpec& spec, const std::filesystem::path& root, int threads = 1);

void write_manifest(const std::filesystem::path& path, const DatasetManifest& manifest);
DatasetManifest read_manifest(const std::filesystem::path& path);

/// Stratified by class over clip stems (a HIGH clip and its LOW sibling always land together).
/// Throws std::invalid_argument for a fraction outside (0,1) or a class with fewer than 2 clips.
std::pair<DatasetManifest, DatasetManifest> split(const DatasetManifest& manifest, double train_fraction,
                                                  std::uint64_t seed);

/// Entries of both halves in one manifest, tagged "train" / "test".
DatasetManifest merge_split(const DatasetManifest& train, const DatasetManifest& test);

}  // namespace lowres
