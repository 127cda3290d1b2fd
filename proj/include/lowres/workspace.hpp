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
#include <vector>

#include "lowres/coupler.hpp"
#include "lowres/pipeline.hpp"
#include "lowres/synthact.hpp"

namespace lowres {

/// Fixed artifact layout under one root directory:
///
///   config.ini                      effective run configuration
///   data/manifest.tsv               clip list with split tags
///   data/clips/<clip_id>/           frames (HIGH 240x320, LOW 112x112)
///   data/flow/<clip_id>/            HSL flow images (112x112)
///   models/c3d_<stream>.ckpt        stage-1 extractors
///   models/c3d_<stream>.log.csv     stage-1 per-epoch loss / accuracy
///   models/twostream.ckpt           stage-2 model
///   features/<stream>/<hash>/       feature cache, one file per clip
///   reports/                        train/eval reports, confusion CSV, ablation CSV
class Workspace {
 public:
  explicit Workspace(std::filesystem::path root) : root_(std::move(root)) {}

  const std::filesystem::path& root() const { return root_; }
  std::filesystem::path config_file() const { return root_ / "config.ini"; }
  std::filesystem::path data_dir() const { return root_ / "data"; }
  std::filesystem::path manifest_file() const { return data_dir() / "manifest.tsv"; }
  std::filesystem::path clip_dir(const ManifestEntry& entry) const { return data_dir() / entry.path; }
  std::filesystem::path flow_dir(const std::string& clip_id) const { return data_dir() / "flow" / clip_id; }
  std::filesystem::path c3d_checkpoint(Stream s) const;
  std::filesystem::path c3d_log(Stream s) const;
  std::filesystem::path model_checkpoint() const { return root_ / "models" / "twostream.ckpt"; }
  std::filesystem::path feature_root(Stream s) const { return root_ / "features" / stream_name(s); }
  std::filesystem::path reports_dir() const { return root_ / "reports"; }

  DatasetManifest manifest() const { return read_manifest(manifest_file()); }

 private:
  std::filesystem::path root_;
};

/// Network-ready unit tensors of one manifest clip: RGB frames (HIGH clips resized to 112x112)
/// for the spatial stream, stored flow images for the temporal stream.
std::vector<Tensor<float>> load_clip_units(const Workspace& ws, const ManifestEntry& entry, Stream stream,
                                           int unit_length);

/// Everything the in-memory trainers need, read from the workspace (flow must already exist).
PreparedDataset load_prepared_dataset(const Workspace& ws, int unit_length, int threads = 1);

std::string epoch_log_csv(const std::vector<EpochStats>& log);

}  // namespace lowres
