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
#include <functional>
#include <map>
#include <string>
#include <vector>

#include "lowres/coupler.hpp"
#include "lowres/flowlab.hpp"
#include "lowres/synthact.hpp"

namespace lowres {

/// Unit tensors of one clip for both streams and both resolutions. HIGH units are only kept
/// for training clips.
struct PreparedClip {
  std::string stem;
  int label = 0;
  bool train = false;
  std::vector<Tensor<float>> spatial_high;
  std::vector<Tensor<float>> spatial_low;
  std::vector<Tensor<float>> temporal_high;
  std::vector<Tensor<float>> temporal_low;
};

struct PreparedDataset {
  std::vector<std::string> class_names;
  std::vector<PreparedClip> clips;
  int unit_length = kDefaultUnitLength;
};

/// The four stream/resolution variants of one HIGH clip. Derived clips are quantized to 8 bits,
/// matching what the file-based pipeline stores on disk.
PreparedClip prepare_clip(const VideoClip& high, const std::string& stem, bool train, const FlowParams& flow,
                          int unit_length);

std::vector<Tensor<float>> clip_unit_tensors(const VideoClip& clip, int unit_length);

/// Renders the spec, splits it, and prepares every clip.
PreparedDataset prepare_dataset(const SynthSpec& spec, double train_fraction, std::uint64_t split_seed,
                                const FlowParams& flow, int threads = 1);

UnitDataset unit_dataset(const PreparedDataset& data, Stream stream, bool coupled);

struct StageOneArtifacts {
  C3dParams<float> params;
  std::vector<EpochStats> log;
  std::map<std::string, FeatureSeq<float>> features;  // keyed by clip id (<stem>-hr / <stem>-lr)
};

StageOneArtifacts run_stage_one(const PreparedDataset& data, Stream stream, const TrainConfig& config);

/// Trains stage 2 on the prepared training clips and evaluates on the LOW test clips.
StageTwoResult run_stage_two(const PreparedDataset& data, const StageOneArtifacts* spatial,
                             const StageOneArtifacts* temporal, const TrainConfig& config);

StageTwoResult run_pipeline(const PreparedDataset& data, const TrainConfig& config);

struct AblationCell {
  StreamSet streams = StreamSet::Both;
  GruMode gru = GruMode::Bi;
  FusionKind fusion = FusionKind::Sum;

  friend bool operator==(const AblationCell&, const AblationCell&) = default;
};

struct AblationRow {
  AblationCell cell;
  std::vector<std::uint64_t> seeds;
  std::vector<double> accuracies;  // one per seed, same order

  double mean() const;
  double median() const;
};

/// The stream / GRU / fusion rows of the component ablation.
std::vector<AblationCell> table1_grid();

/// Every cell is trained with every seed. Stage-1 extractors are shared by all cells that use
/// the same (seed, stream).
std::vector<AblationRow> ablation_run(const std::vector<AblationCell>& grid, const PreparedDataset& data,
                                      const TrainConfig& base, const std::vector<std::uint64_t>& seeds,
                                      const std::function<void(const std::string&)>& log = {});

/// Columns: stream, gru, fusion, accuracy_mean, accuracy_per_seed (';'-separated).
std::string ablation_csv(const std::vector<AblationRow>& rows);

}  // namespace lowres
