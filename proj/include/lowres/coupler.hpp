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
#include <functional>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "lowres/c3d.hpp"
#include "lowres/optim.hpp"
#include "lowres/report.hpp"
#include "lowres/twostream.hpp"
#include "lowres/vidprep.hpp"

namespace lowres {

enum class Stream { Spatial, Temporal };

const char* stream_name(Stream s);
Stream parse_stream(const std::string& s);

struct TrainConfig {
  double learning_rate = 1e-3;
  double weight_decay = 5e-4;
  int epochs = 50;         // C3D stage
  int fusion_epochs = 50;  // GRU + fusion + head stage
  int batch_size = 256;
  double rmsprop_decay = 0.99;
  double rmsprop_eps = 1e-8;
  std::uint64_t seed = 1;
  Preset preset = Preset::Full;
  StreamSet streams = StreamSet::Both;
  GruMode gru = GruMode::Bi;
  FusionKind fusion = FusionKind::Sum;
  std::size_t hidden_dim = 256;
  std::size_t fusion_out_dim = 0;
  bool coupled = true;
  int threads = 1;

  /// Desk-scale defaults: tiny preset, batch 16, GRU width 64.
  static TrainConfig tiny();

  RmspropConfig rmsprop() const { return {learning_rate, weight_decay, rmsprop_decay, rmsprop_eps}; }
  ModelConfig model(std::size_t feature_dim, std::size_t num_classes) const;
  void validate() const;

  friend bool operator==(const TrainConfig&, const TrainConfig&) = default;
};

/// Splits [0, n) across `threads` workers (interleaved); threads <= 1 runs inline.
void parallel_for(std::size_t n, int threads, const std::function<void(std::size_t)>& body);

// ---------------------------------------------------------------------------
// Stage 1: C3D on video units.

/// Unit tensors of one clip for one stream; `high` may be empty when training uncoupled.
struct ClipUnits {
  std::string clip_id;
  int label = 0;
  std::span<const Tensor<float>> high;
  std::span<const Tensor<float>> low;
};

struct UnitDataset {
  std::size_t num_classes = 0;
  std::vector<ClipUnits> clips;
};

/// The single C3D parameter set read by both the high- and low-resolution paths.
class CoupledC3d {
 public:
  explicit CoupledC3d(C3dParams<float> params) : params_(std::move(params)) {}

  const C3dParams<float>& path(Resolution) const { return params_; }
  C3dParams<float>& params() { return params_; }
  const C3dParams<float>& params() const { return params_; }

  /// True when both resolution paths resolve to the same tensors (object identity, not equal values).
  bool paths_share_parameters() const;

 private:
  C3dParams<float> params_;
};

struct StageOneHooks {
  std::function<void(std::size_t step, const CoupledC3d&)> on_step;
  std::function<bool(const EpochStats&)> on_epoch;  // return false to stop early
};

struct StageOneResult {
  C3dParams<float> params;
  std::vector<EpochStats> log;
  std::size_t steps = 0;
  std::size_t coupling_checks = 0;
  std::size_t high_samples = 0;
  std::size_t low_samples = 0;
};

/// Per-unit cross-entropy training of one stream's C3D. Coupled runs draw every batch as
/// matched HIGH/LOW unit pairs (1:1) through one parameter set.
StageOneResult train_c3d_stage(const UnitDataset& data, Stream stream, const TrainConfig& config,
                               const StageOneHooks& hooks = {});

FeatureSeq<float> clip_features(std::span<const Tensor<float>> units, const C3dParams<float>& params);

/// One file per (params hash, clip id) holding `feat.<clip_id>.<t>` tensors.
class FeatureCache {
 public:
  explicit FeatureCache(std::filesystem::path root) : root_(std::move(root)) {}

  std::filesystem::path entry_path(const std::string& clip_id, std::uint64_t params_hash) const;
  std::optional<FeatureSeq<float>> load(const std::string& clip_id, std::uint64_t params_hash);
  void store(const std::string& clip_id, std::uint64_t params_hash, const FeatureSeq<float>& seq);

  std::size_t hits() const { return hits_; }
  std::size_t misses() const { return misses_; }

 private:
  std::filesystem::path root_;
  std::size_t hits_ = 0;
  std::size_t misses_ = 0;
};

using UnitLoader = std::function<std::vector<Tensor<float>>(const std::string& clip_id)>;

std::map<std::string, FeatureSeq<float>> extract_features(const std::vector<std::string>& clip_ids,
                                                          const UnitLoader& load_units,
                                                          const C3dParams<float>& params, FeatureCache* cache,
                                                          int threads = 1);

// ---------------------------------------------------------------------------
// Stage 2: GRU + fusion + head on cached unit features.

struct FeatureRecord {
  std::string clip_id;
  std::string stem;  // shared by the HIGH and LOW versions of a clip
  int label = 0;
  Resolution resolution = Resolution::Low;
  FeatureSeq<float> spatial;
  FeatureSeq<float> temporal;
};

namespace instrumentation {
/// Count of feature reads from HIGH-resolution records since the last reset.
std::size_t high_resolution_reads();
void reset_high_resolution_reads();
}  // namespace instrumentation

class FeatureSet {
 public:
  void add(FeatureRecord record);
  std::size_t size() const { return records_.size(); }
  bool empty() const { return records_.empty(); }

  /// Instrumented accessor; every read of a HIGH record is counted.
  const FeatureRecord& read(std::size_t i) const;

  Resolution resolution(std::size_t i) const { return records_.at(i).resolution; }
  int label(std::size_t i) const { return records_.at(i).label; }
  const std::string& stem(std::size_t i) const { return records_.at(i).stem; }
  const std::string& clip_id(std::size_t i) const { return records_.at(i).clip_id; }

 private:
  std::vector<FeatureRecord> records_;
};

struct FeatureKey {
  std::string clip_id;
  std::string stem;
  int label = 0;
  Resolution resolution = Resolution::Low;
};

/// Joins per-stream feature maps by clip id; throws std::invalid_argument when a stream the
/// model needs lacks a clip.
FeatureSet build_feature_set(const std::vector<FeatureKey>& keys,
                             const std::map<std::string, FeatureSeq<float>>* spatial,
                             const std::map<std::string, FeatureSeq<float>>* temporal, StreamSet streams);

struct StageTwoHooks {
  std::function<bool(const EpochStats&)> on_epoch;  // return false to stop early
};

struct StageTwoResult {
  TwoStreamParams<float> params;
  RunReport report;
};

StageTwoResult train_twostream_stage(const FeatureSet& train, const TrainConfig& config, std::size_t feature_dim,
                                     const std::vector<std::string>& class_names, const FeatureSet* test = nullptr,
                                     const StageTwoHooks& hooks = {});

int predict(const TwoStreamParams<float>& model, const FeatureRecord& record);

/// Accuracy and confusion over LOW-resolution records only.
RunReport evaluate(const TwoStreamParams<float>& model, const FeatureSet& test,
                   const std::vector<std::string>& class_names);

}  // namespace lowres
