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

#include "lowres/pipeline.hpp"

#include <algorithm>
#include <cstdio>
#include <optional>
#include <set>
#include <sstream>
#include <stdexcept>

#include "lowres/clip_io.hpp"

namespace lowres {

std::vector<Tensor<float>> clip_unit_tensors(const VideoClip& clip, int unit_length) {
  std::vector<Tensor<float>> out;
  for (const auto& unit : unitize(clip, unit_length)) out.push_back(unit_to_tensor(unit));
  return out;
}

PreparedClip prepare_clip(const VideoClip& high, const std::string& stem, bool train, const FlowParams& flow,
                          int unit_length) {
  PreparedClip p;
  p.stem = stem;
  p.label = high.label;
  p.train = train;
  const VideoClip low = quantize_clip(make_lr_clip(high));
  p.spatial_low = clip_unit_tensors(low, unit_length);
  p.temporal_low = clip_unit_tensors(quantize_clip(flow_clip(low, flow)), unit_length);
  if (train) {
    const VideoClip net = resize_clip_to_network(high);
    p.spatial_high = clip_unit_tensors(net, unit_length);
    p.temporal_high = clip_unit_tensors(quantize_clip(flow_clip(net, flow)), unit_length);
  }
  return p;
}

PreparedDataset prepare_dataset(const SynthSpec& spec, double train_fraction, std::uint64_t split_seed,
                                const FlowParams& flow, int threads) {
  const auto clips = generate_clips(spec, threads);
  DatasetManifest manifest;
  manifest.spec_hash = spec.hash();
  for (MotionClass m : spec.classes) manifest.class_names.push_back(motion_name(m));
  for (const auto& c : clips) {
    manifest.entries.push_back({clip_id_for(c.stem, Resolution::High), c.label, "", "none", Resolution::High});
  }
  const auto halves = split(manifest, train_fraction, split_seed);
  std::set<std::string> train_stems;
  for (const auto& e : halves.first.entries) train_stems.insert(clip_stem(e.clip_id));

  PreparedDataset data;
  data.class_names = manifest.class_names;
  data.unit_length = spec.unit_length;
  data.clips.resize(clips.size());
  parallel_for(clips.size(), threads, [&](std::size_t i) {
    data.clips[i] = prepare_clip(clips[i].high, clips[i].stem, train_stems.count(clips[i].stem) > 0, flow,
                                 spec.unit_length);
  });
  return data;
}

UnitDataset unit_dataset(const PreparedDataset& data, Stream stream, bool coupled) {
  UnitDataset out;
  out.num_classes = data.class_names.size();
  for (const auto& c : data.clips) {
    if (!c.train) continue;
    const bool spatial = stream == Stream::Spatial;
    ClipUnits u;
    u.clip_id = c.stem;
    u.label = c.label;
    u.low = spatial ? c.spatial_low : c.temporal_low;
    if (coupled) u.high = spatial ? c.spatial_high : c.temporal_high;
    out.clips.push_back(u);
  }
  return out;
}

StageOneArtifacts run_stage_one(const PreparedDataset& data, Stream stream, const TrainConfig& config) {
  StageOneResult trained = train_c3d_stage(unit_dataset(data, stream, config.coupled), stream, config);
  StageOneArtifacts out;
  out.params = std::move(trained.params);
  out.log = std::move(trained.log);
  const bool spatial = stream == Stream::Spatial;
  std::vector<std::string> ids;
  std::map<std::string, const std::vector<Tensor<float>>*> units;
  for (const auto& c : data.clips) {
    const std::string lo = clip_id_for(c.stem, Resolution::Low);
    ids.push_back(lo);
    units[lo] = spatial ? &c.spatial_low : &c.temporal_low;
    if (c.train && config.coupled) {
      const std::string hi = clip_id_for(c.stem, Resolution::High);
      ids.push_back(hi);
      units[hi] = spatial ? &c.spatial_high : &c.temporal_high;
    }
  }
  out.features = extract_features(
      ids, [&](const std::string& id) { return *units.at(id); }, out.params, nullptr, config.threads);
  return out;
}

namespace {

std::vector<FeatureKey> feature_keys(const PreparedDataset& data, bool train, bool with_high) {
  std::vector<FeatureKey> keys;
  for (const auto& c : data.clips) {
    if (c.train != train) continue;
    if (with_high) keys.push_back({clip_id_for(c.stem, Resolution::High), c.stem, c.label, Resolution::High});
    keys.push_back({clip_id_for(c.stem, Resolution::Low), c.stem, c.label, Resolution::Low});
  }
  return keys;
}

}  // namespace

StageTwoResult run_stage_two(const PreparedDataset& data, const StageOneArtifacts* spatial,
                             const StageOneArtifacts* temporal, const TrainConfig& config) {
  const auto* s = spatial ? &spatial->features : nullptr;
  const auto* t = temporal ? &temporal->features : nullptr;
  const FeatureSet train = build_feature_set(feature_keys(data, true, config.coupled), s, t, config.streams);
  const FeatureSet test = build_feature_set(feature_keys(data, false, false), s, t, config.streams);
  const StageOneArtifacts* any = spatial ? spatial : temporal;
  if (!any) throw std::invalid_argument("run_stage_two: no stage-1 artifacts");
  return train_twostream_stage(train, config, any->params.spec.feature_dim(), data.class_names, &test);
}

StageTwoResult run_pipeline(const PreparedDataset& data, const TrainConfig& config) {
  config.validate();
  std::optional<StageOneArtifacts> s, t;
  if (config.streams != StreamSet::Temporal) s = run_stage_one(data, Stream::Spatial, config);
  if (config.streams != StreamSet::Spatial) t = run_stage_one(data, Stream::Temporal, config);
  return run_stage_two(data, s ? &*s : nullptr, t ? &*t : nullptr, config);
}

double AblationRow::mean() const {
  if (accuracies.empty()) return 0.0;
  double sum = 0.0;
  for (double a : accuracies) sum += a;
  return sum / static_cast<double>(accuracies.size());
}

double AblationRow::median() const {
  if (accuracies.empty()) return 0.0;
  std::vector<double> v = accuracies;
  std::sort(v.begin(), v.end());
  const std::size_t n = v.size();
  return n % 2 ? v[n / 2] : 0.5 * (v[n / 2 - 1] + v[n / 2]);
}

std::vector<AblationCell> table1_grid() {
  return {
      {StreamSet::Spatial, GruMode::None, FusionKind::Sum}, {StreamSet::Temporal, GruMode::None, FusionKind::Sum},
      {StreamSet::Both, GruMode::None, FusionKind::Sum},    {StreamSet::Spatial, GruMode::Bi, FusionKind::Sum},
      {StreamSet::Temporal, GruMode::Bi, FusionKind::Sum},  {StreamSet::Both, GruMode::Uni, FusionKind::Sum},
      {StreamSet::Both, GruMode::Bi, FusionKind::Sum},      {StreamSet::Both, GruMode::Bi, FusionKind::Max},
      {StreamSet::Both, GruMode::Bi, FusionKind::Cat},      {StreamSet::Both, GruMode::Bi, FusionKind::Conv},
  };
}

std::vector<AblationRow> ablation_run(const std::vector<AblationCell>& grid, const PreparedDataset& data,
                                      const TrainConfig& base, const std::vector<std::uint64_t>& seeds,
                                      const std::function<void(const std::string&)>& log) {
  if (grid.empty()) throw std::invalid_argument("ablation_run: empty grid");
  if (seeds.empty()) throw std::invalid_argument("ablation_run: no seeds");
  std::vector<AblationRow> rows;
  for (const auto& cell : grid) rows.push_back({cell, seeds, {}});

  for (std::uint64_t seed : seeds) {
    TrainConfig cfg = base;
    cfg.seed = seed;
    std::optional<StageOneArtifacts> spatial, temporal;
    for (auto& row : rows) {
      const bool need_s = row.cell.streams != StreamSet::Temporal;
      const bool need_t = row.cell.streams != StreamSet::Spatial;
      if (need_s && !spatial) {
        if (log) log("seed " + std::to_string(seed) + ": training spatial C3D");
        spatial = run_stage_one(data, Stream::Spatial, cfg);
      }
      if (need_t && !temporal) {
        if (log) log("seed " + std::to_string(seed) + ": training temporal C3D");
        temporal = run_stage_one(data, Stream::Temporal, cfg);
      }
      TrainConfig cell_cfg = cfg;
      cell_cfg.streams = row.cell.streams;
      cell_cfg.gru = row.cell.gru;
      cell_cfg.fusion = row.cell.fusion;
      const StageTwoResult r =
          run_stage_two(data, need_s ? &*spatial : nullptr, need_t ? &*temporal : nullptr, cell_cfg);
      row.accuracies.push_back(r.report.test_accuracy);
      if (log) {
        char buf[160];
        std::snprintf(buf, sizeof buf, "seed %llu: %s / %s / %s -> %.4f", static_cast<unsigned long long>(seed),
                      streams_name(row.cell.streams), gru_mode_name(row.cell.gru),
                      row.cell.streams == StreamSet::Both ? fusion_name(row.cell.fusion) : "none",
                      r.report.test_accuracy);
        log(buf);
      }
    }
  }
  return rows;
}

std::string ablation_csv(const std::vector<AblationRow>& rows) {
  std::ostringstream os;
  os << "stream,gru,fusion,accuracy_mean,accuracy_per_seed\n";
  char buf[32];
  for (const auto& row : rows) {
    os << streams_name(row.cell.streams) << ',' << gru_mode_name(row.cell.gru) << ','
       << (row.cell.streams == StreamSet::Both ? fusion_name(row.cell.fusion) : "none") << ',';
    std::snprintf(buf, sizeof buf, "%.6f", row.mean());
    os << buf << ',';
    for (std::size_t i = 0; i < row.accuracies.size(); ++i) {
      std::snprintf(buf, sizeof buf, "%.6f", row.accuracies[i]);
      os << (i ? ";" : "") << buf;
    }
    os << '\n';
  }
  return os.str();
}

}  // namespace lowres
