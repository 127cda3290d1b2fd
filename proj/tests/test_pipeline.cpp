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

#include <algorithm>
#include <set>
#include <tuple>

#include "lowres/checkpoint.hpp"
#include "lowres/clip_io.hpp"
#include "lowres/pipeline.hpp"
#include "lowres/vidprep.hpp"

namespace lowres {
namespace {

SynthSpec small_spec() {
  SynthSpec s;
  s.classes = {MotionClass::MoveLeft, MotionClass::MoveRight};
  s.clips_per_class = 3;
  s.frames_per_clip = 16;
  s.height = 120;
  s.width = 160;
  s.sprite_min = 24;
  s.sprite_max = 36;
  s.unit_length = 16;
  s.class_hue_bias = 1.0;
  return s;
}

const PreparedDataset& small_data() {
  static const PreparedDataset data = prepare_dataset(small_spec(), 2.0 / 3.0, 1, FlowParams{});
  return data;
}

TrainConfig quick_config() {
  TrainConfig c = TrainConfig::tiny();
  c.epochs = 2;
  c.fusion_epochs = 3;
  return c;
}

TEST(PrepareDataset, SplitAndVariants) {
  const auto& d = small_data();
  ASSERT_EQ(d.clips.size(), 6u);
  EXPECT_EQ(d.class_names, (std::vector<std::string>{"move_left", "move_right"}));
  int train = 0;
  for (const auto& c : d.clips) {
    train += c.train;
    ASSERT_EQ(c.spatial_low.size(), 1u);
    ASSERT_EQ(c.temporal_low.size(), 1u);
    EXPECT_EQ(c.spatial_low[0].dims(), (Dims{3, 16, 112, 112}));
    EXPECT_EQ(c.temporal_low[0].dims(), (Dims{3, 16, 112, 112}));
    EXPECT_EQ(c.spatial_high.size(), c.train ? 1u : 0u);
    EXPECT_EQ(c.temporal_high.size(), c.train ? 1u : 0u);
  }
  EXPECT_EQ(train, 4);
}

TEST(PrepareDataset, LowUnitsComeFromQuantizedLowClip) {
  const auto clips = generate_clips(small_spec());
  const auto& d = small_data();
  for (std::size_t i = 0; i < clips.size(); ++i) {
    ASSERT_EQ(d.clips[i].stem, clips[i].stem);
    EXPECT_EQ(d.clips[i].label, clips[i].label);
    const auto low = clip_unit_tensors(quantize_clip(make_lr_clip(clips[i].high)), 16);
    EXPECT_EQ(d.clips[i].spatial_low, low);
    if (d.clips[i].train) {
      EXPECT_EQ(d.clips[i].spatial_high, clip_unit_tensors(resize_clip_to_network(clips[i].high), 16));
    }
  }
}

TEST(PrepareDataset, ThreadCountDoesNotChangeData) {
  const auto b = prepare_dataset(small_spec(), 2.0 / 3.0, 1, FlowParams{}, 2);
  const auto& a = small_data();
  ASSERT_EQ(a.clips.size(), b.clips.size());
  for (std::size_t i = 0; i < a.clips.size(); ++i) {
    EXPECT_EQ(a.clips[i].train, b.clips[i].train);
    EXPECT_EQ(a.clips[i].spatial_low, b.clips[i].spatial_low);
    EXPECT_EQ(a.clips[i].temporal_low, b.clips[i].temporal_low);
    EXPECT_EQ(a.clips[i].temporal_high, b.clips[i].temporal_high);
  }
}

TEST(UnitDatasetView, TrainClipsOnly) {
  const auto& d = small_data();
  const UnitDataset coupled = unit_dataset(d, Stream::Temporal, true);
  const UnitDataset low_only = unit_dataset(d, Stream::Spatial, false);
  EXPECT_EQ(coupled.num_classes, 2u);
  ASSERT_EQ(coupled.clips.size(), 4u);
  ASSERT_EQ(low_only.clips.size(), 4u);
  for (const auto& c : coupled.clips) EXPECT_EQ(c.high.size(), c.low.size());
  for (const auto& c : low_only.clips) EXPECT_TRUE(c.high.empty());
}

TEST(RunPipeline, ReportCoversLowTestClips) {
  const auto r = run_pipeline(small_data(), quick_config());
  EXPECT_EQ(r.report.confusion.total(), 2u);
  EXPECT_GE(r.report.test_accuracy, 0.0);
  EXPECT_LE(r.report.test_accuracy, 1.0);
  EXPECT_EQ(r.report.epochs.size(), 3u);
  EXPECT_EQ(r.report.class_names, small_data().class_names);
}

TEST(RunPipeline, Deterministic) {
  const auto a = run_pipeline(small_data(), quick_config());
  const auto b = run_pipeline(small_data(), quick_config());
  EXPECT_EQ(a.report, b.report);
  EXPECT_EQ(encode_bundle(twostream_to_bundle(a.params)), encode_bundle(twostream_to_bundle(b.params)));
}

TEST(RunPipeline, StageOneFeaturesForEveryClip) {
  const auto art = run_stage_one(small_data(), Stream::Spatial, quick_config());
  EXPECT_EQ(art.log.size(), 2u);
  // 6 LOW clips plus 4 HIGH training clips.
  EXPECT_EQ(art.features.size(), 10u);
  for (const auto& c : small_data().clips) {
    EXPECT_EQ(art.features.count(clip_id_for(c.stem, Resolution::Low)), 1u);
    EXPECT_EQ(art.features.count(clip_id_for(c.stem, Resolution::High)), c.train ? 1u : 0u);
  }
  EXPECT_THROW(run_stage_two(small_data(), nullptr, nullptr, quick_config()), std::invalid_argument);
}

TEST(Ablation, GridHasTenDistinctCells) {
  const auto grid = table1_grid();
  ASSERT_EQ(grid.size(), 10u);
  std::set<std::tuple<int, int, int>> seen;
  for (const auto& c : grid) {
    seen.insert({static_cast<int>(c.streams), static_cast<int>(c.gru), static_cast<int>(c.fusion)});
    if (c.streams != StreamSet::Both) EXPECT_EQ(c.fusion, FusionKind::Sum);
  }
  EXPECT_EQ(seen.size(), 10u);
  for (FusionKind f : {FusionKind::Sum, FusionKind::Max, FusionKind::Cat, FusionKind::Conv}) {
    EXPECT_NE(std::find(grid.begin(), grid.end(), AblationCell{StreamSet::Both, GruMode::Bi, f}), grid.end());
  }
}

TEST(Ablation, MeanAndMedian) {
  AblationRow r;
  EXPECT_EQ(r.mean(), 0.0);
  EXPECT_EQ(r.median(), 0.0);
  r.accuracies = {0.9, 0.5, 0.7};
  EXPECT_DOUBLE_EQ(r.mean(), 0.7);
  EXPECT_EQ(r.median(), 0.7);
  r.accuracies = {1.0, 0.25, 0.5, 0.75};
  EXPECT_EQ(r.median(), 0.625);
}

TEST(Ablation, CsvFormat) {
  std::vector<AblationRow> rows(2);
  rows[0] = {{StreamSet::Spatial, GruMode::None, FusionKind::Sum}, {1, 2}, {0.5, 0.75}};
  rows[1] = {{StreamSet::Both, GruMode::Bi, FusionKind::Cat}, {1, 2}, {1.0, 0.95}};
  EXPECT_EQ(ablation_csv(rows),
            "stream,gru,fusion,accuracy_mean,accuracy_per_seed\n"
            "spatial,none,none,0.625000,0.500000;0.750000\n"
            "both,bi,cat,0.975000,1.000000;0.950000\n");
}

TEST(Ablation, SharesStageOneAcrossCells) {
  const std::vector<AblationCell> grid = {{StreamSet::Both, GruMode::Bi, FusionKind::Sum},
                                          {StreamSet::Spatial, GruMode::None, FusionKind::Sum},
                                          {StreamSet::Both, GruMode::Bi, FusionKind::Max}};
  std::vector<std::string> messages;
  const auto rows = ablation_run(grid, small_data(), quick_config(), {3, 4},
                                 [&](const std::string& m) { messages.push_back(m); });
  ASSERT_EQ(rows.size(), 3u);
  for (const auto& r : rows) {
    EXPECT_EQ(r.seeds, (std::vector<std::uint64_t>{3, 4}));
    EXPECT_EQ(r.accuracies.size(), 2u);
  }
  const auto count = [&](const std::string& needle) {
    return std::count_if(messages.begin(), messages.end(),
                         [&](const std::string& m) { return m.find(needle) != std::string::npos; });
  };
  EXPECT_EQ(count("training spatial C3D"), 2);
  EXPECT_EQ(count("training temporal C3D"), 2);

  // A cell's accuracy equals a standalone run with the same seed.
  TrainConfig solo = quick_config();
  solo.seed = 4;
  solo.fusion = FusionKind::Max;
  EXPECT_EQ(rows[2].accuracies[1], run_pipeline(small_data(), solo).report.test_accuracy);

  EXPECT_THROW(ablation_run({}, small_data(), quick_config(), {1}), std::invalid_argument);
  EXPECT_THROW(ablation_run(grid, small_data(), quick_config(), {}), std::invalid_argument);
}

}  // namespace
}  // namespace lowres
