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

#include "lowres/workspace.hpp"

#include <cstdio>
#include <map>
#include <stdexcept>

#include "lowres/clip_io.hpp"

namespace lowres {

std::filesystem::path Workspace::c3d_checkpoint(Stream s) const {
  return root_ / "models" / (std::string("c3d_") + stream_name(s) + ".ckpt");
}

std::filesystem::path Workspace::c3d_log(Stream s) const {
  return root_ / "models" / (std::string("c3d_") + stream_name(s) + ".log.csv");
}

std::vector<Tensor<float>> load_clip_units(const Workspace& ws, const ManifestEntry& entry, Stream stream,
                                           int unit_length) {
  if (stream == Stream::Temporal) {
    return clip_unit_tensors(load_clip(ws.flow_dir(entry.clip_id), entry.label, entry.resolution, entry.clip_id),
                             unit_length);
  }
  VideoClip clip = load_clip(ws.clip_dir(entry), entry.label, entry.resolution, entry.clip_id);
  if (entry.resolution == Resolution::High) clip = resize_clip_to_network(clip);
  return clip_unit_tensors(clip, unit_length);
}

PreparedDataset load_prepared_dataset(const Workspace& ws, int unit_length, int threads) {
  const DatasetManifest manifest = ws.manifest();
  PreparedDataset data;
  data.class_names = manifest.class_names;
  data.unit_length = unit_length;

  std::map<std::string, std::size_t> index;
  std::vector<const ManifestEntry*> highs, lows;
  for (const auto& e : manifest.entries) {
    if (e.split == "none") throw std::invalid_argument("manifest has unsplit clips; run synth first");
    const std::string stem = clip_stem(e.clip_id);
    auto [it, inserted] = index.try_emplace(stem, data.clips.size());
    if (inserted) {
      PreparedClip c;
      c.stem = stem;
      c.label = e.label;
      c.train = e.split == "train";
      data.clips.push_back(std::move(c));
      highs.push_back(nullptr);
      lows.push_back(nullptr);
    }
    (e.resolution == Resolution::High ? highs : lows)[it->second] = &e;
  }
  parallel_for(data.clips.size(), threads, [&](std::size_t i) {
    PreparedClip& c = data.clips[i];
    if (!lows[i]) throw std::invalid_argument("clip " + c.stem + " has no LOW version");
    c.spatial_low = load_clip_units(ws, *lows[i], Stream::Spatial, unit_length);
    c.temporal_low = load_clip_units(ws, *lows[i], Stream::Temporal, unit_length);
    if (c.train) {
      if (!highs[i]) throw std::invalid_argument("training clip " + c.stem + " has no HIGH version");
      c.spatial_high = load_clip_units(ws, *highs[i], Stream::Spatial, unit_length);
      c.temporal_high = load_clip_units(ws, *highs[i], Stream::Temporal, unit_length);
    }
  });
  return data;
}

std::string epoch_log_csv(const std::vector<EpochStats>& log) {
  std::string out = "epoch,loss,accuracy\n";
  char line[96];
  for (const auto& e : log) {
    std::snprintf(line, sizeof line, "%d,%.9g,%.9g\n", e.epoch, e.loss, e.accuracy);
    out += line;
  }
  return out;
}

}  // namespace lowres
