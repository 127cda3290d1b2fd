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
#include <string>
#include <vector>

#include "lowres/coupler.hpp"
#include "lowres/flowlab.hpp"
#include "lowres/synthact.hpp"

namespace lowres {

/// Everything a run needs. Text form is INI-like:
///
///   [train]
///   epochs = 20
///   model.gru = bi      # dotted keys work in any section context
///
/// Sections: data (SynthSpec + split), model, train, flow.
struct RunConfig {
  SynthSpec data;
  double train_fraction = 2.0 / 3.0;
  std::uint64_t split_seed = 1;
  TrainConfig train = TrainConfig::tiny();
  FlowParams flow;

  /// 4 directional classes x 15 clips, 40 train / 20 test, tiny preset.
  static RunConfig benchmark();

  void validate() const;
  friend bool operator==(const RunConfig&, const RunConfig&) = default;
};

/// Parses text into a config starting from defaults. Unknown sections or keys and values of the
/// wrong type throw std::invalid_argument naming the line.
RunConfig parse_run_config(const std::string& text);
RunConfig load_run_config(const std::string& path);

/// Canonical text; parse_run_config(serialize_run_config(c)) == c.
std::string serialize_run_config(const RunConfig& config);

/// Sets one "section.key" field from text, with the same checks as the parser.
void set_config_value(RunConfig& config, const std::string& dotted_key, const std::string& value);

/// All addressable "section.key" names, in serialization order.
std::vector<std::string> config_keys();

}  // namespace lowres
