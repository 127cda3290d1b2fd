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

#include <cstddef>
#include <string>
#include <vector>

namespace lowres {

/// K x K counts; rows are ground truth, columns are predictions.
class ConfusionMatrix {
 public:
  ConfusionMatrix() = default;
  explicit ConfusionMatrix(std::size_t classes) : classes_(classes), counts_(classes * classes, 0) {}

  void add(int truth, int predicted);
  std::size_t at(std::size_t truth, std::size_t predicted) const { return counts_[truth * classes_ + predicted]; }
  std::size_t classes() const { return classes_; }
  std::size_t total() const;
  std::size_t trace() const;
  std::size_t row_sum(std::size_t truth) const;
  double accuracy() const;

  friend bool operator==(const ConfusionMatrix&, const ConfusionMatrix&) = default;

 private:
  std::size_t classes_ = 0;
  std::vector<std::size_t> counts_;
};

struct EpochStats {
  int epoch = 0;
  double loss = 0.0;
  double accuracy = 0.0;

  friend bool operator==(const EpochStats&, const EpochStats&) = default;
};

struct RunReport {
  std::vector<std::string> class_names;
  std::vector<EpochStats> epochs;
  double test_accuracy = 0.0;
  ConfusionMatrix confusion;

  friend bool operator==(const RunReport&, const RunReport&) = default;
};

RunReport report_from_predictions(const std::vector<int>& truth, const std::vector<int>& predicted,
                                  std::vector<std::string> class_names);

std::string render_report_text(const RunReport& report);
/// Header row holds predicted class names; first column holds true class names.
std::string confusion_csv(const RunReport& report);

std::string report_to_json(const RunReport& report);
RunReport report_from_json(const std::string& text);

}  // namespace lowres
