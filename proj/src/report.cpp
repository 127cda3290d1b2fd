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

#include "lowres/report.hpp"

#include <iomanip>
#include <sstream>
#include <stdexcept>

#include "json.hpp"

namespace lowres {

void ConfusionMatrix::add(int truth, int predicted) {
  if (truth < 0 || predicted < 0 || static_cast<std::size_t>(truth) >= classes_ ||
      static_cast<std::size_t>(predicted) >= classes_) {
    throw std::invalid_argument("confusion matrix index out of range");
  }
  ++counts_[static_cast<std::size_t>(truth) * classes_ + static_cast<std::size_t>(predicted)];
}

std::size_t ConfusionMatrix::total() const {
  std::size_t n = 0;
  for (auto c : counts_) n += c;
  return n;
}

std::size_t ConfusionMatrix::trace() const {
  std::size_t n = 0;
  for (std::size_t i = 0; i < classes_; ++i) n += at(i, i);
  return n;
}

std::size_t ConfusionMatrix::row_sum(std::size_t truth) const {
  std::size_t n = 0;
  for (std::size_t j = 0; j < classes_; ++j) n += at(truth, j);
  return n;
}

double ConfusionMatrix::accuracy() const {
  const std::size_t n = total();
  return n == 0 ? 0.0 : static_cast<double>(trace()) / static_cast<double>(n);
}

RunReport report_from_predictions(const std::vector<int>& truth, const std::vector<int>& predicted,
                                  std::vector<std::string> class_names) {
  if (truth.size() != predicted.size()) throw std::invalid_argument("truth/prediction count mismatch");
  if (truth.empty()) throw std::invalid_argument("cannot report on an empty test set");
  RunReport r;
  r.confusion = ConfusionMatrix(class_names.size());
  r.class_names = std::move(class_names);
  for (std::size_t i = 0; i < truth.size(); ++i) r.confusion.add(truth[i], predicted[i]);
  r.test_accuracy = r.confusion.accuracy();
  return r;
}

std::string render_report_text(const RunReport& report) {
  std::ostringstream os;
  os << std::fixed << std::setprecision(4);
  if (!report.epochs.empty()) {
    os << "epoch  train_loss  train_acc\n";
    for (const auto& e : report.epochs) {
      os << std::setw(5) << e.epoch << "  " << std::setw(10) << e.loss << "  " << std::setw(9) << e.accuracy << "\n";
    }
  }
  const auto& cm = report.confusion;
  os << "test accuracy: " << report.test_accuracy << " (" << cm.trace() << "/" << cm.total() << ")\n";
  os << "confusion (rows = truth, cols = predicted):\n";
  std::size_t width = 6;
  for (const auto& n : report.class_names) width = std::max(width, n.size() + 1);
  os << std::setw(static_cast<int>(width)) << "";
  for (const auto& n : report.class_names) os << std::setw(static_cast<int>(width)) << n;
  os << "\n";
  for (std::size_t i = 0; i < cm.classes(); ++i) {
    os << std::setw(static_cast<int>(width)) << report.class_names.at(i);
    for (std::size_t j = 0; j < cm.classes(); ++j) os << std::setw(static_cast<int>(width)) << cm.at(i, j);
    os << "\n";
  }
  return os.str();
}

std::string confusion_csv(const RunReport& report) {
  std::ostringstream os;
  os << "truth\\predicted";
  for (const auto& n : report.class_names) os << "," << n;
  os << "\n";
  for (std::size_t i = 0; i < report.confusion.classes(); ++i) {
    os << report.class_names.at(i);
    for (std::size_t j = 0; j < report.confusion.classes(); ++j) os << "," << report.confusion.at(i, j);
    os << "\n";
  }
  return os.str();
}

std::string report_to_json(const RunReport& report) {
  nlohmann::json j;
  j["class_names"] = report.class_names;
  j["test_accuracy"] = report.test_accuracy;
  nlohmann::json epochs = nlohmann::json::array();
  for (const auto& e : report.epochs) epochs.push_back({{"epoch", e.epoch}, {"loss", e.loss}, {"accuracy", e.accuracy}});
  j["epochs"] = epochs;
  std::vector<std::vector<std::size_t>> rows;
  for (std::size_t i = 0; i < report.confusion.classes(); ++i) {
    std::vector<std::size_t> row;
    for (std::size_t k = 0; k < report.confusion.classes(); ++k) row.push_back(report.confusion.at(i, k));
    rows.push_back(row);
  }
  j["confusion"] = rows;
  return j.dump(2) + "\n";
}

RunReport report_from_json(const std::string& text) {
  RunReport r;
  try {
    const auto j = nlohmann::json::parse(text);
    r.class_names = j.at("class_names").get<std::vector<std::string>>();
    r.test_accuracy = j.at("test_accuracy").get<double>();
    for (const auto& e : j.at("epochs")) {
      r.epochs.push_back({e.at("epoch").get<int>(), e.at("loss").get<double>(), e.at("accuracy").get<double>()});
    }
    const auto rows = j.at("confusion").get<std::vector<std::vector<std::size_t>>>();
    r.confusion = ConfusionMatrix(r.class_names.size());
    if (rows.size() != r.class_names.size()) throw std::invalid_argument("confusion rows do not match class count");
    for (std::size_t i = 0; i < rows.size(); ++i) {
      if (rows[i].size() != rows.size()) throw std::invalid_argument("confusion matrix is not square");
      for (std::size_t k = 0; k < rows[i].size(); ++k) {
        for (std::size_t c = 0; c < rows[i][k]; ++c) r.confusion.add(static_cast<int>(i), static_cast<int>(k));
      }
    }
  } catch (const nlohmann::json::exception& e) {
    throw std::invalid_argument(std::string("malformed run report: ") + e.what());
  }
  return r;
}

}  // namespace lowres
