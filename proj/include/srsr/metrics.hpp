/**
 * Copyright 2026, The polsar-srsr Authors.
 *
 * Licensed under the Apache License, Version 2.0 (the "License");
 * you may not use this file except in compliance with the License.
 * You may obtain a copy of the License at
 *
 *     http://www.apache.org/licenses/LICENSE-2.0
 *
 * Unless required by applicable law or agreed to in writing, software
 * distributed under the License is distributed on an "AS IS" BASIS,
 * WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
 * See the License for the specific language governing permissions and
 * limitations under the License.
 */

// Confusion-matrix accuracy indicators over labeled pixels.

#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "srsr/polsar_data.hpp"

namespace srsr::metrics {

/// counts[r * classes + c]: reference class r + 1 predicted as c + 1.
struct ConfusionMatrix {
  int classes = 0;
  std::vector<std::uint64_t> counts;
  std::uint64_t unpredicted = 0;  // labeled reference pixels left at 0 by the prediction

  ConfusionMatrix() = default;
  explicit ConfusionMatrix(int c) : classes(c), counts(static_cast<std::size_t>(c) * c, 0) {}

  std::uint64_t& at(int r, int c) { return counts[static_cast<std::size_t>(r) * classes + c]; }
  std::uint64_t at(int r, int c) const { return counts[static_cast<std::size_t>(r) * classes + c]; }
  std::uint64_t total() const;
  std::uint64_t row_sum(int r) const;
  std::uint64_t col_sum(int c) const;
};

struct MetricsReport {
  std::vector<double> user_accuracy;      // per class precision (NaN if never predicted)
  std::vector<double> producer_accuracy;  // per class recall (NaN if absent from the reference)
  double overall_accuracy = 0.0;
  double average_accuracy = 0.0;
  double kappa = 0.0;
  bool kappa_degenerate = false;  // p_e = 1
  double f1 = 0.0;                // macro
  double miou = 0.0;
  std::uint64_t total = 0;
  std::vector<std::string> warnings;
};

/// Counts pixels with truth != 0; those with pred == 0 only bump
/// `unpredicted`. The class count is the largest id seen in either map, or
/// `classes` when larger.
ConfusionMatrix confusion(const data::LabelMap& pred, const data::LabelMap& truth, int classes = 0);

/// Throws EmptyMatrix when the matrix has no counts.
MetricsReport report(const ConfusionMatrix& cm);

/// Flat key=value lines.
std::string to_key_value(const MetricsReport& r);
/// One row per class and a final summary row.
std::string to_csv(const MetricsReport& r);

}  // namespace srsr::metrics
