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

// End-to-end classification: segment, encode superpixels with the unfolded
// network, project codes to pixels, train the patch CNN, classify, evaluate.

#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "srsr/cnn.hpp"
#include "srsr/metrics.hpp"
#include "srsr/polsar_data.hpp"
#include "srsr/srsrnet.hpp"
#include "srsr/superpixel.hpp"

namespace srsr::pipeline {

struct PipelineConfig {
  std::string covariance;
  std::string labels;
  std::string superpixels;  // optional external segmentation (PSARLAB1)
  std::string output_dir;   // empty: write nothing

  double scale = 100.0;
  double compactness = 10.0;
  int segment_iterations = 10;

  int atoms_per_class = 100;
  double lambda = 0.5;
  double step = 1e-4;
  int layers = 4;
  double lambda_b = 1e-2;
  int dict_iterations = 5;

  cnn::TrainConfig train;
  std::uint64_t seed = 0;

  bool freeze_dictionary = false;
  bool skip_unfolding = false;
  bool cnn_only = false;

  int threads = 0;  // 0: library default
};

/// Sets one `key = value` entry. Throws InvalidArgument for unknown keys or
/// unparsable values.
void apply_setting(PipelineConfig& cfg, const std::string& key, const std::string& value);

/// Parses INI-style text: `key = value` lines, `#` or `;` comments, section
/// headers ignored.
void parse_config(PipelineConfig& cfg, const std::string& text);
PipelineConfig load_config(const std::string& path);

/// The seeds each stage draws from, derived from the run seed.
struct StageSeeds {
  std::uint64_t split;
  std::uint64_t dictionary;
  std::uint64_t init;
  std::uint64_t shuffle;
};
StageSeeds stage_seeds(std::uint64_t seed);

net::SrsrNet make_network(const PipelineConfig& cfg, const data::LabelMap& train_labels,
                          const data::CovarianceImage& img);

/// d real diagonal entries followed by the real and imaginary parts of the
/// strict upper triangle (9 channels for d = 3).
net::PixelFeatures raw_features(const data::CovarianceImage& img);

/// Divides every value by the root-mean-square of all values.
void normalize_features(net::PixelFeatures& feat);

/// Labels restricted to the given raster indices.
data::LabelMap restrict_labels(const data::LabelMap& labels, const std::vector<std::size_t>& keep);

struct PipelineResult {
  data::LabelMap prediction;
  data::LabelMap test_truth;  // reference with training pixels removed
  metrics::MetricsReport metrics;
  std::vector<net::LayerDiagnostics> layers;
  std::vector<double> losses;
  int feature_dim = 0;
  int superpixels = 0;
  int encode_failures = 0;
};

/// Loads the inputs named in cfg and runs every stage. Any stage error is
/// rethrown as StageFailure naming the stage.
PipelineResult run_pipeline(const PipelineConfig& cfg);

/// Same on in-memory inputs; `external` replaces the segmenter when non-null.
PipelineResult run_pipeline(const PipelineConfig& cfg, const data::CovarianceImage& img,
                            const data::LabelMap& truth, const seg::SuperpixelMap* external = nullptr);

std::string layer_trace_csv(const std::vector<net::LayerDiagnostics>& layers);
std::string loss_csv(const std::vector<double>& losses);

void write_text(const std::string& path, const std::string& text);

}  // namespace srsr::pipeline
