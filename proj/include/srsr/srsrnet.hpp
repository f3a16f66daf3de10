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

// The unfolded sparse-representation network. Each layer runs one ISTA step
// on every superpixel code and then one dictionary update on the whole batch.

#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "srsr/polsar_data.hpp"
#include "srsr/riemannian_dict.hpp"
#include "srsr/sparse_coding.hpp"
#include "srsr/superpixel.hpp"

namespace srsr::net {

using coding::Dictionary;
using coding::SparseCode;
using coding::SrsrConfig;
using dict::DictLearnConfig;

struct SrsrNet {
  Dictionary dictionary;
  SrsrConfig config;
  DictLearnConfig dict_config;
  int layers = 4;
  bool freeze_dictionary = false;
  bool skip_unfolding = false;  // reference ISTA solver at a fixed dictionary instead of the layers
};

/// One code per superpixel, indexed by segment id.
struct FeatureField {
  std::vector<SparseCode> codes;
  int dim = 0;
};

/// H x W x N row-major. `segments`, when non-empty, records the superpixel id
/// each pixel was copied from.
struct PixelFeatures {
  int height = 0;
  int width = 0;
  int channels = 0;
  std::vector<double> values;
  std::vector<int> segments;

  const double* at(std::size_t pixel) const { return values.data() + pixel * static_cast<std::size_t>(channels); }
};

struct LayerDiagnostics {
  int layer = 0;                 // 0 = initialization
  double mean_objective = 0.0;   // mean per-superpixel objective after the layer
  double joint_objective = 0.0;  // sum of objectives + lambda_B sum Tr D_i
  double dict_change = 0.0;      // Frobenius norm of the dictionary change
  int failures = 0;              // superpixels whose step failed in this layer
  int dict_iterations = 0;
  std::uint64_t dict_hash = 0;
};

struct ForwardResult {
  FeatureField field;
  Dictionary dictionary;  // after the last layer
  std::vector<LayerDiagnostics> layers;
  std::vector<std::uint8_t> failed;  // per superpixel, any failed step
  // objectives[k][j]: objective of superpixel j after the coefficient phase of
  // layer k (k = 0 is the initialization), at the dictionary that phase used.
  std::vector<std::vector<double>> objectives;
};

/// M random labeled pixels per class become the atoms (class-major order).
SrsrNet init_network(const data::LabelMap& labels, const data::CovarianceImage& img, int atoms_per_class,
                     std::uint64_t seed);

ForwardResult forward(const SrsrNet& net, const std::vector<seg::Superpixel>& superpixels);

/// FNV-1a over the raw bytes of every atom.
std::uint64_t dictionary_hash(const Dictionary& dict);

PixelFeatures project_to_pixels(const FeatureField& field, const seg::SuperpixelMap& map);

/// PSARFEA1: u32 segment count, u32 N, then K x N float64 row-major.
void save_features(const std::string& path, const FeatureField& field);
FeatureField load_features(const std::string& path);

}  // namespace srsr::net
