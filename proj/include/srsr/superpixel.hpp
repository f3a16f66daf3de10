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

#pragma once

#include <string>
#include <vector>

#include "srsr/hpd.hpp"
#include "srsr/polsar_data.hpp"

namespace srsr::seg {

/// Segment id per pixel, contiguous in [0, count), each segment 4-connected.
struct SuperpixelMap {
  int height = 0;
  int width = 0;
  std::vector<int> ids;
  int count = 0;
};

struct Superpixel {
  int id = 0;
  std::vector<std::size_t> members;  // raster indices
  HpdMatrix mean;                    // entrywise mean of the members' matrices
  double row = 0.0;                  // centroid
  double col = 0.0;
};

struct SegmenterConfig {
  double scale = 100.0;  // target mean superpixel area in pixels
  double compactness = 10.0;
  int max_iterations = 10;
};

/// SLIC-style local k-means on per-pixel log-covariance features (in dB) plus
/// image coordinates, followed by connectivity enforcement.
SuperpixelMap segment(const data::CovarianceImage& img, const SegmenterConfig& cfg);

/// Per-pixel feature used by the segmenter: the diagonal of log(X) and the
/// magnitudes of its strict upper triangle, scaled to decibels. Invalid pixels
/// get zeros. Row-major, feature_dim(d) values per pixel.
std::vector<double> log_features(const data::CovarianceImage& img);
int feature_dim(int d);

/// Turns an externally computed label raster into a valid SuperpixelMap:
/// ids are compacted in ascending order of the original id, and every
/// disconnected piece of one id receives its own id.
SuperpixelMap ingest_labels(const data::LabelMap& raster);
SuperpixelMap ingest_labels(const data::LabelMap& raster, int height, int width);

/// PSARLAB1 storage of segment ids (limited to 65535 segments).
void save_superpixels(const std::string& path, const SuperpixelMap& map);
SuperpixelMap load_superpixels(const std::string& path);

/// Per-segment arithmetic mean of the member covariances (invalid pixels are
/// skipped). Output is indexed by segment id.
std::vector<Superpixel> mean_covariance(const data::CovarianceImage& img, const SuperpixelMap& map);

}  // namespace srsr::seg
