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

// PolSAR rasters: covariance images, label maps, synthetic complex-Wishart
// scenes, and the PSARCOV1 / PSARLAB1 / PPM file formats.

#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "srsr/hpd.hpp"

namespace srsr::data {

/// H x W raster of d x d covariance matrices, row-major. Each pixel keeps its
/// raw entries (so file round trips are bit-exact) plus a validity flag that
/// records whether it passed validate_hpd.
class CovarianceImage {
 public:
  CovarianceImage() = default;
  CovarianceImage(int height, int width, int dim);

  int height() const { return height_; }
  int width() const { return width_; }
  int dim() const { return dim_; }
  std::size_t size() const { return pixels_.size(); }

  const CMatrix& pixel(std::size_t idx) const { return pixels_[idx]; }
  const CMatrix& pixel(int row, int col) const { return pixels_[index(row, col)]; }
  bool valid(std::size_t idx) const { return valid_[idx] != 0; }
  std::size_t valid_count() const;

  /// Stores an arbitrary matrix; validity is decided by validate_hpd with a
  /// tolerance scaled to the matrix magnitude.
  void set_raw(std::size_t idx, CMatrix m);
  void set(std::size_t idx, const HpdMatrix& m);

  std::size_t index(int row, int col) const {
    return static_cast<std::size_t>(row) * static_cast<std::size_t>(width_) + static_cast<std::size_t>(col);
  }

 private:
  int height_ = 0;
  int width_ = 0;
  int dim_ = 0;
  std::vector<CMatrix> pixels_;
  std::vector<std::uint8_t> valid_;
};

/// Row-major class ids; 0 marks an unlabeled pixel.
struct LabelMap {
  int height = 0;
  int width = 0;
  std::vector<std::uint16_t> labels;

  LabelMap() = default;
  LabelMap(int h, int w, std::uint16_t fill = 0)
      : height(h), width(w), labels(static_cast<std::size_t>(h) * static_cast<std::size_t>(w), fill) {}

  std::uint16_t at(int row, int col) const { return labels[static_cast<std::size_t>(row) * width + col]; }
  int max_label() const;
  std::size_t labeled_count() const;
};

struct RgbImage {
  int height = 0;
  int width = 0;
  std::vector<std::uint8_t> rgb;  // 3 bytes per pixel, row-major
};

enum class RegionLayout { Stripes, Voronoi };

struct SceneSpec {
  int height = 128;
  int width = 128;
  std::vector<HpdMatrix> prototypes;  // one per class, class id = index + 1
  int looks = 16;
  RegionLayout layout = RegionLayout::Voronoi;
  int regions = 12;  // Voronoi cells; ignored for stripes
  std::uint64_t seed = 0;

  int classes() const { return static_cast<int>(prototypes.size()); }
};

struct Scene {
  CovarianceImage image;
  LabelMap labels;
};

/// Throws InvalidSpec when the scene settings are unusable (looks < d, empty prototypes,
/// mismatched prototype dims, fewer Voronoi cells than classes).
void check_scene_spec(const SceneSpec& spec);

/// L-look complex-Wishart scene. Pixels in class c are (1/L) sum_k z_k z_k^H
/// with z_k = chol(Sigma_c) (g1 + i g2) / sqrt(2). Rows draw from independent
/// seeded streams, so the output does not depend on the worker count.
Scene generate_wishart_scene(const SceneSpec& spec);

/// Built-in 3x3 prototypes with distinct surface / volume / double-bounce
/// signatures, usable for up to 6 classes.
std::vector<HpdMatrix> default_prototypes(int classes);

void save_covariance(const std::string& path, const CovarianceImage& img);
CovarianceImage load_covariance(const std::string& path);

void save_labels(const std::string& path, const LabelMap& labels);
LabelMap load_labels(const std::string& path);

/// Pauli-basis intensities (|HH-VV|, |HV|, |HH+VV|) as R, G, B, each channel
/// stretched between its 2nd and 98th percentile. Requires d = 3.
RgbImage pauli_rgb(const CovarianceImage& img);

/// Fixed 8-colour palette (0 = black); ids above 7 wrap onto 1..7.
RgbImage render_labels(const LabelMap& labels);

void save_ppm(const std::string& path, const RgbImage& img);

}  // namespace srsr::data
