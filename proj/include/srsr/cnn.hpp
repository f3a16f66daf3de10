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

// Patch classifier: three valid 3x3 convolutions (N -> 32 -> 64 -> C, ReLU
// after the first two), global average pooling and softmax, trained with Adam
// on mean cross-entropy.
//
// Pixel features produced from superpixel codes are piecewise constant, so the
// first convolution is evaluated on a palette of distinct feature vectors:
// Z = P W1 is computed once per distinct vector and each output position sums
// nine gathered rows of Z. The result is identical to a dense convolution.

#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "srsr/polsar_data.hpp"
#include "srsr/srsrnet.hpp"

namespace srsr::cnn {

using net::PixelFeatures;

/// Shape (batch, channels, height, width), row-major in that order.
struct Tensor4 {
  int batch = 0;
  int channels = 0;
  int height = 0;
  int width = 0;
  std::vector<double> data;

  Tensor4() = default;
  Tensor4(int b, int c, int h, int w)
      : batch(b), channels(c), height(h), width(w), data(static_cast<std::size_t>(b) * c * h * w, 0.0) {}

  double& at(int b, int c, int y, int x) { return data[((static_cast<std::size_t>(b) * channels + c) * height + y) * width + x]; }
  double at(int b, int c, int y, int x) const {
    return data[((static_cast<std::size_t>(b) * channels + c) * height + y) * width + x];
  }
};

class CnnModel {
 public:
  static constexpr int kHidden1 = 32;
  static constexpr int kHidden2 = 64;
  static constexpr int kKernel = 3;

  CnnModel() = default;
  /// All weights and biases zero.
  CnnModel(int in_channels, int classes);
  /// He-uniform weights (bound sqrt(6 / fan_in)), zero biases.
  static CnnModel he_uniform(int in_channels, int classes, std::uint64_t seed);

  int in_channels() const { return in_; }
  int classes() const { return classes_; }

  /// Flat parameters in declaration order w1, b1, w2, b2, w3, b3. w1 is
  /// [in][ky][kx][out]; w2 and w3 are [out][ky][kx][in].
  std::vector<double>& params() { return params_; }
  const std::vector<double>& params() const { return params_; }
  std::size_t param_count() const { return params_.size(); }

  struct Offsets {
    std::size_t w1, b1, w2, b2, w3, b3, end;
  };
  Offsets offsets() const;

  /// Adam moments and step counter.
  std::vector<double>& adam_m() { return m_; }
  std::vector<double>& adam_v() { return v_; }
  long long& adam_step() { return t_; }

 private:
  int in_ = 0;
  int classes_ = 0;
  std::vector<double> params_;
  std::vector<double> m_;
  std::vector<double> v_;
  long long t_ = 0;
};

struct TrainConfig {
  double learning_rate = 1e-3;
  int batch_size = 128;
  int epochs = 50;
  int patch = 9;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double epsilon = 1e-8;
  std::uint64_t seed = 0;
  double train_ratio = 0.10;
};

/// Raster indices of the training and test pixels.
struct Split {
  std::vector<std::size_t> train;
  std::vector<std::size_t> test;
};

/// Per class c with n_c labeled pixels, max(1, round(ratio n_c)) go to
/// training (capped at n_c). Throws EmptyClass if some id in 1..max_label has
/// no pixel.
Split stratified_split(const data::LabelMap& labels, double ratio, std::uint64_t seed);

/// Patch centers with 0-based class targets. Patches are gathered on demand.
struct PatchSet {
  std::vector<std::size_t> centers;
  std::vector<int> targets;
  int classes = 0;
  int patch = 9;

  std::size_t size() const { return centers.size(); }
};

struct PatchSplit {
  PatchSet train;
  PatchSet test;
};

PatchSplit extract_patches(const PixelFeatures& feat, const data::LabelMap& labels, const TrainConfig& cfg);

/// Materializes the patches of `set` as a (B, N, p, p) tensor with reflect
/// padding at the borders.
Tensor4 gather_patches(const PixelFeatures& feat, const PatchSet& set);

/// Class probabilities, batch x C.
Eigen::MatrixXd forward(const CnnModel& model, const Tensor4& batch);

/// Mean cross-entropy and its gradient with respect to params().
double loss_and_gradient(const CnnModel& model, const Tensor4& batch, const std::vector<int>& targets,
                         std::vector<double>& grad);

/// Loss before the update, then one Adam step.
double backward_and_step(CnnModel& model, const Tensor4& batch, const std::vector<int>& targets,
                         const TrainConfig& cfg);

struct TrainResult {
  std::vector<double> epoch_loss;
};

TrainResult train(CnnModel& model, const PixelFeatures& feat, const PatchSet& train_set, const TrainConfig& cfg);

/// Predicted 0-based classes for the patches centred at `centers`.
std::vector<int> predict(const CnnModel& model, const PixelFeatures& feat, const std::vector<std::size_t>& centers,
                         int patch = 9);

/// Per-pixel argmax (ties to the lower id); output ids are 1..C.
data::LabelMap classify_image(const CnnModel& model, const PixelFeatures& feat, int patch = 9);

/// PSARCNN1: u32 N, u32 C, u32 layer count, per layer u32 (out, in, kh, kw),
/// then the float64 parameters in declaration order.
void save_model(const std::string& path, const CnnModel& model);
CnnModel load_model(const std::string& path);

}  // namespace srsr::cnn
