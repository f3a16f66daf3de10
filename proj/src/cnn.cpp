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

#include "srsr/cnn.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <random>

#include "binary_io.hpp"
#include "srsr/parallel.hpp"

namespace srsr::cnn {

namespace {

using RowMat = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

constexpr int H1 = CnnModel::kHidden1;
constexpr int H2 = CnnModel::kHidden2;
constexpr int kTaps = 9;
constexpr int kChunk = 32;  // samples per work item; fixed so reductions do not depend on threads

// Distinct feature vectors plus, per pixel, the row holding its vector.
struct Palette {
  RowMat rows;
  std::vector<int> index;
  int height = 0;
  int width = 0;
};

Palette make_palette(const PixelFeatures& f) {
  const std::size_t pixels = static_cast<std::size_t>(f.height) * static_cast<std::size_t>(f.width);
  if (f.values.size() != pixels * static_cast<std::size_t>(f.channels)) {
    throw Error(ErrorCode::ShapeMismatch, "pixel feature buffer does not match its dimensions");
  }
  Palette p;
  p.height = f.height;
  p.width = f.width;
  if (f.segments.size() == pixels && pixels > 0) {
    const int count = *std::max_element(f.segments.begin(), f.segments.end()) + 1;
    p.rows = RowMat::Zero(count, f.channels);
    std::vector<std::uint8_t> filled(count, 0);
    for (std::size_t i = 0; i < pixels; ++i) {
      const int k = f.segments[i];
      if (k < 0) throw Error(ErrorCode::ShapeMismatch, "negative segment id in pixel features");
      if (!filled[k]) {
        p.rows.row(k) = Eigen::Map<const Eigen::RowVectorXd>(f.at(i), f.channels);
        filled[k] = 1;
      }
    }
    p.index = f.segments;
  } else {
    p.rows = Eigen::Map<const RowMat>(f.values.data(), static_cast<Eigen::Index>(pixels), f.channels);
    p.index.resize(pixels);
    std::iota(p.index.begin(), p.index.end(), 0);
  }
  return p;
}

Palette tensor_palette(const Tensor4& t) {
  Palette p;
  const int pp = t.height * t.width;
  p.rows.resize(static_cast<Eigen::Index>(t.batch) * pp, t.channels);
  for (int b = 0; b < t.batch; ++b) {
    for (int c = 0; c < t.channels; ++c) {
      for (int y = 0; y < t.height; ++y) {
        for (int x = 0; x < t.width; ++x) p.rows(b * pp + y * t.width + x, c) = t.at(b, c, y, x);
      }
    }
  }
  p.index.resize(static_cast<std::size_t>(t.batch) * pp);
  std::iota(p.index.begin(), p.index.end(), 0);
  return p;
}

int reflect(int i, int n) {
  if (n == 1) return 0;
  const int period = 2 * n - 2;
  i %= period;
  if (i < 0) i += period;
  return i < n ? i : period - i;
}

// Palette rows of the p x p patches around `centers`, sample-major.
std::vector<int> patch_index(const Palette& pal, const std::size_t* centers, std::size_t count, int p) {
  std::vector<int> idx(count * static_cast<std::size_t>(p) * p);
  const int half = p / 2;
  for (std::size_t s = 0; s < count; ++s) {
    const int r0 = static_cast<int>(centers[s] / pal.width);
    const int c0 = static_cast<int>(centers[s] % pal.width);
    for (int dy = 0; dy < p; ++dy) {
      const int r = reflect(r0 + dy - half, pal.height);
      for (int dx = 0; dx < p; ++dx) {
        const int c = reflect(c0 + dx - half, pal.width);
        idx[(s * p + dy) * p + dx] = pal.index[static_cast<std::size_t>(r) * pal.width + c];
      }
    }
  }
  return idx;
}

void check_patch(int p) {
  if (p < 7) throw Error(ErrorCode::ShapeMismatch, "patch size must be at least 7");
}

// Per-thread buffers for one chunk; reused so that large temporaries are not
// reallocated for every chunk.
struct Workspace {
  std::vector<int> used;
  std::vector<int> local;
  RowMat Pu, Z, A1, cols2, A2, cols3, Z3, prob;
  RowMat dlogit, dZ3, dcols3, dZ2, dcols2, dZ1, dZ;
  // Aligned copies: Eigen kernels pick their code path from the buffer
  // alignment, so unaligned std::vector storage would change the rounding.
  Eigen::VectorXd params, grad;
};

void im2col(const RowMat& in, int S, int side_in, int side_out, int ch, RowMat& cols) {
  cols.resize(S * side_out * side_out, kTaps * ch);
  for (int s = 0; s < S; ++s) {
    for (int y = 0; y < side_out; ++y) {
      for (int x = 0; x < side_out; ++x) {
        auto row = cols.row((s * side_out + y) * side_out + x);
        for (int ky = 0; ky < 3; ++ky) {
          for (int kx = 0; kx < 3; ++kx) {
            row.segment((ky * 3 + kx) * ch, ch) = in.row((s * side_in + y + ky) * side_in + x + kx);
          }
        }
      }
    }
  }
}

void col2im(const RowMat& cols, int S, int side_in, int side_out, int ch, RowMat& out) {
  out.setZero(S * side_in * side_in, ch);
  for (int s = 0; s < S; ++s) {
    for (int y = 0; y < side_out; ++y) {
      for (int x = 0; x < side_out; ++x) {
        auto row = cols.row((s * side_out + y) * side_out + x);
        for (int ky = 0; ky < 3; ++ky) {
          for (int kx = 0; kx < 3; ++kx) {
            out.row((s * side_in + y + ky) * side_in + x + kx) += row.segment((ky * 3 + kx) * ch, ch);
          }
        }
      }
    }
  }
}

// Forward (and optionally backward) pass over S samples whose patches are
// given as palette rows. Returns the summed cross-entropy when targets are
// given. Gradients are accumulated into grad scaled by `scale`.
double run_chunk(const CnnModel& m, const RowMat& palette, const int* idx, int S, int p, const int* targets,
                 double scale, double* grad_out, double* probs) {
  thread_local Workspace ws;
  const int N = m.in_channels();
  const int C = m.classes();
  const auto off = m.offsets();
  ws.params = Eigen::Map<const Eigen::VectorXd>(m.params().data(), static_cast<Eigen::Index>(m.param_count()));
  const double* P = ws.params.data();
  Eigen::Map<const RowMat> W1(P + off.w1, N, kTaps * H1);
  Eigen::Map<const Eigen::RowVectorXd> b1(P + off.b1, H1);
  Eigen::Map<const Eigen::MatrixXd> W2(P + off.w2, kTaps * H1, H2);
  Eigen::Map<const Eigen::RowVectorXd> b2(P + off.b2, H2);
  Eigen::Map<const Eigen::MatrixXd> W3(P + off.w3, kTaps * H2, C);
  Eigen::Map<const Eigen::RowVectorXd> b3(P + off.b3, C);

  const int pp = p * p;
  const int o1 = p - 2;
  const int o2 = p - 4;
  const int o3 = p - 6;

  ws.used.assign(idx, idx + static_cast<std::ptrdiff_t>(S) * pp);
  std::sort(ws.used.begin(), ws.used.end());
  ws.used.erase(std::unique(ws.used.begin(), ws.used.end()), ws.used.end());
  ws.local.resize(static_cast<std::size_t>(S) * pp);
  for (std::size_t i = 0; i < ws.local.size(); ++i) {
    ws.local[i] = static_cast<int>(std::lower_bound(ws.used.begin(), ws.used.end(), idx[i]) - ws.used.begin());
  }
  const int* local = ws.local.data();
  ws.Pu.resize(static_cast<Eigen::Index>(ws.used.size()), N);
  for (std::size_t u = 0; u < ws.used.size(); ++u) ws.Pu.row(static_cast<Eigen::Index>(u)) = palette.row(ws.used[u]);
  ws.Z.noalias() = ws.Pu * W1;

  ws.A1.resize(S * o1 * o1, H1);
  for (int s = 0; s < S; ++s) {
    for (int y = 0; y < o1; ++y) {
      for (int x = 0; x < o1; ++x) {
        auto row = ws.A1.row((s * o1 + y) * o1 + x);
        row = b1;
        for (int ky = 0; ky < 3; ++ky) {
          for (int kx = 0; kx < 3; ++kx) {
            row += ws.Z.row(local[s * pp + (y + ky) * p + x + kx]).segment((ky * 3 + kx) * H1, H1);
          }
        }
      }
    }
  }
  ws.A1 = ws.A1.cwiseMax(0.0);

  im2col(ws.A1, S, o1, o2, H1, ws.cols2);
  ws.A2.noalias() = ws.cols2 * W2;
  ws.A2.rowwise() += b2;
  ws.A2 = ws.A2.cwiseMax(0.0);
  im2col(ws.A2, S, o2, o3, H2, ws.cols3);
  ws.Z3.noalias() = ws.cols3 * W3;
  ws.Z3.rowwise() += b3;

  const int pool = o3 * o3;
  ws.prob.resize(S, C);
  for (int s = 0; s < S; ++s) {
    Eigen::RowVectorXd logit = ws.Z3.middleRows(s * pool, pool).colwise().mean();
    logit.array() -= logit.maxCoeff();
    Eigen::RowVectorXd e = logit.array().exp();
    ws.prob.row(s) = e / e.sum();
  }
  if (probs != nullptr) Eigen::Map<RowMat>(probs, S, C) = ws.prob;
  if (targets == nullptr) return 0.0;

  double loss = 0.0;
  for (int s = 0; s < S; ++s) loss -= std::log(std::max(ws.prob(s, targets[s]), std::numeric_limits<double>::min()));
  if (grad_out == nullptr) return loss;

  ws.grad.setZero(ws.params.size());
  double* grad = ws.grad.data();
  Eigen::Map<RowMat> gW1(grad + off.w1, N, kTaps * H1);
  Eigen::Map<Eigen::RowVectorXd> gb1(grad + off.b1, H1);
  Eigen::Map<Eigen::MatrixXd> gW2(grad + off.w2, kTaps * H1, H2);
  Eigen::Map<Eigen::RowVectorXd> gb2(grad + off.b2, H2);
  Eigen::Map<Eigen::MatrixXd> gW3(grad + off.w3, kTaps * H2, C);
  Eigen::Map<Eigen::RowVectorXd> gb3(grad + off.b3, C);

  ws.dlogit = ws.prob;
  for (int s = 0; s < S; ++s) ws.dlogit(s, targets[s]) -= 1.0;
  ws.dlogit *= scale;
  gb3 += ws.dlogit.colwise().sum();

  ws.dZ3.resize(S * pool, C);
  for (int s = 0; s < S; ++s) {
    for (int q = 0; q < pool; ++q) ws.dZ3.row(s * pool + q) = ws.dlogit.row(s) / static_cast<double>(pool);
  }
  gW3.noalias() += ws.cols3.transpose() * ws.dZ3;
  ws.dcols3.noalias() = ws.dZ3 * W3.transpose();
  col2im(ws.dcols3, S, o2, o3, H2, ws.dZ2);
  ws.dZ2.array() *= (ws.A2.array() > 0.0).cast<double>();

  gb2 += ws.dZ2.colwise().sum();
  gW2.noalias() += ws.cols2.transpose() * ws.dZ2;
  ws.dcols2.noalias() = ws.dZ2 * W2.transpose();
  col2im(ws.dcols2, S, o1, o2, H1, ws.dZ1);
  ws.dZ1.array() *= (ws.A1.array() > 0.0).cast<double>();
  gb1 += ws.dZ1.colwise().sum();

  ws.dZ.setZero(ws.Z.rows(), ws.Z.cols());
  for (int s = 0; s < S; ++s) {
    for (int y = 0; y < o1; ++y) {
      for (int x = 0; x < o1; ++x) {
        auto row = ws.dZ1.row((s * o1 + y) * o1 + x);
        for (int ky = 0; ky < 3; ++ky) {
          for (int kx = 0; kx < 3; ++kx) {
            ws.dZ.row(local[s * pp + (y + ky) * p + x + kx]).segment((ky * 3 + kx) * H1, H1) += row;
          }
        }
      }
    }
  }
  gW1.noalias() += ws.Pu.transpose() * ws.dZ;
  for (Eigen::Index i = 0; i < ws.grad.size(); ++i) grad_out[i] += grad[i];
  return loss;
}

// Whole-batch pass split into fixed chunks; per-chunk gradients land in
// `parts` and are summed in chunk order. Returns the mean loss (0 without
// targets).
double batch_pass(const CnnModel& m, const RowMat& palette, const std::vector<int>& idx, int B, int p,
                  const int* targets, std::vector<double>* grad, RowMat* probs,
                  std::vector<std::vector<double>>* parts = nullptr) {
  const int chunks = (B + kChunk - 1) / kChunk;
  std::vector<std::vector<double>> own;
  std::vector<std::vector<double>>& part = parts != nullptr ? *parts : own;
  if (grad != nullptr && part.size() < static_cast<std::size_t>(chunks)) part.resize(chunks);
  std::vector<double> loss(chunks, 0.0);
  if (probs != nullptr) probs->resize(B, m.classes());
  const double scale = 1.0 / static_cast<double>(B);
  parallel_for(chunks, [&](std::ptrdiff_t k) {
    const int start = static_cast<int>(k) * kChunk;
    const int S = std::min(kChunk, B - start);
    double* g = nullptr;
    if (grad != nullptr) {
      part[k].assign(m.param_count(), 0.0);
      g = part[k].data();
    }
    loss[k] = run_chunk(m, palette, idx.data() + static_cast<std::ptrdiff_t>(start) * p * p, S, p,
                        targets != nullptr ? targets + start : nullptr, scale, g,
                        probs != nullptr ? probs->data() + static_cast<std::ptrdiff_t>(start) * m.classes() : nullptr);
  });
  if (grad != nullptr) {
    grad->assign(m.param_count(), 0.0);
    for (int k = 0; k < chunks; ++k) {
      const auto& g = part[k];
      for (std::size_t i = 0; i < g.size(); ++i) (*grad)[i] += g[i];
    }
  }
  double total = 0.0;
  for (double l : loss) total += l;
  return total * scale;
}

void adam_step(CnnModel& m, const std::vector<double>& g, const TrainConfig& cfg) {
  auto& w = m.params();
  auto& mm = m.adam_m();
  auto& vv = m.adam_v();
  if (mm.size() != w.size()) mm.assign(w.size(), 0.0);
  if (vv.size() != w.size()) vv.assign(w.size(), 0.0);
  const long long t = ++m.adam_step();
  const double c1 = 1.0 - std::pow(cfg.beta1, static_cast<double>(t));
  const double c2 = 1.0 - std::pow(cfg.beta2, static_cast<double>(t));
  for (std::size_t i = 0; i < w.size(); ++i) {
    mm[i] = cfg.beta1 * mm[i] + (1.0 - cfg.beta1) * g[i];
    vv[i] = cfg.beta2 * vv[i] + (1.0 - cfg.beta2) * g[i] * g[i];
    w[i] -= cfg.learning_rate * (mm[i] / c1) / (std::sqrt(vv[i] / c2) + cfg.epsilon);
  }
}

void check_tensor(const CnnModel& m, const Tensor4& t) {
  if (m.param_count() == 0) throw Error(ErrorCode::ShapeMismatch, "model has no parameters");
  if (t.channels != m.in_channels()) {
    throw Error(ErrorCode::ShapeMismatch, "input has " + std::to_string(t.channels) + " channels, model expects " +
                                              std::to_string(m.in_channels()));
  }
  if (t.height != t.width) throw Error(ErrorCode::ShapeMismatch, "patches must be square");
  check_patch(t.height);
  if (t.data.size() != static_cast<std::size_t>(t.batch) * t.channels * t.height * t.width) {
    throw Error(ErrorCode::ShapeMismatch, "tensor buffer does not match its shape");
  }
}

void check_targets(const CnnModel& m, const std::vector<int>& targets, int batch) {
  if (static_cast<int>(targets.size()) != batch) throw Error(ErrorCode::ShapeMismatch, "one target per sample");
  for (int t : targets) {
    if (t < 0 || t >= m.classes()) throw Error(ErrorCode::ShapeMismatch, "target out of range");
  }
}

}  // namespace

CnnModel::CnnModel(int in_channels, int classes) : in_(in_channels), classes_(classes) {
  if (in_channels <= 0 || classes <= 0) throw Error(ErrorCode::InvalidArgument, "channels and classes must be positive");
  params_.assign(offsets().end, 0.0);
}

CnnModel CnnModel::he_uniform(int in_channels, int classes, std::uint64_t seed) {
  CnnModel m(in_channels, classes);
  const Offsets o = m.offsets();
  std::mt19937_64 rng(seed);
  auto fill = [&](std::size_t begin, std::size_t end, int fan_in) {
    std::uniform_real_distribution<double> u(-std::sqrt(6.0 / fan_in), std::sqrt(6.0 / fan_in));
    for (std::size_t i = begin; i < end; ++i) m.params_[i] = u(rng);
  };
  fill(o.w1, o.b1, kTaps * in_channels);
  fill(o.w2, o.b2, kTaps * H1);
  fill(o.w3, o.b3, kTaps * H2);
  return m;
}

CnnModel::Offsets CnnModel::offsets() const {
  Offsets o{};
  o.w1 = 0;
  o.b1 = o.w1 + static_cast<std::size_t>(in_) * kTaps * H1;
  o.w2 = o.b1 + H1;
  o.b2 = o.w2 + static_cast<std::size_t>(H2) * kTaps * H1;
  o.w3 = o.b2 + H2;
  o.b3 = o.w3 + static_cast<std::size_t>(classes_) * kTaps * H2;
  o.end = o.b3 + static_cast<std::size_t>(classes_);
  return o;
}

Split stratified_split(const data::LabelMap& labels, double ratio, std::uint64_t seed) {
  if (!(ratio >= 0.0 && ratio <= 1.0)) throw Error(ErrorCode::InvalidArgument, "train ratio must lie in [0, 1]");
  const int classes = labels.max_label();
  if (classes <= 0) throw Error(ErrorCode::EmptyClass, "label map has no labeled pixels");
  std::vector<std::vector<std::size_t>> per_class(classes);
  for (std::size_t p = 0; p < labels.labels.size(); ++p) {
    if (labels.labels[p] > 0) per_class[labels.labels[p] - 1].push_back(p);
  }
  Split out;
  std::mt19937_64 rng(seed);
  for (int c = 0; c < classes; ++c) {
    auto& v = per_class[c];
    if (v.empty()) throw Error(ErrorCode::EmptyClass, "class " + std::to_string(c + 1) + " has no labeled pixel");
    std::shuffle(v.begin(), v.end(), rng);
    const auto n = static_cast<double>(v.size());
    const std::size_t take = std::min(v.size(), static_cast<std::size_t>(std::max(1.0, std::round(ratio * n))));
    out.train.insert(out.train.end(), v.begin(), v.begin() + static_cast<std::ptrdiff_t>(take));
    out.test.insert(out.test.end(), v.begin() + static_cast<std::ptrdiff_t>(take), v.end());
  }
  std::sort(out.train.begin(), out.train.end());
  std::sort(out.test.begin(), out.test.end());
  return out;
}

PatchSplit extract_patches(const PixelFeatures& feat, const data::LabelMap& labels, const TrainConfig& cfg) {
  if (feat.height != labels.height || feat.width != labels.width) {
    throw Error(ErrorCode::DimensionMismatch, "features and labels differ in size");
  }
  check_patch(cfg.patch);
  const Split split = stratified_split(labels, cfg.train_ratio, cfg.seed);
  const int classes = labels.max_label();
  auto build = [&](const std::vector<std::size_t>& pix) {
    PatchSet s;
    s.classes = classes;
    s.patch = cfg.patch;
    s.centers = pix;
    s.targets.reserve(pix.size());
    for (std::size_t p : pix) s.targets.push_back(labels.labels[p] - 1);
    return s;
  };
  return {build(split.train), build(split.test)};
}

Tensor4 gather_patches(const PixelFeatures& feat, const PatchSet& set) {
  check_patch(set.patch);
  const int p = set.patch;
  const int half = p / 2;
  Tensor4 t(static_cast<int>(set.size()), feat.channels, p, p);
  for (std::size_t s = 0; s < set.size(); ++s) {
    const int r0 = static_cast<int>(set.centers[s] / feat.width);
    const int c0 = static_cast<int>(set.centers[s] % feat.width);
    for (int dy = 0; dy < p; ++dy) {
      const int r = reflect(r0 + dy - half, feat.height);
      for (int dx = 0; dx < p; ++dx) {
        const int c = reflect(c0 + dx - half, feat.width);
        const double* v = feat.at(static_cast<std::size_t>(r) * feat.width + c);
        for (int ch = 0; ch < feat.channels; ++ch) t.at(static_cast<int>(s), ch, dy, dx) = v[ch];
      }
    }
  }
  return t;
}

Eigen::MatrixXd forward(const CnnModel& model, const Tensor4& batch) {
  check_tensor(model, batch);
  const Palette pal = tensor_palette(batch);
  RowMat probs;
  batch_pass(model, pal.rows, pal.index, batch.batch, batch.height, nullptr, nullptr, &probs);
  return probs;
}

double loss_and_gradient(const CnnModel& model, const Tensor4& batch, const std::vector<int>& targets,
                         std::vector<double>& grad) {
  check_tensor(model, batch);
  check_targets(model, targets, batch.batch);
  if (batch.batch == 0) throw Error(ErrorCode::ShapeMismatch, "empty batch");
  const Palette pal = tensor_palette(batch);
  return batch_pass(model, pal.rows, pal.index, batch.batch, batch.height, targets.data(), &grad, nullptr);
}

double backward_and_step(CnnModel& model, const Tensor4& batch, const std::vector<int>& targets,
                         const TrainConfig& cfg) {
  std::vector<double> grad;
  const double loss = loss_and_gradient(model, batch, targets, grad);
  adam_step(model, grad, cfg);
  return loss;
}

TrainResult train(CnnModel& model, const PixelFeatures& feat, const PatchSet& train_set, const TrainConfig& cfg) {
  if (train_set.size() == 0) throw Error(ErrorCode::EmptyClass, "empty training set");
  if (feat.channels != model.in_channels()) throw Error(ErrorCode::ShapeMismatch, "feature channels differ from model");
  if (cfg.batch_size <= 0) throw Error(ErrorCode::InvalidArgument, "batch size must be positive");
  check_patch(train_set.patch);
  check_targets(model, train_set.targets, static_cast<int>(train_set.size()));
  std::vector<int> seen(model.classes(), 0);
  for (int t : train_set.targets) seen[t] = 1;
  for (int c = 0; c < model.classes(); ++c) {
    if (!seen[c]) throw Error(ErrorCode::EmptyClass, "class " + std::to_string(c + 1) + " has no training sample");
  }

  const Palette pal = make_palette(feat);
  const int p = train_set.patch;
  TrainResult out;
  std::vector<std::size_t> order(train_set.size());
  std::iota(order.begin(), order.end(), 0);
  std::mt19937_64 rng(cfg.seed);
  std::vector<double> grad;
  std::vector<std::vector<double>> parts;
  for (int e = 0; e < cfg.epochs; ++e) {
    std::shuffle(order.begin(), order.end(), rng);
    double sum = 0.0;
    for (std::size_t start = 0; start < order.size(); start += static_cast<std::size_t>(cfg.batch_size)) {
      const std::size_t count = std::min(order.size() - start, static_cast<std::size_t>(cfg.batch_size));
      std::vector<std::size_t> centers(count);
      std::vector<int> targets(count);
      for (std::size_t i = 0; i < count; ++i) {
        centers[i] = train_set.centers[order[start + i]];
        targets[i] = train_set.targets[order[start + i]];
      }
      const std::vector<int> idx = patch_index(pal, centers.data(), count, p);
      const double loss =
          batch_pass(model, pal.rows, idx, static_cast<int>(count), p, targets.data(), &grad, nullptr, &parts);
      adam_step(model, grad, cfg);
      sum += loss * static_cast<double>(count);
    }
    out.epoch_loss.push_back(sum / static_cast<double>(order.size()));
  }
  return out;
}

std::vector<int> predict(const CnnModel& model, const PixelFeatures& feat, const std::vector<std::size_t>& centers,
                         int patch) {
  check_patch(patch);
  if (feat.channels != model.in_channels()) throw Error(ErrorCode::ShapeMismatch, "feature channels differ from model");
  const Palette pal = make_palette(feat);
  const std::vector<int> idx = patch_index(pal, centers.data(), centers.size(), patch);
  RowMat probs;
  batch_pass(model, pal.rows, idx, static_cast<int>(centers.size()), patch, nullptr, nullptr, &probs);
  std::vector<int> out(centers.size());
  for (std::size_t s = 0; s < centers.size(); ++s) {
    int best = 0;
    for (int c = 1; c < model.classes(); ++c) {
      if (probs(static_cast<Eigen::Index>(s), c) > probs(static_cast<Eigen::Index>(s), best)) best = c;
    }
    out[s] = best;
  }
  return out;
}

data::LabelMap classify_image(const CnnModel& model, const PixelFeatures& feat, int patch) {
  std::vector<std::size_t> all(static_cast<std::size_t>(feat.height) * static_cast<std::size_t>(feat.width));
  std::iota(all.begin(), all.end(), 0);
  const std::vector<int> pred = predict(model, feat, all, patch);
  data::LabelMap out(feat.height, feat.width);
  for (std::size_t i = 0; i < pred.size(); ++i) out.labels[i] = static_cast<std::uint16_t>(pred[i] + 1);
  return out;
}

void save_model(const std::string& path, const CnnModel& model) {
  io::Writer w(path);
  w.magic("PSARCNN1");
  w.u32(static_cast<std::uint32_t>(model.in_channels()));
  w.u32(static_cast<std::uint32_t>(model.classes()));
  w.u32(3);
  const std::uint32_t shapes[3][4] = {{H1, static_cast<std::uint32_t>(model.in_channels()), 3, 3},
                                      {H2, H1, 3, 3},
                                      {static_cast<std::uint32_t>(model.classes()), H2, 3, 3}};
  for (const auto& s : shapes) {
    for (std::uint32_t v : s) w.u32(v);
  }
  w.f64s(model.params());
  w.finish();
}

CnnModel load_model(const std::string& path) {
  io::Reader r(path);
  r.expect_magic("PSARCNN1");
  const auto n = static_cast<int>(r.u32());
  const auto c = static_cast<int>(r.u32());
  if (r.u32() != 3) throw Error(ErrorCode::ShapeMismatch, path + ": expected three layers");
  const std::uint32_t expect[3][4] = {{H1, static_cast<std::uint32_t>(n), 3, 3},
                                      {H2, H1, 3, 3},
                                      {static_cast<std::uint32_t>(c), H2, 3, 3}};
  for (const auto& s : expect) {
    for (std::uint32_t v : s) {
      if (r.u32() != v) throw Error(ErrorCode::ShapeMismatch, path + ": unexpected layer shape");
    }
  }
  CnnModel m(n, c);
  const std::uint64_t need = m.param_count() * sizeof(double);
  if (r.remaining() < need) throw Error(ErrorCode::TruncatedFile, path + ": parameter payload is short");
  if (r.remaining() > need) throw Error(ErrorCode::DimensionMismatch, path + ": trailing bytes after parameters");
  r.f64s(m.params());
  return m;
}

}  // namespace srsr::cnn
