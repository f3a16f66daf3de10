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

#include "srsr/polsar_data.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <fstream>
#include <limits>
#include <random>

#include "binary_io.hpp"
#include "srsr/parallel.hpp"

namespace srsr::data {

namespace {

constexpr std::string_view kCovMagic = "PSARCOV1";
constexpr std::string_view kLabMagic = "PSARLAB1";

bool is_valid_hpd(const CMatrix& m) {
  if (!m.allFinite()) return false;
  const double scale = std::max(1.0, m.cwiseAbs().maxCoeff());
  try {
    validate_hpd(m, kHermitianTol * scale);
    return true;
  } catch (const Error&) {
    return false;
  }
}

// Nearest-rank percentile of an already sorted vector.
double percentile(const std::vector<double>& sorted, double p) {
  const auto idx = static_cast<std::size_t>(std::lround(p * static_cast<double>(sorted.size() - 1)));
  return sorted[idx];
}

}  // namespace

CovarianceImage::CovarianceImage(int height, int width, int dim)
    : height_(height), width_(width), dim_(dim) {
  if (height <= 0 || width <= 0 || dim <= 0) {
    throw Error(ErrorCode::DimensionMismatch, "covariance image needs positive extents");
  }
  const auto n = static_cast<std::size_t>(height) * static_cast<std::size_t>(width);
  pixels_.assign(n, CMatrix::Zero(dim, dim));
  valid_.assign(n, 0);
}

std::size_t CovarianceImage::valid_count() const {
  return static_cast<std::size_t>(std::count(valid_.begin(), valid_.end(), std::uint8_t{1}));
}

void CovarianceImage::set_raw(std::size_t idx, CMatrix m) {
  if (m.rows() != dim_ || m.cols() != dim_) {
    throw Error(ErrorCode::DimensionMismatch, "pixel matrix has wrong dimension");
  }
  valid_[idx] = is_valid_hpd(m) ? 1 : 0;
  pixels_[idx] = std::move(m);
}

void CovarianceImage::set(std::size_t idx, const HpdMatrix& m) {
  if (m.dim() != dim_) throw Error(ErrorCode::DimensionMismatch, "pixel matrix has wrong dimension");
  pixels_[idx] = m.matrix();
  valid_[idx] = 1;
}

int LabelMap::max_label() const {
  if (labels.empty()) return 0;
  return *std::max_element(labels.begin(), labels.end());
}

std::size_t LabelMap::labeled_count() const {
  return labels.size() - static_cast<std::size_t>(std::count(labels.begin(), labels.end(), std::uint16_t{0}));
}

void check_scene_spec(const SceneSpec& spec) {
  if (spec.height <= 0 || spec.width <= 0) throw Error(ErrorCode::InvalidSpec, "scene extents must be positive");
  if (spec.prototypes.empty()) throw Error(ErrorCode::InvalidSpec, "no class prototypes");
  if (spec.prototypes.size() > std::numeric_limits<std::uint16_t>::max()) {
    throw Error(ErrorCode::InvalidSpec, "too many classes");
  }
  const auto d = spec.prototypes.front().dim();
  for (const auto& p : spec.prototypes) {
    if (p.dim() != d || d == 0) throw Error(ErrorCode::InvalidSpec, "prototype dimensions differ");
  }
  if (spec.looks < d) {
    throw Error(ErrorCode::InvalidSpec,
                "looks (" + std::to_string(spec.looks) + ") must be >= dimension (" + std::to_string(d) + ")");
  }
  if (spec.layout == RegionLayout::Voronoi && spec.regions < spec.classes()) {
    throw Error(ErrorCode::InvalidSpec, "Voronoi layout needs at least one cell per class");
  }
  if (spec.layout == RegionLayout::Stripes && spec.width < spec.classes()) {
    throw Error(ErrorCode::InvalidSpec, "stripe layout needs width >= classes");
  }
}

Scene generate_wishart_scene(const SceneSpec& spec) {
  check_scene_spec(spec);
  const int h = spec.height;
  const int w = spec.width;
  const auto d = spec.prototypes.front().dim();
  const int classes = spec.classes();

  Scene scene{CovarianceImage(h, w, static_cast<int>(d)), LabelMap(h, w)};

  // Region layout.
  if (spec.layout == RegionLayout::Stripes) {
    for (int r = 0; r < h; ++r) {
      for (int c = 0; c < w; ++c) {
        const int cls = static_cast<int>(static_cast<long>(c) * classes / w);
        scene.labels.labels[scene.image.index(r, c)] = static_cast<std::uint16_t>(cls + 1);
      }
    }
  } else {
    std::seed_seq seq{static_cast<std::uint32_t>(spec.seed), static_cast<std::uint32_t>(spec.seed >> 32), 0x1a7eu};
    std::mt19937_64 rng(seq);
    std::uniform_real_distribution<double> ur(0.0, static_cast<double>(h));
    std::uniform_real_distribution<double> uc(0.0, static_cast<double>(w));
    std::vector<std::array<double, 2>> sites(static_cast<std::size_t>(spec.regions));
    for (auto& s : sites) {
      s[0] = ur(rng);
      s[1] = uc(rng);
    }
    for (int r = 0; r < h; ++r) {
      for (int c = 0; c < w; ++c) {
        double best = std::numeric_limits<double>::infinity();
        int arg = 0;
        for (int k = 0; k < spec.regions; ++k) {
          const double dr = r + 0.5 - sites[k][0];
          const double dc = c + 0.5 - sites[k][1];
          const double dist = dr * dr + dc * dc;
          if (dist < best) {
            best = dist;
            arg = k;
          }
        }
        scene.labels.labels[scene.image.index(r, c)] = static_cast<std::uint16_t>(arg % classes + 1);
      }
    }
  }

  std::vector<CMatrix> chol;
  chol.reserve(spec.prototypes.size());
  for (const auto& p : spec.prototypes) {
    Eigen::LLT<CMatrix> llt(p.matrix());
    if (llt.info() != Eigen::Success) throw Error(ErrorCode::InvalidSpec, "prototype is not positive definite");
    chol.emplace_back(llt.matrixL());
  }

  const double inv_sqrt2 = 1.0 / std::sqrt(2.0);
  const double inv_looks = 1.0 / spec.looks;
  std::vector<CMatrix> pixels(static_cast<std::size_t>(h) * w);
  parallel_for(h, [&](std::ptrdiff_t r) {
    std::seed_seq seq{static_cast<std::uint32_t>(spec.seed), static_cast<std::uint32_t>(spec.seed >> 32),
                      static_cast<std::uint32_t>(r), 0x5eedu};
    std::mt19937_64 rng(seq);
    std::normal_distribution<double> normal(0.0, 1.0);
    Eigen::VectorXcd g(d);
    Eigen::MatrixXcd z(d, spec.looks);
    for (int c = 0; c < w; ++c) {
      const std::size_t idx = static_cast<std::size_t>(r) * w + c;
      const CMatrix& l = chol[scene.labels.labels[idx] - 1];
      for (int k = 0; k < spec.looks; ++k) {
        for (Eigen::Index i = 0; i < d; ++i) {
          const double re = normal(rng);
          const double im = normal(rng);
          g(i) = Complex(re, im) * inv_sqrt2;
        }
        z.col(k) = l * g;
      }
      // Explicit loops keep the result exactly Hermitian with a real diagonal.
      CMatrix x(d, d);
      for (Eigen::Index i = 0; i < d; ++i) {
        double diag = 0.0;
        for (int k = 0; k < spec.looks; ++k) diag += std::norm(z(i, k));
        x(i, i) = Complex(diag * inv_looks, 0.0);
        for (Eigen::Index j = i + 1; j < d; ++j) {
          Complex acc(0.0, 0.0);
          for (int k = 0; k < spec.looks; ++k) acc += z(i, k) * std::conj(z(j, k));
          x(i, j) = acc * inv_looks;
          x(j, i) = std::conj(x(i, j));
        }
      }
      pixels[idx] = std::move(x);
    }
  });
  for (std::size_t i = 0; i < pixels.size(); ++i) scene.image.set_raw(i, std::move(pixels[i]));
  return scene;
}

std::vector<HpdMatrix> default_prototypes(int classes) {
  // Lexicographic (HH, HV, VV) ordering.
  using C = Complex;
  const std::array<std::array<C, 6>, 6> table = {{
      // c11, c22, c33, c12, c13, c23
      {C(1.0), C(0.04), C(0.7), C(0.0), C(0.55, 0.0), C(0.0)},          // surface
      {C(0.5), C(0.25), C(0.5), C(0.0), C(0.15, 0.0), C(0.0)},          // volume
      {C(2.5), C(0.15), C(1.2), C(0.0), C(-1.1, 0.4), C(0.0)},          // double bounce
      {C(0.1), C(0.005), C(0.08), C(0.0), C(0.06, 0.0), C(0.0)},        // smooth / dark
      {C(1.5), C(0.6), C(1.0), C(0.0, 0.2), C(0.2, 0.3), C(0.05, 0.0)},  // oriented urban
      {C(0.8), C(0.1), C(1.6), C(0.0), C(0.4, -0.3), C(0.0)},           // crop
  }};
  if (classes < 1 || classes > static_cast<int>(table.size())) {
    throw Error(ErrorCode::InvalidSpec, "built-in prototypes cover 1.." + std::to_string(table.size()) + " classes");
  }
  std::vector<HpdMatrix> out;
  for (int k = 0; k < classes; ++k) {
    const auto& t = table[k];
    CMatrix m(3, 3);
    m << t[0], t[3], t[4], std::conj(t[3]), t[1], t[5], std::conj(t[4]), std::conj(t[5]), t[2];
    out.push_back(validate_hpd(m));
  }
  return out;
}

void save_covariance(const std::string& path, const CovarianceImage& img) {
  io::Writer w(path);
  w.magic(kCovMagic);
  w.u32(static_cast<std::uint32_t>(img.height()));
  w.u32(static_cast<std::uint32_t>(img.width()));
  w.u32(static_cast<std::uint32_t>(img.dim()));
  const auto d = static_cast<std::size_t>(img.dim());
  std::vector<double> buf(2 * d * d);
  for (std::size_t i = 0; i < img.size(); ++i) {
    const CMatrix& m = img.pixel(i);
    std::size_t k = 0;
    for (std::size_t r = 0; r < d; ++r) {
      for (std::size_t c = 0; c < d; ++c) {
        buf[k++] = m(r, c).real();
        buf[k++] = m(r, c).imag();
      }
    }
    w.f64s(buf);
  }
  w.finish();
}

CovarianceImage load_covariance(const std::string& path) {
  io::Reader r(path);
  r.expect_magic(kCovMagic);
  const std::uint32_t h = r.u32();
  const std::uint32_t w = r.u32();
  const std::uint32_t d = r.u32();
  if (h == 0 || w == 0 || d == 0 || h > (1u << 20) || w > (1u << 20) || d > 64) {
    throw Error(ErrorCode::DimensionMismatch, path + ": implausible header");
  }
  const std::uint64_t need = std::uint64_t{h} * w * d * d * 16;
  if (r.remaining() < need) {
    throw Error(ErrorCode::TruncatedFile,
                path + ": payload has " + std::to_string(r.remaining()) + " bytes, header needs " + std::to_string(need));
  }
  if (r.remaining() > need) throw Error(ErrorCode::DimensionMismatch, path + ": trailing bytes after payload");
  CovarianceImage img(static_cast<int>(h), static_cast<int>(w), static_cast<int>(d));
  std::vector<double> buf(2 * std::size_t{d} * d);
  for (std::size_t i = 0; i < img.size(); ++i) {
    r.f64s(buf);
    CMatrix m(d, d);
    std::size_t k = 0;
    for (std::uint32_t a = 0; a < d; ++a) {
      for (std::uint32_t b = 0; b < d; ++b) {
        m(a, b) = Complex(buf[k], buf[k + 1]);
        k += 2;
      }
    }
    img.set_raw(i, std::move(m));
  }
  return img;
}

void save_labels(const std::string& path, const LabelMap& labels) {
  if (labels.labels.size() != static_cast<std::size_t>(labels.height) * labels.width) {
    throw Error(ErrorCode::DimensionMismatch, "label map size does not match its extents");
  }
  io::Writer w(path);
  w.magic(kLabMagic);
  w.u32(static_cast<std::uint32_t>(labels.height));
  w.u32(static_cast<std::uint32_t>(labels.width));
  for (auto v : labels.labels) w.u16(v);
  w.finish();
}

LabelMap load_labels(const std::string& path) {
  io::Reader r(path);
  r.expect_magic(kLabMagic);
  const std::uint32_t h = r.u32();
  const std::uint32_t w = r.u32();
  if (h > (1u << 20) || w > (1u << 20)) throw Error(ErrorCode::DimensionMismatch, path + ": implausible header");
  const std::uint64_t need = std::uint64_t{h} * w * 2;
  if (r.remaining() < need) throw Error(ErrorCode::TruncatedFile, path);
  if (r.remaining() > need) throw Error(ErrorCode::DimensionMismatch, path + ": trailing bytes after payload");
  LabelMap out(static_cast<int>(h), static_cast<int>(w));
  for (auto& v : out.labels) v = r.u16();
  return out;
}

RgbImage pauli_rgb(const CovarianceImage& img) {
  if (img.dim() != 3) throw Error(ErrorCode::UnsupportedDim, "Pauli rendering needs 3x3 covariance pixels");
  const std::size_t n = img.size();
  std::array<std::vector<double>, 3> chan;
  for (auto& c : chan) c.resize(n);
  for (std::size_t i = 0; i < n; ++i) {
    const CMatrix& m = img.pixel(i);
    const double c11 = m(0, 0).real();
    const double c22 = m(1, 1).real();
    const double c33 = m(2, 2).real();
    const double c13 = m(0, 2).real();
    // Coherency diagonal: |HH-VV|^2/2, 2|HV|^2 (in C-matrix units: c22), |HH+VV|^2/2.
    const double t22 = 0.5 * (c11 + c33 - 2.0 * c13);
    const double t33 = c22;
    const double t11 = 0.5 * (c11 + c33 + 2.0 * c13);
    const bool ok = img.valid(i);
    chan[0][i] = ok ? std::sqrt(std::max(t22, 0.0)) : 0.0;
    chan[1][i] = ok ? std::sqrt(std::max(t33, 0.0)) : 0.0;
    chan[2][i] = ok ? std::sqrt(std::max(t11, 0.0)) : 0.0;
  }
  RgbImage out{img.height(), img.width(), std::vector<std::uint8_t>(3 * n)};
  for (int ch = 0; ch < 3; ++ch) {
    std::vector<double> sorted = chan[ch];
    std::sort(sorted.begin(), sorted.end());
    const double lo = percentile(sorted, 0.02);
    const double hi = percentile(sorted, 0.98);
    for (std::size_t i = 0; i < n; ++i) {
      double v = 128.0;
      if (hi > lo) v = std::clamp((chan[ch][i] - lo) / (hi - lo), 0.0, 1.0) * 255.0;
      out.rgb[3 * i + ch] = static_cast<std::uint8_t>(std::lround(v));
    }
  }
  return out;
}

RgbImage render_labels(const LabelMap& labels) {
  static constexpr std::array<std::array<std::uint8_t, 3>, 8> palette = {{
      {0, 0, 0},
      {230, 25, 75},
      {60, 180, 75},
      {0, 130, 200},
      {255, 225, 25},
      {70, 240, 240},
      {240, 50, 230},
      {255, 255, 255},
  }};
  RgbImage out{labels.height, labels.width, std::vector<std::uint8_t>(3 * labels.labels.size())};
  for (std::size_t i = 0; i < labels.labels.size(); ++i) {
    const int l = labels.labels[i];
    const auto& col = palette[l == 0 ? 0 : 1 + (l - 1) % 7];
    std::copy(col.begin(), col.end(), out.rgb.begin() + static_cast<std::ptrdiff_t>(3 * i));
  }
  return out;
}

void save_ppm(const std::string& path, const RgbImage& img) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw Error(ErrorCode::IoError, "cannot open for writing: " + path);
  out << "P6\n" << img.width << ' ' << img.height << "\n255\n";
  out.write(reinterpret_cast<const char*>(img.rgb.data()), static_cast<std::streamsize>(img.rgb.size()));
  if (!out) throw Error(ErrorCode::IoError, "write failed: " + path);
}

}  // namespace srsr::data
