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

#include "srsr/superpixel.hpp"

#include <algorithm>
#include <cmath>
#include <deque>
#include <limits>
#include <map>
#include <set>

#include "srsr/parallel.hpp"

namespace srsr::seg {

namespace {

constexpr double kDecibel = 4.342944819032518;  // 10 / ln(10)

struct Components {
  std::vector<int> comp;        // per pixel
  std::vector<int> label;       // per component: source id
  std::vector<std::size_t> size;
  int count = 0;
};

// 4-connected components of equal ids, numbered in raster order of their
// first pixel.
template <typename Id>
Components connected_components(const std::vector<Id>& ids, int h, int w) {
  Components out;
  out.comp.assign(ids.size(), -1);
  std::deque<std::size_t> queue;
  for (std::size_t start = 0; start < ids.size(); ++start) {
    if (out.comp[start] >= 0) continue;
    const int k = out.count++;
    out.label.push_back(static_cast<int>(ids[start]));
    out.size.push_back(0);
    out.comp[start] = k;
    queue.push_back(start);
    while (!queue.empty()) {
      const std::size_t p = queue.front();
      queue.pop_front();
      ++out.size[k];
      const int r = static_cast<int>(p / w);
      const int c = static_cast<int>(p % w);
      const int nr[4] = {r - 1, r + 1, r, r};
      const int nc[4] = {c, c, c - 1, c + 1};
      for (int n = 0; n < 4; ++n) {
        if (nr[n] < 0 || nr[n] >= h || nc[n] < 0 || nc[n] >= w) continue;
        const std::size_t q = static_cast<std::size_t>(nr[n]) * w + nc[n];
        if (out.comp[q] < 0 && ids[q] == ids[start]) {
          out.comp[q] = k;
          queue.push_back(q);
        }
      }
    }
  }
  return out;
}

// Compacts ids to [0, K) in order of first raster appearance.
SuperpixelMap compact_by_appearance(const std::vector<int>& ids, int h, int w) {
  SuperpixelMap out{h, w, std::vector<int>(ids.size()), 0};
  std::map<int, int> remap;
  for (std::size_t i = 0; i < ids.size(); ++i) {
    auto [it, inserted] = remap.try_emplace(ids[i], out.count);
    if (inserted) ++out.count;
    out.ids[i] = it->second;
  }
  return out;
}

// Keeps the largest piece of every id; every other piece is absorbed into the
// adjacent segment that is currently largest (ties -> lower id).
std::vector<int> enforce_connectivity(const std::vector<int>& ids, int h, int w) {
  const Components cc = connected_components(ids, h, w);
  std::map<int, int> largest;  // id -> component
  for (int k = 0; k < cc.count; ++k) {
    auto it = largest.find(cc.label[k]);
    if (it == largest.end() || cc.size[k] > cc.size[it->second]) largest[cc.label[k]] = k;
  }
  std::vector<int> final_label(cc.count, -1);
  std::map<int, std::size_t> seg_size;
  for (const auto& [id, k] : largest) {
    final_label[k] = id;
    seg_size[id] = cc.size[k];
  }
  std::vector<std::set<int>> adjacent(cc.count);
  for (int r = 0; r < h; ++r) {
    for (int c = 0; c < w; ++c) {
      const std::size_t p = static_cast<std::size_t>(r) * w + c;
      if (c + 1 < w && cc.comp[p] != cc.comp[p + 1]) {
        adjacent[cc.comp[p]].insert(cc.comp[p + 1]);
        adjacent[cc.comp[p + 1]].insert(cc.comp[p]);
      }
      if (r + 1 < h && cc.comp[p] != cc.comp[p + w]) {
        adjacent[cc.comp[p]].insert(cc.comp[p + w]);
        adjacent[cc.comp[p + w]].insert(cc.comp[p]);
      }
    }
  }
  bool pending = true;
  while (pending) {
    pending = false;
    bool progressed = false;
    for (int k = 0; k < cc.count; ++k) {
      if (final_label[k] >= 0) continue;
      int best = -1;
      for (int nb : adjacent[k]) {
        const int lab = final_label[nb];
        if (lab < 0) continue;
        if (best < 0 || seg_size[lab] > seg_size[best] || (seg_size[lab] == seg_size[best] && lab < best)) {
          best = lab;
        }
      }
      if (best < 0) {
        pending = true;
        continue;
      }
      final_label[k] = best;
      seg_size[best] += cc.size[k];
      progressed = true;
    }
    if (pending && !progressed) break;  // unreachable on a connected grid
  }
  std::vector<int> out(ids.size());
  for (std::size_t p = 0; p < ids.size(); ++p) out[p] = final_label[cc.comp[p]];
  return out;
}

}  // namespace

int feature_dim(int d) { return d + d * (d - 1) / 2; }

std::vector<double> log_features(const data::CovarianceImage& img) {
  const int d = img.dim();
  const int fd = feature_dim(d);
  std::vector<double> f(img.size() * fd, 0.0);
  parallel_for(static_cast<std::ptrdiff_t>(img.size()), [&](std::ptrdiff_t i) {
    if (!img.valid(i)) return;
    const CMatrix l = spectral_fn(HermitianMatrix(img.pixel(i)), SpectralFn::Log).matrix();
    double* out = &f[static_cast<std::size_t>(i) * fd];
    int k = 0;
    for (int a = 0; a < d; ++a) out[k++] = kDecibel * l(a, a).real();
    for (int a = 0; a < d; ++a) {
      for (int b = a + 1; b < d; ++b) out[k++] = kDecibel * std::abs(l(a, b));
    }
  });
  return f;
}

SuperpixelMap segment(const data::CovarianceImage& img, const SegmenterConfig& cfg) {
  if (cfg.scale < 4.0) throw Error(ErrorCode::InvalidArgument, "superpixel scale must be >= 4");
  if (cfg.max_iterations < 1) throw Error(ErrorCode::InvalidArgument, "segmenter needs at least one iteration");
  if (cfg.compactness < 0.0) throw Error(ErrorCode::InvalidArgument, "compactness must be >= 0");
  const int h = img.height();
  const int w = img.width();
  const double npix = static_cast<double>(h) * w;
  if (npix < cfg.scale) {
    throw Error(ErrorCode::ImageTooSmall, "image has fewer pixels than one superpixel");
  }
  const int fd = feature_dim(img.dim());
  const std::vector<double> feat = log_features(img);
  const double step = std::sqrt(cfg.scale);
  const double spatial_w = (cfg.compactness / step) * (cfg.compactness / step);

  auto grad_at = [&](int r, int c) {
    const int r0 = std::max(r - 1, 0), r1 = std::min(r + 1, h - 1);
    const int c0 = std::max(c - 1, 0), c1 = std::min(c + 1, w - 1);
    double g = 0.0;
    for (int k = 0; k < fd; ++k) {
      const double dx = feat[(static_cast<std::size_t>(r) * w + c1) * fd + k] - feat[(static_cast<std::size_t>(r) * w + c0) * fd + k];
      const double dy = feat[(static_cast<std::size_t>(r1) * w + c) * fd + k] - feat[(static_cast<std::size_t>(r0) * w + c) * fd + k];
      g += dx * dx + dy * dy;
    }
    return g;
  };

  // Seed lattice.
  const int grid_r = std::max(1, static_cast<int>(std::lround(h / step)));
  const int grid_c = std::max(1, static_cast<int>(std::lround(w / step)));
  const int k_seeds = grid_r * grid_c;
  std::vector<double> center_pos(2 * static_cast<std::size_t>(k_seeds));
  std::vector<double> center_feat(static_cast<std::size_t>(k_seeds) * fd);
  for (int i = 0; i < grid_r; ++i) {
    for (int j = 0; j < grid_c; ++j) {
      int r = std::min(h - 1, static_cast<int>((i + 0.5) * h / grid_r));
      int c = std::min(w - 1, static_cast<int>((j + 0.5) * w / grid_c));
      double best = grad_at(r, c);
      int br = r, bc = c;
      for (int dr = -1; dr <= 1; ++dr) {
        for (int dc = -1; dc <= 1; ++dc) {
          const int rr = r + dr, cc = c + dc;
          if (rr < 0 || rr >= h || cc < 0 || cc >= w) continue;
          const double g = grad_at(rr, cc);
          if (g < best) {
            best = g;
            br = rr;
            bc = cc;
          }
        }
      }
      const int k = i * grid_c + j;
      center_pos[2 * k] = br;
      center_pos[2 * k + 1] = bc;
      std::copy_n(&feat[(static_cast<std::size_t>(br) * w + bc) * fd], fd, &center_feat[static_cast<std::size_t>(k) * fd]);
    }
  }

  // Centers are binned on a coarse grid so each pixel only inspects nearby ones.
  const double bin = std::max(step, 1.0);
  const int bins_r = std::max(1, static_cast<int>(std::ceil(h / bin)));
  const int bins_c = std::max(1, static_cast<int>(std::ceil(w / bin)));
  std::vector<int> assign(static_cast<std::size_t>(h) * w, 0);

  for (int iter = 0; iter < cfg.max_iterations; ++iter) {
    std::vector<std::vector<int>> buckets(static_cast<std::size_t>(bins_r) * bins_c);
    for (int k = 0; k < k_seeds; ++k) {
      const int br = std::clamp(static_cast<int>(center_pos[2 * k] / bin), 0, bins_r - 1);
      const int bc = std::clamp(static_cast<int>(center_pos[2 * k + 1] / bin), 0, bins_c - 1);
      buckets[static_cast<std::size_t>(br) * bins_c + bc].push_back(k);
    }
    parallel_for(h, [&](std::ptrdiff_t r) {
      const int pr = std::clamp(static_cast<int>(r / bin), 0, bins_r - 1);
      for (int c = 0; c < w; ++c) {
        const int pc = std::clamp(static_cast<int>(c / bin), 0, bins_c - 1);
        const double* f = &feat[(static_cast<std::size_t>(r) * w + c) * fd];
        double best = std::numeric_limits<double>::infinity();
        int arg = std::numeric_limits<int>::max();
        for (int br = std::max(0, pr - 2); br <= std::min(bins_r - 1, pr + 2); ++br) {
          for (int bc = std::max(0, pc - 2); bc <= std::min(bins_c - 1, pc + 2); ++bc) {
            for (int k : buckets[static_cast<std::size_t>(br) * bins_c + bc]) {
              const double* cf = &center_feat[static_cast<std::size_t>(k) * fd];
              double dist = 0.0;
              for (int q = 0; q < fd; ++q) dist += (f[q] - cf[q]) * (f[q] - cf[q]);
              const double dr = static_cast<double>(r) - center_pos[2 * k];
              const double dc = static_cast<double>(c) - center_pos[2 * k + 1];
              dist += spatial_w * (dr * dr + dc * dc);
              if (dist < best || (dist == best && k < arg)) {
                best = dist;
                arg = k;
              }
            }
          }
        }
        if (arg == std::numeric_limits<int>::max()) {
          // No center within reach: fall back to the nearest one spatially.
          double nearest = std::numeric_limits<double>::infinity();
          for (int k = 0; k < k_seeds; ++k) {
            const double dr = static_cast<double>(r) - center_pos[2 * k];
            const double dc = static_cast<double>(c) - center_pos[2 * k + 1];
            if (dr * dr + dc * dc < nearest) {
              nearest = dr * dr + dc * dc;
              arg = k;
            }
          }
        }
        assign[static_cast<std::size_t>(r) * w + c] = arg;
      }
    });

    // Update step, accumulated in raster order.
    std::vector<double> sum_pos(2 * static_cast<std::size_t>(k_seeds), 0.0);
    std::vector<double> sum_feat(static_cast<std::size_t>(k_seeds) * fd, 0.0);
    std::vector<std::size_t> count(k_seeds, 0);
    for (int r = 0; r < h; ++r) {
      for (int c = 0; c < w; ++c) {
        const std::size_t p = static_cast<std::size_t>(r) * w + c;
        const int k = assign[p];
        ++count[k];
        sum_pos[2 * k] += r;
        sum_pos[2 * k + 1] += c;
        for (int q = 0; q < fd; ++q) sum_feat[static_cast<std::size_t>(k) * fd + q] += feat[p * fd + q];
      }
    }
    for (int k = 0; k < k_seeds; ++k) {
      if (count[k] == 0) continue;
      const double inv = 1.0 / static_cast<double>(count[k]);
      center_pos[2 * k] = sum_pos[2 * k] * inv;
      center_pos[2 * k + 1] = sum_pos[2 * k + 1] * inv;
      for (int q = 0; q < fd; ++q) {
        center_feat[static_cast<std::size_t>(k) * fd + q] = sum_feat[static_cast<std::size_t>(k) * fd + q] * inv;
      }
    }
  }

  return compact_by_appearance(enforce_connectivity(assign, h, w), h, w);
}

SuperpixelMap ingest_labels(const data::LabelMap& raster) {
  const int h = raster.height;
  const int w = raster.width;
  if (raster.labels.size() != static_cast<std::size_t>(h) * w) {
    throw Error(ErrorCode::DimensionMismatch, "label raster size does not match its extents");
  }
  const Components cc = connected_components(raster.labels, h, w);
  // Order pieces by (original id, first raster appearance).
  std::vector<int> order(cc.count);
  for (int k = 0; k < cc.count; ++k) order[k] = k;
  std::stable_sort(order.begin(), order.end(), [&](int a, int b) { return cc.label[a] < cc.label[b]; });
  std::vector<int> new_id(cc.count);
  for (int i = 0; i < cc.count; ++i) new_id[order[i]] = i;
  SuperpixelMap out{h, w, std::vector<int>(raster.labels.size()), cc.count};
  for (std::size_t p = 0; p < out.ids.size(); ++p) out.ids[p] = new_id[cc.comp[p]];
  return out;
}

SuperpixelMap ingest_labels(const data::LabelMap& raster, int height, int width) {
  if (raster.height != height || raster.width != width) {
    throw Error(ErrorCode::DimensionMismatch,
                "superpixel raster is " + std::to_string(raster.height) + "x" + std::to_string(raster.width) +
                    ", image is " + std::to_string(height) + "x" + std::to_string(width));
  }
  return ingest_labels(raster);
}

void save_superpixels(const std::string& path, const SuperpixelMap& map) {
  if (map.count > std::numeric_limits<std::uint16_t>::max() + 1) {
    throw Error(ErrorCode::InvalidArgument, "too many segments for a 16-bit raster");
  }
  data::LabelMap raster(map.height, map.width);
  for (std::size_t i = 0; i < map.ids.size(); ++i) raster.labels[i] = static_cast<std::uint16_t>(map.ids[i]);
  data::save_labels(path, raster);
}

SuperpixelMap load_superpixels(const std::string& path) { return ingest_labels(data::load_labels(path)); }

std::vector<Superpixel> mean_covariance(const data::CovarianceImage& img, const SuperpixelMap& map) {
  if (img.height() != map.height || img.width() != map.width || map.ids.size() != img.size()) {
    throw Error(ErrorCode::DimensionMismatch, "superpixel map does not match the covariance image");
  }
  const int d = img.dim();
  std::vector<Superpixel> out(map.count);
  std::vector<CMatrix> sums(map.count, CMatrix::Zero(d, d));
  std::vector<std::size_t> valid(map.count, 0);
  for (int k = 0; k < map.count; ++k) out[k].id = k;
  for (std::size_t p = 0; p < map.ids.size(); ++p) {
    const int k = map.ids[p];
    if (k < 0 || k >= map.count) throw Error(ErrorCode::InvalidArgument, "segment id out of range");
    auto& sp = out[k];
    sp.members.push_back(p);
    sp.row += static_cast<double>(p / map.width);
    sp.col += static_cast<double>(p % map.width);
    if (img.valid(p)) {
      sums[k] += img.pixel(p);
      ++valid[k];
    }
  }
  for (int k = 0; k < map.count; ++k) {
    auto& sp = out[k];
    if (sp.members.empty() || valid[k] == 0) {
      throw Error(ErrorCode::EmptySegment, "segment " + std::to_string(k) + " has no valid pixels");
    }
    const double m = static_cast<double>(sp.members.size());
    sp.row /= m;
    sp.col /= m;
    const CMatrix mean = sums[k] / static_cast<double>(valid[k]);
    sp.mean = validate_hpd(mean, kHermitianTol * std::max(1.0, mean.cwiseAbs().maxCoeff()));
  }
  return out;
}

}  // namespace srsr::seg
