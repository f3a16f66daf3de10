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

#include "srsr/srsrnet.hpp"

#include <cmath>
#include <limits>
#include <random>

#include "binary_io.hpp"
#include "srsr/parallel.hpp"

namespace srsr::net {

namespace {

constexpr double kNaN = std::numeric_limits<double>::quiet_NaN();

double objective_or_nan(const coding::EncodingProblem& p, const SparseCode& a, const Dictionary& dict,
                        const SrsrConfig& cfg) {
  try {
    return coding::objective(p, a, dict, cfg.lambda, cfg.pd_floor);
  } catch (const Error&) {
    return kNaN;
  }
}

double trace_sum(const Dictionary& dict) {
  double t = 0.0;
  for (const auto& a : dict.atoms) t += a.matrix().trace().real();
  return t;
}

LayerDiagnostics summarize(int layer, const std::vector<double>& obj, const Dictionary& dict, double lambda_b) {
  LayerDiagnostics d;
  d.layer = layer;
  double sum = 0.0;
  int finite = 0;
  for (double v : obj) {
    if (std::isfinite(v)) {
      sum += v;
      ++finite;
    }
  }
  d.mean_objective = finite > 0 ? sum / finite : kNaN;
  d.joint_objective = sum + lambda_b * trace_sum(dict);
  d.dict_hash = dictionary_hash(dict);
  return d;
}

double dictionary_distance(const Dictionary& a, const Dictionary& b) {
  double acc = 0.0;
  for (std::size_t i = 0; i < a.atoms.size(); ++i) {
    acc += (a.atoms[i].matrix() - b.atoms[i].matrix()).squaredNorm();
  }
  return std::sqrt(acc);
}

}  // namespace

SrsrNet init_network(const data::LabelMap& labels, const data::CovarianceImage& img, int atoms_per_class,
                     std::uint64_t seed) {
  if (labels.height != img.height() || labels.width != img.width()) {
    throw Error(ErrorCode::DimensionMismatch, "label map does not match the covariance image");
  }
  if (atoms_per_class <= 0) throw Error(ErrorCode::InvalidArgument, "atoms per class must be positive");
  const int classes = labels.max_label();
  if (classes <= 0) throw Error(ErrorCode::InsufficientLabels, "no labeled pixels");

  std::vector<std::vector<std::size_t>> pool(classes);
  for (std::size_t p = 0; p < labels.labels.size(); ++p) {
    const int c = labels.labels[p];
    if (c > 0 && img.valid(p)) pool[c - 1].push_back(p);
  }

  SrsrNet net;
  net.dictionary.atoms_per_class = atoms_per_class;
  net.dictionary.classes = classes;
  std::mt19937_64 rng(seed);
  for (int c = 0; c < classes; ++c) {
    auto& cand = pool[c];
    if (cand.size() < static_cast<std::size_t>(atoms_per_class)) {
      throw Error(ErrorCode::InsufficientLabels, "class " + std::to_string(c + 1) + " has " +
                                                     std::to_string(cand.size()) + " labeled pixels, need " +
                                                     std::to_string(atoms_per_class));
    }
    // Partial Fisher-Yates: the first M slots become a uniform sample.
    for (int k = 0; k < atoms_per_class; ++k) {
      std::uniform_int_distribution<std::size_t> pick(static_cast<std::size_t>(k), cand.size() - 1);
      std::swap(cand[k], cand[pick(rng)]);
      const CMatrix& m = img.pixel(cand[k]);
      net.dictionary.atoms.push_back(validate_hpd(m, kHermitianTol * std::max(1.0, m.cwiseAbs().maxCoeff())));
      net.dictionary.labels.push_back(c + 1);
    }
  }
  return net;
}

ForwardResult forward(const SrsrNet& net, const std::vector<seg::Superpixel>& superpixels) {
  net.dictionary.check();
  if (net.layers < 0) throw Error(ErrorCode::InvalidArgument, "layer count must be non-negative");
  const auto count = static_cast<std::ptrdiff_t>(superpixels.size());
  const SrsrConfig& cfg = net.config;
  const double lambda_b = net.dict_config.lambda_b;

  std::vector<coding::EncodingProblem> problems(superpixels.size());
  std::vector<SparseCode> codes(superpixels.size());
  std::vector<double> obj(superpixels.size());

  ForwardResult out;
  out.dictionary = net.dictionary;
  out.failed.assign(superpixels.size(), 0);

  parallel_for(count, [&](std::ptrdiff_t j) {
    problems[j] = coding::EncodingProblem::from_target(superpixels[j].mean);
    codes[j] = coding::spg_init(problems[j], out.dictionary, cfg);
    obj[j] = objective_or_nan(problems[j], codes[j], out.dictionary, cfg);
  });
  out.objectives.push_back(obj);
  out.layers.push_back(summarize(0, obj, out.dictionary, lambda_b));

  if (net.skip_unfolding) {
    std::vector<std::uint8_t> failed(superpixels.size(), 0);
    parallel_for(count, [&](std::ptrdiff_t j) {
      coding::SolveResult r = coding::solve_ista(problems[j], codes[j], out.dictionary, cfg);
      codes[j] = std::move(r.code);
      failed[j] = r.failed ? 1 : 0;
      obj[j] = objective_or_nan(problems[j], codes[j], out.dictionary, cfg);
    });
    out.failed = failed;
    out.objectives.push_back(obj);
    LayerDiagnostics d = summarize(1, obj, out.dictionary, lambda_b);
    for (auto f : failed) d.failures += f;
    out.layers.push_back(d);
  } else {
    for (int k = 1; k <= net.layers; ++k) {
      std::vector<std::uint8_t> failed(superpixels.size(), 0);
      parallel_for(count, [&](std::ptrdiff_t j) {
        coding::StepResult s = coding::ista_step(problems[j], codes[j], out.dictionary, cfg);
        if (s.failed) {
          failed[j] = 1;
        } else {
          codes[j] = std::move(s.code);
        }
        obj[j] = s.objective;
      });
      out.objectives.push_back(obj);

      LayerDiagnostics d;
      for (std::size_t j = 0; j < failed.size(); ++j) {
        d.failures += failed[j];
        out.failed[j] |= failed[j];
      }
      Dictionary before = out.dictionary;
      int dict_iterations = 0;
      if (!net.freeze_dictionary) {
        dict::DictBatch batch;
        for (std::size_t j = 0; j < superpixels.size(); ++j) {
          if (std::isfinite(obj[j]) && codes[j].l1() > 0.0) {
            batch.problems.push_back(problems[j]);
            batch.codes.push_back(codes[j]);
          }
        }
        if (batch.size() > 0) {
          dict::DictUpdateResult r = dict::dict_update(batch, out.dictionary, net.dict_config);
          out.dictionary = std::move(r.dictionary);
          dict_iterations = r.iterations;
        }
      }
      std::vector<double> after(superpixels.size());
      parallel_for(count, [&](std::ptrdiff_t j) {
        after[j] = objective_or_nan(problems[j], codes[j], out.dictionary, cfg);
      });
      const int failures = d.failures;
      d = summarize(k, after, out.dictionary, lambda_b);
      d.failures = failures;
      d.dict_change = dictionary_distance(before, out.dictionary);
      d.dict_iterations = dict_iterations;
      out.layers.push_back(d);
    }
  }

  out.field.dim = static_cast<int>(out.dictionary.size());
  out.field.codes = std::move(codes);
  return out;
}

std::uint64_t dictionary_hash(const Dictionary& dict) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  auto mix = [&h](const void* data, std::size_t n) {
    const auto* b = static_cast<const unsigned char*>(data);
    for (std::size_t i = 0; i < n; ++i) {
      h ^= b[i];
      h *= 0x100000001b3ULL;
    }
  };
  for (const auto& a : dict.atoms) mix(a.matrix().data(), sizeof(Complex) * static_cast<std::size_t>(a.matrix().size()));
  return h;
}

PixelFeatures project_to_pixels(const FeatureField& field, const seg::SuperpixelMap& map) {
  PixelFeatures out;
  out.height = map.height;
  out.width = map.width;
  out.channels = field.dim;
  const std::size_t n = static_cast<std::size_t>(field.dim);
  out.values.resize(map.ids.size() * n);
  out.segments = map.ids;
  for (std::size_t p = 0; p < map.ids.size(); ++p) {
    const int k = map.ids[p];
    if (k < 0 || static_cast<std::size_t>(k) >= field.codes.size()) {
      throw Error(ErrorCode::MissingSegment, "no code for segment " + std::to_string(k));
    }
    const RVector& v = field.codes[k].values();
    if (static_cast<std::size_t>(v.size()) != n) {
      throw Error(ErrorCode::DimensionMismatch, "code length differs from the field dimension");
    }
    std::copy(v.data(), v.data() + n, out.values.begin() + static_cast<std::ptrdiff_t>(p * n));
  }
  return out;
}

void save_features(const std::string& path, const FeatureField& field) {
  io::Writer w(path);
  w.magic("PSARFEA1");
  w.u32(static_cast<std::uint32_t>(field.codes.size()));
  w.u32(static_cast<std::uint32_t>(field.dim));
  for (const auto& c : field.codes) {
    if (c.size() != field.dim) throw Error(ErrorCode::DimensionMismatch, "code length differs from the field dimension");
    w.f64s(std::span<const double>(c.values().data(), static_cast<std::size_t>(c.size())));
  }
  w.finish();
}

FeatureField load_features(const std::string& path) {
  io::Reader r(path);
  r.expect_magic("PSARFEA1");
  const std::uint32_t k = r.u32();
  const std::uint32_t n = r.u32();
  const std::uint64_t need = static_cast<std::uint64_t>(k) * n * sizeof(double);
  if (r.remaining() < need) throw Error(ErrorCode::TruncatedFile, path + ": feature payload is short");
  if (r.remaining() > need) throw Error(ErrorCode::DimensionMismatch, path + ": trailing bytes after features");
  FeatureField field;
  field.dim = static_cast<int>(n);
  field.codes.reserve(k);
  for (std::uint32_t i = 0; i < k; ++i) {
    RVector v(n);
    r.f64s(std::span<double>(v.data(), n));
    field.codes.emplace_back(std::move(v));
  }
  return field;
}

}  // namespace srsr::net
