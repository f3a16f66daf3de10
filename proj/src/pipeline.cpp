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

#include "srsr/pipeline.hpp"

#include <charconv>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <functional>
#include <map>
#include <sstream>

#include "srsr/parallel.hpp"

namespace srsr::pipeline {

namespace fs = std::filesystem;

namespace {

std::string trim(std::string s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string::npos) return "";
  const auto e = s.find_last_not_of(" \t\r");
  return s.substr(b, e - b + 1);
}

template <typename T>
T parse_number(const std::string& key, const std::string& value) {
  T out{};
  const char* end = value.data() + value.size();
  const auto res = std::from_chars(value.data(), end, out);
  if (res.ec != std::errc() || res.ptr != end) {
    throw Error(ErrorCode::InvalidArgument, "bad value '" + value + "' for " + key);
  }
  return out;
}

bool parse_bool(const std::string& key, const std::string& value) {
  if (value == "1" || value == "true" || value == "yes" || value == "on") return true;
  if (value == "0" || value == "false" || value == "no" || value == "off") return false;
  throw Error(ErrorCode::InvalidArgument, "bad boolean '" + value + "' for " + key);
}

std::uint64_t splitmix(std::uint64_t x) {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

template <typename F>
auto stage(const std::string& name, F&& body) -> decltype(body()) {
  try {
    return body();
  } catch (const Error& e) {
    throw Error(ErrorCode::StageFailure, name + ": " + e.what());
  } catch (const std::exception& e) {
    throw Error(ErrorCode::StageFailure, name + ": " + e.what());
  }
}

}  // namespace

void apply_setting(PipelineConfig& cfg, const std::string& key, const std::string& value) {
  const std::map<std::string, std::function<void(const std::string&)>> setters = {
      {"covariance", [&](const std::string& v) { cfg.covariance = v; }},
      {"labels", [&](const std::string& v) { cfg.labels = v; }},
      {"superpixels", [&](const std::string& v) { cfg.superpixels = v; }},
      {"output_dir", [&](const std::string& v) { cfg.output_dir = v; }},
      {"scale", [&](const std::string& v) { cfg.scale = parse_number<double>(key, v); }},
      {"compactness", [&](const std::string& v) { cfg.compactness = parse_number<double>(key, v); }},
      {"segment_iterations", [&](const std::string& v) { cfg.segment_iterations = parse_number<int>(key, v); }},
      {"atoms_per_class", [&](const std::string& v) { cfg.atoms_per_class = parse_number<int>(key, v); }},
      {"lambda", [&](const std::string& v) { cfg.lambda = parse_number<double>(key, v); }},
      {"step", [&](const std::string& v) { cfg.step = parse_number<double>(key, v); }},
      {"layers", [&](const std::string& v) { cfg.layers = parse_number<int>(key, v); }},
      {"lambda_b", [&](const std::string& v) { cfg.lambda_b = parse_number<double>(key, v); }},
      {"dict_iterations", [&](const std::string& v) { cfg.dict_iterations = parse_number<int>(key, v); }},
      {"learning_rate", [&](const std::string& v) { cfg.train.learning_rate = parse_number<double>(key, v); }},
      {"batch_size", [&](const std::string& v) { cfg.train.batch_size = parse_number<int>(key, v); }},
      {"epochs", [&](const std::string& v) { cfg.train.epochs = parse_number<int>(key, v); }},
      {"patch", [&](const std::string& v) { cfg.train.patch = parse_number<int>(key, v); }},
      {"train_ratio", [&](const std::string& v) { cfg.train.train_ratio = parse_number<double>(key, v); }},
      {"seed", [&](const std::string& v) { cfg.seed = parse_number<std::uint64_t>(key, v); }},
      {"freeze_dictionary", [&](const std::string& v) { cfg.freeze_dictionary = parse_bool(key, v); }},
      {"skip_unfolding", [&](const std::string& v) { cfg.skip_unfolding = parse_bool(key, v); }},
      {"cnn_only", [&](const std::string& v) { cfg.cnn_only = parse_bool(key, v); }},
      {"threads", [&](const std::string& v) { cfg.threads = parse_number<int>(key, v); }},
  };
  const auto it = setters.find(key);
  if (it == setters.end()) throw Error(ErrorCode::InvalidArgument, "unknown setting '" + key + "'");
  it->second(value);
}

void parse_config(PipelineConfig& cfg, const std::string& text) {
  std::istringstream in(text);
  std::string line;
  int number = 0;
  while (std::getline(in, line)) {
    ++number;
    const auto hash = line.find_first_of("#;");
    if (hash != std::string::npos) line.erase(hash);
    line = trim(line);
    if (line.empty() || line.front() == '[') continue;
    const auto eq = line.find('=');
    if (eq == std::string::npos) {
      throw Error(ErrorCode::InvalidArgument, "config line " + std::to_string(number) + ": expected key = value");
    }
    apply_setting(cfg, trim(line.substr(0, eq)), trim(line.substr(eq + 1)));
  }
}

PipelineConfig load_config(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw Error(ErrorCode::IoError, "cannot open config " + path);
  std::ostringstream ss;
  ss << in.rdbuf();
  PipelineConfig cfg;
  parse_config(cfg, ss.str());
  // Relative input paths are taken relative to the config file.
  const fs::path base = fs::path(path).parent_path();
  for (std::string* p : {&cfg.covariance, &cfg.labels, &cfg.superpixels, &cfg.output_dir}) {
    if (!p->empty() && fs::path(*p).is_relative()) *p = (base / *p).string();
  }
  return cfg;
}

StageSeeds stage_seeds(std::uint64_t seed) {
  return {splitmix(seed), splitmix(seed + 1), splitmix(seed + 2), splitmix(seed + 3)};
}

net::SrsrNet make_network(const PipelineConfig& cfg, const data::LabelMap& train_labels,
                          const data::CovarianceImage& img) {
  net::SrsrNet n = net::init_network(train_labels, img, cfg.atoms_per_class, stage_seeds(cfg.seed).dictionary);
  n.config.lambda = cfg.lambda;
  n.config.step = cfg.step;
  n.dict_config.lambda_b = cfg.lambda_b;
  n.dict_config.max_iterations = cfg.dict_iterations;
  n.layers = cfg.layers;
  n.freeze_dictionary = cfg.freeze_dictionary;
  n.skip_unfolding = cfg.skip_unfolding;
  return n;
}

net::PixelFeatures raw_features(const data::CovarianceImage& img) {
  const int d = img.dim();
  net::PixelFeatures f;
  f.height = img.height();
  f.width = img.width();
  f.channels = d * d;
  f.values.resize(img.size() * static_cast<std::size_t>(f.channels));
  for (std::size_t p = 0; p < img.size(); ++p) {
    const CMatrix& m = img.pixel(p);
    double* out = f.values.data() + p * static_cast<std::size_t>(f.channels);
    int k = 0;
    for (int i = 0; i < d; ++i) out[k++] = m(i, i).real();
    for (int i = 0; i < d; ++i) {
      for (int j = i + 1; j < d; ++j) {
        out[k++] = m(i, j).real();
        out[k++] = m(i, j).imag();
      }
    }
  }
  return f;
}

void normalize_features(net::PixelFeatures& feat) {
  double acc = 0.0;
  for (double v : feat.values) acc += v * v;
  if (feat.values.empty() || acc <= 0.0) return;
  const double rms = std::sqrt(acc / static_cast<double>(feat.values.size()));
  for (double& v : feat.values) v /= rms;
}

data::LabelMap restrict_labels(const data::LabelMap& labels, const std::vector<std::size_t>& keep) {
  data::LabelMap out(labels.height, labels.width);
  for (std::size_t p : keep) out.labels[p] = labels.labels[p];
  return out;
}

PipelineResult run_pipeline(const PipelineConfig& cfg) {
  const data::CovarianceImage img = stage("load", [&] {
    if (cfg.covariance.empty()) throw Error(ErrorCode::InvalidArgument, "no covariance path configured");
    return data::load_covariance(cfg.covariance);
  });
  const data::LabelMap truth = stage("load", [&] {
    if (cfg.labels.empty()) throw Error(ErrorCode::InvalidArgument, "no label path configured");
    return data::load_labels(cfg.labels);
  });
  if (cfg.superpixels.empty()) return run_pipeline(cfg, img, truth, nullptr);
  const seg::SuperpixelMap external = stage("load", [&] {
    return seg::ingest_labels(data::load_labels(cfg.superpixels), img.height(), img.width());
  });
  return run_pipeline(cfg, img, truth, &external);
}

PipelineResult run_pipeline(const PipelineConfig& cfg, const data::CovarianceImage& img,
                            const data::LabelMap& truth, const seg::SuperpixelMap* external) {
  if (cfg.threads > 0) set_threads(cfg.threads);
  const StageSeeds seeds = stage_seeds(cfg.seed);
  const fs::path out_dir = cfg.output_dir;
  const bool write = !cfg.output_dir.empty();
  if (write) {
    stage("output", [&] {
      std::error_code ec;
      fs::create_directories(out_dir, ec);
      if (ec) throw Error(ErrorCode::IoError, "cannot create " + out_dir.string() + ": " + ec.message());
    });
  }
  stage("load", [&] {
    if (truth.height != img.height() || truth.width != img.width()) {
      throw Error(ErrorCode::DimensionMismatch, "labels do not match the image");
    }
  });

  PipelineResult result;
  const cnn::Split split = stage("split", [&] { return cnn::stratified_split(truth, cfg.train.train_ratio, seeds.split); });
  const data::LabelMap train_labels = restrict_labels(truth, split.train);
  result.test_truth = restrict_labels(truth, split.test);

  net::PixelFeatures features;
  if (cfg.cnn_only) {
    features = raw_features(img);
  } else {
    const seg::SuperpixelMap map = stage("segment", [&] {
      if (external != nullptr) return *external;
      seg::SegmenterConfig sc;
      sc.scale = cfg.scale;
      sc.compactness = cfg.compactness;
      sc.max_iterations = cfg.segment_iterations;
      return seg::segment(img, sc);
    });
    result.superpixels = map.count;
    const std::vector<seg::Superpixel> sps = stage("mean-covariance", [&] { return seg::mean_covariance(img, map); });
    const net::SrsrNet network = stage("init", [&] { return make_network(cfg, train_labels, img); });
    const net::ForwardResult fwd = stage("encode", [&] { return net::forward(network, sps); });
    result.layers = fwd.layers;
    for (auto f : fwd.failed) result.encode_failures += f;
    features = stage("project", [&] { return net::project_to_pixels(fwd.field, map); });
    if (write) {
      stage("output", [&] {
        seg::save_superpixels((out_dir / "superpixels.lab").string(), map);
        net::save_features((out_dir / "features.fea").string(), fwd.field);
        write_text((out_dir / "layers.csv").string(), layer_trace_csv(fwd.layers));
      });
    }
  }
  normalize_features(features);
  result.feature_dim = features.channels;

  cnn::TrainConfig tc = cfg.train;
  tc.seed = seeds.shuffle;
  cnn::PatchSet train_set;
  train_set.classes = truth.max_label();
  train_set.patch = tc.patch;
  train_set.centers = split.train;
  for (std::size_t p : split.train) train_set.targets.push_back(truth.labels[p] - 1);

  cnn::CnnModel model = stage("train", [&] { return cnn::CnnModel::he_uniform(features.channels, train_set.classes, seeds.init); });
  result.losses = stage("train", [&] { return cnn::train(model, features, train_set, tc).epoch_loss; });
  result.prediction = stage("classify", [&] { return cnn::classify_image(model, features, tc.patch); });
  result.metrics = stage("evaluate", [&] {
    return metrics::report(metrics::confusion(result.prediction, result.test_truth, truth.max_label()));
  });

  if (write) {
    stage("output", [&] {
      cnn::save_model((out_dir / "model.cnn").string(), model);
      data::save_labels((out_dir / "prediction.lab").string(), result.prediction);
      data::save_ppm((out_dir / "prediction.ppm").string(), data::render_labels(result.prediction));
      data::save_labels((out_dir / "test_truth.lab").string(), result.test_truth);
      write_text((out_dir / "metrics.csv").string(), metrics::to_csv(result.metrics));
      write_text((out_dir / "metrics.txt").string(), metrics::to_key_value(result.metrics));
      write_text((out_dir / "loss.csv").string(), loss_csv(result.losses));
    });
  }
  return result;
}

std::string layer_trace_csv(const std::vector<net::LayerDiagnostics>& layers) {
  std::ostringstream os;
  os.precision(17);
  os << "layer,mean_objective,joint_objective,dict_change,failures,dict_iterations,dict_hash\n";
  for (const auto& l : layers) {
    os << l.layer << "," << l.mean_objective << "," << l.joint_objective << "," << l.dict_change << ","
       << l.failures << "," << l.dict_iterations << "," << std::hex << l.dict_hash << std::dec << "\n";
  }
  return os.str();
}

std::string loss_csv(const std::vector<double>& losses) {
  std::ostringstream os;
  os.precision(17);
  os << "epoch,loss\n";
  for (std::size_t e = 0; e < losses.size(); ++e) os << e + 1 << "," << losses[e] << "\n";
  return os.str();
}

void write_text(const std::string& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error(ErrorCode::IoError, "cannot write " + path);
  out << text;
  if (!out) throw Error(ErrorCode::IoError, "write failed for " + path);
}

}  // namespace srsr::pipeline
