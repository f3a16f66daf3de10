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

// srsr: command-line front end. Exit status 0 on success, 1 on usage errors,
// 2 when a stage fails.

#include <filesystem>
#include <iostream>
#include <map>
#include <string>

#include "CLI11.hpp"
#include "srsr/cnn.hpp"
#include "srsr/metrics.hpp"
#include "srsr/parallel.hpp"
#include "srsr/pipeline.hpp"
#include "srsr/polsar_data.hpp"
#include "srsr/srsrnet.hpp"
#include "srsr/superpixel.hpp"

namespace fs = std::filesystem;
using namespace srsr;

namespace {

constexpr int kUsage = 1;
constexpr int kStageFailure = 2;

// Pipeline settings exposed as --name flags (underscores become dashes).
const char* const kValueKeys[] = {"covariance", "labels", "superpixels", "output_dir", "scale", "compactness",
                                  "segment_iterations", "atoms_per_class", "lambda", "step", "layers", "lambda_b",
                                  "dict_iterations", "learning_rate", "batch_size", "epochs", "patch",
                                  "train_ratio", "seed"};
const char* const kFlagKeys[] = {"freeze_dictionary", "skip_unfolding", "cnn_only"};

std::string dashed(std::string key) {
  for (char& c : key) {
    if (c == '_') c = '-';
  }
  return "--" + key;
}

struct Overrides {
  std::map<std::string, std::string> values;
  std::map<std::string, bool> flags;

  void attach(CLI::App* app, bool with_values = true) {
    if (with_values) {
      for (const char* k : kValueKeys) app->add_option(dashed(k), values[k], std::string("pipeline setting ") + k);
    }
    for (const char* k : kFlagKeys) app->add_flag(dashed(k), flags[k], std::string("ablation: ") + k);
  }

  void apply(CLI::App* app, pipeline::PipelineConfig& cfg) const {
    for (const auto& [k, v] : values) {
      if (app->count(dashed(k)) > 0) pipeline::apply_setting(cfg, k, v);
    }
    for (const auto& [k, v] : flags) {
      if (app->count(dashed(k)) > 0) pipeline::apply_setting(cfg, k, v ? "1" : "0");
    }
  }
};

void require(const std::string& value, const std::string& what) {
  if (value.empty()) throw Error(ErrorCode::InvalidArgument, "missing " + what);
}

cnn::Split split_for(const pipeline::PipelineConfig& cfg, const data::LabelMap& truth) {
  return cnn::stratified_split(truth, cfg.train.train_ratio, pipeline::stage_seeds(cfg.seed).split);
}

// Pixel features exactly as the run command builds them before training.
net::PixelFeatures load_pixel_features(const pipeline::PipelineConfig& cfg, const std::string& features) {
  net::PixelFeatures f;
  if (cfg.cnn_only) {
    require(cfg.covariance, "--covariance");
    f = pipeline::raw_features(data::load_covariance(cfg.covariance));
  } else {
    require(features, "--features");
    require(cfg.superpixels, "--superpixels");
    f = net::project_to_pixels(net::load_features(features), seg::load_superpixels(cfg.superpixels));
  }
  pipeline::normalize_features(f);
  return f;
}

void print_layers(const std::vector<net::LayerDiagnostics>& layers) {
  for (const auto& l : layers) {
    std::cout << "layer " << l.layer << ": mean objective " << l.mean_objective << ", joint " << l.joint_objective
              << ", dictionary change " << l.dict_change << ", failures " << l.failures << "\n";
  }
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Superpixel sparse-representation PolSAR classifier"};
  app.require_subcommand(1);
  int threads = 0;
  app.add_option("--threads", threads, "cap on worker threads (0: all cores)")->check(CLI::NonNegativeNumber);

  // generate
  auto* gen = app.add_subcommand("generate", "write a synthetic Wishart scene");
  gen->set_config("--config", "", "INI file with scene settings");
  std::string gen_out;
  std::string gen_prefix = "scene";
  int gen_h = 128, gen_w = 128, gen_classes = 3, gen_looks = 16, gen_regions = 12;
  std::uint64_t gen_seed = 7;
  std::string gen_layout = "voronoi";
  gen->add_option("--out-dir", gen_out, "output directory")->required();
  gen->add_option("--prefix", gen_prefix, "file name prefix");
  gen->add_option("--height", gen_h)->check(CLI::PositiveNumber);
  gen->add_option("--width", gen_w)->check(CLI::PositiveNumber);
  gen->add_option("--classes", gen_classes)->check(CLI::Range(1, 6));
  gen->add_option("--looks", gen_looks);
  gen->add_option("--regions", gen_regions)->check(CLI::PositiveNumber);
  gen->add_option("--layout", gen_layout)->check(CLI::IsMember({"voronoi", "stripes"}));
  gen->add_option("--seed", gen_seed);

  // segment
  auto* segc = app.add_subcommand("segment", "superpixel segmentation of a covariance image");
  std::string seg_cov, seg_out;
  seg::SegmenterConfig seg_cfg;
  segc->add_option("--covariance", seg_cov)->required();
  segc->add_option("--out", seg_out, "PSARLAB1 superpixel map")->required();
  segc->add_option("--scale", seg_cfg.scale, "mean superpixel area in pixels");
  segc->add_option("--compactness", seg_cfg.compactness);
  segc->add_option("--iterations", seg_cfg.max_iterations);

  // encode / train / classify share the pipeline settings
  pipeline::PipelineConfig stage_cfg;
  std::string stage_config_path;
  auto* enc = app.add_subcommand("encode", "sparse codes of every superpixel");
  std::string enc_out, enc_trace;
  Overrides enc_over;
  enc->add_option("--config", stage_config_path, "pipeline config file");
  enc_over.attach(enc);
  enc->add_option("--out", enc_out, "PSARFEA1 feature file")->required();
  enc->add_option("--trace", enc_trace, "per-layer diagnostics CSV");

  auto* trn = app.add_subcommand("train", "train the patch CNN");
  std::string trn_features, trn_out, trn_loss;
  Overrides trn_over;
  trn->add_option("--config", stage_config_path, "pipeline config file");
  trn_over.attach(trn);
  trn->add_option("--features", trn_features, "PSARFEA1 feature file");
  trn->add_option("--out", trn_out, "PSARCNN1 checkpoint")->required();
  trn->add_option("--loss", trn_loss, "per-epoch loss CSV");

  auto* cls = app.add_subcommand("classify", "classify every pixel");
  std::string cls_features, cls_model, cls_out, cls_ppm;
  Overrides cls_over;
  cls->add_option("--config", stage_config_path, "pipeline config file");
  cls_over.attach(cls);
  cls->add_option("--features", cls_features, "PSARFEA1 feature file");
  cls->add_option("--model", cls_model, "PSARCNN1 checkpoint")->required();
  cls->add_option("--out", cls_out, "PSARLAB1 classification map")->required();
  cls->add_option("--ppm", cls_ppm, "colour rendering of the map");

  // evaluate
  auto* ev = app.add_subcommand("evaluate", "accuracy of a classification map");
  std::string ev_pred, ev_truth, ev_prefix;
  ev->add_option("--pred", ev_pred)->required();
  ev->add_option("--truth", ev_truth)->required();
  ev->add_option("--out-prefix", ev_prefix, "writes <prefix>.csv and <prefix>.txt");

  // run
  auto* run = app.add_subcommand("run", "full pipeline");
  std::string run_config;
  Overrides run_over;
  run->add_option("--config", run_config, "pipeline config file");
  run_over.attach(run);

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForAllHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForVersion& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return kUsage;
  }
  set_threads(threads);

  auto stage_settings = [&](CLI::App* sub, const Overrides& over) {
    pipeline::PipelineConfig cfg = stage_config_path.empty() ? pipeline::PipelineConfig{}
                                                              : pipeline::load_config(stage_config_path);
    over.apply(sub, cfg);
    return cfg;
  };

  try {
    if (*gen) {
      data::SceneSpec spec;
      spec.height = gen_h;
      spec.width = gen_w;
      spec.looks = gen_looks;
      spec.regions = gen_regions;
      spec.seed = gen_seed;
      spec.layout = gen_layout == "stripes" ? data::RegionLayout::Stripes : data::RegionLayout::Voronoi;
      spec.prototypes = data::default_prototypes(gen_classes);
      const data::Scene scene = data::generate_wishart_scene(spec);
      fs::create_directories(gen_out);
      const fs::path base = fs::path(gen_out) / gen_prefix;
      data::save_covariance(base.string() + ".cov", scene.image);
      data::save_labels(base.string() + ".lab", scene.labels);
      data::save_ppm(base.string() + "_pauli.ppm", data::pauli_rgb(scene.image));
      std::cout << "wrote " << base.string() << ".cov, .lab, _pauli.ppm\n";
    } else if (*segc) {
      const data::CovarianceImage img = data::load_covariance(seg_cov);
      const seg::SuperpixelMap map = seg::segment(img, seg_cfg);
      seg::save_superpixels(seg_out, map);
      std::cout << "superpixels " << map.count << "\n";
    } else if (*enc) {
      const pipeline::PipelineConfig cfg = stage_settings(enc, enc_over);
      require(cfg.covariance, "--covariance");
      require(cfg.labels, "--labels");
      require(cfg.superpixels, "--superpixels");
      const data::CovarianceImage img = data::load_covariance(cfg.covariance);
      const data::LabelMap truth = data::load_labels(cfg.labels);
      const seg::SuperpixelMap map = seg::load_superpixels(cfg.superpixels);
      const data::LabelMap train_labels = pipeline::restrict_labels(truth, split_for(cfg, truth).train);
      const net::SrsrNet network = pipeline::make_network(cfg, train_labels, img);
      const net::ForwardResult fwd = net::forward(network, seg::mean_covariance(img, map));
      net::save_features(enc_out, fwd.field);
      if (!enc_trace.empty()) pipeline::write_text(enc_trace, pipeline::layer_trace_csv(fwd.layers));
      print_layers(fwd.layers);
    } else if (*trn) {
      const pipeline::PipelineConfig cfg = stage_settings(trn, trn_over);
      require(cfg.labels, "--labels");
      const data::LabelMap truth = data::load_labels(cfg.labels);
      const net::PixelFeatures feat = load_pixel_features(cfg, trn_features);
      const auto seeds = pipeline::stage_seeds(cfg.seed);
      cnn::PatchSet set;
      set.classes = truth.max_label();
      set.patch = cfg.train.patch;
      set.centers = split_for(cfg, truth).train;
      for (std::size_t p : set.centers) set.targets.push_back(truth.labels[p] - 1);
      cnn::CnnModel model = cnn::CnnModel::he_uniform(feat.channels, set.classes, seeds.init);
      cnn::TrainConfig tc = cfg.train;
      tc.seed = seeds.shuffle;
      const cnn::TrainResult r = cnn::train(model, feat, set, tc);
      cnn::save_model(trn_out, model);
      if (!trn_loss.empty()) pipeline::write_text(trn_loss, pipeline::loss_csv(r.epoch_loss));
      if (!r.epoch_loss.empty()) std::cout << "final loss " << r.epoch_loss.back() << "\n";
    } else if (*cls) {
      const pipeline::PipelineConfig cfg = stage_settings(cls, cls_over);
      const net::PixelFeatures feat = load_pixel_features(cfg, cls_features);
      const cnn::CnnModel model = cnn::load_model(cls_model);
      const data::LabelMap map = cnn::classify_image(model, feat, cfg.train.patch);
      data::save_labels(cls_out, map);
      if (!cls_ppm.empty()) data::save_ppm(cls_ppm, data::render_labels(map));
    } else if (*ev) {
      const data::LabelMap pred = data::load_labels(ev_pred);
      const data::LabelMap truth = data::load_labels(ev_truth);
      const metrics::MetricsReport r = metrics::report(metrics::confusion(pred, truth));
      if (!ev_prefix.empty()) {
        pipeline::write_text(ev_prefix + ".csv", metrics::to_csv(r));
        pipeline::write_text(ev_prefix + ".txt", metrics::to_key_value(r));
      }
      std::cout << metrics::to_key_value(r);
    } else if (*run) {
      pipeline::PipelineConfig cfg = run_config.empty() ? pipeline::PipelineConfig{} : pipeline::load_config(run_config);
      run_over.apply(run, cfg);
      if (threads > 0) cfg.threads = threads;
      const pipeline::PipelineResult r = pipeline::run_pipeline(cfg);
      print_layers(r.layers);
      std::cout << "feature channels " << r.feature_dim << "\n";
      std::cout << metrics::to_key_value(r.metrics);
    }
  } catch (const Error& e) {
    std::cerr << "error: " << e.what() << "\n";
    return e.code() == ErrorCode::InvalidArgument ? kUsage : kStageFailure;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kStageFailure;
  }
  return 0;
}
