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

#include <gtest/gtest.h>
#include <sys/wait.h>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>

#include "srsr/pipeline.hpp"

using namespace srsr;
using namespace srsr::pipeline;
namespace fs = std::filesystem;

namespace {

fs::path scratch(const std::string& name) {
  const fs::path p = fs::temp_directory_path() / ("srsr_test_pipeline_" + name);
  fs::remove_all(p);
  fs::create_directories(p);
  return p;
}

int cli(const std::string& args) {
  const std::string cmd = std::string(SRSR_CLI_PATH) + " " + args + " >/dev/null 2>&1";
  const int status = std::system(cmd.c_str());
  return WIFEXITED(status) ? WEXITSTATUS(status) : -1;
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

data::Scene small_scene(std::uint64_t seed = 4) {
  data::SceneSpec spec;
  spec.height = 48;
  spec.width = 48;
  spec.prototypes = data::default_prototypes(3);
  spec.regions = 6;
  spec.seed = seed;
  return data::generate_wishart_scene(spec);
}

PipelineConfig small_config() {
  PipelineConfig cfg;
  cfg.scale = 36;
  cfg.atoms_per_class = 8;
  cfg.layers = 2;
  cfg.step = 1e-3;
  cfg.dict_iterations = 2;
  cfg.train.epochs = 3;
  cfg.train.patch = 7;
  cfg.train.batch_size = 32;
  cfg.seed = 11;
  return cfg;
}

// Settings shared by the stage commands in the resumability test.
const char* const kStageFlags =
    " --scale 36 --atoms-per-class 8 --layers 2 --step 1e-3 --dict-iterations 2 --epochs 3 --patch 7"
    " --batch-size 32 --seed 11";

}  // namespace

TEST(Config, ParsesKeysCommentsAndSections) {
  PipelineConfig cfg;
  parse_config(cfg,
               "# comment\n[encode]\nlambda = 0.25 ; trailing\n  layers=7\nfreeze_dictionary = yes\n"
               "epochs = 12\ntrain_ratio = 0.2\nseed = 99\n\n");
  EXPECT_EQ(cfg.lambda, 0.25);
  EXPECT_EQ(cfg.layers, 7);
  EXPECT_TRUE(cfg.freeze_dictionary);
  EXPECT_EQ(cfg.train.epochs, 12);
  EXPECT_EQ(cfg.train.train_ratio, 0.2);
  EXPECT_EQ(cfg.seed, 99u);
  EXPECT_EQ(cfg.atoms_per_class, 100);
}

TEST(Config, RejectsUnknownKeysAndBadValues) {
  PipelineConfig cfg;
  for (const char* text : {"bogus = 1\n", "layers = two\n", "lambda = 0.5x\n", "cnn_only = maybe\n", "layers\n"}) {
    try {
      parse_config(cfg, text);
      FAIL() << text;
    } catch (const Error& e) {
      EXPECT_EQ(e.code(), ErrorCode::InvalidArgument) << text;
    }
  }
}

TEST(Config, RelativePathsFollowTheConfigFile) {
  const fs::path dir = scratch("cfg");
  {
    std::ofstream out(dir / "run.ini");
    out << "covariance = scene.cov\nlabels = /abs/scene.lab\noutput_dir = out\n";
  }
  const PipelineConfig cfg = load_config((dir / "run.ini").string());
  EXPECT_EQ(fs::path(cfg.covariance), dir / "scene.cov");
  EXPECT_EQ(cfg.labels, "/abs/scene.lab");
  EXPECT_EQ(fs::path(cfg.output_dir), dir / "out");
  try {
    load_config((dir / "missing.ini").string());
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::IoError);
  }
}

TEST(StageSeeds, DistinctAndDeterministic) {
  const StageSeeds a = stage_seeds(5), b = stage_seeds(5), c = stage_seeds(6);
  EXPECT_EQ(a.split, b.split);
  EXPECT_EQ(a.shuffle, b.shuffle);
  EXPECT_NE(a.split, a.dictionary);
  EXPECT_NE(a.init, a.shuffle);
  EXPECT_NE(a.split, c.split);
}

TEST(Features, RawChannelsAndNormalization) {
  data::CovarianceImage img(1, 2, 3);
  CMatrix x(3, 3);
  x << Complex(4, 0), Complex(1, 2), Complex(0, -1), Complex(1, -2), Complex(5, 0), Complex(3, 0.5), Complex(0, 1),
      Complex(3, -0.5), Complex(6, 0);
  img.set(0, validate_hpd(x));
  img.set(1, HpdMatrix::identity(3));
  net::PixelFeatures f = raw_features(img);
  ASSERT_EQ(f.channels, 9);
  const double expect[9] = {4, 5, 6, 1, 2, 0, -1, 3, 0.5};
  for (int c = 0; c < 9; ++c) EXPECT_EQ(f.at(0)[c], expect[c]) << c;
  normalize_features(f);
  double sq = 0.0;
  for (double v : f.values) sq += v * v;
  EXPECT_NEAR(sq / static_cast<double>(f.values.size()), 1.0, 1e-12);
}

TEST(Features, RestrictLabelsKeepsOnlyListedPixels) {
  data::LabelMap labels(2, 3, 2);
  const data::LabelMap r = restrict_labels(labels, {1, 4});
  for (std::size_t p = 0; p < 6; ++p) EXPECT_EQ(r.labels[p], (p == 1 || p == 4) ? 2 : 0);
}

TEST(RunPipeline, MetricsCoverTestPixelsOnly) {
  const data::Scene scene = small_scene();
  const PipelineResult r = run_pipeline(small_config(), scene.image, scene.labels);
  EXPECT_EQ(r.feature_dim, 24);
  EXPECT_GT(r.superpixels, 0);
  EXPECT_EQ(r.layers.size(), 3u);
  EXPECT_EQ(r.losses.size(), 3u);
  std::size_t labeled = 0, kept = 0;
  for (std::size_t p = 0; p < scene.labels.labels.size(); ++p) {
    labeled += scene.labels.labels[p] != 0;
    kept += r.test_truth.labels[p] != 0;
    if (r.test_truth.labels[p] != 0) EXPECT_EQ(r.test_truth.labels[p], scene.labels.labels[p]);
  }
  EXPECT_EQ(r.metrics.total, kept);
  EXPECT_LT(kept, labeled);
  EXPECT_NEAR(static_cast<double>(labeled - kept) / labeled, 0.1, 0.01);
}

TEST(RunPipeline, Deterministic) {
  const data::Scene scene = small_scene();
  const PipelineResult a = run_pipeline(small_config(), scene.image, scene.labels);
  const PipelineResult b = run_pipeline(small_config(), scene.image, scene.labels);
  EXPECT_EQ(a.prediction.labels, b.prediction.labels);
  EXPECT_EQ(a.losses, b.losses);
  EXPECT_EQ(a.layers.back().dict_hash, b.layers.back().dict_hash);
}

TEST(RunPipeline, Ablations) {
  const data::Scene scene = small_scene();
  PipelineConfig cfg = small_config();
  cfg.cnn_only = true;
  const PipelineResult raw = run_pipeline(cfg, scene.image, scene.labels);
  EXPECT_EQ(raw.feature_dim, 9);
  EXPECT_TRUE(raw.layers.empty());

  cfg = small_config();
  cfg.freeze_dictionary = true;
  const PipelineResult frozen = run_pipeline(cfg, scene.image, scene.labels);
  for (const auto& l : frozen.layers) {
    EXPECT_EQ(l.dict_hash, frozen.layers.front().dict_hash);
    EXPECT_EQ(l.dict_change, 0.0);
  }
}

TEST(RunPipeline, ExternalSegmentationIsUsed) {
  const data::Scene scene = small_scene();
  // Four quadrants.
  seg::SuperpixelMap map{48, 48, std::vector<int>(48 * 48), 4};
  for (int y = 0; y < 48; ++y)
    for (int x = 0; x < 48; ++x) map.ids[y * 48 + x] = (y / 24) * 2 + x / 24;
  const PipelineResult r = run_pipeline(small_config(), scene.image, scene.labels, &map);
  EXPECT_EQ(r.superpixels, 4);
}

TEST(RunPipeline, StageFailureNamesTheStage) {
  const data::Scene scene = small_scene();
  PipelineConfig cfg = small_config();
  cfg.atoms_per_class = 100000;
  try {
    run_pipeline(cfg, scene.image, scene.labels);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::StageFailure);
    EXPECT_NE(std::string(e.what()).find("init"), std::string::npos);
  }
  try {
    run_pipeline(small_config(), scene.image, data::LabelMap(4, 4, 1));
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::StageFailure);
  }
}

TEST(Cli, UsageErrorsExitOne) {
  EXPECT_EQ(cli(""), 1);
  EXPECT_EQ(cli("frobnicate"), 1);
  EXPECT_EQ(cli("generate"), 1);
  EXPECT_EQ(cli("generate --out-dir /tmp --classes 9"), 1);
  EXPECT_EQ(cli("run --no-such-flag"), 1);
  EXPECT_EQ(cli("encode --out x.fea"), 1);  // no inputs named
  EXPECT_EQ(cli("--help"), 0);
}

TEST(Cli, GenerateIsDeterministicAndRejectsTooFewLooks) {
  const fs::path dir = scratch("gen");
  ASSERT_EQ(cli("generate --out-dir " + (dir / "a").string() + " --height 24 --width 20 --seed 3"), 0);
  ASSERT_EQ(cli("generate --out-dir " + (dir / "b").string() + " --height 24 --width 20 --seed 3"), 0);
  ASSERT_EQ(cli("generate --out-dir " + (dir / "c").string() + " --height 24 --width 20 --seed 4"), 0);
  for (const char* f : {"scene.cov", "scene.lab", "scene_pauli.ppm"}) {
    EXPECT_EQ(slurp(dir / "a" / f), slurp(dir / "b" / f)) << f;
  }
  EXPECT_NE(slurp(dir / "a" / "scene.cov"), slurp(dir / "c" / "scene.cov"));
  const data::CovarianceImage img = data::load_covariance((dir / "a" / "scene.cov").string());
  EXPECT_EQ(img.height(), 24);
  EXPECT_EQ(img.width(), 20);
  EXPECT_EQ(cli("generate --out-dir " + (dir / "d").string() + " --looks 2"), 2);
}

TEST(Cli, EvaluateMatchesLibraryReport) {
  const fs::path dir = scratch("eval");
  const data::Scene scene = small_scene();
  data::LabelMap pred = scene.labels;
  for (std::size_t p = 0; p < pred.labels.size(); p += 7) pred.labels[p] = static_cast<std::uint16_t>(pred.labels[p] % 3 + 1);
  data::save_labels((dir / "pred.lab").string(), pred);
  data::save_labels((dir / "truth.lab").string(), scene.labels);
  ASSERT_EQ(cli("evaluate --pred " + (dir / "pred.lab").string() + " --truth " + (dir / "truth.lab").string() +
                " --out-prefix " + (dir / "m").string()),
            0);
  const metrics::MetricsReport r = metrics::report(metrics::confusion(pred, scene.labels));
  EXPECT_EQ(slurp(dir / "m.txt"), metrics::to_key_value(r));
  EXPECT_EQ(slurp(dir / "m.csv"), metrics::to_csv(r));

  data::save_labels((dir / "small.lab").string(), data::LabelMap(3, 3, 1));
  EXPECT_EQ(cli("evaluate --pred " + (dir / "small.lab").string() + " --truth " + (dir / "truth.lab").string()), 2);
  EXPECT_EQ(cli("evaluate --pred " + (dir / "nope.lab").string() + " --truth " + (dir / "truth.lab").string()), 2);
}

TEST(Cli, StagesResumeToTheSameResultAsRun) {
  const fs::path dir = scratch("stages");
  ASSERT_EQ(cli("generate --out-dir " + dir.string() + " --height 48 --width 48 --regions 6 --seed 4"), 0);
  const std::string inputs =
      " --covariance " + (dir / "scene.cov").string() + " --labels " + (dir / "scene.lab").string();

  ASSERT_EQ(cli("run" + inputs + kStageFlags + " --output-dir " + (dir / "run").string()), 0);
  for (const char* f : {"superpixels.lab", "features.fea", "layers.csv", "model.cnn", "prediction.lab",
                        "prediction.ppm", "test_truth.lab", "metrics.csv", "metrics.txt", "loss.csv"}) {
    EXPECT_TRUE(fs::exists(dir / "run" / f)) << f;
  }

  const std::string sp = (dir / "sp.lab").string();
  ASSERT_EQ(cli("segment --covariance " + (dir / "scene.cov").string() + " --scale 36 --out " + sp), 0);
  EXPECT_EQ(slurp(sp), slurp(dir / "run" / "superpixels.lab"));

  const std::string with_sp = inputs + " --superpixels " + sp + kStageFlags;
  ASSERT_EQ(cli("encode" + with_sp + " --out " + (dir / "f.fea").string() + " --trace " +
                (dir / "layers.csv").string()),
            0);
  EXPECT_EQ(slurp(dir / "f.fea"), slurp(dir / "run" / "features.fea"));
  EXPECT_EQ(slurp(dir / "layers.csv"), slurp(dir / "run" / "layers.csv"));

  ASSERT_EQ(cli("train" + with_sp + " --features " + (dir / "f.fea").string() + " --out " +
                (dir / "m.cnn").string()),
            0);
  EXPECT_EQ(slurp(dir / "m.cnn"), slurp(dir / "run" / "model.cnn"));

  ASSERT_EQ(cli("classify" + with_sp + " --features " + (dir / "f.fea").string() + " --model " +
                (dir / "m.cnn").string() + " --out " + (dir / "pred.lab").string()),
            0);
  EXPECT_EQ(slurp(dir / "pred.lab"), slurp(dir / "run" / "prediction.lab"));

  ASSERT_EQ(cli("evaluate --pred " + (dir / "pred.lab").string() + " --truth " +
                (dir / "run" / "test_truth.lab").string() + " --out-prefix " + (dir / "ev").string()),
            0);
  EXPECT_EQ(slurp(dir / "ev.txt"), slurp(dir / "run" / "metrics.txt"));
}

TEST(Cli, FrozenRunKeepsTheDictionaryHash) {
  const fs::path dir = scratch("frozen");
  ASSERT_EQ(cli("generate --out-dir " + dir.string() + " --height 48 --width 48 --regions 6 --seed 4"), 0);
  ASSERT_EQ(cli("run --covariance " + (dir / "scene.cov").string() + " --labels " + (dir / "scene.lab").string() +
                kStageFlags + " --freeze-dictionary --output-dir " + (dir / "out").string()),
            0);
  std::ifstream in(dir / "out" / "layers.csv");
  std::string line, first_hash;
  std::getline(in, line);
  int rows = 0;
  while (std::getline(in, line)) {
    const std::string hash = line.substr(line.rfind(',') + 1);
    if (rows++ == 0) first_hash = hash;
    EXPECT_EQ(hash, first_hash);
  }
  EXPECT_EQ(rows, 3);
}

TEST(Cli, MissingInputIsAStageFailure) {
  const fs::path dir = scratch("missing");
  EXPECT_EQ(cli("run --covariance " + (dir / "none.cov").string() + " --labels " + (dir / "none.lab").string()), 2);
}
