#include <cstdlib>
#include <fstream>
#include <random>
#include <set>

#include "doctest.h"
#include "gait/error.hpp"
#include "gait/pipeline/config.hpp"
#include "tempdir.hpp"

using namespace gait;
using namespace gait::pipeline;

TEST_CASE("default config survives a text round trip") {
  const PipelineConfig a = config_from_string("", false);
  const std::string text = config_to_string(a);
  const PipelineConfig b = config_from_string(text, false);
  CHECK(config_to_string(b) == text);
}

TEST_CASE("randomised configs round trip losslessly") {
  std::mt19937_64 rng(7);
  std::uniform_real_distribution<double> u(1e-6, 10.0);
  for (int trial = 0; trial < 50; ++trial) {
    PipelineConfig a = config_from_string("", false);
    a.seed = rng();
    a.background_threshold = u(rng) / 11.0;
    a.foot_fraction = u(rng) / 10.5;
    a.clip = u(rng);
    a.train.learning_rate = u(rng);
    a.train.momentum = u(rng) / 10.5;
    a.corpus.ranges.frequency = {0.01 + u(rng) / 1000, 0.2 + u(rng) / 100};
    a.pca_dim = rng() % 50;
    a.train_subjects = {"s000", "s001"};
    a.eval_subjects = {"s002"};
    a.parts = {posepatch::Part::left_foot, posepatch::Part::full_body};
    const std::string text = config_to_string(a);
    const PipelineConfig b = config_from_string(text, false);
    CHECK(b.seed == a.seed);
    CHECK(b.background_threshold == a.background_threshold);
    CHECK(b.foot_fraction == a.foot_fraction);
    CHECK(b.clip == a.clip);
    CHECK(b.train.learning_rate == a.train.learning_rate);
    CHECK(b.train.momentum == a.train.momentum);
    CHECK(b.corpus.ranges.frequency == a.corpus.ranges.frequency);
    CHECK(b.pca_dim == a.pca_dim);
    CHECK(b.train_subjects == a.train_subjects);
    CHECK(b.parts == a.parts);
    CHECK(config_to_string(b) == text);
  }
}

TEST_CASE("file, override and environment layering") {
  TempDir dir;
  const auto file = dir.path / "run.ini";
  std::ofstream(file) << "[train]\nbatch_size = 32\n[descriptors]\nfusion = avg\n";
  ::setenv("GAIT_TRAIN_BATCH_SIZE", "16", 1);
  auto cfg = load_config(file);
  ::unsetenv("GAIT_TRAIN_BATCH_SIZE");
  CHECK(cfg.train.batch_size == 16);
  CHECK(cfg.fusion == descriptors::Fusion::avg);
  apply_override(cfg, "evaluate.metric=l2");
  CHECK(cfg.metric == recognizer::Metric::l2);
  apply_override(cfg, "descriptors.pca_dim = 12");
  CHECK(cfg.pca_dim == 12);
}

TEST_CASE("bad keys and values are config errors") {
  CHECK_THROWS_AS(config_from_string("[train]\nbogus = 1\n", false), ConfigError);
  CHECK_THROWS_AS(config_from_string("[nosuch]\nx = 1\n", false), ConfigError);
  CHECK_THROWS_AS(config_from_string("[train]\nbatch_size = 12x\n", false), ConfigError);
  CHECK_THROWS_AS(config_from_string("[patches]\nparts = left_foot,elbow\n", false), ConfigError);
  auto cfg = config_from_string("", false);
  CHECK_THROWS_AS(apply_override(cfg, "train.batch_size"), ConfigError);
  CHECK_THROWS_AS(apply_override(cfg, "nodot=3"), ConfigError);
  CHECK_THROWS_AS(apply_override(cfg, "evaluate.metric=cosine"), ConfigError);
  CHECK_THROWS_AS(load_config("/nonexistent/gait.ini"), ConfigError);
}

TEST_CASE("silhouette mode forces the full-body part") {
  auto cfg = config_from_string("[dataset]\nmode = silhouette\n[patches]\nparts = left_foot,upper_body\n", false);
  cfg.validate();
  REQUIRE(cfg.parts.size() == 1);
  CHECK(cfg.parts[0] == posepatch::Part::full_body);
}

TEST_CASE("parts are canonicalised and must be non-empty") {
  auto cfg = config_from_string("[patches]\nparts = full_body,right_foot\n", false);
  cfg.validate();
  CHECK(cfg.parts == std::vector<posepatch::Part>{posepatch::Part::right_foot, posepatch::Part::full_body});
  cfg.parts.clear();
  CHECK_THROWS_AS(cfg.validate(), ConfigError);
  cfg.parts = {posepatch::Part::left_foot, posepatch::Part::left_foot};
  CHECK_THROWS_AS(cfg.validate(), ConfigError);
}

TEST_CASE("split subject sets must be disjoint") {
  auto cfg = config_from_string("[split]\ntrain_subjects = s000,s001\neval_subjects = s001,s002\n", false);
  CHECK_THROWS_AS(cfg.validate(), ConfigError);
}

TEST_CASE("every key is listed once") {
  const auto keys = config_keys();
  std::set<std::string> seen(keys.begin(), keys.end());
  CHECK(seen.size() == keys.size());
  for (const char* k : {"run.seed", "dataset.mode", "patches.parts", "flow.clip", "network.arch", "train.patience",
                        "descriptors.truncation", "descriptors.pca_dim", "evaluate.metric", "split.train_subjects"}) {
    CHECK(seen.count(k) == 1);
  }
}
