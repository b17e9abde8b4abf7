#include <algorithm>
#include <fstream>
#include <random>
#include <sstream>

#include "doctest.h"
#include "gait/error.hpp"
#include "gait/io/digest.hpp"
#include "gait/pipeline/pipeline.hpp"
#include "tempdir.hpp"

using namespace gait;
using namespace gait::pipeline;

namespace {

PipelineConfig small_config(const fs::path& root) {
  auto cfg = config_from_string(R"(
[run]
seed = 5
[corpus]
subjects = 4
videos_per_subject = 4
normal_videos = 3
train_subjects = 2
gallery_videos = 2
frames = 32
[network]
arch = wrn
base_width = 4
widen_factor = 1
blocks_per_group = 1
[train]
batch_size = 8
batches_per_epoch = 3
max_epochs = 2
patience = 1
queue_depth = 2
[descriptors]
batch = 16
)",
                                false);
  cfg.data_root = root;
  cfg.validate();
  return cfg;
}

// one corpus, checkpoint and store shared by the cases below
struct Fixture {
  TempDir dir;
  PipelineConfig cfg;
  fs::path model;
  ExtractSummary extracted;
  Fixture() : cfg(small_config(dir.path / "corpus")) {
    cmd_synth(cfg, cfg.data_root, false);
    model = cmd_train(cfg, dir.path / "train").model_stem;
    extracted = cmd_extract(cfg, model, dir.path / "extract");
  }
};

Fixture& fixture() {
  static Fixture f;
  return f;
}

std::string slurp(const fs::path& p) { return io::read_file(p); }

}  // namespace

TEST_CASE("synth writes the configured corpus and refuses to overwrite") {
  TempDir dir;
  auto cfg = small_config(dir.path / "c");
  const auto a = cmd_synth(cfg, cfg.data_root, false);
  CHECK(a.manifest.subjects.size() == 4);
  CHECK(a.manifest.train_subjects.size() == 2);
  CHECK_THROWS_AS(cmd_synth(cfg, cfg.data_root, false), ConfigError);
  const auto b = cmd_synth(cfg, cfg.data_root, true);
  CHECK(a.manifest_digest == b.manifest_digest);
  cfg.corpus.subjects = 0;
  CHECK_THROWS_AS(cmd_synth(cfg, dir.path / "empty", false), InputError);
}

TEST_CASE("training writes a checkpoint and a log") {
  auto& f = fixture();
  CHECK(fs::exists(f.dir.path / "train" / "model.bin"));
  CHECK(fs::exists(f.dir.path / "train" / "model.json"));
  const auto log = slurp(f.dir.path / "train" / "train.log");
  CHECK(log.find("classes=2") != std::string::npos);
  CHECK(log.find("epoch=1") != std::string::npos);
}

TEST_CASE("extraction yields (N-1) features per part and video") {
  auto& f = fixture();
  // 2 eval subjects x 4 videos, 31 pairs x 5 parts each
  CHECK(f.extracted.descriptors.size() == 8);
  CHECK(f.extracted.frame_features == 8 * 31 * 5);
  CHECK(f.extracted.skipped == 0);
  for (const auto& d : f.extracted.descriptors) CHECK(d.vector.size() == 5 * 16);
}

TEST_CASE("truncation keeps the first frames and skips short videos") {
  auto& f = fixture();
  auto cfg = f.cfg;
  cfg.truncation = 7;
  const auto s = cmd_extract(cfg, f.model, f.dir.path / "trunc7");
  CHECK(s.frame_features == 8 * 6 * 5);
  cfg.truncation = 33;
  const auto t = cmd_extract(cfg, f.model, f.dir.path / "trunc33");
  CHECK(t.descriptors.empty());
  CHECK(t.skipped == 8);
  CHECK(slurp(f.dir.path / "trunc33" / "extract.log").find("skipped=8") != std::string::npos);
}

TEST_CASE("flow cache reproduces freshly computed flow") {
  auto& f = fixture();
  const auto m = synthwalk::read_manifest(f.cfg.data_root);
  const auto cached = prepare_video(f.cfg, m, "s002", "v00");
  auto cfg = f.cfg;
  TempDir other;
  cfg.flow_cache = other.path;
  const auto fresh = prepare_video(cfg, m, "s002", "v00");
  REQUIRE(cached.flows.size() == fresh.flows.size());
  for (std::size_t i = 0; i < fresh.flows.size(); ++i) CHECK(cached.flows[i].encoded == fresh.flows[i].encoded);
  // a different flow setting gets a different key
  cfg.flow.iterations += 1;
  CHECK(flow_cache_key(cfg, f.cfg.data_root / "s002" / "v00") !=
        flow_cache_key(f.cfg, f.cfg.data_root / "s002" / "v00"));
}

TEST_CASE("extraction and evaluation are deterministic") {
  auto& f = fixture();
  const auto again = cmd_extract(f.cfg, f.model, f.dir.path / "extract2");
  CHECK(slurp(again.store) == slurp(f.extracted.store));
  cmd_evaluate(f.cfg, f.extracted.store, f.dir.path / "eval1");
  cmd_evaluate(f.cfg, f.extracted.store, f.dir.path / "eval2");
  for (const char* name : {"report.txt", "cmc.csv", "roc.csv"}) {
    CHECK(slurp(f.dir.path / "eval1" / name) == slurp(f.dir.path / "eval2" / name));
  }
}

TEST_CASE("retraining with the same seed gives the same checkpoint") {
  auto& f = fixture();
  const auto again = cmd_train(f.cfg, f.dir.path / "train2");
  auto bin = again.model_stem;
  bin += ".bin";
  CHECK(slurp(bin) == slurp(f.dir.path / "train" / "model.bin"));
}

TEST_CASE("shuffled probes leave the metrics unchanged") {
  auto& f = fixture();
  const auto m = synthwalk::read_manifest(f.cfg.data_root);
  const auto split = resolve_split(f.cfg, m);
  const auto base = evaluate_descriptors(f.cfg, f.extracted.descriptors, split);
  std::mt19937 rng(3);
  for (int trial = 0; trial < 5; ++trial) {
    auto ds = f.extracted.descriptors;
    std::shuffle(ds.begin(), ds.end(), rng);
    CHECK(evaluate_descriptors(f.cfg, ds, split).report_text == base.report_text);
  }
}

TEST_CASE("probes identical to the gallery are recognised perfectly") {
  auto& f = fixture();
  const auto m = synthwalk::read_manifest(f.cfg.data_root);
  auto split = resolve_split(f.cfg, m);
  std::vector<descriptors::GaitDescriptor> ds;
  for (const auto& d : f.extracted.descriptors) {
    if (std::find(split.gallery_videos.begin(), split.gallery_videos.end(), d.video) == split.gallery_videos.end())
      continue;
    ds.push_back(d);
    auto copy = d;
    copy.video = "p" + d.video;
    ds.push_back(copy);
  }
  std::vector<std::string> probes;
  for (const auto& v : split.gallery_videos) probes.push_back("p" + v);
  split.probe_videos = probes;
  const auto s = evaluate_descriptors(f.cfg, ds, split);
  CHECK(s.report.identification.rank1 == 1.0);
  CHECK(s.report.verification.eer == 0.0);
}

TEST_CASE("evaluation needs a gallery for every probe subject") {
  auto& f = fixture();
  const auto m = synthwalk::read_manifest(f.cfg.data_root);
  const auto split = resolve_split(f.cfg, m);
  auto ds = f.extracted.descriptors;
  std::erase_if(ds, [&](const auto& d) {
    return d.subject == split.eval_subjects[0] &&
           std::find(split.gallery_videos.begin(), split.gallery_videos.end(), d.video) != split.gallery_videos.end();
  });
  CHECK_THROWS_AS(evaluate_descriptors(f.cfg, ds, split), InputError);
}

TEST_CASE("transfer onto the same corpus matches evaluate byte for byte") {
  auto& f = fixture();
  cmd_evaluate(f.cfg, f.extracted.store, f.dir.path / "eval_same");
  cmd_transfer(f.cfg, f.cfg, f.dir.path / "transfer", f.model);
  for (const char* name : {"report.txt", "cmc.csv", "roc.csv"}) {
    CHECK(slurp(f.dir.path / "transfer" / name) == slurp(f.dir.path / "eval_same" / name));
  }
  auto missing = f.cfg;
  missing.data_root = f.dir.path / "no_such_corpus";
  CHECK_THROWS_AS(cmd_transfer(f.cfg, missing, f.dir.path / "transfer2", f.model), InputError);
}

TEST_CASE("extraction rejects a checkpoint of another architecture") {
  auto& f = fixture();
  auto cfg = f.cfg;
  cfg.network.base_width = 8;
  CHECK_THROWS_AS(cmd_extract(cfg, f.model, f.dir.path / "wrong"), ConfigError);
}

TEST_CASE("silhouette mode produces full-body descriptors") {
  auto& f = fixture();
  auto cfg = f.cfg;
  cfg.mode = DatasetMode::silhouette;
  cfg.flow_cache = f.dir.path / "sil_cache";
  cfg.validate();
  const auto model = cmd_train(cfg, f.dir.path / "sil_train").model_stem;
  const auto s = cmd_extract(cfg, model, f.dir.path / "sil_extract");
  CHECK(s.frame_features == 8 * 31);
  for (const auto& d : s.descriptors) CHECK(d.vector.size() == 16);
  const auto m = synthwalk::read_manifest(cfg.data_root);
  const auto v = prepare_video(cfg, m, "s002", "v01");
  for (const auto& b : v.boxes) CHECK(b[std::size_t(posepatch::Part::full_body)].box.w > 0);
}

TEST_CASE("the output lock is exclusive") {
  TempDir dir;
  {
    OutputLock a(dir.path);
    CHECK_THROWS_AS(OutputLock(dir.path), ConfigError);
  }
  OutputLock again(dir.path);
  CHECK(fs::exists(dir.path / ".gaitctl.lock"));
}

TEST_CASE("subjects listed in both splits are rejected") {
  auto& f = fixture();
  auto cfg = f.cfg;
  cfg.train_subjects = {"s000", "s001"};
  cfg.eval_subjects = {"s001", "s002"};
  CHECK_THROWS_AS(cmd_evaluate(cfg, f.extracted.store, f.dir.path / "bad"), ConfigError);
  cfg.eval_subjects = {"s002", "s999"};
  CHECK_THROWS_AS(resolve_split(cfg, synthwalk::read_manifest(cfg.data_root)), InputError);
}
