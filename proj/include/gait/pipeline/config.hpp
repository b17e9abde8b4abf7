#pragma once

// Pipeline configuration. The file format is INI ([section] key = value);
// every key can be overridden by an environment variable GAIT_<SECTION>_<KEY>
// (upper case) or on the command line as section.key=value.

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "gait/descriptors/descriptors.hpp"
#include "gait/nets/trainer.hpp"
#include "gait/optflow/flow.hpp"
#include "gait/recognizer/recognizer.hpp"
#include "gait/synthwalk/corpus.hpp"

namespace gait::pipeline {

enum class DatasetMode { keypoints, silhouette };

struct PipelineConfig {
  std::uint64_t seed = 1;

  // [dataset]
  std::filesystem::path data_root = "corpus";
  DatasetMode mode = DatasetMode::keypoints;
  double background_threshold = 0.25;
  std::filesystem::path flow_cache;  // empty: <data_root>/flow_cache

  // [corpus], used by synth
  synthwalk::CorpusConfig corpus;

  // [split]; empty lists fall back to the corpus manifest
  std::vector<std::string> train_subjects;
  std::vector<std::string> eval_subjects;
  std::vector<std::string> gallery_videos;
  std::vector<std::string> probe_videos;
  std::string validation_video = "auto";  // held out per training subject; "none" disables

  // [patches]
  std::vector<posepatch::Part> parts{posepatch::kCanonicalParts.begin(), posepatch::kCanonicalParts.end()};
  double foot_fraction = 0.25;

  // [flow]
  optflow::FlowConfig flow;
  double clip = 16.0;

  // [network]; classes come from the training split
  nets::NetworkSpec network;

  // [train]
  nets::TrainConfig train;

  // [descriptors]
  descriptors::Fusion fusion = descriptors::Fusion::concat;
  std::size_t pca_dim = 0;     // 0: no projection
  std::size_t truncation = 0;  // 0: whole video
  std::size_t extract_batch = 64;

  // [evaluate]
  recognizer::Metric metric = recognizer::Metric::l1;
  recognizer::PairScoring pair_scoring = recognizer::PairScoring::per_video;

  /// Applies the invariants: silhouette mode forces parts = {full_body},
  /// parts are canonical and non-empty, split subject sets are disjoint.
  void validate();
  std::filesystem::path cache_dir() const;
};

/// Reads a config file (missing keys keep their defaults; unknown keys are a
/// ConfigError), then applies environment overrides.
PipelineConfig load_config(const std::filesystem::path& path);
PipelineConfig config_from_string(const std::string& ini_text, bool apply_env = true);
std::string config_to_string(const PipelineConfig& cfg);

/// "section.key=value"
void apply_override(PipelineConfig& cfg, const std::string& assignment);
void apply_env_overrides(PipelineConfig& cfg);

/// Every key as "section.key", in file order.
std::vector<std::string> config_keys();

std::string_view to_string(DatasetMode m);

}  // namespace gait::pipeline
