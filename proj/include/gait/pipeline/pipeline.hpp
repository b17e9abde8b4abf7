#pragma once

// The commands behind gaitctl: corpus generation, flow precomputation,
// training, descriptor extraction, evaluation and cross-corpus transfer.
// Every command is a pure function of its config, inputs and seed.

#include <array>
#include <filesystem>
#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

#include "gait/pipeline/config.hpp"

namespace gait::pipeline {

namespace fs = std::filesystem;

struct Split {
  std::vector<std::string> train_subjects;
  std::vector<std::string> eval_subjects;
  std::vector<std::string> gallery_videos;
  std::vector<std::string> probe_videos;
};

/// Config lists take precedence over the manifest; subjects must exist and
/// the subject sets must be disjoint.
Split resolve_split(const PipelineConfig& cfg, const synthwalk::Manifest& manifest);

/// Encoded flow maps of consecutive frame pairs plus the part boxes of each
/// pair (keypoints of the first frame, or the silhouette box).
struct PreparedVideo {
  std::string subject;
  std::string video;
  int label = 0;
  synthwalk::Condition condition = synthwalk::Condition::normal;
  std::size_t frames = 0;
  std::vector<optflow::FlowMap> flows;  // encoded planes only
  std::vector<std::array<posepatch::PatchSpec, 5>> boxes;
};

/// Loads or computes the video's flow maps through the on-disk cache, keyed
/// by the video content and the flow settings. `max_frames` (0 = all) keeps
/// only the first frames.
PreparedVideo prepare_video(const PipelineConfig& cfg, const synthwalk::Manifest& manifest,
                            const std::string& subject, const std::string& video, std::size_t max_frames = 0);

/// Cache key of a video's flow: digest of frame bytes, mode and flow settings.
std::string flow_cache_key(const PipelineConfig& cfg, const fs::path& video_dir);

/// Exclusive ownership of an output directory through a lock file.
class OutputLock {
 public:
  explicit OutputLock(const fs::path& dir);  // ConfigError if the directory is locked
  ~OutputLock();
  OutputLock(const OutputLock&) = delete;
  OutputLock& operator=(const OutputLock&) = delete;

 private:
  fs::path path_;
};

struct SynthResult {
  synthwalk::Manifest manifest;
  std::string manifest_digest;
};
SynthResult cmd_synth(const PipelineConfig& cfg, const fs::path& out, bool overwrite);

/// Precomputes every video's flow. Returns the number of videos processed.
std::size_t cmd_flow(const PipelineConfig& cfg, std::ostream* log = nullptr);

struct TrainSummary {
  nets::TrainResult result;
  std::size_t classes = 0;
  std::size_t train_samples = 0;
  std::size_t val_samples = 0;
  fs::path model_stem;  // <out>/model, with .bin and .json
};
/// Trains on every patch of the training subjects (minus held-out
/// validation videos) and writes model.bin, model.json and train.log.
TrainSummary cmd_train(const PipelineConfig& cfg, const fs::path& out, std::ostream* log = nullptr);

struct ExtractSummary {
  std::vector<descriptors::GaitDescriptor> descriptors;
  std::size_t skipped = 0;
  std::size_t frame_features = 0;
  fs::path store;
};
/// Descriptors of every video of the evaluation subjects; writes
/// descriptors.bin, descriptors.csv and extract.log.
ExtractSummary cmd_extract(const PipelineConfig& cfg, const fs::path& model_stem, const fs::path& out,
                           std::ostream* log = nullptr);

/// Features of one prepared video, in pair-major canonical part order.
std::vector<descriptors::FrameFeature> video_features(const nets::Model<float>& model, const PreparedVideo& v,
                                                      const PipelineConfig& cfg);

struct EvaluateSummary {
  recognizer::EvalReport report;
  std::string report_text;
};
/// Gallery/probe evaluation of a descriptor store; writes report.txt, cmc.csv and roc.csv.
EvaluateSummary cmd_evaluate(const PipelineConfig& cfg, const fs::path& store, const fs::path& out);
EvaluateSummary evaluate_descriptors(const PipelineConfig& cfg, const std::vector<descriptors::GaitDescriptor>& ds,
                                     const Split& split);

/// Extractor from corpus A (trained here unless `model_stem` is given),
/// classifier fitted and tested on corpus B; no weight updates on B.
EvaluateSummary cmd_transfer(const PipelineConfig& train_cfg, const PipelineConfig& eval_cfg, const fs::path& out,
                             const std::optional<fs::path>& model_stem = std::nullopt, std::ostream* log = nullptr);

descriptors::Condition descriptor_condition(synthwalk::Condition c);

}  // namespace gait::pipeline
