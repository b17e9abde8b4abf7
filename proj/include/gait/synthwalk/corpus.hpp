#pragma once

// On-disk dataset layout shared by the generator and the pipeline:
//   <root>/manifest.json
//   <root>/<subject>/<video>/frames/NNNN.pgm
//   <root>/<subject>/<video>/masks/NNNN.pbm
//   <root>/<subject>/<video>/keypoints.txt
//   <root>/<subject>/<video>/background.pgm   (optional)

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "gait/synthwalk/walker.hpp"

namespace gait::synthwalk {

struct CorpusConfig {
  std::size_t subjects = 20;
  std::size_t videos_per_subject = 10;
  std::size_t normal_videos = 6;  // the rest alternate perturbed-a / perturbed-b
  std::size_t train_subjects = 10;
  std::size_t gallery_videos = 4;  // first normal walks of each evaluation subject
  VideoOptions video;
  IdentityRanges ranges;
  std::uint64_t seed = 1;

  void validate() const;
};

struct VideoEntry {
  std::string name;
  Condition condition = Condition::normal;
  std::size_t frames = 0;
  bool operator==(const VideoEntry&) const = default;
};

struct SubjectEntry {
  std::string name;
  int label = 0;
  std::vector<VideoEntry> videos;
  bool has_identity = false;
  WalkerIdentity identity;  // only for synthetic corpora
  bool operator==(const SubjectEntry&) const = default;
};

struct Manifest {
  std::size_t width = 0;
  std::size_t height = 0;
  std::uint64_t seed = 0;
  std::vector<SubjectEntry> subjects;
  std::vector<std::string> train_subjects;
  std::vector<std::string> eval_subjects;
  std::vector<std::string> gallery_videos;  // video names, applied to every evaluation subject
  std::vector<std::string> probe_videos;

  const SubjectEntry& subject(const std::string& name) const;  // InputError if absent
  bool operator==(const Manifest&) const = default;
};

std::string manifest_to_json(const Manifest& m);
Manifest manifest_from_json(const std::string& text);  // InputError on malformed input
Manifest read_manifest(const std::filesystem::path& root);

std::string subject_name(std::size_t index);  // s000, s001, ...
std::string video_name(std::size_t index);    // v00, v01, ...
Condition condition_of_video(const CorpusConfig& cfg, std::size_t video_index);

/// Generates the whole corpus in memory order and writes it. Refuses a
/// non-empty root unless overwrite is set (then the root is cleared first).
/// Videos are generated in parallel, each from its own substream.
Manifest write_corpus(const std::filesystem::path& root, const CorpusConfig& cfg, bool overwrite = false);

/// Identity and per-video substreams of a corpus.
WalkerIdentity corpus_identity(const CorpusConfig& cfg, std::size_t subject);
SyntheticVideo corpus_video(const CorpusConfig& cfg, const WalkerIdentity& id, std::size_t subject,
                            std::size_t video);

struct LoadedVideo {
  std::vector<Frame> frames;
  std::vector<Mask> masks;  // empty when the video has no masks directory
  std::vector<posepatch::PoseKeypoints> keypoints;  // empty when there is no sidecar
  bool has_background = false;
  Frame background;
};

std::filesystem::path video_dir(const std::filesystem::path& root, const std::string& subject,
                                const std::string& video);
void write_video(const std::filesystem::path& dir, const SyntheticVideo& video);
/// Reads up to max_frames frames (0 = all). Throws InputError on missing or inconsistent files.
LoadedVideo load_video(const std::filesystem::path& dir, std::size_t max_frames = 0);

}  // namespace gait::synthwalk
