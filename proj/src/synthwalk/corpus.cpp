#include "gait/synthwalk/corpus.hpp"

#include <algorithm>
#include <cstdio>
#include <exception>
#include <fstream>
#include <mutex>

#include "gait/error.hpp"
#include "gait/io/digest.hpp"
#include "json.hpp"

namespace gait::synthwalk {

namespace fs = std::filesystem;
using nlohmann::ordered_json;

namespace {

std::string frame_file(std::size_t t, const char* ext) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%04zu.%s", t, ext);
  return buf;
}

ordered_json identity_json(const WalkerIdentity& id) {
  return ordered_json{{"frequency", id.frequency},         {"leg_amplitude", id.leg_amplitude},
                      {"arm_amplitude", id.arm_amplitude}, {"foot_lift", id.foot_lift},
                      {"phase", id.phase},                 {"sway_amplitude", id.sway_amplitude},
                      {"height", id.height},               {"speed", id.speed},
                      {"limb_width", id.limb_width}};
}

WalkerIdentity identity_from(const nlohmann::json& j) {
  WalkerIdentity id;
  id.frequency = j.at("frequency").get<double>();
  id.leg_amplitude = j.at("leg_amplitude").get<double>();
  id.arm_amplitude = j.at("arm_amplitude").get<double>();
  id.foot_lift = j.at("foot_lift").get<double>();
  id.phase = j.at("phase").get<std::array<double, 4>>();
  id.sway_amplitude = j.at("sway_amplitude").get<double>();
  id.height = j.at("height").get<double>();
  id.speed = j.at("speed").get<double>();
  id.limb_width = j.at("limb_width").get<double>();
  return id;
}

std::vector<fs::path> sorted_files(const fs::path& dir, const std::string& ext) {
  std::vector<fs::path> files;
  for (const auto& e : fs::directory_iterator(dir)) {
    if (e.is_regular_file() && e.path().extension() == ext) files.push_back(e.path());
  }
  std::sort(files.begin(), files.end());
  for (std::size_t i = 0; i < files.size(); ++i) {
    if (files[i].filename() != frame_file(i, ext.c_str() + 1)) {
      throw InputError("frame files in " + dir.string() + " are not numbered contiguously from 0000");
    }
  }
  return files;
}

}  // namespace

void CorpusConfig::validate() const {
  if (subjects == 0) throw InputError("corpus needs at least one subject");
  if (videos_per_subject == 0) throw ConfigError("corpus needs at least one video per subject");
  if (normal_videos > videos_per_subject) throw ConfigError("more normal videos than videos per subject");
  if (gallery_videos > normal_videos) throw ConfigError("gallery videos must be normal walks");
  if (train_subjects > subjects) throw ConfigError("more training subjects than subjects");
  ranges.validate();
}

const SubjectEntry& Manifest::subject(const std::string& name) const {
  for (const auto& s : subjects) {
    if (s.name == name) return s;
  }
  throw InputError("subject '" + name + "' is not in the manifest");
}

std::string subject_name(std::size_t index) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "s%03zu", index);
  return buf;
}

std::string video_name(std::size_t index) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "v%02zu", index);
  return buf;
}

Condition condition_of_video(const CorpusConfig& cfg, std::size_t video_index) {
  if (video_index < cfg.normal_videos) return Condition::normal;
  return (video_index - cfg.normal_videos) % 2 == 0 ? Condition::perturbed_a : Condition::perturbed_b;
}

std::string manifest_to_json(const Manifest& m) {
  ordered_json j;
  j["format"] = "gait-corpus";
  j["version"] = 1;
  j["width"] = m.width;
  j["height"] = m.height;
  j["seed"] = m.seed;
  ordered_json subjects = ordered_json::array();
  for (const auto& s : m.subjects) {
    ordered_json sj;
    sj["name"] = s.name;
    sj["label"] = s.label;
    ordered_json videos = ordered_json::array();
    for (const auto& v : s.videos) {
      videos.push_back({{"name", v.name}, {"condition", std::string(to_string(v.condition))}, {"frames", v.frames}});
    }
    sj["videos"] = videos;
    if (s.has_identity) sj["identity"] = identity_json(s.identity);
    subjects.push_back(sj);
  }
  j["subjects"] = subjects;
  j["splits"] = {{"train_subjects", m.train_subjects},
                 {"eval_subjects", m.eval_subjects},
                 {"gallery_videos", m.gallery_videos},
                 {"probe_videos", m.probe_videos}};
  return j.dump(2) + "\n";
}

Manifest manifest_from_json(const std::string& text) {
  try {
    const auto j = nlohmann::json::parse(text);
    if (j.at("format") != "gait-corpus") throw InputError("not a gait corpus manifest");
    Manifest m;
    m.width = j.at("width").get<std::size_t>();
    m.height = j.at("height").get<std::size_t>();
    m.seed = j.value("seed", std::uint64_t{0});
    for (const auto& sj : j.at("subjects")) {
      SubjectEntry s;
      s.name = sj.at("name").get<std::string>();
      s.label = sj.at("label").get<int>();
      for (const auto& vj : sj.at("videos")) {
        s.videos.push_back({vj.at("name").get<std::string>(),
                            parse_condition(vj.value("condition", std::string("normal"))),
                            vj.at("frames").get<std::size_t>()});
      }
      if (sj.contains("identity")) {
        s.has_identity = true;
        s.identity = identity_from(sj.at("identity"));
      }
      m.subjects.push_back(std::move(s));
    }
    const auto& sp = j.at("splits");
    m.train_subjects = sp.at("train_subjects").get<std::vector<std::string>>();
    m.eval_subjects = sp.at("eval_subjects").get<std::vector<std::string>>();
    m.gallery_videos = sp.at("gallery_videos").get<std::vector<std::string>>();
    m.probe_videos = sp.at("probe_videos").get<std::vector<std::string>>();
    for (const auto& n : m.train_subjects) {
      if (std::find(m.eval_subjects.begin(), m.eval_subjects.end(), n) != m.eval_subjects.end()) {
        throw InputError("subject '" + n + "' is in both the training and the evaluation split");
      }
      (void)m.subject(n);
    }
    for (const auto& n : m.eval_subjects) (void)m.subject(n);
    return m;
  } catch (const nlohmann::json::exception& e) {
    throw InputError(std::string("malformed corpus manifest: ") + e.what());
  }
}

Manifest read_manifest(const fs::path& root) { return manifest_from_json(io::read_file(root / "manifest.json")); }

WalkerIdentity corpus_identity(const CorpusConfig& cfg, std::size_t subject) {
  auto rng = make_rng(cfg.seed, "corpus", {subject});
  return sample_identity(cfg.ranges, rng);
}

SyntheticVideo corpus_video(const CorpusConfig& cfg, const WalkerIdentity& id, std::size_t subject,
                            std::size_t video) {
  auto rng = make_rng(cfg.seed, "corpus", {subject, video});
  return generate(id, condition_of_video(cfg, video), cfg.video, rng, int(subject));
}

fs::path video_dir(const fs::path& root, const std::string& subject, const std::string& video) {
  return root / subject / video;
}

void write_video(const fs::path& dir, const SyntheticVideo& video) {
  fs::create_directories(dir / "frames");
  fs::create_directories(dir / "masks");
  for (std::size_t t = 0; t < video.frames.size(); ++t) {
    io::write_pgm(dir / "frames" / frame_file(t, "pgm"), to_image(video.frames[t]));
    io::write_pbm(dir / "masks" / frame_file(t, "pbm"), video.masks[t]);
  }
  posepatch::write_keypoints(dir / "keypoints.txt", video.keypoints);
  if (!video.background.pixels.empty()) io::write_pgm(dir / "background.pgm", to_image(video.background));
}

LoadedVideo load_video(const fs::path& dir, std::size_t max_frames) {
  if (!fs::is_directory(dir / "frames")) throw InputError("missing frames directory in " + dir.string());
  LoadedVideo v;
  auto files = sorted_files(dir / "frames", ".pgm");
  if (max_frames > 0 && files.size() > max_frames) files.resize(max_frames);
  for (const auto& f : files) {
    v.frames.push_back(from_image(io::read_pnm(f)));
    if (v.frames.back().width != v.frames.front().width || v.frames.back().height != v.frames.front().height) {
      throw InputError("frame sizes differ in " + dir.string());
    }
  }
  if (fs::is_directory(dir / "masks")) {
    auto masks = sorted_files(dir / "masks", ".pbm");
    if (masks.size() < v.frames.size()) throw InputError("fewer masks than frames in " + dir.string());
    masks.resize(v.frames.size());
    for (const auto& f : masks) v.masks.push_back(io::read_pbm(f));
  }
  if (fs::exists(dir / "keypoints.txt")) {
    v.keypoints = posepatch::read_keypoints(dir / "keypoints.txt");
    if (v.keypoints.size() < v.frames.size()) throw InputError("keypoints do not cover every frame in " + dir.string());
    v.keypoints.resize(v.frames.size());
  }
  if (fs::exists(dir / "background.pgm")) {
    v.has_background = true;
    v.background = from_image(io::read_pnm(dir / "background.pgm"));
  }
  return v;
}

Manifest write_corpus(const fs::path& root, const CorpusConfig& cfg, bool overwrite) {
  cfg.validate();
  if (fs::exists(root) && !fs::is_empty(root)) {
    if (!overwrite) throw ConfigError("target " + root.string() + " is not empty; pass the overwrite flag");
    fs::remove_all(root);
  }
  fs::create_directories(root);

  Manifest m;
  m.width = cfg.video.width;
  m.height = cfg.video.height;
  m.seed = cfg.seed;
  for (std::size_t s = 0; s < cfg.subjects; ++s) {
    SubjectEntry e{subject_name(s), int(s), {}, true, corpus_identity(cfg, s)};
    for (std::size_t v = 0; v < cfg.videos_per_subject; ++v) {
      e.videos.push_back({video_name(v), condition_of_video(cfg, v), cfg.video.frames});
    }
    (s < cfg.train_subjects ? m.train_subjects : m.eval_subjects).push_back(e.name);
    m.subjects.push_back(std::move(e));
  }
  for (std::size_t v = 0; v < cfg.videos_per_subject; ++v) {
    (v < cfg.gallery_videos ? m.gallery_videos : m.probe_videos).push_back(video_name(v));
  }

  const long total = long(cfg.subjects * cfg.videos_per_subject);
  std::exception_ptr failure;
  std::mutex failure_mutex;
#pragma omp parallel for schedule(dynamic)
  for (long k = 0; k < total; ++k) {
    const std::size_t s = std::size_t(k) / cfg.videos_per_subject, v = std::size_t(k) % cfg.videos_per_subject;
    try {
      const auto video = corpus_video(cfg, m.subjects[s].identity, s, v);
      write_video(video_dir(root, m.subjects[s].name, m.subjects[s].videos[v].name), video);
    } catch (...) {
      std::lock_guard lock(failure_mutex);
      if (!failure) failure = std::current_exception();
    }
  }
  if (failure) std::rethrow_exception(failure);
  io::write_file_atomic(root / "manifest.json", manifest_to_json(m));
  return m;
}

}  // namespace gait::synthwalk
