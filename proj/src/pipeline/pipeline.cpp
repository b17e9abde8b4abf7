#include "gait/pipeline/pipeline.hpp"

#include <fcntl.h>
#include <unistd.h>

#include <algorithm>
#include <cstring>
#include <exception>
#include <fstream>
#include <map>
#include <mutex>
#include <ostream>
#include <set>
#include <sstream>
#include <streambuf>

#include "gait/error.hpp"
#include "gait/io/digest.hpp"

namespace gait::pipeline {

namespace {

using posepatch::Part;

constexpr char kFlowMagic[8] = {'G', 'A', 'I', 'T', 'F', 'L', 'W', '1'};

// Writes to two streams at once.
class TeeBuf : public std::streambuf {
 public:
  TeeBuf(std::ostream& a, std::ostream* b) : a_(a), b_(b) {}

 protected:
  int overflow(int c) override {
    if (c == EOF) return 0;
    a_.put(char(c));
    if (b_) b_->put(char(c));
    return c;
  }
  std::streamsize xsputn(const char* s, std::streamsize n) override {
    a_.write(s, n);
    if (b_) b_->write(s, n);
    return n;
  }
  int sync() override {
    a_.flush();
    if (b_) b_->flush();
    return 0;
  }

 private:
  std::ostream& a_;
  std::ostream* b_;
};

PipelineConfig validated(const PipelineConfig& cfg) {
  PipelineConfig c = cfg;
  c.validate();
  return c;
}

void put_u64(std::string& out, std::uint64_t v) {
  char buf[8];
  std::memcpy(buf, &v, 8);
  out.append(buf, 8);
}

std::uint64_t get_u64(const std::string& s, std::size_t at) {
  std::uint64_t v = 0;
  std::memcpy(&v, s.data() + at, 8);
  return v;
}

std::string encode_flows(const std::vector<optflow::FlowMap>& flows, std::size_t w, std::size_t h) {
  std::string out(kFlowMagic, 8);
  put_u64(out, w);
  put_u64(out, h);
  put_u64(out, flows.size());
  for (const auto& f : flows) out.append(reinterpret_cast<const char*>(f.encoded.data()), f.encoded.size());
  return out;
}

std::optional<std::vector<optflow::FlowMap>> decode_flows(const std::string& bytes, std::size_t w, std::size_t h,
                                                          std::size_t pairs) {
  if (bytes.size() < 32 || std::memcmp(bytes.data(), kFlowMagic, 8) != 0) return std::nullopt;
  if (get_u64(bytes, 8) != w || get_u64(bytes, 16) != h || get_u64(bytes, 24) != pairs) return std::nullopt;
  const std::size_t plane = 3 * w * h;
  if (bytes.size() != 32 + pairs * plane) return std::nullopt;
  std::vector<optflow::FlowMap> flows(pairs);
  for (std::size_t i = 0; i < pairs; ++i) {
    flows[i].width = w;
    flows[i].height = h;
    const auto* p = reinterpret_cast<const std::uint8_t*>(bytes.data() + 32 + i * plane);
    flows[i].encoded.assign(p, p + plane);
  }
  return flows;
}

std::vector<std::string> dir_files(const fs::path& dir) {
  std::vector<std::string> out;
  if (!fs::is_directory(dir)) return out;
  for (const auto& e : fs::directory_iterator(dir)) {
    if (e.is_regular_file()) out.push_back(e.path().string());
  }
  std::sort(out.begin(), out.end());
  return out;
}

const synthwalk::VideoEntry& video_entry(const synthwalk::SubjectEntry& s, const std::string& video) {
  for (const auto& v : s.videos) {
    if (v.name == video) return v;
  }
  throw InputError("video '" + video + "' of subject '" + s.name + "' is not in the manifest");
}

class PatchSource final : public nets::SampleSource {
 public:
  struct Item {
    std::uint32_t video;
    std::uint32_t pair;
    Part part;
  };

  PatchSource(const std::vector<PreparedVideo>& videos, std::vector<int> video_class, std::span<const Part> parts)
      : videos_(videos), video_class_(std::move(video_class)) {
    for (std::uint32_t v = 0; v < videos.size(); ++v)
      for (std::uint32_t t = 0; t < videos[v].flows.size(); ++t)
        for (Part p : parts) items_.push_back({v, t, p});
  }
  std::size_t size() const override { return items_.size(); }
  int label(std::size_t i) const override { return video_class_[items_[i].video]; }
  void fill(std::size_t i, Rng* rng, std::span<float> out) const override {
    const auto& it = items_[i];
    const auto& v = videos_[it.video];
    posepatch::patch_from_spec_into(v.flows[it.pair], v.boxes[it.pair][std::size_t(it.part)], rng, out);
  }

 private:
  const std::vector<PreparedVideo>& videos_;
  std::vector<int> video_class_;
  std::vector<Item> items_;
};

struct VideoJob {
  std::string subject;
  std::string video;
};

std::vector<PreparedVideo> prepare_all(const PipelineConfig& cfg, const synthwalk::Manifest& m,
                                       const std::vector<VideoJob>& jobs, std::size_t max_frames = 0) {
  std::vector<PreparedVideo> out(jobs.size());
  std::exception_ptr failure;
  std::mutex mu;
#pragma omp parallel for schedule(dynamic)
  for (long i = 0; i < long(jobs.size()); ++i) {
    try {
      out[std::size_t(i)] = prepare_video(cfg, m, jobs[std::size_t(i)].subject, jobs[std::size_t(i)].video, max_frames);
    } catch (...) {
      std::lock_guard lock(mu);
      if (!failure) failure = std::current_exception();
    }
  }
  if (failure) std::rethrow_exception(failure);
  return out;
}

std::string validation_video_of(const PipelineConfig& cfg, const synthwalk::SubjectEntry& s) {
  if (cfg.validation_video == "none") return "";
  if (cfg.validation_video != "auto") return cfg.validation_video;
  if (s.videos.size() < 2) return "";
  std::string last;
  for (const auto& v : s.videos) {
    if (v.condition == synthwalk::Condition::normal) last = v.name;
  }
  return last;
}

TrainSummary train_impl(const PipelineConfig& cfg, const fs::path& out, std::ostream* log) {
  const auto m = synthwalk::read_manifest(cfg.data_root);
  const auto split = resolve_split(cfg, m);
  if (split.train_subjects.size() < 2) throw InputError("the training split needs at least two subjects");

  std::vector<VideoJob> train_jobs, val_jobs;
  std::vector<int> train_class, val_class;
  for (std::size_t c = 0; c < split.train_subjects.size(); ++c) {
    const auto& s = m.subject(split.train_subjects[c]);
    const auto val = validation_video_of(cfg, s);
    for (const auto& v : s.videos) {
      if (v.name == val) {
        val_jobs.push_back({s.name, v.name});
        val_class.push_back(int(c));
      } else {
        train_jobs.push_back({s.name, v.name});
        train_class.push_back(int(c));
      }
    }
  }
  if (log) *log << "preparing " << train_jobs.size() << " training and " << val_jobs.size() << " validation videos\n";
  const auto train_videos = prepare_all(cfg, m, train_jobs);
  const auto val_videos = prepare_all(cfg, m, val_jobs);
  const PatchSource train_src(train_videos, train_class, cfg.parts);
  const PatchSource val_src(val_videos, val_class, cfg.parts);

  nets::NetworkSpec spec = cfg.network;
  spec.classes = split.train_subjects.size();
  auto model = nets::build_model<float>(spec, cfg.seed);

  fs::create_directories(out);
  std::ofstream file(out / "train.log");
  if (!file) throw InputError("cannot write " + (out / "train.log").string());
  TeeBuf tee_buf(file, log);
  std::ostream tee(&tee_buf);
  tee << "classes=" << spec.classes << " train_samples=" << train_src.size() << " val_samples=" << val_src.size()
      << " feature_width=" << nets::feature_width(spec) << '\n';

  TrainSummary summary;
  summary.result = nets::train(model, train_src, val_src.size() ? &val_src : nullptr, cfg.train, &tee);
  tee.flush();
  summary.classes = spec.classes;
  summary.train_samples = train_src.size();
  summary.val_samples = val_src.size();
  summary.model_stem = out / "model";
  nets::save_model(model, out / "model.bin", out / "model.json");
  return summary;
}

bool same_architecture(nets::NetworkSpec a, nets::NetworkSpec b) {
  a.classes = b.classes;
  a.dense_width = b.dense_width;  // widening changes it during training
  return a == b;
}

ExtractSummary extract_impl(const PipelineConfig& cfg, const fs::path& model_stem, const fs::path& out,
                            std::ostream* log, bool check_arch) {
  auto bin = model_stem, json = model_stem;
  bin += ".bin";
  json += ".json";
  const auto model = nets::load_model(bin, json);
  if (check_arch && !same_architecture(model.spec, cfg.network)) {
    throw ConfigError("checkpoint architecture does not match the [network] section of the config");
  }
  const auto m = synthwalk::read_manifest(cfg.data_root);
  const auto split = resolve_split(cfg, m);

  fs::create_directories(out);
  std::ostringstream report;
  ExtractSummary summary;
  for (const auto& name : split.eval_subjects) {
    const auto& s = m.subject(name);
    for (const auto& v : s.videos) {
      if (cfg.truncation > 0 && v.frames < cfg.truncation) {
        ++summary.skipped;
        report << "warning: skipped " << s.name << '/' << v.name << ": " << v.frames << " frames < truncation "
               << cfg.truncation << '\n';
        continue;
      }
      const auto prepared = prepare_video(cfg, m, s.name, v.name, cfg.truncation);
      const auto feats = video_features(model, prepared, cfg);
      summary.frame_features += feats.size();
      auto d = descriptors::fuse(cfg.fusion, feats, cfg.parts);
      d.subject = s.name;
      d.label = s.label;
      d.video = v.name;
      d.condition = descriptor_condition(v.condition);
      summary.descriptors.push_back(std::move(d));
      report << s.name << '/' << v.name << ": " << feats.size() << " frame features\n";
    }
  }
  report << "descriptors=" << summary.descriptors.size() << " skipped=" << summary.skipped << '\n';
  if (log) *log << report.str();
  summary.store = out / "descriptors.bin";
  descriptors::write_store(summary.store, summary.descriptors);
  io::write_file_atomic(out / "descriptors.csv", descriptors::store_csv(summary.descriptors));
  io::write_file_atomic(out / "extract.log", report.str());
  return summary;
}

EvaluateSummary evaluate_impl(const PipelineConfig& cfg, const fs::path& store, const fs::path& out) {
  const auto ds = descriptors::read_store(store);
  const auto m = synthwalk::read_manifest(cfg.data_root);
  auto summary = evaluate_descriptors(cfg, ds, resolve_split(cfg, m));
  fs::create_directories(out);
  io::write_file_atomic(out / "report.txt", summary.report_text);
  io::write_file_atomic(out / "cmc.csv", summary.report.cmc_csv());
  io::write_file_atomic(out / "roc.csv", summary.report.roc_csv());
  return summary;
}

}  // namespace

descriptors::Condition descriptor_condition(synthwalk::Condition c) {
  switch (c) {
    case synthwalk::Condition::normal: return descriptors::Condition::normal;
    case synthwalk::Condition::perturbed_a: return descriptors::Condition::shoes;
    case synthwalk::Condition::perturbed_b: return descriptors::Condition::backpack;
  }
  return descriptors::Condition::other;
}

Split resolve_split(const PipelineConfig& cfg, const synthwalk::Manifest& manifest) {
  Split s;
  s.train_subjects = cfg.train_subjects.empty() ? manifest.train_subjects : cfg.train_subjects;
  s.eval_subjects = cfg.eval_subjects.empty() ? manifest.eval_subjects : cfg.eval_subjects;
  s.gallery_videos = cfg.gallery_videos.empty() ? manifest.gallery_videos : cfg.gallery_videos;
  s.probe_videos = cfg.probe_videos.empty() ? manifest.probe_videos : cfg.probe_videos;
  const std::set<std::string> train(s.train_subjects.begin(), s.train_subjects.end());
  for (const auto& e : s.eval_subjects) {
    if (train.count(e)) throw ConfigError("subject '" + e + "' is in both the training and the evaluation split");
  }
  for (const auto& n : s.train_subjects) (void)manifest.subject(n);
  for (const auto& n : s.eval_subjects) (void)manifest.subject(n);
  return s;
}

std::string flow_cache_key(const PipelineConfig& cfg, const fs::path& dir) {
  std::string material = "gait-flow-v1\n";
  material += "mode=" + std::string(to_string(cfg.mode)) + '\n';
  if (cfg.mode == DatasetMode::silhouette) {
    char buf[64];
    std::snprintf(buf, sizeof buf, "threshold=%.17g\n", cfg.background_threshold);
    material += buf;
  }
  char buf[256];
  std::snprintf(buf, sizeof buf, "clip=%.17g levels=%zu scale=%.17g window=%zu iterations=%zu poly_n=%zu sigma=%.17g\n",
                cfg.clip, cfg.flow.levels, cfg.flow.pyramid_scale, cfg.flow.window, cfg.flow.iterations,
                cfg.flow.poly_n, cfg.flow.poly_sigma);
  material += buf;
  std::vector<std::string> files = dir_files(dir / "frames");
  if (cfg.mode == DatasetMode::silhouette) {
    const auto masks = dir_files(dir / "masks");
    files.insert(files.end(), masks.begin(), masks.end());
    if (fs::exists(dir / "background.pgm")) files.push_back((dir / "background.pgm").string());
  }
  for (const auto& f : files) material += fs::path(f).filename().string() + ' ' + io::sha256_file(f) + '\n';
  return io::sha256_hex(material);
}

PreparedVideo prepare_video(const PipelineConfig& cfg, const synthwalk::Manifest& manifest, const std::string& subject,
                            const std::string& video, std::size_t max_frames) {
  const auto& s = manifest.subject(subject);
  const auto& entry = video_entry(s, video);
  const fs::path dir = synthwalk::video_dir(cfg.data_root, subject, video);
  const auto loaded = synthwalk::load_video(dir);
  const std::size_t n = loaded.frames.size();
  if (n < 2) throw InputError("video " + subject + "/" + video + " has fewer than two frames");
  const std::size_t w = loaded.frames[0].width, h = loaded.frames[0].height;

  std::vector<synthwalk::Mask> masks;
  if (cfg.mode == DatasetMode::silhouette) {
    if (!loaded.masks.empty()) {
      masks = loaded.masks;
    } else if (loaded.has_background) {
      masks = synthwalk::subtract_background(loaded.frames, loaded.background, cfg.background_threshold);
    } else {
      throw InputError("silhouette mode needs masks or a background image in " + dir.string());
    }
  } else if (loaded.keypoints.empty()) {
    throw InputError("missing keypoints sidecar in " + dir.string());
  }

  PreparedVideo pv;
  pv.subject = subject;
  pv.video = video;
  pv.label = s.label;
  pv.condition = entry.condition;

  const fs::path cache = cfg.cache_dir() / subject / video / (flow_cache_key(cfg, dir) + ".flow");
  std::optional<std::vector<optflow::FlowMap>> flows;
  if (fs::exists(cache)) flows = decode_flows(io::read_file(cache), w, h, n - 1);
  if (!flows) {
    std::vector<optflow::Frame> source;
    if (cfg.mode == DatasetMode::silhouette) {
      for (const auto& mk : masks) source.push_back(synthwalk::mask_to_frame(mk));
    } else {
      source = loaded.frames;
    }
    flows.emplace();
    for (std::size_t t = 0; t + 1 < n; ++t) {
      auto f = optflow::encode_flow(optflow::farneback_flow(source[t], source[t + 1], cfg.flow), cfg.clip);
      f.u.clear();
      f.v.clear();
      flows->push_back(std::move(f));
    }
    fs::create_directories(cache.parent_path());
    io::write_file_atomic(cache, encode_flows(*flows, w, h));
  }
  pv.flows = std::move(*flows);

  pv.frames = max_frames > 0 ? std::min(n, max_frames) : n;
  if (pv.frames < 2) throw InputError("truncation leaves no frame pair in " + dir.string());
  pv.flows.resize(pv.frames - 1);
  for (std::size_t t = 0; t + 1 < pv.frames; ++t) {
    if (cfg.mode == DatasetMode::silhouette) {
      std::array<posepatch::PatchSpec, 5> boxes{};
      boxes[std::size_t(Part::full_body)] = synthwalk::bbox_from_mask(masks[t]);
      pv.boxes.push_back(boxes);
    } else {
      pv.boxes.push_back(posepatch::build_part_boxes(loaded.keypoints[t], w, h, cfg.foot_fraction));
    }
  }
  return pv;
}

OutputLock::OutputLock(const fs::path& dir) {
  fs::create_directories(dir);
  path_ = dir / ".gaitctl.lock";
  const int fd = ::open(path_.c_str(), O_CREAT | O_EXCL | O_WRONLY, 0644);
  if (fd < 0) {
    path_.clear();
    throw ConfigError("output directory " + dir.string() + " is locked by another run (remove .gaitctl.lock if stale)");
  }
  const std::string pid = std::to_string(::getpid()) + "\n";
  [[maybe_unused]] const auto written = ::write(fd, pid.data(), pid.size());
  ::close(fd);
}

OutputLock::~OutputLock() {
  if (!path_.empty()) {
    std::error_code ec;
    fs::remove(path_, ec);
  }
}

SynthResult cmd_synth(const PipelineConfig& cfg, const fs::path& out, bool overwrite) {
  const auto c = validated(cfg);
  SynthResult r;
  r.manifest = synthwalk::write_corpus(out, c.corpus, overwrite);
  r.manifest_digest = io::sha256_file(out / "manifest.json");
  return r;
}

std::size_t cmd_flow(const PipelineConfig& cfg, std::ostream* log) {
  const auto c = validated(cfg);
  const auto m = synthwalk::read_manifest(c.data_root);
  std::vector<VideoJob> jobs;
  for (const auto& s : m.subjects)
    for (const auto& v : s.videos) jobs.push_back({s.name, v.name});
  (void)prepare_all(c, m, jobs);
  if (log) *log << "flow cached for " << jobs.size() << " videos in " << c.cache_dir().string() << '\n';
  return jobs.size();
}

TrainSummary cmd_train(const PipelineConfig& cfg, const fs::path& out, std::ostream* log) {
  const auto c = validated(cfg);
  OutputLock lock(out);
  return train_impl(c, out, log);
}

std::vector<descriptors::FrameFeature> video_features(const nets::Model<float>& model, const PreparedVideo& v,
                                                      const PipelineConfig& cfg) {
  std::vector<posepatch::Patch> patches;
  patches.reserve(v.flows.size() * cfg.parts.size());
  for (std::size_t t = 0; t < v.flows.size(); ++t) {
    for (Part p : cfg.parts) {
      posepatch::Patch patch{p, t, std::vector<float>(posepatch::kPatchValues)};
      posepatch::patch_from_spec_into(v.flows[t], v.boxes[t][std::size_t(p)], nullptr, patch.values);
      patches.push_back(std::move(patch));
    }
  }
  return descriptors::extract_features(model, patches, cfg.extract_batch);
}

ExtractSummary cmd_extract(const PipelineConfig& cfg, const fs::path& model_stem, const fs::path& out,
                           std::ostream* log) {
  const auto c = validated(cfg);
  OutputLock lock(out);
  return extract_impl(c, model_stem, out, log, true);
}

EvaluateSummary evaluate_descriptors(const PipelineConfig& cfg, const std::vector<descriptors::GaitDescriptor>& ds,
                                     const Split& split) {
  const std::set<std::string> eval(split.eval_subjects.begin(), split.eval_subjects.end());
  const std::set<std::string> gallery_v(split.gallery_videos.begin(), split.gallery_videos.end());
  const std::set<std::string> probe_v(split.probe_videos.begin(), split.probe_videos.end());
  std::vector<descriptors::GaitDescriptor> gallery, probes;
  for (const auto& d : ds) {
    if (!eval.count(d.subject)) continue;
    if (gallery_v.count(d.video)) gallery.push_back(d);
    else if (probe_v.count(d.video)) probes.push_back(d);
  }
  if (gallery.empty()) throw InputError("no gallery descriptors for the evaluation subjects");
  if (probes.empty()) throw InputError("no probe descriptors for the evaluation subjects");
  std::set<int> enrolled;
  for (const auto& g : gallery) enrolled.insert(g.label);
  for (const auto& p : probes) {
    if (!enrolled.count(p.label)) throw InputError("subject " + p.subject + " has probes but an empty gallery");
  }
  if (cfg.pca_dim > 0) {
    const auto pca = descriptors::pca_fit(gallery, cfg.pca_dim);
    for (auto& g : gallery) g = descriptors::pca_project(pca, g);
    for (auto& p : probes) p = descriptors::pca_project(pca, p);
  }
  std::vector<recognizer::Labeled> gl, pl;
  for (const auto& g : gallery) gl.push_back({g.vector, g.label});
  for (const auto& p : probes) pl.push_back({p.vector, p.label});
  EvaluateSummary s;
  s.report = recognizer::evaluate(recognizer::Gallery(gl, cfg.metric), pl, cfg.pair_scoring);
  s.report_text = "fusion = " + std::string(descriptors::to_string(gallery[0].fusion)) + "\n" +
                  "pca_dim = " + std::to_string(cfg.pca_dim) + "\n" +
                  "descriptor_dim = " + std::to_string(gallery[0].vector.size()) + "\n" + s.report.to_text();
  return s;
}

EvaluateSummary cmd_evaluate(const PipelineConfig& cfg, const fs::path& store, const fs::path& out) {
  const auto c = validated(cfg);
  OutputLock lock(out);
  return evaluate_impl(c, store, out);
}

EvaluateSummary cmd_transfer(const PipelineConfig& train_cfg, const PipelineConfig& eval_cfg, const fs::path& out,
                             const std::optional<fs::path>& model_stem, std::ostream* log) {
  const auto a = validated(train_cfg);
  auto b = validated(eval_cfg);
  if (!fs::exists(b.data_root / "manifest.json")) {
    throw InputError("evaluation corpus " + b.data_root.string() + " does not exist");
  }
  OutputLock lock(out);
  fs::path stem;
  if (model_stem) {
    stem = *model_stem;
  } else {
    stem = train_impl(a, out / "train", log).model_stem;
  }
  const auto extracted = extract_impl(b, stem, out / "extract", log, false);
  return evaluate_impl(b, extracted.store, out);
}

}  // namespace gait::pipeline
