#include "gait/pipeline/config.hpp"

#include <algorithm>
#include <cctype>
#include <charconv>
#include <cmath>
#include <cstdlib>
#include <functional>
#include <set>
#include <sstream>

#include <boost/property_tree/ini_parser.hpp>
#include <boost/property_tree/ptree.hpp>

#include "gait/error.hpp"
#include "gait/io/digest.hpp"

namespace gait::pipeline {

namespace {

namespace pt = boost::property_tree;

std::string fmt(double v) {
  char buf[64];
  const auto r = std::to_chars(buf, buf + sizeof buf, v);
  return std::string(buf, r.ptr);
}

std::string trim(std::string s) {
  const auto b = s.find_first_not_of(" \t\r\n");
  if (b == std::string::npos) return "";
  const auto e = s.find_last_not_of(" \t\r\n");
  return s.substr(b, e - b + 1);
}

double to_double(const std::string& key, const std::string& s) {
  double v = 0;
  const std::string t = trim(s);
  const auto r = std::from_chars(t.data(), t.data() + t.size(), v);
  if (r.ec != std::errc() || r.ptr != t.data() + t.size() || !std::isfinite(v)) {
    throw ConfigError("config key " + key + ": '" + s + "' is not a number");
  }
  return v;
}

std::uint64_t to_u64(const std::string& key, const std::string& s) {
  std::uint64_t v = 0;
  const std::string t = trim(s);
  const auto r = std::from_chars(t.data(), t.data() + t.size(), v);
  if (r.ec != std::errc() || r.ptr != t.data() + t.size()) {
    throw ConfigError("config key " + key + ": '" + s + "' is not a nonnegative integer");
  }
  return v;
}

std::vector<std::string> split_list(const std::string& s) {
  std::vector<std::string> out;
  std::stringstream ss(s);
  std::string item;
  while (std::getline(ss, item, ',')) {
    item = trim(item);
    if (!item.empty()) out.push_back(item);
  }
  return out;
}

std::string join(const std::vector<std::string>& v) {
  std::string out;
  for (std::size_t i = 0; i < v.size(); ++i) out += (i ? "," : "") + v[i];
  return out;
}

struct Key {
  std::string section;
  std::string name;
  std::function<std::string(const PipelineConfig&)> get;
  std::function<void(PipelineConfig&, const std::string&)> set;
};

#define GAIT_DOUBLE(sec, key, field)                                                          \
  Key {                                                                                        \
    sec, key, [](const PipelineConfig& c) { return fmt(c.field); },                            \
        [](PipelineConfig& c, const std::string& v) { c.field = to_double(sec "." key, v); } \
  }
#define GAIT_SIZE(sec, key, field)                                                                          \
  Key {                                                                                                      \
    sec, key, [](const PipelineConfig& c) { return std::to_string(c.field); },                               \
        [](PipelineConfig& c, const std::string& v) { c.field = decltype(c.field)(to_u64(sec "." key, v)); } \
  }
#define GAIT_LIST(sec, key, field)                                                                        \
  Key {                                                                                                    \
    sec, key, [](const PipelineConfig& c) { return join(c.field); },                                       \
        [](PipelineConfig& c, const std::string& v) { c.field = split_list(v); }                           \
  }
#define GAIT_PAIR(sec, key, field)                                                                     \
  Key {                                                                                                 \
    sec, key, [](const PipelineConfig& c) { return fmt(c.field.first) + "," + fmt(c.field.second); },   \
        [](PipelineConfig& c, const std::string& v) {                                                   \
          const auto parts = split_list(v);                                                             \
          if (parts.size() != 2) throw ConfigError("config key " sec "." key " needs 'low,high'");     \
          c.field = {to_double(sec "." key, parts[0]), to_double(sec "." key, parts[1])};               \
        }                                                                                               \
  }

const std::vector<Key>& keys() {
  static const std::vector<Key> table = {
      GAIT_SIZE("run", "seed", seed),

      Key{"dataset", "root", [](const PipelineConfig& c) { return c.data_root.string(); },
          [](PipelineConfig& c, const std::string& v) { c.data_root = trim(v); }},
      Key{"dataset", "mode", [](const PipelineConfig& c) { return std::string(to_string(c.mode)); },
          [](PipelineConfig& c, const std::string& v) {
            const auto t = trim(v);
            if (t == "keypoints") c.mode = DatasetMode::keypoints;
            else if (t == "silhouette") c.mode = DatasetMode::silhouette;
            else throw ConfigError("dataset.mode must be keypoints or silhouette");
          }},
      GAIT_DOUBLE("dataset", "background_threshold", background_threshold),
      Key{"dataset", "flow_cache", [](const PipelineConfig& c) { return c.flow_cache.string(); },
          [](PipelineConfig& c, const std::string& v) { c.flow_cache = trim(v); }},

      GAIT_SIZE("corpus", "subjects", corpus.subjects),
      GAIT_SIZE("corpus", "videos_per_subject", corpus.videos_per_subject),
      GAIT_SIZE("corpus", "normal_videos", corpus.normal_videos),
      GAIT_SIZE("corpus", "train_subjects", corpus.train_subjects),
      GAIT_SIZE("corpus", "gallery_videos", corpus.gallery_videos),
      GAIT_SIZE("corpus", "frames", corpus.video.frames),
      GAIT_SIZE("corpus", "width", corpus.video.width),
      GAIT_SIZE("corpus", "height", corpus.video.height),
      GAIT_PAIR("corpus", "frequency", corpus.ranges.frequency),
      GAIT_PAIR("corpus", "leg_amplitude", corpus.ranges.leg_amplitude),
      GAIT_PAIR("corpus", "arm_amplitude", corpus.ranges.arm_amplitude),
      GAIT_PAIR("corpus", "foot_lift", corpus.ranges.foot_lift),
      GAIT_PAIR("corpus", "phase", corpus.ranges.phase),
      GAIT_PAIR("corpus", "sway_amplitude", corpus.ranges.sway_amplitude),
      GAIT_PAIR("corpus", "height_px", corpus.ranges.height),
      GAIT_PAIR("corpus", "speed", corpus.ranges.speed),
      GAIT_PAIR("corpus", "limb_width", corpus.ranges.limb_width),

      GAIT_LIST("split", "train_subjects", train_subjects),
      GAIT_LIST("split", "eval_subjects", eval_subjects),
      GAIT_LIST("split", "gallery_videos", gallery_videos),
      GAIT_LIST("split", "probe_videos", probe_videos),
      Key{"split", "validation_video", [](const PipelineConfig& c) { return c.validation_video; },
          [](PipelineConfig& c, const std::string& v) { c.validation_video = trim(v); }},

      Key{"patches", "parts",
          [](const PipelineConfig& c) {
            std::vector<std::string> names;
            for (auto p : c.parts) names.emplace_back(posepatch::to_string(p));
            return join(names);
          },
          [](PipelineConfig& c, const std::string& v) {
            c.parts.clear();
            for (const auto& n : split_list(v)) c.parts.push_back(posepatch::parse_part(n));
          }},
      GAIT_DOUBLE("patches", "foot_fraction", foot_fraction),

      GAIT_DOUBLE("flow", "clip", clip),
      GAIT_SIZE("flow", "levels", flow.levels),
      GAIT_DOUBLE("flow", "pyramid_scale", flow.pyramid_scale),
      GAIT_SIZE("flow", "window", flow.window),
      GAIT_SIZE("flow", "iterations", flow.iterations),
      GAIT_SIZE("flow", "poly_n", flow.poly_n),
      GAIT_DOUBLE("flow", "poly_sigma", flow.poly_sigma),

      Key{"network", "arch", [](const PipelineConfig& c) { return std::string(nets::to_string(c.network.arch)); },
          [](PipelineConfig& c, const std::string& v) { c.network.arch = nets::parse_architecture(trim(v)); }},
      GAIT_SIZE("network", "dense_width", network.dense_width),
      GAIT_SIZE("network", "dense_width_max", network.dense_width_max),
      GAIT_SIZE("network", "vgg_base", network.vgg_base),
      GAIT_DOUBLE("network", "dropout", network.dropout),
      GAIT_SIZE("network", "base_width", network.base_width),
      GAIT_SIZE("network", "widen_factor", network.widen_factor),
      GAIT_SIZE("network", "blocks_per_group", network.blocks_per_group),
      GAIT_DOUBLE("network", "l2", network.l2),

      GAIT_DOUBLE("train", "learning_rate", train.learning_rate),
      GAIT_DOUBLE("train", "momentum", train.momentum),
      GAIT_DOUBLE("train", "lr_decay_factor", train.lr_decay_factor),
      GAIT_SIZE("train", "max_decays", train.max_decays),
      GAIT_SIZE("train", "batch_size", train.batch_size),
      GAIT_SIZE("train", "batches_per_epoch", train.batches_per_epoch),
      GAIT_SIZE("train", "max_epochs", train.max_epochs),
      GAIT_SIZE("train", "patience", train.patience),
      GAIT_DOUBLE("train", "min_improvement", train.min_improvement),
      GAIT_SIZE("train", "queue_depth", train.queue_depth),

      Key{"descriptors", "fusion", [](const PipelineConfig& c) { return std::string(descriptors::to_string(c.fusion)); },
          [](PipelineConfig& c, const std::string& v) { c.fusion = descriptors::parse_fusion(trim(v)); }},
      GAIT_SIZE("descriptors", "pca_dim", pca_dim),
      GAIT_SIZE("descriptors", "truncation", truncation),
      GAIT_SIZE("descriptors", "batch", extract_batch),

      Key{"evaluate", "metric", [](const PipelineConfig& c) { return std::string(recognizer::to_string(c.metric)); },
          [](PipelineConfig& c, const std::string& v) { c.metric = recognizer::parse_metric(trim(v)); }},
      Key{"evaluate", "pair_scoring",
          [](const PipelineConfig& c) {
            return std::string(c.pair_scoring == recognizer::PairScoring::per_video ? "per_video" : "min_over_subject");
          },
          [](PipelineConfig& c, const std::string& v) {
            const auto t = trim(v);
            if (t == "per_video") c.pair_scoring = recognizer::PairScoring::per_video;
            else if (t == "min_over_subject") c.pair_scoring = recognizer::PairScoring::min_over_subject;
            else throw ConfigError("evaluate.pair_scoring must be per_video or min_over_subject");
          }},
  };
  return table;
}

#undef GAIT_DOUBLE
#undef GAIT_SIZE
#undef GAIT_LIST
#undef GAIT_PAIR

const Key& find_key(const std::string& section, const std::string& name) {
  for (const auto& k : keys()) {
    if (k.section == section && k.name == name) return k;
  }
  throw ConfigError("unknown config key " + section + "." + name);
}

std::string upper(std::string s) {
  for (auto& c : s) c = char(std::toupper(static_cast<unsigned char>(c)));
  return s;
}

}  // namespace

std::string_view to_string(DatasetMode m) { return m == DatasetMode::keypoints ? "keypoints" : "silhouette"; }

void PipelineConfig::validate() {
  if (mode == DatasetMode::silhouette) parts = {posepatch::Part::full_body};
  parts = posepatch::canonical_parts(parts);
  std::set<std::string> train_set(train_subjects.begin(), train_subjects.end());
  for (const auto& s : eval_subjects) {
    if (train_set.count(s)) throw ConfigError("subject '" + s + "' is in both the training and the evaluation split");
  }
  if (!(clip > 0)) throw ConfigError("flow.clip must be positive");
  if (!(foot_fraction > 0 && foot_fraction <= 1)) throw ConfigError("patches.foot_fraction must lie in (0, 1]");
  if (!(background_threshold >= 0 && background_threshold < 1)) {
    throw ConfigError("dataset.background_threshold must lie in [0, 1)");
  }
  if (truncation == 1) throw ConfigError("descriptors.truncation needs at least two frames");
  if (extract_batch == 0) throw ConfigError("descriptors.batch must be positive");
  flow.validate();
  train.seed = seed;
  train.validate();
  corpus.seed = seed;
}

std::filesystem::path PipelineConfig::cache_dir() const {
  return flow_cache.empty() ? data_root / "flow_cache" : flow_cache;
}

std::vector<std::string> config_keys() {
  std::vector<std::string> out;
  for (const auto& k : keys()) out.push_back(k.section + "." + k.name);
  return out;
}

std::string config_to_string(const PipelineConfig& cfg) {
  std::string out;
  std::string section;
  for (const auto& k : keys()) {
    if (k.section != section) {
      out += (section.empty() ? "" : "\n") + ("[" + k.section + "]\n");
      section = k.section;
    }
    out += k.name + " = " + k.get(cfg) + "\n";
  }
  return out;
}

void apply_override(PipelineConfig& cfg, const std::string& assignment) {
  const auto eq = assignment.find('=');
  const auto dot = assignment.find('.');
  if (eq == std::string::npos || dot == std::string::npos || dot > eq) {
    throw ConfigError("override '" + assignment + "' is not section.key=value");
  }
  find_key(trim(assignment.substr(0, dot)), trim(assignment.substr(dot + 1, eq - dot - 1)))
      .set(cfg, assignment.substr(eq + 1));
}

void apply_env_overrides(PipelineConfig& cfg) {
  for (const auto& k : keys()) {
    const std::string var = "GAIT_" + upper(k.section) + "_" + upper(k.name);
    if (const char* v = std::getenv(var.c_str())) k.set(cfg, v);
  }
}

PipelineConfig config_from_string(const std::string& ini_text, bool apply_env) {
  pt::ptree tree;
  std::istringstream is(ini_text);
  try {
    pt::read_ini(is, tree);
  } catch (const pt::ini_parser_error& e) {
    throw ConfigError(std::string("config: ") + e.what());
  }
  PipelineConfig cfg;
  for (const auto& [section, body] : tree) {
    if (body.empty() && !body.data().empty()) throw ConfigError("config key '" + section + "' is outside a section");
    for (const auto& [name, value] : body) find_key(section, name).set(cfg, value.data());
  }
  if (apply_env) apply_env_overrides(cfg);
  return cfg;
}

PipelineConfig load_config(const std::filesystem::path& path) {
  std::string text;
  try {
    text = io::read_file(path);
  } catch (const InputError& e) {
    throw ConfigError(std::string("config file: ") + e.what());
  }
  return config_from_string(text);
}

}  // namespace gait::pipeline
