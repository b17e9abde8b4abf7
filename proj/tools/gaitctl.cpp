// gaitctl: command-line front end of the gait pipeline.

#include <exception>
#include <filesystem>
#include <iostream>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "gait/error.hpp"
#include "gait/pipeline/config.hpp"
#include "gait/pipeline/pipeline.hpp"

namespace fs = std::filesystem;
using gait::pipeline::PipelineConfig;

namespace {

struct ConfigFlags {
  std::string file;
  std::vector<std::string> sets;
  std::map<std::string, std::string> keys;  // --section.key value

  PipelineConfig load(const std::optional<std::string>& data) const {
    PipelineConfig cfg = file.empty() ? gait::pipeline::config_from_string("") : gait::pipeline::load_config(file);
    for (const auto& [key, value] : keys) {
      if (!value.empty()) gait::pipeline::apply_override(cfg, key + "=" + value);
    }
    for (const auto& s : sets) gait::pipeline::apply_override(cfg, s);
    if (data) cfg.data_root = *data;
    cfg.validate();
    return cfg;
  }
};

void print_report(const gait::pipeline::EvaluateSummary& s) { std::cout << s.report_text; }

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Gait recognition from optical-flow body-part patches"};
  app.require_subcommand(1);
  app.fallthrough();

  ConfigFlags flags;
  std::string data;
  app.add_option("--config", flags.file, "INI config file")->check(CLI::ExistingFile);
  app.add_option("--set", flags.sets, "override a key: section.key=value (repeatable)");
  app.add_option("--data", data, "dataset root (same as --dataset.root)");
  for (const auto& key : gait::pipeline::config_keys()) {
    app.add_option("--" + key, flags.keys[key], "config key " + key)->group("Config keys");
  }
  const auto data_opt = [&]() -> std::optional<std::string> {
    if (data.empty()) return std::nullopt;
    return data;
  };

  std::string out, model, store, eval_config, eval_data;
  std::vector<std::string> eval_sets;
  bool overwrite = false;

  auto* synth = app.add_subcommand("synth", "generate a synthetic walker corpus");
  synth->add_option("--out", out, "target directory (default: dataset root)");
  synth->add_flag("--overwrite", overwrite, "replace a non-empty target");

  auto* flow = app.add_subcommand("flow", "precompute and cache optical flow for every video");

  auto* train = app.add_subcommand("train", "train the patch classifier");
  train->add_option("--out", out, "output directory")->required();

  auto* extract = app.add_subcommand("extract", "extract per-video gait descriptors");
  extract->add_option("--model", model, "checkpoint stem (<stem>.bin, <stem>.json)")->required();
  extract->add_option("--out", out, "output directory")->required();

  auto* evaluate = app.add_subcommand("evaluate", "identification and verification on a descriptor store");
  evaluate->add_option("--descriptors", store, "descriptor store")->required()->check(CLI::ExistingFile);
  evaluate->add_option("--out", out, "output directory")->required();

  auto* transfer = app.add_subcommand("transfer", "train on one corpus, evaluate on another");
  transfer->add_option("--eval-config", eval_config, "config for the evaluation corpus (default: same as --config)");
  transfer->add_option("--eval-set", eval_sets, "override a key of the evaluation config (repeatable)");
  transfer->add_option("--eval-data", eval_data, "evaluation corpus root")->required();
  transfer->add_option("--model", model, "use this checkpoint instead of training on the first corpus");
  transfer->add_option("--out", out, "output directory")->required();

  auto* dump = app.add_subcommand("config", "print the effective configuration");

  try {
    app.parse(argc, argv);
  } catch (const CLI::Success& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return gait::ConfigError("").exit_code();
  }

  try {
    const auto cfg = flags.load(data_opt());
    if (*dump) {
      std::cout << gait::pipeline::config_to_string(cfg);
    } else if (*synth) {
      const fs::path target = out.empty() ? cfg.data_root : fs::path(out);
      const auto r = gait::pipeline::cmd_synth(cfg, target, overwrite);
      std::size_t videos = 0;
      for (const auto& s : r.manifest.subjects) videos += s.videos.size();
      std::cout << "subjects = " << r.manifest.subjects.size() << "\nvideos = " << videos
                << "\nmanifest_sha256 = " << r.manifest_digest << '\n';
    } else if (*flow) {
      gait::pipeline::cmd_flow(cfg, &std::cout);
    } else if (*train) {
      const auto s = gait::pipeline::cmd_train(cfg, out, &std::cout);
      std::cout << "model = " << s.model_stem.string() << '\n';
    } else if (*extract) {
      const auto s = gait::pipeline::cmd_extract(cfg, model, out, &std::cout);
      std::cout << "store = " << s.store.string() << "\nskipped = " << s.skipped << '\n';
    } else if (*evaluate) {
      print_report(gait::pipeline::cmd_evaluate(cfg, store, out));
    } else if (*transfer) {
      ConfigFlags eflags = flags;
      if (!eval_config.empty()) eflags.file = eval_config;
      eflags.sets.insert(eflags.sets.end(), eval_sets.begin(), eval_sets.end());
      const auto ecfg = eflags.load(eval_data);
      std::optional<fs::path> stem;
      if (!model.empty()) stem = model;
      print_report(gait::pipeline::cmd_transfer(cfg, ecfg, out, stem, &std::cout));
    }
  } catch (const gait::Error& e) {
    std::cerr << "gaitctl: " << e.what() << '\n';
    return e.exit_code();
  } catch (const fs::filesystem_error& e) {
    std::cerr << "gaitctl: " << e.what() << '\n';
    return gait::InputError("").exit_code();
  } catch (const std::exception& e) {
    std::cerr << "gaitctl: " << e.what() << '\n';
    return 1;
  }
  return 0;
}
