#include <CLI11.hpp>

#include <iostream>
#include <optional>

#include "cari/config.hpp"
#include "cari/errors.hpp"
#include "cari/pipeline.hpp"

namespace {

struct Options {
  std::string config;
  std::optional<std::uint64_t> seed;
  std::string arm;
  std::string out;
};

cari::PipelineConfig load(const Options& o) {
  auto cfg = cari::load_pipeline_config(o.config);
  if (o.seed) cfg.seed = *o.seed;
  if (!o.out.empty()) cfg.workspace = o.out;
  return cfg;
}

std::vector<cari::Arm> arms_for(const Options& o, bool include_source) {
  if (!o.arm.empty()) return {cari::parse_arm(o.arm)};
  std::vector<cari::Arm> arms;
  for (auto a : cari::all_arms()) {
    if (include_source || a != cari::Arm::kSource) arms.push_back(a);
  }
  return arms;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Caricature face parsing via shape and texture adaptation"};
  app.require_subcommand(1);
  Options o;
  auto add_common = [&](CLI::App* cmd, bool with_arm) {
    cmd->add_option("--config", o.config, "Pipeline INI file")->required()->check(CLI::ExistingFile);
    cmd->add_option("--seed", o.seed, "Override the global seed");
    cmd->add_option("--out", o.out, "Workspace directory (overrides paths.workspace)");
    if (with_arm) cmd->add_option("--arm", o.arm, "source, texture, shape or both (default: all)");
  };
  auto* toy = app.add_subcommand("make-toy-data", "Generate procedural photo, caricature and evaluation sets");
  toy->add_option("--config", o.config, "Pipeline INI file")->required()->check(CLI::ExistingFile);
  toy->add_option("--seed", o.seed, "Override the global seed");
  toy->add_option("--out", o.out, "Write photos/, caricatures/ and eval/ below this directory");
  auto* prepare = app.add_subcommand("prepare", "Cluster caricature shapes and styles");
  auto* shape = app.add_subcommand("train-shape", "Train the shape adaptation networks");
  auto* texture = app.add_subcommand("train-texture", "Train the texture adaptation network");
  auto* synth = app.add_subcommand("synthesize", "Build adapted training sets");
  auto* parser = app.add_subcommand("train-parser", "Train a face parser per arm");
  auto* evaluate = app.add_subcommand("evaluate", "Evaluate parsers on the caricature test set");
  auto* ablation = app.add_subcommand("run-ablation", "Run every stage and write the ablation table");
  add_common(prepare, false);
  add_common(shape, false);
  add_common(texture, false);
  add_common(synth, true);
  add_common(parser, true);
  add_common(evaluate, true);
  add_common(ablation, false);

  CLI11_PARSE(app, argc, argv);

  std::string stage = app.get_subcommands().front()->get_name();
  try {
    if (toy->parsed()) {
      auto cfg = cari::load_pipeline_config(o.config);
      if (o.seed) cfg.seed = *o.seed;
      cari::cmd_make_toy_data(cfg, o.out.empty() ? std::nullopt : std::optional<std::filesystem::path>(o.out));
      return 0;
    }
    const auto cfg = load(o);
    cari::WorkspaceLock lock(cfg.workspace);
    if (prepare->parsed()) {
      cari::cmd_prepare(cfg);
    } else if (shape->parsed()) {
      cari::cmd_train_shape(cfg);
    } else if (texture->parsed()) {
      cari::cmd_train_texture(cfg);
    } else if (synth->parsed()) {
      for (auto a : arms_for(o, false)) {
        if (a == cari::Arm::kSource) throw cari::ArgumentError("the source arm is not synthesized");
        cari::cmd_synthesize(cfg, a);
      }
    } else if (parser->parsed()) {
      for (auto a : arms_for(o, true)) cari::cmd_train_parser(cfg, a);
    } else if (evaluate->parsed()) {
      for (auto a : arms_for(o, true)) cari::cmd_evaluate(cfg, a);
    } else if (ablation->parsed()) {
      std::cout << cari::cmd_run_ablation(cfg).markdown;
    }
  } catch (const cari::DependencyError& e) {
    std::cerr << "error [" << stage << "]: missing " << e.stage() << " output: " << e.what() << '\n';
    return 3;
  } catch (const cari::ConfigError& e) {
    std::cerr << "error [" << stage << "]: configuration: " << e.what() << '\n';
    return 2;
  } catch (const std::exception& e) {
    std::cerr << "error [" << stage << "]: " << e.what() << '\n';
    return 1;
  }
  return 0;
}
