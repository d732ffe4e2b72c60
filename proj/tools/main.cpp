#include <CLI11.hpp>

#include "verifree/cli_app.hpp"
#include "verifree/version.hpp"

int main(int argc, char** argv) {
  CLI::App app{"verifree-lab: verifier-free policy-gradient laboratory"};
  app.set_version_flag("--version", VERIFREE_LAB_VERSION);
  app.require_subcommand(1);

  verifree::CliRequest request;
  std::string config_path;
  std::uint64_t seed = 0;

  auto add_common = [&](CLI::App* cmd) {
    cmd->add_option("--config", config_path, "experiment config file (section.key = value lines)");
    cmd->add_option("--set", request.overrides, "override a config key: section.key=value")
        ->take_all();
    cmd->add_option("--out", request.out_dir, "output directory");
    cmd->add_option("--workers", request.workers, "worker threads (default: machine cores)");
    cmd->add_option("--seed", seed, "override trainer.seed")->each([&](const std::string&) {
      request.seed = seed;
    });
  };

  add_common(app.add_subcommand("check", "oracle gradient and normalization suite"));
  add_common(app.add_subcommand("variance", "variance-reduction sweep, CSV report"));
  add_common(app.add_subcommand("train", "single training run, JSONL metrics"));
  add_common(app.add_subcommand("compare", "estimator ablation grid, CSV + JSONL"));
  add_common(app.add_subcommand("patch-demo", "tokenization drift fixtures, text report"));

  CLI11_PARSE(app, argc, argv);

  request.subcommand = app.get_subcommands().front()->get_name();
  if (!config_path.empty()) request.config_path = config_path;
  return verifree::run_cli(request);
}
