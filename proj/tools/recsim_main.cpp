#include <CLI11.hpp>
#include <iostream>
#include <string>

#include "recsim/experiment.hpp"

namespace {

struct CommonOptions {
  std::string config_path;
  std::string out_dir;
  long long seed = -1;
  int jobs = 0;
};

void add_common(CLI::App* cmd, CommonOptions& opts) {
  cmd->add_option("--config", opts.config_path, "experiment config (JSON)")
      ->required()
      ->check(CLI::ExistingFile);
  cmd->add_option("--out", opts.out_dir, "output directory");
  cmd->add_option("--seed", opts.seed, "seed override");
  cmd->add_option("--jobs", opts.jobs, "max worker threads (0 = all)");
}

recsim::ExperimentConfig load(const CommonOptions& opts) {
  auto config = recsim::load_config_file(opts.config_path);
  if (opts.seed >= 0) config.seed = static_cast<std::uint64_t>(opts.seed);
  return config;
}

std::string out_dir_of(const CommonOptions& opts,
                       const recsim::ExperimentConfig& config) {
  return opts.out_dir.empty() ? config.output_dir : opts.out_dir;
}

void apply_jobs(int jobs) {
#if defined(_OPENMP)
  if (jobs > 0) omp_set_num_threads(jobs);
#else
  (void)jobs;
#endif
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{
      "Simulates the population-level effect of algorithmic recourse on "
      "classification risk"};
  app.require_subcommand(1);

  CommonOptions run_opts, sweep_opts, verify_opts;
  CLI::App* run_cmd =
      app.add_subcommand("run", "run the configured experiment matrix");
  add_common(run_cmd, run_opts);
  CLI::App* sweep_cmd = app.add_subcommand(
      "sweep", "sweep an acceptance parameter and plot the risk difference");
  add_common(sweep_cmd, sweep_opts);
  CLI::App* verify_cmd =
      app.add_subcommand("verify", "run a theorem verification suite");
  add_common(verify_cmd, verify_opts);

  CLI11_PARSE(app, argc, argv);

  try {
    if (run_cmd->parsed()) {
      apply_jobs(run_opts.jobs);
      const auto config = load(run_opts);
      return recsim::command_run(config, out_dir_of(run_opts, config));
    }
    if (sweep_cmd->parsed()) {
      apply_jobs(sweep_opts.jobs);
      const auto config = load(sweep_opts);
      return recsim::command_sweep(config, out_dir_of(sweep_opts, config));
    }
    if (verify_cmd->parsed()) {
      apply_jobs(verify_opts.jobs);
      const auto config = load(verify_opts);
      return recsim::command_verify(config, out_dir_of(verify_opts, config));
    }
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  }
  return 2;
}
