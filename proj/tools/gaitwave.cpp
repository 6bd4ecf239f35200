#include <iostream>
#include <optional>
#include <string>

#include "CLI11.hpp"
#include "gaitwave/cli.hpp"

int main(int argc, char** argv) {
  using namespace gaitwave;
  CLI::App app{"Gait identification benchmarks on Wi-Fi channel state information"};
  app.require_subcommand(1);

  auto* synth = app.add_subcommand("synth", "Generate a synthetic dataset");
  std::string spec_path, synth_out;
  bool synth_force = false;
  synth->add_option("spec", spec_path, "Synthetic spec JSON")->required();
  synth->add_option("out_dir", synth_out, "Output directory")->required();
  synth->add_flag("--force", synth_force, "Overwrite an existing dataset");

  auto* run = app.add_subcommand("run", "Train and evaluate an experiment config");
  std::string config_path;
  cli::RunOptions run_opt;
  std::optional<uint64_t> seed;
  run->add_option("config", config_path, "Experiment config JSON")->required();
  run->add_option("--jobs", run_opt.jobs, "Parallel training jobs")->check(CLI::PositiveNumber);
  run->add_option("--seed", seed, "Base training seed");
  run->add_flag("--resume", run_opt.resume, "Skip jobs already finished");
  run->add_flag("--force", run_opt.force, "Discard previous results in the output directory");

  auto* report = app.add_subcommand("report", "Rebuild tables from results.json");
  std::string results_dir;
  bool excl_lstm = false, excl_humanfi = false;
  report->add_option("results_dir", results_dir, "Directory holding results.json")->required();
  auto* f1 = report->add_flag("--exclude-lstm", excl_lstm, "Summarise configurations without LSTM layers");
  auto* f2 = report->add_flag("--exclude-lstm-humanfi", excl_humanfi, "Summarise all but the plain LSTM family");
  f1->excludes(f2);

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : cli::kExitInvalid;
  }

  if (synth->parsed()) return cli::cmd_synth(spec_path, synth_out, synth_force, std::cout, std::cerr);
  if (run->parsed()) {
    run_opt.seed = seed;
    return cli::cmd_run(config_path, run_opt, std::cout, std::cerr);
  }
  std::optional<Scope> scope;
  if (excl_lstm) scope = Scope::excl_all_lstm;
  if (excl_humanfi) scope = Scope::excl_lstm_humanfi;
  return cli::cmd_report(results_dir, scope, std::cout, std::cerr);
}
