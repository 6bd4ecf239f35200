#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <ostream>

#include "gaitwave/experiments.hpp"

namespace gaitwave::cli {

inline constexpr int kExitOk = 0;
inline constexpr int kExitFailure = 1;
inline constexpr int kExitInvalid = 2;
inline constexpr int kExitRefused = 3;

// Writes recordings and a manifest for a synthetic spec. Refuses a directory
// that already holds a manifest unless force is set.
int cmd_synth(const std::filesystem::path& spec_path, const std::filesystem::path& out_dir, bool force,
              std::ostream& out, std::ostream& err);

struct RunOptions {
  int jobs = 1;
  std::optional<uint64_t> seed;  // replaces train.seed
  bool resume = false;           // reuse finished job files
  bool force = false;            // discard previous results
};

// Trains every (model, band, seed) job and every learning-curve job, then
// writes results.json and the report tables into the output directory.
int cmd_run(const std::filesystem::path& config_path, const RunOptions& opt, std::ostream& out, std::ostream& err);

// Rebuilds the tables from results.json without training. The summary printed
// is restricted to `scope` when given; aggregate files always hold every scope.
int cmd_report(const std::filesystem::path& results_dir, std::optional<Scope> scope, std::ostream& out,
               std::ostream& err);

}  // namespace gaitwave::cli
