// Experiment execution: the (noise rate x method x run) cell grid behind the
// `run`, `report` and `time-bench` subcommands.

#pragma once

#include <optional>
#include <string>
#include <vector>

#include "dvforge/config.hpp"
#include "dvforge/report.hpp"

namespace dvf {

Dataset load_dataset(const DatasetSpec& spec);

struct RunOptions {
  int jobs = 1;
  bool deterministic = false;  // forces jobs=1 and zeroes wall-clock fields
};

struct CellResult {
  RunRecord record;
  std::optional<RocCurve> roc;
  bool failed = false;
  std::string error;
  int attempts = 1;
};

std::uint64_t child_seed(std::uint64_t master_seed, double noise_rate,
                         const std::string& method, int run);

// Runs one cell against an already noise-injected dataset.
CellResult run_cell(const ExperimentConfig& cfg, const Dataset& noisy_ds, double noise_rate,
                    const std::string& method, int run, const std::string& out_dir);

// Full grid; writes runrecords.jsonl, scores.csv, values.csv, roc.csv,
// summary.csv/json and SVG plots into out_dir. Failed cells are recorded and
// the remaining cells continue; returns the number of failed cells.
int run_experiment(const ExperimentConfig& cfg, const std::string& out_dir,
                   const RunOptions& opts);

// Rebuilds aggregates and plots from a previous run's runrecords.jsonl
// without re-running any method.
void regenerate_report(const std::string& out_dir);

// Timing shape harness: LOO / TMC / fixed-step agent over increasing train
// sizes, recording wall clock and instrumented inner-fit counts.
std::vector<TimingRow> time_bench(const ExperimentConfig& cfg,
                                  const std::vector<std::size_t>& train_sizes,
                                  const std::vector<std::string>& methods,
                                  bool deterministic);

}  // namespace dvf
