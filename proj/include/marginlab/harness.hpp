#pragma once

#include <cstdint>
#include <map>
#include <string>
#include <vector>

#include "marginlab/analysis.hpp"
#include "marginlab/datamodel.hpp"
#include "marginlab/network.hpp"

namespace marginlab {

struct ExperimentSpec {
  DataModelParams params;
  int m = 4;
  double alpha = 0.5;
  TrainConfig train;
  long long mc_trials = 20000;
  double epsilon = 0.05;
  int repeats = 1;
  std::string delta_note;
};

struct ExperimentResult {
  long long cell_index = 0;
  int repeat = 0;
  int d = 0, n = 0, k = 0;
  double gamma = 0.0;
  int m = 0;
  double alpha = 0.0;
  double eta = 0.0;
  std::uint64_t seed = 0;
  bool converged = false;
  long long T = 0;
  double train_loss = 0.0;
  double w_star_norm = 0.0;
  double margin_ratio = 0.0;
  double A_min = 0.0;
  double A_lin = 0.0;
  double Z_frobenius = 0.0;
  double z_lin_norm = 0.0;
  double test_error = 0.0;
  double test_stderr = 0.0;
  Outcome outcome = Outcome::NonInterpolating;
  double wall_time_s = 0.0;
  double kkt_residual = 0.0;  // carried for verification; not a CSV column
};

// Seed for a (cell, repeat) slot.  The (0, 0) slot keeps the base seed, so a
// row's echoed seed rerun as a standalone experiment reproduces it exactly.
std::uint64_t derive_seed(std::uint64_t base, long long cell_index, int repeat);

// sample -> max-margin -> train -> SNR decomposition -> Monte-Carlo error ->
// outcome.  Trainer non-convergence lands in the result (converged = false);
// anything else throws.  When artifact_dir is nonempty the run's dataset,
// weights, trace, max-margin solution and reports are written beneath it.
ExperimentResult run_single(const ExperimentSpec& spec, long long cell_index, int repeat,
                            const std::string& artifact_dir = "");

// One result per repeat.
std::vector<ExperimentResult> run_experiment(const ExperimentSpec& spec,
                                             const std::string& artifact_dir = "");

struct SweepSpec {
  // Axis values keyed by "d", "n", "k", "gamma", "m", "alpha"; a missing key
  // sweeps nothing and takes the base value.
  std::map<std::string, std::vector<double>> grid;
  ExperimentSpec base;
  int parallelism = 1;
  std::string output_path = "sweep.csv";
  long long max_cells = 4096;
};

struct SweepTable {
  SweepSpec spec;
  std::vector<ExperimentResult> rows;  // sorted by (cell_index, repeat)
};

// Runs every (cell, repeat) not already present in the checkpoint file,
// appending each finished result to it, then returns the full sorted table.
// Cells run concurrently up to spec.parallelism; output order never depends
// on scheduling.
SweepTable run_sweep(const SweepSpec& spec, const std::string& checkpoint_path);

// The experiment spec a given cell index expands to.
ExperimentSpec cell_spec(const SweepSpec& spec, long long cell_index);
long long sweep_cell_count(const SweepSpec& spec);

std::string experiment_result_to_json(const ExperimentResult& r);
ExperimentResult experiment_result_from_json(const std::string& text);

ExperimentSpec experiment_spec_from_json(const std::string& text);
SweepSpec sweep_spec_from_json(const std::string& text);

}  // namespace marginlab
