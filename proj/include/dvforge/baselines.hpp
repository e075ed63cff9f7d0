// Comparison valuators: Leave-One-Out, exact Shapley (small-N oracle),
// truncated Monte Carlo Shapley, a reduced-fidelity REINFORCE valuator,
// and the threshold-sweep selector for value-only methods.

#pragma once

#include <cstdint>
#include <vector>

#include "dvforge/data.hpp"
#include "dvforge/logistic.hpp"
#include "dvforge/report.hpp"

namespace dvf {

struct ShapleyConfig {
  int max_permutations = 500;
  double truncation_tol = 0.01;
  double convergence_tol = 1e-3;
  int convergence_window = 20;
  std::uint64_t seed = 0;
};

struct SweepResult {
  std::vector<double> thresholds_tried;
  std::vector<double> val_scores;
  double best_threshold = 0.0;
  double final_test_score = 0.0;
};

// value_i = score(fit on all) - score(fit on all minus i). Performs exactly
// N+1 inner fits; a degenerate leave-one-out fit scores 0.
std::vector<double> loo_values(const Dataset& ds, const LogisticConfig& inner);

// Exact Shapley over the coalition game v(S) = validation accuracy of the
// inner fit on S (0 for degenerate S), via full subset enumeration. N <= 10.
std::vector<double> exact_shapley(const Dataset& ds, const LogisticConfig& inner);

// Permutation-sampled Shapley with per-permutation truncation once the
// prefix score is within truncation_tol of the full-set score, and early
// stop when the rolling mean change over convergence_window permutations
// drops below convergence_tol.
std::vector<double> tmc_shapley(const Dataset& ds, const LogisticConfig& inner,
                                const ShapleyConfig& cfg);

struct DvrlConfig {
  int hidden_dim = 32;
  double lr = 1e-3;
  int steps = 2000;
  int batch_size = 100;
  int moving_window = 20;  // W >= 1
  std::uint64_t seed = 0;
  void validate() const;
};

// Mean of the last `window` entries of `scores` (all of them when fewer);
// the REINFORCE baseline dvrl_lite subtracts from each step's score.
double windowed_baseline(const std::vector<double>& scores, int window);

// Reduced-fidelity DVRL: per-record feed-forward value net trained with
// REINFORCE against a moving-average score baseline. No inner-model
// co-training across steps.
std::vector<double> dvrl_lite(const Dataset& ds, const LogisticConfig& inner,
                              const DvrlConfig& cfg);

// Candidate thresholds are 21 value quantiles (0%..100% in 5% steps),
// deduplicated, so the no-filter threshold is always included. Thresholds
// leaving a degenerate train set are recorded with score 0 and skipped.
// Ties resolve to the smallest threshold.
SweepResult threshold_sweep(const std::vector<double>& values, const Dataset& ds,
                            const LogisticConfig& inner);

}  // namespace dvf
