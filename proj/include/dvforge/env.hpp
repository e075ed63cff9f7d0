// One-step environment: sample N training records, take a selection mask,
// fit the inner estimator on the selection, reward = selected validation
// score minus the full-batch baseline score.

#pragma once

#include <Eigen/Dense>

#include <cstdint>
#include <vector>

#include "dvforge/data.hpp"
#include "dvforge/logistic.hpp"
#include "dvforge/rng.hpp"

namespace dvf {

struct StateBatch {
  std::vector<int> indices;   // record ids into the dataset
  Eigen::MatrixXd vectors;    // N x (d + num_classes): features (+) one-hot label
  double baseline_score = 0.0;
};

struct SelectionMask {
  std::vector<std::uint8_t> mask;
  std::vector<double> logprobs;  // per-record log-prob of the taken action
};

struct StepOutcome {
  double reward = 0.0;
  int selected_count = 0;
  double selected_score = 0.0;
  bool degenerate = false;
};

struct InsufficientDataError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

struct EnvConfig {
  int state_size = 200;
  double reward_scale = 1.0;  // applied multiplicatively on top of the raw delta
  LogisticConfig inner;
};

class ValuationEnv {
 public:
  ValuationEnv(const Dataset& data, EnvConfig cfg);

  // Uniform sample without replacement; baseline_score is the validation
  // accuracy of the inner estimator fit on all N sampled records.
  StateBatch sample_state(Rng& rng) const;

  // Builds a StateBatch over the given record ids (used for scoring passes
  // where the chunk may be smaller than state_size).
  StateBatch state_for(const std::vector<int>& ids) const;

  // Empty or single-class selections are degenerate: selected_score is
  // treated as 0, so reward = -baseline_score.
  StepOutcome step(const StateBatch& state, const std::vector<std::uint8_t>& mask) const;

  int state_size() const { return cfg_.state_size; }
  int state_dim() const;
  const Dataset& dataset() const { return *data_; }

 private:
  const Dataset* data_;
  EnvConfig cfg_;
  std::vector<int> train_ids_;
  Eigen::MatrixXd val_features_;
  std::vector<int> val_labels_;
};

}  // namespace dvf
