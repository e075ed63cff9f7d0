// Bandit-specialized PPO: one-step episodes, gamma = 0, advantage
// delta = r - V(s), per-record clipped ratios, full Bernoulli entropy bonus.

#pragma once

#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

#include "dvforge/env.hpp"
#include "dvforge/net.hpp"
#include "dvforge/optim.hpp"
#include "dvforge/report.hpp"

namespace dvf {

struct AgentConfig {
  double clip_epsilon = 0.2;
  double c1 = 0.5;    // value-loss weight
  double c2 = 1e-3;   // entropy weight
  double gamma = 0.0;   // fixed 0 in bandit mode
  double lambda = 0.95; // only the GAE helper uses it
  double lr = 3e-4;
  long total_steps = 100000;
  int train_batch = 64;
  int epochs_per_update = 4;
  int rollout_size = 16;
  CriticMode critic_mode = CriticMode::CLS_SB;
  std::uint64_t seed = 0;
  // Off by default: rescaling a rollout's advantages to unit variance turns
  // pure reward noise into full-strength updates, which saturates the
  // per-record selection probabilities before any real signal accumulates.
  bool normalize_advantage = false;  // applied at loss time; stored advantages stay raw
  void validate() const;
};

struct RolloutSample {
  StateBatch state;
  std::vector<std::uint8_t> mask;
  std::vector<double> old_logprobs;
  double reward = 0.0;
  double value = 0.0;
  double advantage = 0.0;  // always reward - value
};

struct TrainingLogEntry {
  long step = 0;
  double mean_reward = 0.0;
  double policy_loss = 0.0;
  double value_loss = 0.0;
  double entropy = 0.0;
  double clip_fraction = 0.0;
};

using TrainingLog = std::vector<TrainingLogEntry>;

// --- loss pieces, exposed for tests; each returns a scalar tensor ---

// min(adv*R, adv*clip(R, 1-eps, 1+eps)) averaged over records, negated.
// Throws std::runtime_error naming the record if a ratio is non-finite.
Tensor policy_loss(const Tensor& new_logprobs, const Tensor& old_logprobs, double advantage,
                   double clip_epsilon);

// (reward - value)^2
Tensor value_loss(const Tensor& value, double reward);

// mean full Bernoulli entropy -p log p - (1-p) log(1-p); probabilities
// clamped to [1e-7, 1-1e-7] before the logs.
Tensor entropy_bonus(const Tensor& probs);

// policy_loss + c1 * value_loss - c2 * entropy
Tensor total_loss(const Tensor& policy, const Tensor& value, const Tensor& entropy, double c1,
                  double c2);

// Reverse-recursive GAE over per-step TD errors; with gamma = 0 the output
// equals the input, which is the bandit reduction this artifact relies on.
std::vector<double> generalized_advantage_estimate(const std::vector<double>& deltas,
                                                   double gamma, double lambda);

SelectionMask act(const PolicyValueNet& net, const StateBatch& state, Rng& rng,
                  bool deterministic);

class PpoBanditAgent {
 public:
  // input_dim of net_cfg may be 0; it is filled from the environment.
  PpoBanditAgent(EncoderConfig net_cfg, AgentConfig cfg);

  // Rollout / minibatch-update loop until total env steps >= total_steps.
  // When log_stream is set, one JSON line per update is written to it.
  TrainingLog train(const ValuationEnv& env, std::ostream* log_stream = nullptr);

  // Mean actor probability per train record over `passes` shuffled
  // partitions into state-sized batches (smaller final chunks keep their
  // natural size).
  ValueReport score_records(const ValuationEnv& env, int passes, Rng& rng) const;

  PolicyValueNet& net() { return *net_; }
  const PolicyValueNet& net() const { return *net_; }
  const AgentConfig& config() const { return cfg_; }

  void save(const std::string& checkpoint_path) const;
  void load(const std::string& checkpoint_path);

 private:
  AgentConfig cfg_;
  EncoderConfig net_cfg_;
  std::optional<PolicyValueNet> net_;
  void ensure_net(int input_dim);
};

}  // namespace dvf
