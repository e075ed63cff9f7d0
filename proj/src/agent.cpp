#include "dvforge/agent.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <ostream>
#include <sstream>

namespace dvf {

namespace {
constexpr double kProbFloor = 1e-7;
}

void AgentConfig::validate() const {
  if (clip_epsilon <= 0.0 || clip_epsilon >= 1.0) {
    throw std::invalid_argument("clip_epsilon must be in (0,1)");
  }
  if (c1 < 0.0 || c2 < 0.0) throw std::invalid_argument("c1 and c2 must be >= 0");
  if (gamma != 0.0) throw std::invalid_argument("bandit mode requires gamma == 0");
  if (train_batch < 1 || epochs_per_update < 1 || rollout_size < 1) {
    throw std::invalid_argument("train_batch, epochs_per_update, rollout_size must be >= 1");
  }
}

Tensor policy_loss(const Tensor& new_logprobs, const Tensor& old_logprobs, double advantage,
                   double clip_epsilon) {
  Tensor ratio = exp_(sub(new_logprobs, old_logprobs));
  for (std::size_t i = 0; i < ratio.size(); ++i) {
    if (!std::isfinite(ratio.data()[i])) {
      throw std::runtime_error("policy_loss: non-finite ratio at record " + std::to_string(i));
    }
  }
  Tensor t1 = mul_scalar(ratio, advantage);
  Tensor t2 = mul_scalar(clip(ratio, 1.0 - clip_epsilon, 1.0 + clip_epsilon), advantage);
  return neg(mean_all(minimum(t1, t2)));
}

Tensor value_loss(const Tensor& value, double reward) {
  Tensor err = add_scalar(neg(value), reward);
  return mean_all(mul(err, err));
}

Tensor entropy_bonus(const Tensor& probs) {
  Tensor p = clip(probs, kProbFloor, 1.0 - kProbFloor);
  Tensor q = add_scalar(neg(p), 1.0);
  return neg(mean_all(add(mul(p, log_(p)), mul(q, log_(q)))));
}

Tensor total_loss(const Tensor& policy, const Tensor& value, const Tensor& entropy, double c1,
                  double c2) {
  return sub(add(policy, mul_scalar(value, c1)), mul_scalar(entropy, c2));
}

std::vector<double> generalized_advantage_estimate(const std::vector<double>& deltas,
                                                   double gamma, double lambda) {
  std::vector<double> adv(deltas.size());
  double acc = 0.0;
  for (std::size_t i = deltas.size(); i-- > 0;) {
    acc = deltas[i] + gamma * lambda * acc;
    adv[i] = acc;
  }
  return adv;
}

SelectionMask act(const PolicyValueNet& net, const StateBatch& state, Rng& rng,
                  bool deterministic) {
  const Tensor probs = net.actor_probs(net.encode_batch(state.vectors).record_emb);
  SelectionMask out;
  const std::size_t n = probs.size();
  out.mask.resize(n);
  out.logprobs.resize(n);
  for (std::size_t i = 0; i < n; ++i) {
    const double p = probs.data()[i];
    const bool take = deterministic ? p > 0.5 : uniform01(rng) < p;
    const double pc = std::clamp(p, kProbFloor, 1.0 - kProbFloor);
    out.mask[i] = take ? 1 : 0;
    out.logprobs[i] = std::log(take ? pc : 1.0 - pc);
  }
  return out;
}

PpoBanditAgent::PpoBanditAgent(EncoderConfig net_cfg, AgentConfig cfg)
    : cfg_(cfg), net_cfg_(net_cfg) {
  cfg_.validate();
  if (net_cfg_.input_dim > 0) ensure_net(net_cfg_.input_dim);
}

void PpoBanditAgent::ensure_net(int input_dim) {
  if (net_) {
    if (net_->config().input_dim != input_dim) {
      throw ShapeError("agent network input_dim " + std::to_string(net_->config().input_dim) +
                       " does not match environment state dim " + std::to_string(input_dim));
    }
    return;
  }
  net_cfg_.input_dim = input_dim;
  net_.emplace(net_cfg_, cfg_.critic_mode, cfg_.seed);
}

TrainingLog PpoBanditAgent::train(const ValuationEnv& env, std::ostream* log_stream) {
  ensure_net(env.state_dim());
  Rng rng(cfg_.seed + 0x9e3779b97f4a7c15ull);

  NamedTensors named = net_->parameters();
  std::vector<Tensor> params;
  for (auto& [n, t] : named) params.push_back(t);
  Adam opt(params, {.lr = cfg_.lr});

  TrainingLog log;
  long steps = 0;
  while (steps < cfg_.total_steps) {
    // ---- rollout with frozen policy ----
    std::vector<RolloutSample> rollout;
    rollout.reserve(static_cast<std::size_t>(cfg_.rollout_size));
    for (int i = 0; i < cfg_.rollout_size && steps < cfg_.total_steps; ++i) {
      RolloutSample s;
      s.state = env.sample_state(rng);
      const PolicyValueNet::Forward f = net_->forward(s.state.vectors, s.state.baseline_score);
      const std::size_t n = f.probs.size();
      s.mask.resize(n);
      s.old_logprobs.resize(n);
      for (std::size_t r = 0; r < n; ++r) {
        const double p = f.probs.data()[r];
        const bool take = uniform01(rng) < p;
        const double pc = std::clamp(p, kProbFloor, 1.0 - kProbFloor);
        s.mask[r] = take ? 1 : 0;
        s.old_logprobs[r] = std::log(take ? pc : 1.0 - pc);
      }
      const StepOutcome outcome = env.step(s.state, s.mask);
      s.reward = outcome.reward;
      s.value = f.value.value();
      s.advantage = s.reward - s.value;
      rollout.push_back(std::move(s));
      ++steps;
    }

    std::vector<double> adv(rollout.size());
    for (std::size_t i = 0; i < rollout.size(); ++i) adv[i] = rollout[i].advantage;
    if (cfg_.normalize_advantage && rollout.size() > 1) {
      const double m = std::accumulate(adv.begin(), adv.end(), 0.0) / adv.size();
      double v = 0.0;
      for (double a : adv) v += (a - m) * (a - m);
      const double sd = std::sqrt(v / adv.size());
      for (double& a : adv) a = (a - m) / (sd + 1e-8);
    }

    // ---- minibatch updates ----
    double last_policy = 0.0, last_value = 0.0, last_entropy = 0.0, clip_frac = 0.0;
    long clip_hits = 0, clip_total = 0;
    std::vector<std::size_t> order(rollout.size());
    std::iota(order.begin(), order.end(), 0);
    for (int epoch = 0; epoch < cfg_.epochs_per_update; ++epoch) {
      std::shuffle(order.begin(), order.end(), rng);
      for (std::size_t b0 = 0; b0 < order.size(); b0 += static_cast<std::size_t>(cfg_.train_batch)) {
        const std::size_t b1 = std::min(order.size(), b0 + static_cast<std::size_t>(cfg_.train_batch));
        opt.zero_grad();
        Tensor batch_loss;
        double pol_acc = 0.0, val_acc = 0.0, ent_acc = 0.0;
        for (std::size_t bi = b0; bi < b1; ++bi) {
          const RolloutSample& s = rollout[order[bi]];
          const std::size_t n = s.mask.size();

          PolicyValueNet::Forward f = net_->forward(s.state.vectors, s.state.baseline_score);
          Tensor p = clip(f.probs, kProbFloor, 1.0 - kProbFloor);
          std::vector<double> a(n), old_lp(n);
          for (std::size_t i = 0; i < n; ++i) {
            a[i] = s.mask[i];
            old_lp[i] = s.old_logprobs[i];
          }
          Tensor taken = Tensor::from({n, 1}, std::move(a));
          Tensor not_taken = add_scalar(neg(taken), 1.0);
          Tensor new_lp = add(mul(taken, log_(p)),
                              mul(not_taken, log_(add_scalar(neg(p), 1.0))));
          Tensor old = Tensor::from({n, 1}, std::move(old_lp));

          Tensor pl = policy_loss(new_lp, old, adv[order[bi]], cfg_.clip_epsilon);
          Tensor vl = value_loss(f.value, s.reward);
          Tensor ent = entropy_bonus(f.probs);
          Tensor tl = total_loss(pl, vl, ent, cfg_.c1, cfg_.c2);
          batch_loss = batch_loss.defined() ? add(batch_loss, tl) : tl;

          pol_acc += pl.value();
          val_acc += vl.value();
          ent_acc += ent.value();
          if (epoch == cfg_.epochs_per_update - 1) {
            for (std::size_t i = 0; i < n; ++i) {
              const double r = std::exp(new_lp.data()[i] - s.old_logprobs[i]);
              if (r < 1.0 - cfg_.clip_epsilon || r > 1.0 + cfg_.clip_epsilon) ++clip_hits;
              ++clip_total;
            }
          }
        }
        const double bsz = static_cast<double>(b1 - b0);
        batch_loss = mul_scalar(batch_loss, 1.0 / bsz);
        if (!std::isfinite(batch_loss.value())) {
          std::ostringstream os;
          os << "train: non-finite loss at step " << steps << " (policy=" << pol_acc / bsz
             << " value=" << val_acc / bsz << " entropy=" << ent_acc / bsz << ")";
          throw std::runtime_error(os.str());
        }
        backward(batch_loss);
        opt.step();
        if (epoch == cfg_.epochs_per_update - 1) {
          last_policy = pol_acc / bsz;
          last_value = val_acc / bsz;
          last_entropy = ent_acc / bsz;
        }
      }
    }
    clip_frac = clip_total > 0 ? static_cast<double>(clip_hits) / clip_total : 0.0;

    TrainingLogEntry e;
    e.step = steps;
    e.mean_reward = 0.0;
    for (const auto& s : rollout) e.mean_reward += s.reward;
    e.mean_reward /= static_cast<double>(rollout.size());
    e.policy_loss = last_policy;
    e.value_loss = last_value;
    e.entropy = last_entropy;
    e.clip_fraction = clip_frac;
    log.push_back(e);
    if (log_stream) {
      (*log_stream) << "{\"step\":" << e.step << ",\"mean_reward\":" << e.mean_reward
                    << ",\"policy_loss\":" << e.policy_loss << ",\"value_loss\":" << e.value_loss
                    << ",\"entropy\":" << e.entropy << ",\"clip_fraction\":" << e.clip_fraction
                    << "}\n";
    }
  }
  return log;
}

ValueReport PpoBanditAgent::score_records(const ValuationEnv& env, int passes, Rng& rng) const {
  if (passes < 1) throw std::invalid_argument("score_records: passes must be >= 1");
  if (!net_) throw std::runtime_error("score_records: agent has no trained network");
  const Dataset& ds = env.dataset();
  const std::vector<int> train_ids = ds.indices_of(Split::train);
  const auto n = static_cast<std::size_t>(env.state_size());

  ValueReport report;
  report.method = "rlboost";
  report.runs = passes;
  report.record_ids = train_ids;
  std::vector<std::size_t> pos_of(ds.size());
  for (std::size_t i = 0; i < train_ids.size(); ++i) {
    pos_of[static_cast<std::size_t>(train_ids[i])] = i;
  }

  const Eigen::Index d = ds.features.cols();
  report.per_pass.assign(static_cast<std::size_t>(passes),
                         std::vector<double>(train_ids.size(), 0.0));
  for (int pass = 0; pass < passes; ++pass) {
    std::vector<int> order = train_ids;
    std::shuffle(order.begin(), order.end(), rng);
    for (std::size_t c0 = 0; c0 < order.size(); c0 += n) {
      const std::size_t c1 = std::min(order.size(), c0 + n);
      Eigen::MatrixXd vectors(static_cast<Eigen::Index>(c1 - c0), d + ds.num_classes);
      vectors.rightCols(ds.num_classes).setZero();
      for (std::size_t i = c0; i < c1; ++i) {
        const auto r = static_cast<Eigen::Index>(i - c0);
        vectors.row(r).head(d) = ds.features.row(order[i]);
        vectors(r, d + ds.labels[static_cast<std::size_t>(order[i])]) = 1.0;
      }
      const Tensor probs = net_->actor_probs(net_->encode_batch(vectors).record_emb);
      for (std::size_t i = c0; i < c1; ++i) {
        report.per_pass[static_cast<std::size_t>(pass)]
                       [pos_of[static_cast<std::size_t>(order[i])]] = probs.data()[i - c0];
      }
    }
  }
  report.values.assign(train_ids.size(), 0.0);
  for (const auto& pass : report.per_pass) {
    for (std::size_t i = 0; i < pass.size(); ++i) report.values[i] += pass[i];
  }
  for (auto& v : report.values) v /= static_cast<double>(passes);
  return report;
}

void PpoBanditAgent::save(const std::string& checkpoint_path) const {
  if (!net_) throw std::runtime_error("save: agent has no network yet");
  save_checkpoint(checkpoint_path, net_->parameters());
}

void PpoBanditAgent::load(const std::string& checkpoint_path) {
  if (!net_) throw std::runtime_error("load: construct the agent with input_dim set first");
  load_checkpoint(checkpoint_path, net_->parameters());
}

}  // namespace dvf
