#include "dvforge/baselines.hpp"

#include <algorithm>
#include <cmath>
#include <deque>
#include <numeric>

#include "dvforge/net.hpp"
#include "dvforge/optim.hpp"
#include "dvforge/rng.hpp"
#include "dvforge/tensor.hpp"

namespace dvf {

namespace {

// Shared coalition-game scaffolding: v(S) = validation accuracy of the inner
// fit on S, 0 when S is degenerate (empty or single-class).
struct Game {
  const Dataset* ds;
  LogisticConfig inner;
  std::vector<int> train_ids;
  Eigen::MatrixXd val_x;
  std::vector<int> val_y;

  Game(const Dataset& d, const LogisticConfig& cfg) : ds(&d), inner(cfg) {
    train_ids = d.indices_of(Split::train);
    const auto val_ids = d.indices_of(Split::validation);
    val_x = d.rows(val_ids);
    val_y = d.labels_of(val_ids);
  }

  double value(const std::vector<int>& subset_local) const {
    std::vector<int> ids;
    ids.reserve(subset_local.size());
    for (int l : subset_local) ids.push_back(train_ids[static_cast<std::size_t>(l)]);
    try {
      const InnerModel m =
          fit_inner(ds->rows(ids), ds->labels_of(ids), ds->num_classes, inner);
      return accuracy(m, val_x, val_y);
    } catch (const SingleClassError&) {
      return 0.0;
    } catch (const EmptyDataError&) {
      return 0.0;
    }
  }
};

}  // namespace

std::vector<double> loo_values(const Dataset& ds, const LogisticConfig& inner) {
  Game game(ds, inner);
  const std::size_t n = game.train_ids.size();
  if (n < 3) throw std::invalid_argument("loo_values: need at least 3 train records");

  std::vector<int> all(n);
  std::iota(all.begin(), all.end(), 0);
  const double full = game.value(all);

  std::vector<double> values(n);
  std::vector<int> rest(n - 1);
  for (std::size_t i = 0; i < n; ++i) {
    std::size_t k = 0;
    for (std::size_t j = 0; j < n; ++j) {
      if (j != i) rest[k++] = static_cast<int>(j);
    }
    values[i] = full - game.value(rest);
  }
  return values;
}

std::vector<double> exact_shapley(const Dataset& ds, const LogisticConfig& inner) {
  Game game(ds, inner);
  const std::size_t n = game.train_ids.size();
  if (n > 10) {
    throw std::invalid_argument("exact_shapley: N=" + std::to_string(n) +
                                " too large (max 10)");
  }
  const std::size_t total = std::size_t{1} << n;
  std::vector<double> v(total);
  std::vector<int> members;
  for (std::size_t s = 0; s < total; ++s) {
    members.clear();
    for (std::size_t i = 0; i < n; ++i) {
      if (s & (std::size_t{1} << i)) members.push_back(static_cast<int>(i));
    }
    v[s] = members.empty() ? 0.0 : game.value(members);
  }

  std::vector<double> fact(n + 1, 1.0);
  for (std::size_t i = 1; i <= n; ++i) fact[i] = fact[i - 1] * static_cast<double>(i);

  std::vector<double> phi(n, 0.0);
  for (std::size_t s = 0; s < total; ++s) {
    const auto sz = static_cast<std::size_t>(__builtin_popcountll(s));
    const double w = fact[sz] * fact[n - sz - 1] / fact[n];
    for (std::size_t i = 0; i < n; ++i) {
      if (s & (std::size_t{1} << i)) continue;
      phi[i] += w * (v[s | (std::size_t{1} << i)] - v[s]);
    }
  }
  return phi;
}

std::vector<double> tmc_shapley(const Dataset& ds, const LogisticConfig& inner,
                                const ShapleyConfig& cfg) {
  if (cfg.max_permutations < 1 || cfg.truncation_tol <= 0 || cfg.convergence_tol <= 0) {
    throw std::invalid_argument("tmc_shapley: max_permutations >= 1 and tolerances > 0 required");
  }
  Game game(ds, inner);
  const std::size_t n = game.train_ids.size();
  std::vector<int> all(n);
  std::iota(all.begin(), all.end(), 0);
  const double full = game.value(all);

  Rng rng(cfg.seed);
  std::vector<double> sums(n, 0.0), means(n, 0.0), prev_means(n, 0.0);
  std::deque<double> window;
  int perms = 0;
  std::vector<int> prefix;
  for (; perms < cfg.max_permutations; ++perms) {
    const std::vector<int> perm = shuffled_indices(rng, n);
    prefix.clear();
    double prev_v = 0.0;
    bool truncated = false;
    for (int local : perm) {
      if (truncated) break;  // remaining marginals are 0
      prefix.push_back(local);
      const double cur = game.value(prefix);
      sums[static_cast<std::size_t>(local)] += cur - prev_v;
      prev_v = cur;
      if (std::abs(cur - full) < cfg.truncation_tol) truncated = true;
    }
    prev_means.swap(means);
    double change = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
      means[i] = sums[i] / static_cast<double>(perms + 1);
      change += std::abs(means[i] - prev_means[i]);
    }
    change /= static_cast<double>(n);
    window.push_back(change);
    if (window.size() > static_cast<std::size_t>(cfg.convergence_window)) window.pop_front();
    if (perms + 1 >= cfg.convergence_window &&
        std::accumulate(window.begin(), window.end(), 0.0) / window.size() <
            cfg.convergence_tol) {
      ++perms;
      break;
    }
  }
  return means;
}

double windowed_baseline(const std::vector<double>& scores, int window) {
  if (scores.empty()) throw std::invalid_argument("windowed_baseline: no scores yet");
  if (window < 1) throw std::invalid_argument("windowed_baseline: window must be >= 1");
  const std::size_t take = std::min(scores.size(), static_cast<std::size_t>(window));
  return std::accumulate(scores.end() - static_cast<std::ptrdiff_t>(take), scores.end(), 0.0) /
         static_cast<double>(take);
}

void DvrlConfig::validate() const {
  if (moving_window < 1) throw std::invalid_argument("dvrl: moving_window must be >= 1");
  if (hidden_dim < 1 || steps < 0 || batch_size < 1) {
    throw std::invalid_argument("dvrl: bad config");
  }
}

std::vector<double> dvrl_lite(const Dataset& ds, const LogisticConfig& inner,
                              const DvrlConfig& cfg) {
  cfg.validate();
  Game game(ds, inner);
  const std::size_t n = game.train_ids.size();
  const Eigen::Index d = ds.features.cols();
  const std::size_t in_dim = static_cast<std::size_t>(d) + static_cast<std::size_t>(ds.num_classes);

  // feature (+) one-hot noisy label, the same record view the agent sees
  auto record_matrix = [&](const std::vector<int>& locals) {
    Eigen::MatrixXd x(static_cast<Eigen::Index>(locals.size()),
                      static_cast<Eigen::Index>(in_dim));
    x.rightCols(ds.num_classes).setZero();
    for (std::size_t i = 0; i < locals.size(); ++i) {
      const int id = game.train_ids[static_cast<std::size_t>(locals[i])];
      x.row(static_cast<Eigen::Index>(i)).head(d) = ds.features.row(id);
      x(static_cast<Eigen::Index>(i), d + ds.labels[static_cast<std::size_t>(id)]) = 1.0;
    }
    return x;
  };

  Rng rng(cfg.seed);
  const double bound1 = 1.0 / std::sqrt(static_cast<double>(in_dim));
  const double bound2 = 1.0 / std::sqrt(static_cast<double>(cfg.hidden_dim));
  auto rand_mat = [&](std::size_t r, std::size_t c, double bound) {
    std::vector<double> v(r * c);
    for (auto& x : v) x = uniform(rng, -bound, bound);
    return Tensor::from({r, c}, std::move(v), true);
  };
  Tensor w1 = rand_mat(in_dim, static_cast<std::size_t>(cfg.hidden_dim), bound1);
  Tensor b1 = Tensor::zeros({1, static_cast<std::size_t>(cfg.hidden_dim)}, true);
  Tensor w2 = rand_mat(static_cast<std::size_t>(cfg.hidden_dim), 1, bound2);
  Tensor b2 = Tensor::zeros({1, 1}, true);
  Adam opt({w1, b1, w2, b2}, {.lr = cfg.lr});

  auto probs_for = [&](const Eigen::MatrixXd& x) {
    Tensor h = tanh_(add(matmul(as_tensor(x), w1), b1));
    return sigmoid(add(matmul(h, w2), b2));
  };

  std::vector<double> history;
  const auto batch = std::min(static_cast<std::size_t>(cfg.batch_size), n);
  for (int step = 0; step < cfg.steps; ++step) {
    const std::vector<int> locals = sample_without_replacement(rng, n, batch);
    Tensor p = probs_for(record_matrix(locals));
    std::vector<double> taken(batch);
    std::vector<int> selected;
    for (std::size_t i = 0; i < batch; ++i) {
      taken[i] = uniform01(rng) < p.data()[i] ? 1.0 : 0.0;
      if (taken[i] > 0) selected.push_back(locals[i]);
    }
    const double score = game.value(selected);
    const double baseline =
        history.empty() ? score : windowed_baseline(history, cfg.moving_window);
    const double reward = score - baseline;
    history.push_back(score);

    Tensor pc = clip(p, 1e-7, 1.0 - 1e-7);
    Tensor a = Tensor::from({batch, 1}, std::move(taken));
    Tensor logprob = add(mul(a, log_(pc)),
                         mul(add_scalar(neg(a), 1.0), log_(add_scalar(neg(pc), 1.0))));
    Tensor loss = mul_scalar(mean_all(logprob), -reward);
    opt.zero_grad();
    backward(loss);
    opt.step();
  }

  std::vector<int> all(n);
  std::iota(all.begin(), all.end(), 0);
  const Tensor p = probs_for(record_matrix(all));
  return {p.data().begin(), p.data().end()};
}

SweepResult threshold_sweep(const std::vector<double>& values, const Dataset& ds,
                            const LogisticConfig& inner) {
  const std::vector<int> train_ids = ds.indices_of(Split::train);
  if (values.size() != train_ids.size()) {
    throw std::invalid_argument("threshold_sweep: values length " +
                                std::to_string(values.size()) + " != train size " +
                                std::to_string(train_ids.size()));
  }
  const std::vector<int> test_ids = ds.indices_of(Split::test);
  Game game(ds, inner);

  std::vector<double> sorted = values;
  std::sort(sorted.begin(), sorted.end());
  std::vector<double> candidates;
  for (int q = 0; q <= 20; ++q) {
    const auto idx = static_cast<std::size_t>(
        std::llround(static_cast<double>(q) / 20.0 * static_cast<double>(sorted.size() - 1)));
    candidates.push_back(sorted[idx]);
  }
  std::sort(candidates.begin(), candidates.end());
  candidates.erase(std::unique(candidates.begin(), candidates.end()), candidates.end());

  SweepResult result;
  double best_score = -1.0;
  std::size_t best_idx = 0;
  for (double thr : candidates) {
    std::vector<int> selected_local;
    for (std::size_t i = 0; i < values.size(); ++i) {
      if (values[i] >= thr) selected_local.push_back(static_cast<int>(i));
    }
    double score = 0.0;
    bool usable = !selected_local.empty();
    if (usable) {
      std::vector<int> ids;
      for (int l : selected_local) ids.push_back(train_ids[static_cast<std::size_t>(l)]);
      try {
        const InnerModel m =
            fit_inner(ds.rows(ids), ds.labels_of(ids), ds.num_classes, inner);
        score = accuracy(m, game.val_x, game.val_y);
      } catch (const SingleClassError&) {
        usable = false;
      } catch (const EmptyDataError&) {
        usable = false;
      }
    }
    result.thresholds_tried.push_back(thr);
    result.val_scores.push_back(usable ? score : 0.0);
    if (usable && score > best_score) {
      best_score = score;
      best_idx = result.thresholds_tried.size() - 1;
    }
  }
  result.best_threshold = result.thresholds_tried[best_idx];

  std::vector<int> winner_ids;
  for (std::size_t i = 0; i < values.size(); ++i) {
    if (values[i] >= result.best_threshold) winner_ids.push_back(train_ids[i]);
  }
  const InnerModel final_model =
      fit_inner(ds.rows(winner_ids), ds.labels_of(winner_ids), ds.num_classes, inner);
  result.final_test_score =
      test_ids.empty() ? 0.0
                       : accuracy(final_model, ds.rows(test_ids), ds.labels_of(test_ids));
  return result;
}

}  // namespace dvf
