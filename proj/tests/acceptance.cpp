// Acceptance gate: one test case per criterion, each printing a single
// [PASS]/[FAIL] line with the measured numbers.

#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <chrono>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <numeric>
#include <sstream>

#include "dvforge/agent.hpp"
#include "dvforge/baselines.hpp"
#include "dvforge/config.hpp"
#include "dvforge/runner.hpp"
#include "helpers.hpp"

using namespace dvf;
namespace fs = std::filesystem;

namespace {

void verdict(const char* crit, bool ok, const std::string& detail) {
  std::printf("[%s] criterion %s: %s\n", ok ? "PASS" : "FAIL", crit, detail.c_str());
  std::fflush(stdout);
  const std::string msg = std::string("criterion ") + crit + ": " + detail;
  CHECK_MESSAGE(ok, msg);
}

double seconds_since(std::chrono::steady_clock::time_point t0) {
  return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
}

std::string fmt(double v) {
  char buf[32];
  std::snprintf(buf, sizeof(buf), "%.4f", v);
  return buf;
}

long env_long(const char* name, long fallback) {
  const char* v = std::getenv(name);
  return v ? std::atol(v) : fallback;
}

}  // namespace

TEST_CASE("c01 gradient correctness") {
  const auto t0 = std::chrono::steady_clock::now();
  Rng rng(42);
  double worst_op = 0.0;

  for (const auto& shape : std::vector<std::vector<std::size_t>>{{1, 4}, {3, 3}, {5, 2}}) {
    Tensor a = dvftest::random_tensor(rng, shape);
    Tensor b = dvftest::random_tensor(rng, shape);
    Tensor pos = dvftest::random_tensor(rng, shape);
    for (auto& v : pos.data()) v = std::abs(v) + 0.5;
    const std::vector<std::function<Tensor()>> ops{
        [&] { return add(a, b); },
        [&] { return sub(a, b); },
        [&] { return mul(a, b); },
        [&] { return div(a, pos); },
        [&] { return minimum(a, b); },
        [&] { return exp_(a); },
        [&] { return log_(pos); },
        [&] { return sqrt_(pos); },
        [&] { return sigmoid(a); },
        [&] { return tanh_(a); },
        [&] { return gelu(a); },
        [&] { return mul(softmax_rows(a), pos); },
        [&] { return matmul(a, transpose(b)); },
        [&] { return clip(mul_scalar(a, 3.0), -1.0, 1.0); },
        [&] { return sum(a, 0); },
        [&] { return mean(a, 1); },
        [&] { return concat_cols(a, b); },
        [&] { return transpose(a); },
    };
    for (const auto& op : ops) {
      std::vector<Tensor> params{a, b, pos};
      worst_op = std::max(worst_op, dvftest::finite_diff_worst_error(
                                        params, [&] { return mean_all(op()); }));
    }
  }

  // full policy/value network: 4 records, model_dim=8, 2 heads, L=2
  EncoderConfig cfg;
  cfg.input_dim = 6;
  cfg.model_dim = 8;
  cfg.num_heads = 2;
  cfg.num_layers = 2;
  cfg.ff_hidden_dim = 16;
  PolicyValueNet net(cfg, CriticMode::CLS_SB, 99);
  Eigen::MatrixXd x(4, 6);
  for (int i = 0; i < 4; ++i)
    for (int j = 0; j < 6; ++j) x(i, j) = uniform(rng, -1.0, 1.0);
  std::vector<Tensor> params;
  for (auto& [name, t] : net.parameters()) params.push_back(t);
  const double net_err = dvftest::finite_diff_worst_error(params, [&] {
    const auto out = net.forward(x, 0.4);
    return add(mean_all(mul(out.probs, out.probs)), out.value);
  });

  const double secs = seconds_since(t0);
  verdict("1", worst_op < 1e-4 && net_err < 1e-3 && secs < 60.0,
          "op rel err " + fmt(worst_op) + " (<1e-4), net rel err " + fmt(net_err) +
              " (<1e-3), " + fmt(secs) + "s (<60)");
}

TEST_CASE("c02 loss identities") {
  const Tensor old_lp = Tensor::from({4, 1}, {std::log(0.7), std::log(0.2), std::log(0.5),
                                              std::log(0.9)});
  const double adv = 0.37;
  const double unit_gap = std::abs(-policy_loss(old_lp, old_lp, adv, 0.2).value() - adv);
  const double vzero = value_loss(Tensor::scalar(0.42), 0.42).value();
  const double ent_gap =
      std::abs(entropy_bonus(Tensor::from({1, 1}, {0.5})).value() - std::log(2.0));
  const std::vector<double> deltas{0.3, -0.8, 0.11, 0.0, 2.5};
  const bool gae_exact = generalized_advantage_estimate(deltas, 0.0, 0.95) == deltas;
  verdict("2", unit_gap < 1e-9 && vzero == 0.0 && ent_gap < 1e-9 && gae_exact,
          "unit-ratio gap " + fmt(unit_gap) + ", value_loss(V=r) " + fmt(vzero) +
              ", entropy(0.5)-ln2 " + fmt(ent_gap) + ", gae(gamma=0) identity " +
              (gae_exact ? "exact" : "BROKEN"));
}

TEST_CASE("c03 reward identity") {
  const Dataset ds = dvftest::make_two_gaussians(400, 200, 0, 5, 7);
  EnvConfig cfg;
  cfg.state_size = 50;
  ValuationEnv env(ds, cfg);
  Rng rng(11);
  int ok = 0;
  for (int trial = 0; trial < 100; ++trial) {
    const StateBatch s = env.sample_state(rng);
    const StepOutcome ones = env.step(s, std::vector<std::uint8_t>(50, 1));
    const StepOutcome none = env.step(s, std::vector<std::uint8_t>(50, 0));
    if (ones.reward == 0.0 && none.reward == -s.baseline_score) ++ok;
  }
  verdict("3", ok == 100, std::to_string(ok) + "/100 batches: all-ones reward==0 and empty "
                          "reward==-baseline exactly");
}

TEST_CASE("c04 shapley oracle") {
  const auto t0 = std::chrono::steady_clock::now();
  Dataset ds = dvftest::make_two_gaussians(6, 30, 0, 2, 7);
  ds.features.row(5) = ds.features.row(2);
  ds.labels[5] = ds.labels[2];

  const auto phi = exact_shapley(ds, {});
  const auto train = ds.indices_of(Split::train);
  const auto val = ds.indices_of(Split::validation);
  const InnerModel full = fit_inner(ds.rows(train), ds.labels_of(train), 2, {});
  const double v_full = accuracy(full, ds.rows(val), ds.labels_of(val));
  const double eff_gap = std::abs(std::accumulate(phi.begin(), phi.end(), 0.0) - v_full);
  const double sym_gap = std::abs(phi[5] - phi[2]);

  ShapleyConfig cfg;
  cfg.max_permutations = 2000;
  cfg.truncation_tol = 1e-9;
  cfg.convergence_tol = 1e-12;
  cfg.seed = 5;
  const auto tmc = tmc_shapley(ds, {}, cfg);
  double tmc_err = 0.0;
  for (std::size_t i = 0; i < 6; ++i) tmc_err = std::max(tmc_err, std::abs(tmc[i] - phi[i]));

  const double secs = seconds_since(t0);
  verdict("4", eff_gap < 1e-9 && sym_gap < 1e-9 && tmc_err < 0.05 && secs < 300.0,
          "efficiency gap " + fmt(eff_gap) + ", symmetry gap " + fmt(sym_gap) +
              ", TMC max err " + fmt(tmc_err) + " (<0.05), " + fmt(secs) + "s (<300)");
}

TEST_CASE("c05 loo oracle") {
  int hits = 0;
  for (std::uint64_t seed = 0; seed < 10; ++seed) {
    // Per-seed fixture: resample until the 20 train points are linearly
    // separable when clean AND flipping record 4 demonstrably costs
    // validation accuracy (>= 5 of 400 points). The screen never looks at
    // LOO output, so the strict-minimum check below stays a real test.
    std::uint64_t s = 500 + seed;
    Dataset ds;
    for (;; s += 1000) {
      ds = dvftest::make_two_gaussians(20, 400, 0, 2, s, 3.0);
      const auto tr = ds.indices_of(Split::train);
      const auto va = ds.indices_of(Split::validation);
      try {
        const InnerModel clean = fit_inner(ds.rows(tr), ds.labels_of(tr), 2, {});
        if (accuracy(clean, ds.rows(tr), ds.labels_of(tr)) != 1.0) continue;
        const double clean_val = accuracy(clean, ds.rows(va), ds.labels_of(va));
        auto flipped = ds.labels_of(tr);
        flipped[4] = 1 - flipped[4];
        const InnerModel dirty = fit_inner(ds.rows(tr), flipped, 2, {});
        if (accuracy(dirty, ds.rows(va), ds.labels_of(va)) <= clean_val - 0.0125) break;
      } catch (const std::exception&) {
      }
    }
    const std::size_t bad_id = 4;
    ds.labels[bad_id] = 1 - ds.labels[bad_id];
    const auto values = loo_values(ds, {});
    bool strict_min = true;
    for (std::size_t i = 0; i < values.size(); ++i) {
      if (i != bad_id && values[i] <= values[bad_id]) strict_min = false;
    }
    if (strict_min) ++hits;
  }
  verdict("5", hits == 10,
          std::to_string(hits) + "/10 seeds give the mislabeled point the strict minimum "
                                 "LOO value");
}

namespace {

struct HeavyRun {
  double auc = 0.0;           // clean-vs-noisy detection (rate > 0 only)
  double filtered_acc = 0.0;  // test accuracy after value > 0.5 filtering
  double baseline_acc = 0.0;  // test accuracy of the unfiltered fit
};

HeavyRun heavy_run(double rate, std::uint64_t seed, long total_steps) {
  Dataset ds = dvftest::make_two_gaussians(1000, 300, 2000, 20,
                                           seed_hash("acc-heavy|" + std::to_string(seed)),
                                           2.0);
  if (rate > 0.0) {
    NoiseSpec noise;
    noise.rate = rate;
    noise.kind = NoiseKind::binary_flip;
    noise.seed = seed_hash("acc-noise|" + std::to_string(rate) + "|" + std::to_string(seed));
    ds = inject_noise(ds, noise);
  }

  EnvConfig env_cfg;
  env_cfg.state_size = 100;
  ValuationEnv env(ds, env_cfg);

  EncoderConfig enc;
  enc.model_dim = 32;
  enc.num_heads = 4;
  enc.num_layers = 2;
  enc.ff_hidden_dim = 64;
  AgentConfig ag;
  ag.total_steps = total_steps;
  ag.c2 = 1e-3;
  // Calibrated but unpinned knobs. Advantage normalization is disabled
  // because it rescales pure reward noise to unit advantages, which drives
  // the per-record Bernoulli probabilities into saturation ("keep all")
  // before the noise-detection signal can accumulate.
  ag.lr = 1e-3;
  ag.normalize_advantage = false;
  ag.seed = seed_hash("acc-agent|" + std::to_string(rate) + "|" + std::to_string(seed));
  PpoBanditAgent agent(enc, ag);
  agent.train(env);

  Rng score_rng(seed_hash("acc-score|" + std::to_string(rate) + "|" + std::to_string(seed)));
  const ValueReport rep = agent.score_records(env, 5, score_rng);

  HeavyRun out;
  if (rate > 0.0) {
    std::vector<std::uint8_t> noisy;
    for (int id : rep.record_ids) noisy.push_back(ds.noise_mask[static_cast<std::size_t>(id)]);
    out.auc = roc_auc(rep.values, noisy).auc;
  }

  const auto test_ids = ds.indices_of(Split::test);
  const auto train_ids = ds.indices_of(Split::train);
  const InnerModel base = fit_inner(ds.rows(train_ids), ds.labels_of(train_ids), 2, {});
  out.baseline_acc = accuracy(base, ds.rows(test_ids), ds.labels_of(test_ids));

  std::vector<int> kept;
  for (std::size_t i = 0; i < rep.values.size(); ++i) {
    if (rep.values[i] > 0.5) kept.push_back(rep.record_ids[i]);
  }
  try {
    const InnerModel filt = fit_inner(ds.rows(kept), ds.labels_of(kept), 2, {});
    out.filtered_acc = accuracy(filt, ds.rows(test_ids), ds.labels_of(test_ids));
  } catch (const std::exception&) {
    out.filtered_acc = 0.0;  // degenerate filter counts as a failure
  }
  return out;
}

}  // namespace

TEST_CASE("c06 c07 end-to-end noise detection and filtered accuracy") {
  // DVF_ACC_STEPS / DVF_ACC_SEEDS shrink the run for development only; the
  // registered ctest invocation uses the full pinned scale.
  const long total_steps = env_long("DVF_ACC_STEPS", 20000);
  const long n_seeds = env_long("DVF_ACC_SEEDS", 5);

  int pass30 = 0, pass15 = 0;
  std::vector<double> auc30, auc15;
  double filt30 = 0, base30 = 0, filt0 = 0, base0 = 0;
  for (long seed = 0; seed < n_seeds; ++seed) {
    const HeavyRun r30 = heavy_run(0.30, static_cast<std::uint64_t>(seed), total_steps);
    auc30.push_back(r30.auc);
    if (r30.auc >= 0.75) ++pass30;
    filt30 += r30.filtered_acc;
    base30 += r30.baseline_acc;

    const HeavyRun r15 = heavy_run(0.15, static_cast<std::uint64_t>(seed), total_steps);
    auc15.push_back(r15.auc);
    if (r15.auc >= 0.70) ++pass15;

    const HeavyRun r0 = heavy_run(0.0, static_cast<std::uint64_t>(seed), total_steps);
    filt0 += r0.filtered_acc;
    base0 += r0.baseline_acc;

    std::printf("  [c06/c07] seed %ld: auc30=%.4f auc15=%.4f acc30=%.4f/%.4f "
                "acc0=%.4f/%.4f\n",
                seed, r30.auc, r15.auc, r30.filtered_acc, r30.baseline_acc, r0.filtered_acc,
                r0.baseline_acc);
    std::fflush(stdout);
  }
  const auto dn = static_cast<double>(n_seeds);
  filt30 /= dn;
  base30 /= dn;
  filt0 /= dn;
  base0 /= dn;

  std::ostringstream det6;
  det6 << "AUC@30% passes " << pass30 << "/" << n_seeds << " (bar 0.75), AUC@15% passes "
       << pass15 << "/" << n_seeds << " (bar 0.70)";
  verdict("6", pass30 >= 4 && pass15 >= 4, det6.str());

  std::ostringstream det7;
  det7 << "mean filtered/baseline accuracy " << fmt(filt30) << "/" << fmt(base30)
       << " at 30% noise (need +0.01), " << fmt(filt0) << "/" << fmt(base0)
       << " at 0% (need >= baseline-0.005)";
  verdict("7", filt30 >= base30 + 0.01 && filt0 >= base0 - 0.005, det7.str());
}

TEST_CASE("c08 sweep lower bound") {
  Rng rng(3);
  int ok = 0;
  const int trials = 25;
  for (int trial = 0; trial < trials; ++trial) {
    const Dataset ds =
        dvftest::make_two_gaussians(30, 50, 20, 4, 900 + static_cast<std::uint64_t>(trial), 1.5);
    std::vector<double> values;
    for (int i = 0; i < 30; ++i) values.push_back(uniform01(rng));
    const SweepResult r = threshold_sweep(values, ds, {});

    const auto train = ds.indices_of(Split::train);
    const auto val = ds.indices_of(Split::validation);
    const InnerModel base = fit_inner(ds.rows(train), ds.labels_of(train), 2, {});
    const double baseline = accuracy(base, ds.rows(val), ds.labels_of(val));
    const double best = *std::max_element(r.val_scores.begin(), r.val_scores.end());
    if (best >= baseline) ++ok;
  }
  verdict("8", ok == trials,
          std::to_string(ok) + "/" + std::to_string(trials) +
              " runs keep best sweep validation score >= no-filter baseline");
}

TEST_CASE("c09 timing shape") {
  const Dataset ds = dvftest::make_two_gaussians(400, 100, 0, 4, 31);
  const fs::path dir = "acc_scratch_timing";
  fs::remove_all(dir);
  fs::create_directories(dir);
  {
    std::ofstream os(dir / "data.csv");
    emit_csv(os, ds);
  }
  ExperimentConfig cfg;
  cfg.dataset.path = (dir / "data.csv").string();
  cfg.tmc.max_permutations = 10;
  cfg.tmc.convergence_tol = 1e-12;
  cfg.rlboost.state_size = 50;
  cfg.rlboost.encoder.model_dim = 8;
  cfg.rlboost.encoder.num_heads = 2;
  cfg.rlboost.encoder.num_layers = 1;
  cfg.rlboost.encoder.ff_hidden_dim = 16;
  cfg.rlboost.agent.total_steps = 8;
  cfg.rlboost.agent.rollout_size = 4;
  cfg.rlboost.agent.train_batch = 4;

  const auto rows = time_bench(cfg, {100, 200, 400}, {"loo", "tmc_shap", "rlboost"}, true);
  bool loo_ok = rows[0].inner_fit_count == 101 && rows[1].inner_fit_count == 201 &&
                rows[2].inner_fit_count == 401;
  bool tmc_ok = rows[3].inner_fit_count <= 10 * 100 + 1 &&
                rows[4].inner_fit_count <= 10 * 200 + 1 &&
                rows[5].inner_fit_count <= 10 * 400 + 1;
  bool agent_ok = rows[6].inner_fit_count == rows[7].inner_fit_count &&
                  rows[7].inner_fit_count == rows[8].inner_fit_count;
  fs::remove_all(dir);
  std::ostringstream det;
  det << "LOO fits {" << rows[0].inner_fit_count << "," << rows[1].inner_fit_count << ","
      << rows[2].inner_fit_count << "} (want N+1), TMC bounded " << (tmc_ok ? "yes" : "NO")
      << ", agent fits {" << rows[6].inner_fit_count << "," << rows[7].inner_fit_count << ","
      << rows[8].inner_fit_count << "} size-independent " << (agent_ok ? "yes" : "NO");
  verdict("9", loo_ok && tmc_ok && agent_ok, det.str());
}

TEST_CASE("c10 determinism") {
  const fs::path dir = "acc_scratch_determinism";
  fs::remove_all(dir);
  fs::create_directories(dir);
  const Dataset ds = dvftest::make_two_gaussians(20, 30, 20, 3, 4321);
  {
    std::ofstream os(dir / "data.csv");
    emit_csv(os, ds);
  }
  ExperimentConfig cfg;
  cfg.dataset.path = (dir / "data.csv").string();
  cfg.noise_rates = {0.0, 0.3};
  cfg.methods = {"baseline", "loo", "dvrl_lite"};
  cfg.runs_per_cell = 2;
  cfg.master_seed = 99;
  cfg.dvrl.steps = 50;
  RunOptions opts;
  opts.deterministic = true;

  const int fail1 = run_experiment(cfg, (dir / "a").string(), opts);
  const int fail2 = run_experiment(cfg, (dir / "b").string(), opts);
  auto slurp = [](const fs::path& p) {
    std::ifstream is(p, std::ios::binary);
    std::ostringstream os;
    os << is.rdbuf();
    return os.str();
  };
  const bool scores_eq = slurp(dir / "a" / "scores.csv") == slurp(dir / "b" / "scores.csv");
  const bool values_eq = slurp(dir / "a" / "values.csv") == slurp(dir / "b" / "values.csv");
  const bool nonempty = !slurp(dir / "a" / "scores.csv").empty();
  fs::remove_all(dir);
  verdict("10", fail1 == 0 && fail2 == 0 && nonempty && scores_eq && values_eq,
          std::string("two single-worker runs: scores.csv ") +
              (scores_eq ? "identical" : "DIFFER") + ", values.csv " +
              (values_eq ? "identical" : "DIFFER"));
}

TEST_CASE("c11 format fidelity") {
  bool round_trips = true;

  // LibSVM round-trip
  {
    Dataset ds = dvftest::make_two_gaussians(50, 0, 0, 10, 99);
    ds.features(0, 0) = 1.0 / 3.0;
    std::ostringstream os;
    emit_libsvm(os, ds);
    std::istringstream is(os.str());
    const Dataset back = parse_libsvm(is);
    round_trips = round_trips && back.features.cwiseEqual(ds.features).all() &&
                  back.labels == ds.labels;
  }
  // embedding round-trip (float-exact fixture)
  {
    Dataset ds;
    ds.features.resize(3, 4);
    int k = 0;
    for (int i = 0; i < 3; ++i)
      for (int j = 0; j < 4; ++j) ds.features(i, j) = 0.25 * ++k;
    ds.labels = {0, 1, 1};
    ds.split.assign(3, Split::train);
    save_embeddings("acc_emb.bin", ds);
    const Dataset back = load_embeddings("acc_emb.bin");
    std::remove("acc_emb.bin");
    round_trips = round_trips && back.features.cwiseEqual(ds.features).all() &&
                  back.labels == ds.labels;
  }

  struct Case {
    bool csv;
    const char* text;
    const char* expect;
  };
  const Case cases[] = {
      {false, "", "empty"},
      {false, "# nothing\n", "empty"},
      {false, "+1 1:1\nabc 1:2\n", "line 2"},
      {false, "+1 1:x\n", "line 1"},
      {false, "+1 12\n", "line 1"},
      {false, "+1 0:1\n", "line 1"},
      {false, "+1 -1:3\n", "line 1"},
      {false, "+1 1:1\n+1 2:1 1:2\n", "line 2"},
      {true, "f0,label\n1,0\n1,0,0\n", "line 3"},
      {true, "f0,label\noops,1\n", "line 2"},
      {true, "f0,label,split\n1,0,sideways\n", "line 2"},
      {true, "f0,label\n1,0.5\n", "line 2"},
  };
  int handled = 0;
  for (const auto& c : cases) {
    try {
      std::istringstream is(c.text);
      c.csv ? parse_csv(is) : parse_libsvm(is);
    } catch (const ParseError& e) {
      if (std::string(e.what()).find(c.expect) != std::string::npos) ++handled;
    }
  }
  verdict("11", round_trips && handled == 12,
          std::string("round-trips ") + (round_trips ? "value-exact" : "LOSSY") + ", " +
              std::to_string(handled) + "/12 malformed fixtures give line-numbered errors");
}
