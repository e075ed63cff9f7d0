#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <numeric>

#include "dvforge/baselines.hpp"
#include "dvforge/report.hpp"
#include "helpers.hpp"

using namespace dvf;

namespace {

// A dataset whose train split duplicates every record once.
Dataset duplicated_dataset(std::size_t per_class, std::uint64_t seed) {
  const Dataset base = dvftest::make_two_gaussians(2 * per_class, 40, 0, 2, seed);
  Dataset ds = base;
  const std::size_t m = base.size();
  const std::size_t train = 2 * per_class;
  ds.features.conservativeResize(static_cast<Eigen::Index>(m + train), Eigen::NoChange);
  for (std::size_t i = 0; i < train; ++i) {
    ds.features.row(static_cast<Eigen::Index>(m + i)) = base.features.row(static_cast<Eigen::Index>(i));
    ds.labels.push_back(base.labels[i]);
    ds.split.push_back(Split::train);
  }
  return ds;
}

// Separable data with one planted mislabeled train point.
Dataset planted_mislabel(std::size_t per_class, std::uint64_t seed, std::size_t& bad_id) {
  Dataset ds = dvftest::make_two_gaussians(2 * per_class, 60, 0, 2, seed, 5.0);
  bad_id = 4;  // an arbitrary train record
  ds.labels[bad_id] = 1 - ds.labels[bad_id];
  ds.noise_mask.assign(ds.size(), 0);
  ds.noise_mask[bad_id] = 1;
  return ds;
}

double game_value_full(const Dataset& ds) {
  const auto train = ds.indices_of(Split::train);
  const auto val = ds.indices_of(Split::validation);
  const InnerModel m = fit_inner(ds.rows(train), ds.labels_of(train), ds.num_classes, {});
  return accuracy(m, ds.rows(val), ds.labels_of(val));
}

}  // namespace

TEST_SUITE_BEGIN("baseline_valuators");

TEST_CASE("loo: fit count is exactly N+1") {
  const Dataset ds = dvftest::make_two_gaussians(12, 20, 0, 2, 3);
  reset_inner_fit_count();
  loo_values(ds, {});
  CHECK(inner_fit_count() == 13);
}

TEST_CASE("loo: full duplication makes every value negligible") {
  const Dataset ds = duplicated_dataset(6, 4);
  const auto values = loo_values(ds, {});
  const double bound = 2.0 / 40.0;  // 2 / |validation|
  for (double v : values) CHECK(std::abs(v) < bound);
}

TEST_CASE("loo: a planted mislabeled point gets the minimum value") {
  for (std::uint64_t seed = 0; seed < 10; ++seed) {
    std::size_t bad_id = 0;
    const Dataset ds = planted_mislabel(10, 100 + seed, bad_id);
    const auto values = loo_values(ds, {});
    const auto train = ds.indices_of(Split::train);
    std::size_t bad_local = 0;
    for (std::size_t i = 0; i < train.size(); ++i) {
      if (static_cast<std::size_t>(train[i]) == bad_id) bad_local = i;
    }
    const double bad_value = values[bad_local];
    for (std::size_t i = 0; i < values.size(); ++i) {
      INFO("seed " << seed << " record " << i);
      CHECK(bad_value <= values[i]);
    }
  }
}

TEST_CASE("exact shapley") {
  const Dataset ds = dvftest::make_two_gaussians(6, 30, 0, 2, 7);

  SUBCASE("efficiency: values sum to v(full) - v(empty)") {
    const auto phi = exact_shapley(ds, {});
    const double total = std::accumulate(phi.begin(), phi.end(), 0.0);
    CHECK(total == doctest::Approx(game_value_full(ds)).epsilon(1e-9));
  }
  SUBCASE("symmetry: duplicated records share a value") {
    Dataset dup = ds;
    dup.features.row(5) = dup.features.row(2);
    dup.labels[5] = dup.labels[2];
    const auto phi = exact_shapley(dup, {});
    CHECK(phi[5] == doctest::Approx(phi[2]).epsilon(1e-9));
  }
  SUBCASE("N > 10 rejected") {
    const Dataset big = dvftest::make_two_gaussians(11, 10, 0, 2, 8);
    CHECK_THROWS_AS(exact_shapley(big, {}), std::invalid_argument);
  }
  SUBCASE("5-point case matches independent subset enumeration") {
    const Dataset five = dvftest::make_two_gaussians(5, 20, 0, 2, 11);
    const auto phi = exact_shapley(five, {});

    // independent oracle: permutation enumeration (5! = 120 orders)
    std::vector<int> perm{0, 1, 2, 3, 4};
    std::vector<double> sums(5, 0.0);
    const auto train = five.indices_of(Split::train);
    const auto val = five.indices_of(Split::validation);
    auto v_of = [&](const std::vector<int>& locals) {
      if (locals.empty()) return 0.0;
      std::vector<int> ids;
      for (int l : locals) ids.push_back(train[static_cast<std::size_t>(l)]);
      try {
        const InnerModel m = fit_inner(five.rows(ids), five.labels_of(ids), 2, {});
        return accuracy(m, five.rows(val), five.labels_of(val));
      } catch (const SingleClassError&) {
        return 0.0;
      } catch (const EmptyDataError&) {
        return 0.0;
      }
    };
    int orders = 0;
    do {
      std::vector<int> prefix;
      double prev = 0.0;
      for (int l : perm) {
        prefix.push_back(l);
        const double cur = v_of(prefix);
        sums[static_cast<std::size_t>(l)] += cur - prev;
        prev = cur;
      }
      ++orders;
    } while (std::next_permutation(perm.begin(), perm.end()));
    REQUIRE(orders == 120);
    for (std::size_t i = 0; i < 5; ++i) {
      CHECK(phi[i] == doctest::Approx(sums[i] / 120.0).epsilon(1e-9));
    }
  }
}

TEST_CASE("tmc shapley") {
  const Dataset ds = dvftest::make_two_gaussians(6, 30, 0, 2, 17);

  SUBCASE("config guards") {
    ShapleyConfig bad;
    bad.max_permutations = 0;
    CHECK_THROWS_AS(tmc_shapley(ds, {}, bad), std::invalid_argument);
    bad = {};
    bad.truncation_tol = 0.0;
    CHECK_THROWS_AS(tmc_shapley(ds, {}, bad), std::invalid_argument);
  }
  SUBCASE("single permutation equals its raw marginals and is reproducible") {
    ShapleyConfig cfg;
    cfg.max_permutations = 1;
    cfg.truncation_tol = 1e-9;  // effectively no truncation
    cfg.convergence_window = 5;
    cfg.seed = 33;
    const auto a = tmc_shapley(ds, {}, cfg);
    const auto b = tmc_shapley(ds, {}, cfg);
    CHECK(a == b);
    // one permutation of 6 marginals sums telescopically to v(full)
    CHECK(std::accumulate(a.begin(), a.end(), 0.0) ==
          doctest::Approx(game_value_full(ds)).epsilon(1e-9));
  }
  SUBCASE("infinite truncation tolerance credits only the first marginal") {
    ShapleyConfig cfg;
    cfg.max_permutations = 1;
    cfg.truncation_tol = std::numeric_limits<double>::infinity();
    cfg.seed = 2;
    const auto vals = tmc_shapley(ds, {}, cfg);
    int nonzero = 0;
    for (double v : vals) {
      if (v != 0.0) ++nonzero;
    }
    CHECK(nonzero <= 1);
  }
  SUBCASE("converges to the exact values and fit count is bounded") {
    const auto exact = exact_shapley(ds, {});
    ShapleyConfig cfg;
    cfg.max_permutations = 2000;
    cfg.truncation_tol = 1e-9;
    cfg.convergence_tol = 1e-9;  // force all permutations
    cfg.seed = 5;
    reset_inner_fit_count();
    const auto approx = tmc_shapley(ds, {}, cfg);
    CHECK(inner_fit_count() <= 2000 * 6 + 1);
    for (std::size_t i = 0; i < 6; ++i) {
      CHECK(std::abs(approx[i] - exact[i]) < 0.05);
    }
  }
  SUBCASE("more permutations tighten the exact-oracle gap on average") {
    const auto exact = exact_shapley(ds, {});
    auto mean_err = [&](int perms) {
      double total = 0.0;
      for (std::uint64_t seed = 0; seed < 10; ++seed) {
        ShapleyConfig cfg;
        cfg.max_permutations = perms;
        cfg.truncation_tol = 1e-9;
        cfg.convergence_tol = 1e-12;
        cfg.seed = seed;
        const auto vals = tmc_shapley(ds, {}, cfg);
        for (std::size_t i = 0; i < 6; ++i) total += std::abs(vals[i] - exact[i]);
      }
      return total / 60.0;
    };
    CHECK(mean_err(400) <= mean_err(10));
  }
}

TEST_CASE("dvrl lite") {
  SUBCASE("window guard") {
    DvrlConfig cfg;
    cfg.moving_window = 0;
    const Dataset ds = dvftest::make_two_gaussians(10, 10, 0, 2, 1);
    CHECK_THROWS_AS(dvrl_lite(ds, {}, cfg), std::invalid_argument);
  }
  SUBCASE("moving average of [0.8, 0.6] with W=2 is 0.7") {
    CHECK(windowed_baseline({0.8, 0.6}, 2) == doctest::Approx(0.7).epsilon(1e-12));
    CHECK(windowed_baseline({0.5, 0.8, 0.6}, 2) == doctest::Approx(0.7).epsilon(1e-12));
    CHECK(windowed_baseline({0.8}, 5) == doctest::Approx(0.8).epsilon(1e-12));
    CHECK_THROWS_AS(windowed_baseline({}, 2), std::invalid_argument);
  }
  SUBCASE("separates planted noise with value AUC above 0.6") {
    Dataset ds = dvftest::make_two_gaussians(60, 200, 0, 4, 77, 4.0);
    NoiseSpec noise;
    noise.rate = 0.3;
    noise.kind = NoiseKind::binary_flip;
    noise.seed = 3;
    ds = inject_noise(ds, noise);

    DvrlConfig cfg;
    cfg.steps = 600;
    cfg.batch_size = 30;
    cfg.seed = 9;
    const auto values = dvrl_lite(ds, {}, cfg);

    const auto train = ds.indices_of(Split::train);
    std::vector<std::uint8_t> noisy;
    for (int id : train) noisy.push_back(ds.noise_mask[static_cast<std::size_t>(id)]);
    CHECK(roc_auc(values, noisy).auc > 0.6);
  }
}

TEST_CASE("threshold sweep") {
  SUBCASE("constant values collapse to the baseline fit") {
    const Dataset ds = dvftest::make_two_gaussians(20, 30, 10, 2, 21);
    const SweepResult r = threshold_sweep(std::vector<double>(20, 0.5), ds, {});
    CHECK(r.thresholds_tried.size() == 1);
    CHECK(r.val_scores[0] == doctest::Approx(game_value_full(ds)).epsilon(1e-12));
  }
  SUBCASE("perfectly separating values exclude exactly the noise") {
    std::size_t bad_id = 0;
    Dataset ds = planted_mislabel(10, 5, bad_id);
    // give test rows too
    for (std::size_t i = 0; i < ds.split.size(); ++i) {
      if (ds.split[i] == Split::validation && i % 3 == 0) ds.split[i] = Split::test;
    }
    const auto train = ds.indices_of(Split::train);
    std::vector<double> values;
    for (int id : train) {
      values.push_back(ds.noise_mask[static_cast<std::size_t>(id)] ? 0.1 : 0.9);
    }
    const SweepResult r = threshold_sweep(values, ds, {});
    CHECK(r.best_threshold > 0.1);
    CHECK(r.best_threshold <= 0.9);
    CHECK(r.final_test_score == 1.0);  // separable once the mislabel is gone
  }
  SUBCASE("best validation score is never below the no-filter baseline") {
    Rng rng(6);
    for (int trial = 0; trial < 5; ++trial) {
      const Dataset ds = dvftest::make_two_gaussians(20, 40, 10, 3, 60 + trial, 1.0);
      std::vector<double> values;
      for (int i = 0; i < 20; ++i) values.push_back(uniform01(rng));
      const SweepResult r = threshold_sweep(values, ds, {});
      const double best = *std::max_element(r.val_scores.begin(), r.val_scores.end());
      CHECK(best >= game_value_full(ds) - 1e-12);
      // ties resolve to the smallest threshold
      for (std::size_t i = 0; i < r.thresholds_tried.size(); ++i) {
        if (r.val_scores[i] == best) {
          CHECK(r.best_threshold == r.thresholds_tried[i]);
          break;
        }
      }
    }
  }
  SUBCASE("degenerate thresholds are recorded with score 0") {
    // top value is a lone class-1 record: the 100% quantile threshold keeps
    // only that record, which cannot be fit
    Dataset ds = dvftest::make_two_gaussians(10, 20, 0, 2, 44);
    const auto train = ds.indices_of(Split::train);
    std::vector<double> values(10, 0.2);
    values[3] = 0.95;
    const SweepResult r = threshold_sweep(values, ds, {});
    REQUIRE(r.thresholds_tried.size() == 2);
    CHECK(r.val_scores[1] == 0.0);
    CHECK(r.best_threshold == 0.2);
  }
  SUBCASE("length mismatch rejected") {
    const Dataset ds = dvftest::make_two_gaussians(10, 10, 0, 2, 3);
    CHECK_THROWS_AS(threshold_sweep(std::vector<double>(9, 0.5), ds, {}),
                    std::invalid_argument);
  }
}

TEST_SUITE_END();
