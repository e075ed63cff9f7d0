#include <doctest.h>

#include <algorithm>
#include <cmath>

#include "dvforge/env.hpp"
#include "helpers.hpp"

using namespace dvf;

namespace {

EnvConfig small_cfg(int state_size) {
  EnvConfig cfg;
  cfg.state_size = state_size;
  return cfg;
}

}  // namespace

TEST_SUITE_BEGIN("valuation_env");

TEST_CASE("insufficient train data is rejected") {
  const Dataset ds = dvftest::make_two_gaussians(10, 10, 0, 2, 1);
  ValuationEnv env(ds, small_cfg(50));
  Rng rng(1);
  CHECK_THROWS_AS(env.sample_state(rng), InsufficientDataError);
}

TEST_CASE("N == train size makes the state a permutation of all ids") {
  const Dataset ds = dvftest::make_two_gaussians(24, 12, 0, 2, 2);
  ValuationEnv env(ds, small_cfg(24));
  Rng rng(5);
  const StateBatch s = env.sample_state(rng);
  std::vector<int> ids = s.indices;
  std::sort(ids.begin(), ids.end());
  CHECK(ids == ds.indices_of(Split::train));
}

TEST_CASE("sampling is deterministic under a fixed seed and duplicate-free") {
  const Dataset ds = dvftest::make_two_gaussians(40, 12, 0, 3, 3);
  ValuationEnv env(ds, small_cfg(16));
  Rng r1(99), r2(99);
  const StateBatch a = env.sample_state(r1);
  const StateBatch b = env.sample_state(r2);
  CHECK(a.indices == b.indices);
  CHECK(a.baseline_score == b.baseline_score);

  std::vector<int> ids = a.indices;
  std::sort(ids.begin(), ids.end());
  CHECK(std::adjacent_find(ids.begin(), ids.end()) == ids.end());
}

TEST_CASE("baseline score matches an independent fit on the same rows") {
  const Dataset ds = dvftest::make_two_gaussians(40, 20, 0, 3, 4);
  ValuationEnv env(ds, small_cfg(20));
  Rng rng(7);
  const StateBatch s = env.sample_state(rng);

  const InnerModel m = fit_inner(ds.rows(s.indices), ds.labels_of(s.indices), 2, {});
  const auto val_ids = ds.indices_of(Split::validation);
  const double expect = accuracy(m, ds.rows(val_ids), ds.labels_of(val_ids));
  CHECK(s.baseline_score == expect);
  CHECK(s.baseline_score >= 0.0);
  CHECK(s.baseline_score <= 1.0);
}

TEST_CASE("state vectors are features concatenated with one-hot labels") {
  const Dataset ds = dvftest::make_two_gaussians(12, 6, 0, 3, 6);
  ValuationEnv env(ds, small_cfg(12));
  Rng rng(2);
  const StateBatch s = env.sample_state(rng);
  REQUIRE(s.vectors.cols() == 5);  // d=3 + 2 classes
  for (std::size_t i = 0; i < s.indices.size(); ++i) {
    const int id = s.indices[i];
    for (int j = 0; j < 3; ++j) {
      CHECK(s.vectors(static_cast<Eigen::Index>(i), j) == ds.features(id, j));
    }
    const int lab = ds.labels[static_cast<std::size_t>(id)];
    CHECK(s.vectors(static_cast<Eigen::Index>(i), 3 + lab) == 1.0);
    CHECK(s.vectors(static_cast<Eigen::Index>(i), 3 + (1 - lab)) == 0.0);
  }
}

TEST_CASE("step outcomes") {
  const Dataset ds = dvftest::make_two_gaussians(40, 20, 0, 3, 8);
  ValuationEnv env(ds, small_cfg(20));
  Rng rng(11);
  const StateBatch s = env.sample_state(rng);

  SUBCASE("all-ones mask gives reward exactly 0") {
    const StepOutcome out = env.step(s, std::vector<std::uint8_t>(20, 1));
    CHECK(out.reward == 0.0);
    CHECK(out.selected_count == 20);
    CHECK_FALSE(out.degenerate);
  }
  SUBCASE("empty mask is degenerate with reward -baseline") {
    const StepOutcome out = env.step(s, std::vector<std::uint8_t>(20, 0));
    CHECK(out.degenerate);
    CHECK(out.reward == -s.baseline_score);
    CHECK(out.selected_count == 0);
    CHECK(out.selected_score == 0.0);
  }
  SUBCASE("single-class selection is degenerate") {
    std::vector<std::uint8_t> mask(20, 0);
    for (std::size_t i = 0; i < 20; ++i) {
      if (ds.labels[static_cast<std::size_t>(s.indices[i])] == 1) mask[i] = 1;
    }
    // keep only class-1 rows
    const StepOutcome out = env.step(s, mask);
    CHECK(out.degenerate);
    CHECK(out.reward == -s.baseline_score);
  }
  SUBCASE("mask length mismatch throws") {
    CHECK_THROWS_AS(env.step(s, std::vector<std::uint8_t>(19, 1)), std::invalid_argument);
  }
  SUBCASE("step is deterministic and reward bounded") {
    std::vector<std::uint8_t> mask(20, 0);
    for (std::size_t i = 0; i < 20; i += 2) mask[i] = 1;
    const StepOutcome a = env.step(s, mask);
    const StepOutcome b = env.step(s, mask);
    CHECK(a.reward == b.reward);
    CHECK(a.reward >= -1.0);
    CHECK(a.reward <= 1.0);
    if (!a.degenerate) {
      CHECK(a.reward == doctest::Approx(a.selected_score - s.baseline_score).epsilon(1e-12));
    }
  }
}

TEST_CASE("oracle mask on noisy data earns positive reward") {
  // Separable task, then flip 30% of the sampled batch's labels. Keeping only
  // clean rows must beat fitting on everything.
  Dataset ds = dvftest::make_two_gaussians(200, 400, 0, 4, 21, 4.0);
  NoiseSpec noise;
  noise.rate = 0.3;
  noise.kind = NoiseKind::binary_flip;
  noise.seed = 5;
  ds = inject_noise(ds, noise);

  ValuationEnv env(ds, small_cfg(200));
  Rng rng(13);
  const StateBatch s = env.sample_state(rng);
  std::vector<std::uint8_t> clean_only(200, 0);
  for (std::size_t i = 0; i < 200; ++i) {
    clean_only[i] = ds.noise_mask[static_cast<std::size_t>(s.indices[i])] ? 0 : 1;
  }
  const StepOutcome out = env.step(s, clean_only);
  CHECK_FALSE(out.degenerate);
  CHECK(out.reward > 0.0);
}

TEST_CASE("reward_scale multiplies the raw delta") {
  const Dataset ds = dvftest::make_two_gaussians(30, 20, 0, 3, 30);
  EnvConfig cfg = small_cfg(30);
  ValuationEnv plain(ds, cfg);
  cfg.reward_scale = 10.0;
  ValuationEnv scaled(ds, cfg);
  Rng r1(4), r2(4);
  const StateBatch s1 = plain.sample_state(r1);
  const StateBatch s2 = scaled.sample_state(r2);
  std::vector<std::uint8_t> mask(30, 0);
  for (std::size_t i = 0; i < 30; i += 3) mask[i] = 1;
  const double a = plain.step(s1, mask).reward;
  const double b = scaled.step(s2, mask).reward;
  CHECK(b == doctest::Approx(10.0 * a).epsilon(1e-12));
}

TEST_SUITE_END();
