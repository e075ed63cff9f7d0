// Shared test utilities: finite-difference gradient oracle and synthetic
// dataset builders.

#pragma once

#include <cmath>
#include <functional>
#include <string>
#include <vector>

#include "dvforge/data.hpp"
#include "dvforge/rng.hpp"
#include "dvforge/tensor.hpp"

namespace dvftest {

// Central finite differences against autodiff, parameter by parameter.
// `loss_fn` must rebuild the whole graph from current parameter data.
// Returns the worst relative error (|ad - fd| / max(1e-8, |ad|, |fd|)).
inline double finite_diff_worst_error(const std::vector<dvf::Tensor>& params,
                                      const std::function<dvf::Tensor()>& loss_fn,
                                      double h = 1e-5) {
  for (auto p : params) p.zero_grad();
  dvf::Tensor loss = loss_fn();
  dvf::backward(loss);
  std::vector<std::vector<double>> analytic;
  for (auto p : params) analytic.push_back(p.grad());

  double worst = 0.0;
  for (std::size_t pi = 0; pi < params.size(); ++pi) {
    dvf::Tensor p = params[pi];
    for (std::size_t i = 0; i < p.size(); ++i) {
      const double orig = p.data()[i];
      p.data()[i] = orig + h;
      const double up = loss_fn().value();
      p.data()[i] = orig - h;
      const double down = loss_fn().value();
      p.data()[i] = orig;
      const double fd = (up - down) / (2.0 * h);
      const double ad = analytic[pi][i];
      const double denom = std::max({1e-8, std::abs(ad), std::abs(fd)});
      worst = std::max(worst, std::abs(ad - fd) / denom);
    }
  }
  return worst;
}

inline dvf::Tensor random_tensor(dvf::Rng& rng, std::vector<std::size_t> shape,
                                 bool requires_grad = true, double scale = 1.0) {
  std::size_t n = 1;
  for (auto d : shape) n *= d;
  std::vector<double> v(n);
  for (auto& x : v) x = dvf::uniform(rng, -scale, scale);
  return dvf::Tensor::from(std::move(shape), std::move(v), requires_grad);
}

// Two-Gaussian binary task: class c centered at (2c-1)*separation/sqrt(d)
// in every coordinate, unit variance. Split tags assigned contiguously.
inline dvf::Dataset make_two_gaussians(std::size_t n_train, std::size_t n_val,
                                       std::size_t n_test, std::size_t d, std::uint64_t seed,
                                       double separation = 2.0) {
  const std::size_t m = n_train + n_val + n_test;
  dvf::Dataset ds;
  ds.features.resize(static_cast<Eigen::Index>(m), static_cast<Eigen::Index>(d));
  ds.labels.resize(m);
  ds.split.resize(m);
  ds.num_classes = 2;
  dvf::Rng rng(seed);
  const double mu = separation / std::sqrt(static_cast<double>(d));
  for (std::size_t i = 0; i < m; ++i) {
    const int label = static_cast<int>(i % 2);
    ds.labels[i] = label;
    const double center = label == 1 ? mu : -mu;
    for (std::size_t j = 0; j < d; ++j) {
      ds.features(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)) =
          dvf::normal(rng, center, 1.0);
    }
    ds.split[i] = i < n_train                ? dvf::Split::train
                  : i < n_train + n_val      ? dvf::Split::validation
                                             : dvf::Split::test;
  }
  ds.provenance.push_back("synthetic two-gaussian seed=" + std::to_string(seed));
  return ds;
}

// Well-separated 1-D clusters; trivially linearly separable.
inline dvf::Dataset make_separable_1d(std::size_t per_class, std::uint64_t seed) {
  dvf::Dataset ds;
  const std::size_t m = 2 * per_class;
  ds.features.resize(static_cast<Eigen::Index>(m), 1);
  ds.labels.resize(m);
  ds.split.assign(m, dvf::Split::train);
  ds.num_classes = 2;
  dvf::Rng rng(seed);
  for (std::size_t i = 0; i < m; ++i) {
    const int label = static_cast<int>(i % 2);
    ds.labels[i] = label;
    ds.features(static_cast<Eigen::Index>(i), 0) =
        (label == 1 ? 1.0 : -1.0) + dvf::uniform(rng, -0.2, 0.2);
  }
  return ds;
}

}  // namespace dvftest
