// L2-regularized logistic regression, deterministic full-batch Newton with
// step halving. One-vs-rest for multiclass. This is the fast supervised model
// scored inside every valuation loop.

#pragma once

#include <Eigen/Dense>

#include <stdexcept>
#include <vector>

namespace dvf {

struct SingleClassError : std::runtime_error {
  using std::runtime_error::runtime_error;
};
struct EmptyDataError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

struct LogisticConfig {
  double l2 = 1e-4;
  int fit_iters = 100;
  double tol = 1e-6;
  int seed = 0;  // unused by the deterministic solver; kept for config parity
};

struct LogisticHead {
  Eigen::VectorXd weights;
  double bias = 0.0;
};

// Multiclass model: one head per class present in the training labels.
// Absent classes simply never win the argmax.
struct InnerModel {
  int num_classes = 2;
  std::vector<LogisticHead> heads;
  std::vector<int> head_class;
  bool binary() const { return num_classes == 2; }
};

LogisticHead fit_binary(const Eigen::MatrixXd& features, const std::vector<int>& labels,
                        const LogisticConfig& cfg,
                        std::vector<double>* loss_trace = nullptr);

Eigen::VectorXd predict_proba(const LogisticHead& head, const Eigen::MatrixXd& features);

// Throws EmptyDataError (M == 0 or M < 2) and SingleClassError (constant labels).
InnerModel fit_inner(const Eigen::MatrixXd& features, const std::vector<int>& labels,
                     int num_classes, const LogisticConfig& cfg);

std::vector<int> predict(const InnerModel& model, const Eigen::MatrixXd& features);

// Fraction of predictions equal to labels; binary threshold 0.5.
double accuracy(const InnerModel& model, const Eigen::MatrixXd& features,
                const std::vector<int>& labels);

// Instrumentation for the timing harness: fit_inner calls since last reset.
long long inner_fit_count();
void reset_inner_fit_count();

}  // namespace dvf
