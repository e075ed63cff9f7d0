#include "dvforge/logistic.hpp"

#include <atomic>
#include <cmath>

namespace dvf {

namespace {

std::atomic<long long> g_fit_count{0};

double sigmoid(double z) { return 1.0 / (1.0 + std::exp(-z)); }

// mean NLL + (l2/2)*||w||^2, bias unregularized
double loss_at(const Eigen::MatrixXd& X, const Eigen::VectorXd& y, const Eigen::VectorXd& w,
               double b, double l2) {
  const Eigen::VectorXd z = X * w + Eigen::VectorXd::Constant(X.rows(), b);
  double nll = 0.0;
  for (Eigen::Index i = 0; i < z.size(); ++i) {
    // log(1+exp(-|z|)) form avoids overflow
    const double m = z[i] > 0 ? z[i] : 0.0;
    nll += m - y[i] * z[i] + std::log1p(std::exp(-std::abs(z[i])));
  }
  return nll / static_cast<double>(X.rows()) + 0.5 * l2 * w.squaredNorm();
}

}  // namespace

LogisticHead fit_binary(const Eigen::MatrixXd& features, const std::vector<int>& labels,
                        const LogisticConfig& cfg, std::vector<double>* loss_trace) {
  const Eigen::Index m = features.rows(), d = features.cols();
  if (m == 0) throw EmptyDataError("fit: empty training set");
  if (m < 2) throw EmptyDataError("fit: need at least 2 rows, got " + std::to_string(m));
  bool has0 = false, has1 = false;
  for (int l : labels) (l == 0 ? has0 : has1) = true;
  if (!has0 || !has1) throw SingleClassError("fit: labels are single-class");

  Eigen::VectorXd y(m);
  for (Eigen::Index i = 0; i < m; ++i) y[i] = labels[static_cast<std::size_t>(i)];

  Eigen::VectorXd w = Eigen::VectorXd::Zero(d);
  double b = 0.0;
  double loss = loss_at(features, y, w, b, cfg.l2);
  if (loss_trace) loss_trace->push_back(loss);

  for (int it = 0; it < cfg.fit_iters; ++it) {
    const Eigen::VectorXd z = features * w + Eigen::VectorXd::Constant(m, b);
    Eigen::VectorXd p(m), s(m);
    for (Eigen::Index i = 0; i < m; ++i) {
      p[i] = sigmoid(z[i]);
      s[i] = std::max(p[i] * (1.0 - p[i]), 1e-10);
    }
    const double inv_m = 1.0 / static_cast<double>(m);
    Eigen::VectorXd grad_w = features.transpose() * (p - y) * inv_m + cfg.l2 * w;
    const double grad_b = (p - y).sum() * inv_m;
    if (std::max(grad_w.lpNorm<Eigen::Infinity>(), std::abs(grad_b)) < cfg.tol * 1e-3) break;

    // Newton system over [w; b]
    Eigen::MatrixXd H(d + 1, d + 1);
    const Eigen::MatrixXd Xs = features.array().colwise() * s.array();
    H.topLeftCorner(d, d) = features.transpose() * Xs * inv_m;
    H.topLeftCorner(d, d).diagonal().array() += cfg.l2;
    H.topRightCorner(d, 1) = Xs.colwise().sum().transpose() * inv_m;
    H.bottomLeftCorner(1, d) = H.topRightCorner(d, 1).transpose();
    H(d, d) = s.sum() * inv_m;

    Eigen::VectorXd g(d + 1);
    g.head(d) = grad_w;
    g[d] = grad_b;
    Eigen::VectorXd delta = H.ldlt().solve(g);

    // halve until the regularized loss decreases
    double step = 1.0;
    double new_loss = loss;
    Eigen::VectorXd w_new = w;
    double b_new = b;
    for (int h = 0; h < 40; ++h) {
      w_new = w - step * delta.head(d);
      b_new = b - step * delta[d];
      new_loss = loss_at(features, y, w_new, b_new, cfg.l2);
      if (new_loss <= loss) break;
      step *= 0.5;
    }
    if (new_loss > loss) break;  // no descent possible, converged
    const double drop = loss - new_loss;
    w = w_new;
    b = b_new;
    loss = new_loss;
    if (loss_trace) loss_trace->push_back(loss);
    if (drop < cfg.tol * 1e-6) break;
  }
  return {w, b};
}

Eigen::VectorXd predict_proba(const LogisticHead& head, const Eigen::MatrixXd& features) {
  Eigen::VectorXd z = features * head.weights + Eigen::VectorXd::Constant(features.rows(), head.bias);
  for (Eigen::Index i = 0; i < z.size(); ++i) z[i] = sigmoid(z[i]);
  return z;
}

InnerModel fit_inner(const Eigen::MatrixXd& features, const std::vector<int>& labels,
                     int num_classes, const LogisticConfig& cfg) {
  g_fit_count.fetch_add(1, std::memory_order_relaxed);
  if (features.rows() == 0) throw EmptyDataError("fit: empty training set");

  InnerModel model;
  model.num_classes = num_classes;
  if (num_classes == 2) {
    model.heads.push_back(fit_binary(features, labels, cfg));
    model.head_class.push_back(1);
    return model;
  }
  std::vector<char> present(static_cast<std::size_t>(num_classes), 0);
  int distinct = 0;
  for (int l : labels) {
    if (!present[static_cast<std::size_t>(l)]) {
      present[static_cast<std::size_t>(l)] = 1;
      ++distinct;
    }
  }
  if (distinct < 2) throw SingleClassError("fit: labels are single-class");
  for (int c = 0; c < num_classes; ++c) {
    if (!present[static_cast<std::size_t>(c)]) continue;
    std::vector<int> yc(labels.size());
    for (std::size_t i = 0; i < labels.size(); ++i) yc[i] = labels[i] == c ? 1 : 0;
    model.heads.push_back(fit_binary(features, yc, cfg));
    model.head_class.push_back(c);
  }
  return model;
}

std::vector<int> predict(const InnerModel& model, const Eigen::MatrixXd& features) {
  if (features.rows() == 0) throw EmptyDataError("predict: empty evaluation set");
  std::vector<int> out(static_cast<std::size_t>(features.rows()));
  if (model.binary()) {
    const Eigen::VectorXd p = predict_proba(model.heads[0], features);
    for (Eigen::Index i = 0; i < p.size(); ++i) {
      out[static_cast<std::size_t>(i)] = p[i] > 0.5 ? 1 : 0;
    }
    return out;
  }
  Eigen::MatrixXd scores(features.rows(), static_cast<Eigen::Index>(model.heads.size()));
  for (std::size_t h = 0; h < model.heads.size(); ++h) {
    scores.col(static_cast<Eigen::Index>(h)) = predict_proba(model.heads[h], features);
  }
  for (Eigen::Index i = 0; i < features.rows(); ++i) {
    Eigen::Index best;
    scores.row(i).maxCoeff(&best);
    out[static_cast<std::size_t>(i)] = model.head_class[static_cast<std::size_t>(best)];
  }
  return out;
}

double accuracy(const InnerModel& model, const Eigen::MatrixXd& features,
                const std::vector<int>& labels) {
  if (features.rows() == 0) throw EmptyDataError("accuracy: empty evaluation set");
  const std::vector<int> pred = predict(model, features);
  std::size_t correct = 0;
  for (std::size_t i = 0; i < pred.size(); ++i) {
    if (pred[i] == labels[i]) ++correct;
  }
  return static_cast<double>(correct) / static_cast<double>(pred.size());
}

long long inner_fit_count() { return g_fit_count.load(std::memory_order_relaxed); }
void reset_inner_fit_count() { g_fit_count.store(0, std::memory_order_relaxed); }

}  // namespace dvf
