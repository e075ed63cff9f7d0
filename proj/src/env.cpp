#include "dvforge/env.hpp"

namespace dvf {

ValuationEnv::ValuationEnv(const Dataset& data, EnvConfig cfg) : data_(&data), cfg_(cfg) {
  train_ids_ = data.indices_of(Split::train);
  const std::vector<int> val_ids = data.indices_of(Split::validation);
  if (val_ids.empty()) throw InsufficientDataError("environment needs a validation split");
  val_features_ = data.rows(val_ids);
  val_labels_ = data.labels_of(val_ids);
}

int ValuationEnv::state_dim() const {
  return static_cast<int>(data_->features.cols()) + data_->num_classes;
}

StateBatch ValuationEnv::state_for(const std::vector<int>& ids) const {
  StateBatch s;
  s.indices = ids;
  const auto n = static_cast<Eigen::Index>(ids.size());
  const Eigen::Index d = data_->features.cols();
  s.vectors.resize(n, d + data_->num_classes);
  s.vectors.rightCols(data_->num_classes).setZero();
  for (Eigen::Index i = 0; i < n; ++i) {
    const int id = ids[static_cast<std::size_t>(i)];
    s.vectors.row(i).head(d) = data_->features.row(id);
    s.vectors(i, d + data_->labels[static_cast<std::size_t>(id)]) = 1.0;
  }
  const InnerModel base = fit_inner(data_->rows(ids), data_->labels_of(ids),
                                    data_->num_classes, cfg_.inner);
  s.baseline_score = accuracy(base, val_features_, val_labels_);
  return s;
}

StateBatch ValuationEnv::sample_state(Rng& rng) const {
  const auto n = static_cast<std::size_t>(cfg_.state_size);
  if (train_ids_.size() < n) {
    throw InsufficientDataError("train split has " + std::to_string(train_ids_.size()) +
                                " records, need " + std::to_string(n));
  }
  std::vector<int> ids;
  ids.reserve(n);
  for (int local : sample_without_replacement(rng, train_ids_.size(), n)) {
    ids.push_back(train_ids_[static_cast<std::size_t>(local)]);
  }
  return state_for(ids);
}

StepOutcome ValuationEnv::step(const StateBatch& state,
                               const std::vector<std::uint8_t>& mask) const {
  if (mask.size() != state.indices.size()) {
    throw std::invalid_argument("mask length " + std::to_string(mask.size()) +
                                " != state size " + std::to_string(state.indices.size()));
  }
  std::vector<int> selected;
  for (std::size_t i = 0; i < mask.size(); ++i) {
    if (mask[i]) selected.push_back(state.indices[i]);
  }
  StepOutcome out;
  out.selected_count = static_cast<int>(selected.size());
  try {
    const InnerModel m = fit_inner(data_->rows(selected), data_->labels_of(selected),
                                   data_->num_classes, cfg_.inner);
    out.selected_score = accuracy(m, val_features_, val_labels_);
    out.reward = (out.selected_score - state.baseline_score) * cfg_.reward_scale;
  } catch (const SingleClassError&) {
    out.degenerate = true;
  } catch (const EmptyDataError&) {
    out.degenerate = true;
  }
  if (out.degenerate) {
    out.selected_score = 0.0;
    out.reward = -state.baseline_score * cfg_.reward_scale;
  }
  return out;
}

}  // namespace dvf
