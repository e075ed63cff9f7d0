// Policy/value network: affine vectorizer, learnable CLS token, a stack of
// post-norm Transformer encoder blocks (no positional encoding, so record
// order is meaningless), a per-record sigmoid actor head, and a critic head
// fed by the CLS output and/or the batch baseline score.

#pragma once

#include <Eigen/Dense>

#include <string>
#include <vector>

#include "dvforge/checkpoint.hpp"
#include "dvforge/rng.hpp"
#include "dvforge/tensor.hpp"

namespace dvf {

struct EncoderConfig {
  int input_dim = 0;
  int model_dim = 64;
  int num_heads = 4;
  int num_layers = 4;
  int ff_hidden_dim = 128;
  void validate() const;
};

enum class CriticMode { SB, CLS, CLS_SB };

std::string critic_mode_name(CriticMode m);
CriticMode critic_mode_from(const std::string& s);

class PolicyValueNet {
 public:
  PolicyValueNet(EncoderConfig cfg, CriticMode mode, std::uint64_t seed);

  struct Encoded {
    Tensor record_emb;  // N x model_dim
    Tensor cls_emb;     // 1 x model_dim
  };

  // records: N x input_dim. Each encoder block is multi-head self-attention
  // + residual + layer-norm, then feed-forward + residual + layer-norm.
  Encoded encode_batch(const Tensor& records) const;
  Encoded encode_batch(const Eigen::MatrixXd& records) const;

  // Independent Bernoulli parameter per record, shape N x 1, entries in (0,1).
  Tensor actor_probs(const Tensor& record_emb) const;

  Tensor critic_value(const Tensor& cls_emb, double baseline_score) const;

  struct Forward {
    Tensor probs;  // N x 1
    Tensor value;  // scalar
  };
  Forward forward(const Eigen::MatrixXd& records, double baseline_score) const;

  NamedTensors parameters() const;
  const EncoderConfig& config() const { return cfg_; }
  CriticMode critic_mode() const { return mode_; }

  std::string config_json() const;

 private:
  EncoderConfig cfg_;
  CriticMode mode_;

  Tensor vec_w_, vec_b_;
  Tensor cls_token_;  // 1 x model_dim
  struct Block {
    Tensor wq, bq, wk, bk, wv, bv, wo, bo;
    Tensor ln1_g, ln1_b, ln2_g, ln2_b;
    Tensor ff_w1, ff_b1, ff_w2, ff_b2;
  };
  std::vector<Block> blocks_;
  Tensor actor_w_, actor_b_;
  Tensor critic_w1_, critic_b1_, critic_w2_, critic_b2_;
};

// Per-row (x - mean) / sqrt(var + eps), then affine gamma/beta.
Tensor layer_norm(const Tensor& x, const Tensor& gamma, const Tensor& beta, double eps = 1e-5);

Tensor as_tensor(const Eigen::MatrixXd& m);

}  // namespace dvf
