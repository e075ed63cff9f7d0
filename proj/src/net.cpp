#include "dvforge/net.hpp"

#include <cmath>
#include <sstream>
#include <stdexcept>

namespace dvf {

void EncoderConfig::validate() const {
  if (input_dim < 1) throw std::invalid_argument("EncoderConfig: input_dim must be >= 1");
  if (num_layers < 1) throw std::invalid_argument("EncoderConfig: num_layers must be >= 1");
  if (num_heads < 1 || model_dim % num_heads != 0) {
    throw std::invalid_argument("EncoderConfig: model_dim " + std::to_string(model_dim) +
                                " not divisible by num_heads " + std::to_string(num_heads));
  }
}

std::string critic_mode_name(CriticMode m) {
  switch (m) {
    case CriticMode::SB: return "SB";
    case CriticMode::CLS: return "CLS";
    case CriticMode::CLS_SB: return "CLS_SB";
  }
  return "?";
}

CriticMode critic_mode_from(const std::string& s) {
  std::string u;
  for (char c : s) u.push_back(static_cast<char>(std::toupper(static_cast<unsigned char>(c))));
  if (u == "SB") return CriticMode::SB;
  if (u == "CLS") return CriticMode::CLS;
  if (u == "CLS_SB" || u == "CLS+SB") return CriticMode::CLS_SB;
  throw std::invalid_argument("unknown critic mode '" + s + "'");
}

Tensor as_tensor(const Eigen::MatrixXd& m) {
  std::vector<double> v(static_cast<std::size_t>(m.size()));
  for (Eigen::Index i = 0; i < m.rows(); ++i) {
    for (Eigen::Index j = 0; j < m.cols(); ++j) {
      v[static_cast<std::size_t>(i * m.cols() + j)] = m(i, j);
    }
  }
  return Tensor::from({static_cast<std::size_t>(m.rows()), static_cast<std::size_t>(m.cols())},
                      std::move(v));
}

Tensor layer_norm(const Tensor& x, const Tensor& gamma, const Tensor& beta, double eps) {
  Tensor centered = sub(x, mean(x, 1));
  Tensor var = mean(mul(centered, centered), 1);
  Tensor normed = div(centered, sqrt_(add_scalar(var, eps)));
  return add(mul(normed, gamma), beta);
}

namespace {

// scaled uniform fan-in init
Tensor init_affine(Rng& rng, std::size_t in, std::size_t out) {
  const double bound = 1.0 / std::sqrt(static_cast<double>(in));
  std::vector<double> v(in * out);
  for (auto& x : v) x = uniform(rng, -bound, bound);
  return Tensor::from({in, out}, std::move(v), true);
}

Tensor init_zeros(std::size_t n) { return Tensor::zeros({1, n}, true); }

}  // namespace

PolicyValueNet::PolicyValueNet(EncoderConfig cfg, CriticMode mode, std::uint64_t seed)
    : cfg_(cfg), mode_(mode) {
  cfg_.validate();
  Rng rng(seed);
  const auto in = static_cast<std::size_t>(cfg_.input_dim);
  const auto dm = static_cast<std::size_t>(cfg_.model_dim);
  const auto ff = static_cast<std::size_t>(cfg_.ff_hidden_dim);

  vec_w_ = init_affine(rng, in, dm);
  vec_b_ = init_zeros(dm);
  {
    std::vector<double> v(dm);
    for (auto& x : v) x = normal(rng, 0.0, 0.02);
    cls_token_ = Tensor::from({1, dm}, std::move(v), true);
  }
  for (int l = 0; l < cfg_.num_layers; ++l) {
    Block b;
    b.wq = init_affine(rng, dm, dm);
    b.bq = init_zeros(dm);
    b.wk = init_affine(rng, dm, dm);
    b.bk = init_zeros(dm);
    b.wv = init_affine(rng, dm, dm);
    b.bv = init_zeros(dm);
    b.wo = init_affine(rng, dm, dm);
    b.bo = init_zeros(dm);
    b.ln1_g = Tensor::full({1, dm}, 1.0, true);
    b.ln1_b = init_zeros(dm);
    b.ln2_g = Tensor::full({1, dm}, 1.0, true);
    b.ln2_b = init_zeros(dm);
    b.ff_w1 = init_affine(rng, dm, ff);
    b.ff_b1 = init_zeros(ff);
    b.ff_w2 = init_affine(rng, ff, dm);
    b.ff_b2 = init_zeros(dm);
    blocks_.push_back(std::move(b));
  }
  actor_w_ = init_affine(rng, dm, 1);
  // Optimistic prior: start every record clearly on the "keep" side
  // (sigmoid(1) ~ 0.73). When training finds no drop-worthy signal the
  // selection probabilities stay above the 0.5 filtering cut instead of
  // hovering at the cut itself, where the kept set would be an arbitrary
  // seed-dependent subset.
  actor_b_ = Tensor::full({1, 1}, 1.0, true);

  const std::size_t critic_in = mode_ == CriticMode::SB      ? 1
                                : mode_ == CriticMode::CLS   ? dm
                                                             : dm + 1;
  const std::size_t critic_hidden = 16;
  critic_w1_ = init_affine(rng, critic_in, critic_hidden);
  critic_b1_ = init_zeros(critic_hidden);
  critic_w2_ = init_affine(rng, critic_hidden, 1);
  critic_b2_ = init_zeros(1);
}

PolicyValueNet::Encoded PolicyValueNet::encode_batch(const Tensor& records) const {
  if (records.shape().size() != 2 ||
      records.shape()[1] != static_cast<std::size_t>(cfg_.input_dim)) {
    throw ShapeError("encode_batch: records shape " + shape_str(records.shape()) +
                     " does not match input_dim " + std::to_string(cfg_.input_dim));
  }
  const std::size_t n = records.shape()[0];
  const auto dm = static_cast<std::size_t>(cfg_.model_dim);
  const std::size_t dk = dm / static_cast<std::size_t>(cfg_.num_heads);
  const double scale = 1.0 / std::sqrt(static_cast<double>(dk));

  // CLS row first, then the N projected records
  Tensor h = concat_rows(cls_token_, add(matmul(records, vec_w_), vec_b_));

  for (const Block& b : blocks_) {
    Tensor q = add(matmul(h, b.wq), b.bq);
    Tensor k = add(matmul(h, b.wk), b.bk);
    Tensor v = add(matmul(h, b.wv), b.bv);
    Tensor heads;
    for (int hh = 0; hh < cfg_.num_heads; ++hh) {
      const std::size_t c0 = static_cast<std::size_t>(hh) * dk;
      Tensor qh = slice_cols(q, c0, c0 + dk);
      Tensor kh = slice_cols(k, c0, c0 + dk);
      Tensor vh = slice_cols(v, c0, c0 + dk);
      Tensor attn = softmax_rows(mul_scalar(matmul(qh, transpose(kh)), scale));
      Tensor out = matmul(attn, vh);
      heads = hh == 0 ? out : concat_cols(heads, out);
    }
    Tensor attn_out = add(matmul(heads, b.wo), b.bo);
    h = layer_norm(add(h, attn_out), b.ln1_g, b.ln1_b);
    Tensor ffo = add(matmul(gelu(add(matmul(h, b.ff_w1), b.ff_b1)), b.ff_w2), b.ff_b2);
    h = layer_norm(add(h, ffo), b.ln2_g, b.ln2_b);
  }
  return {slice_rows(h, 1, n + 1), slice_rows(h, 0, 1)};
}

PolicyValueNet::Encoded PolicyValueNet::encode_batch(const Eigen::MatrixXd& records) const {
  return encode_batch(as_tensor(records));
}

Tensor PolicyValueNet::actor_probs(const Tensor& record_emb) const {
  return sigmoid(add(matmul(record_emb, actor_w_), actor_b_));
}

Tensor PolicyValueNet::critic_value(const Tensor& cls_emb, double baseline_score) const {
  Tensor input;
  switch (mode_) {
    case CriticMode::SB:
      input = Tensor::from({1, 1}, {baseline_score});
      break;
    case CriticMode::CLS:
      input = cls_emb;
      break;
    case CriticMode::CLS_SB:
      input = concat_cols(cls_emb, Tensor::from({1, 1}, {baseline_score}));
      break;
  }
  Tensor hidden = tanh_(add(matmul(input, critic_w1_), critic_b1_));
  return add(matmul(hidden, critic_w2_), critic_b2_);
}

PolicyValueNet::Forward PolicyValueNet::forward(const Eigen::MatrixXd& records,
                                                double baseline_score) const {
  Encoded enc = encode_batch(records);
  return {actor_probs(enc.record_emb), critic_value(enc.cls_emb, baseline_score)};
}

NamedTensors PolicyValueNet::parameters() const {
  NamedTensors p;
  p.emplace_back("vectorizer.w", vec_w_);
  p.emplace_back("vectorizer.b", vec_b_);
  p.emplace_back("cls_token", cls_token_);
  for (std::size_t l = 0; l < blocks_.size(); ++l) {
    const Block& b = blocks_[l];
    const std::string pre = "encoder." + std::to_string(l) + ".";
    p.emplace_back(pre + "wq", b.wq);
    p.emplace_back(pre + "bq", b.bq);
    p.emplace_back(pre + "wk", b.wk);
    p.emplace_back(pre + "bk", b.bk);
    p.emplace_back(pre + "wv", b.wv);
    p.emplace_back(pre + "bv", b.bv);
    p.emplace_back(pre + "wo", b.wo);
    p.emplace_back(pre + "bo", b.bo);
    p.emplace_back(pre + "ln1.g", b.ln1_g);
    p.emplace_back(pre + "ln1.b", b.ln1_b);
    p.emplace_back(pre + "ln2.g", b.ln2_g);
    p.emplace_back(pre + "ln2.b", b.ln2_b);
    p.emplace_back(pre + "ff.w1", b.ff_w1);
    p.emplace_back(pre + "ff.b1", b.ff_b1);
    p.emplace_back(pre + "ff.w2", b.ff_w2);
    p.emplace_back(pre + "ff.b2", b.ff_b2);
  }
  p.emplace_back("actor.w", actor_w_);
  p.emplace_back("actor.b", actor_b_);
  p.emplace_back("critic.w1", critic_w1_);
  p.emplace_back("critic.b1", critic_b1_);
  p.emplace_back("critic.w2", critic_w2_);
  p.emplace_back("critic.b2", critic_b2_);
  return p;
}

std::string PolicyValueNet::config_json() const {
  std::ostringstream os;
  os << "{\"input_dim\":" << cfg_.input_dim << ",\"model_dim\":" << cfg_.model_dim
     << ",\"num_heads\":" << cfg_.num_heads << ",\"num_layers\":" << cfg_.num_layers
     << ",\"ff_hidden_dim\":" << cfg_.ff_hidden_dim << ",\"critic_mode\":\""
     << critic_mode_name(mode_) << "\"}";
  return os.str();
}

}  // namespace dvf
