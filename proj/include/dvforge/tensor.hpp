// Reverse-mode autodiff over dense 1-D/2-D double tensors.
// Define-by-run: every op records its parents and a backward closure;
// backward() replays them in reverse creation order.

#pragma once

#include <cstddef>
#include <cstdint>
#include <functional>
#include <memory>
#include <string>
#include <vector>

namespace dvf {

struct TensorImpl;
using TensorImplPtr = std::shared_ptr<TensorImpl>;

struct TensorImpl {
  std::vector<std::size_t> shape;
  std::vector<double> data;
  std::vector<double> grad;  // lazily sized; empty until touched
  bool requires_grad = false;
  std::uint64_t id = 0;  // creation order, used for reverse-topo replay
  std::vector<TensorImplPtr> parents;
  std::function<void()> backprop;  // accumulates this->grad into parents

  std::size_t size() const {
    std::size_t n = 1;
    for (auto d : shape) n *= d;
    return n;
  }
  std::vector<double>& ensure_grad() {
    if (grad.size() != data.size()) grad.assign(data.size(), 0.0);
    return grad;
  }
};

class Tensor {
 public:
  Tensor() = default;
  explicit Tensor(TensorImplPtr impl) : impl_(std::move(impl)) {}

  static Tensor zeros(std::vector<std::size_t> shape, bool requires_grad = false);
  static Tensor full(std::vector<std::size_t> shape, double v, bool requires_grad = false);
  static Tensor from(std::vector<std::size_t> shape, std::vector<double> values,
                     bool requires_grad = false);
  static Tensor scalar(double v, bool requires_grad = false);

  bool defined() const { return impl_ != nullptr; }
  const std::vector<std::size_t>& shape() const { return impl_->shape; }
  std::size_t size() const { return impl_->size(); }
  std::size_t rows() const;  // 1 for scalars/1-D
  std::size_t cols() const;  // size for 1-D
  bool requires_grad() const { return impl_->requires_grad; }
  void set_requires_grad(bool rg) { impl_->requires_grad = rg; }

  std::vector<double>& data() { return impl_->data; }
  const std::vector<double>& data() const { return impl_->data; }
  std::vector<double>& grad() { return impl_->ensure_grad(); }
  void zero_grad() { impl_->grad.assign(impl_->data.size(), 0.0); }

  double value() const;  // scalar tensors only
  double at(std::size_t r, std::size_t c) const;

  TensorImpl* raw() const { return impl_.get(); }
  const TensorImplPtr& ptr() const { return impl_; }

 private:
  TensorImplPtr impl_;
};

// Raised on operand shape mismatches; message names the op and both shapes.
struct ShapeError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// ---- ops ----
Tensor add(const Tensor& a, const Tensor& b);
Tensor sub(const Tensor& a, const Tensor& b);
Tensor mul(const Tensor& a, const Tensor& b);
Tensor div(const Tensor& a, const Tensor& b);
Tensor minimum(const Tensor& a, const Tensor& b);
Tensor matmul(const Tensor& a, const Tensor& b);
Tensor neg(const Tensor& x);
Tensor exp_(const Tensor& x);
Tensor log_(const Tensor& x);
Tensor sqrt_(const Tensor& x);
Tensor sigmoid(const Tensor& x);
Tensor tanh_(const Tensor& x);
Tensor gelu(const Tensor& x);
Tensor clip(const Tensor& x, double lo, double hi);  // straight-through inside [lo,hi]
Tensor add_scalar(const Tensor& x, double c);
Tensor mul_scalar(const Tensor& x, double c);
// axis 0 collapses rows -> {1,c}; axis 1 collapses cols -> {r,1}
Tensor sum(const Tensor& x, int axis);
Tensor mean(const Tensor& x, int axis);
Tensor sum_all(const Tensor& x);
Tensor mean_all(const Tensor& x);
Tensor softmax_rows(const Tensor& x);  // softmax over last axis
Tensor concat_cols(const Tensor& a, const Tensor& b);
Tensor concat_rows(const Tensor& a, const Tensor& b);
Tensor slice_rows(const Tensor& x, std::size_t r0, std::size_t r1);
Tensor slice_cols(const Tensor& x, std::size_t c0, std::size_t c1);
Tensor transpose(const Tensor& x);

// Accumulates dLoss/dLeaf into every requires_grad leaf reachable from `loss`.
// Repeated calls without zero_grad accumulate additively.
void backward(const Tensor& loss);

std::string shape_str(const std::vector<std::size_t>& s);

}  // namespace dvf
