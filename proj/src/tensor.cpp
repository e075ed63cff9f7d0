#include "dvforge/tensor.hpp"

#include <Eigen/Dense>

#include <algorithm>
#include <atomic>
#include <cmath>
#include <sstream>
#include <stdexcept>
#include <unordered_set>

namespace dvf {

namespace {

std::atomic<std::uint64_t> g_next_id{1};

using RowMat = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
using MapMat = Eigen::Map<RowMat>;
using CMapMat = Eigen::Map<const RowMat>;

TensorImplPtr make_impl(std::vector<std::size_t> shape, std::vector<double> data) {
  auto impl = std::make_shared<TensorImpl>();
  impl->shape = std::move(shape);
  impl->data = std::move(data);
  impl->id = g_next_id.fetch_add(1, std::memory_order_relaxed);
  return impl;
}

// (rows, cols) view: scalars and 1-D tensors count as one row
void view2d(const Tensor& t, std::size_t& r, std::size_t& c) {
  const auto& s = t.shape();
  if (s.size() >= 2) {
    r = s[0];
    c = s[1];
  } else if (s.size() == 1) {
    r = 1;
    c = s[0];
  } else {
    r = 1;
    c = 1;
  }
}

[[noreturn]] void shape_fail(const char* op, const Tensor& a, const Tensor& b) {
  std::ostringstream os;
  os << op << ": incompatible shapes " << shape_str(a.shape()) << " and "
     << shape_str(b.shape());
  throw ShapeError(os.str());
}

void require_2d(const char* op, const Tensor& x) {
  if (x.shape().size() != 2) {
    throw ShapeError(std::string(op) + ": expected 2-D tensor, got shape " +
                     shape_str(x.shape()));
  }
}

// Elementwise binary op with batch-style broadcasting: per dim, sizes must
// match or one must be 1. Partials are evaluated at the forward values.
template <typename F, typename Da, typename Db>
Tensor binary_op(const char* name, const Tensor& a, const Tensor& b, F f, Da dfda, Db dfdb) {
  std::size_t ar, ac, br, bc;
  view2d(a, ar, ac);
  view2d(b, br, bc);
  if ((ar != br && ar != 1 && br != 1) || (ac != bc && ac != 1 && bc != 1)) {
    shape_fail(name, a, b);
  }
  const std::size_t r = std::max(ar, br), c = std::max(ac, bc);

  std::vector<std::size_t> out_shape;
  if (a.shape().size() == 2 || b.shape().size() == 2) {
    out_shape = {r, c};
  } else if (a.shape().size() == 1 || b.shape().size() == 1) {
    out_shape = {c};
  } else {
    out_shape = {1};
  }

  std::vector<double> out(r * c);
  const double* pa = a.data().data();
  const double* pb = b.data().data();
  for (std::size_t i = 0; i < r; ++i) {
    const std::size_t ia = (ar == 1 ? 0 : i), ib = (br == 1 ? 0 : i);
    for (std::size_t j = 0; j < c; ++j) {
      out[i * c + j] = f(pa[ia * ac + (ac == 1 ? 0 : j)], pb[ib * bc + (bc == 1 ? 0 : j)]);
    }
  }

  auto impl = make_impl(std::move(out_shape), std::move(out));
  impl->requires_grad = a.requires_grad() || b.requires_grad();
  if (impl->requires_grad) {
    impl->parents = {a.ptr(), b.ptr()};
    TensorImpl* self = impl.get();
    TensorImplPtr ap = a.ptr(), bp = b.ptr();
    impl->backprop = [self, ap, bp, ar, ac, br, bc, r, c, dfda, dfdb]() {
      const double* g = self->grad.data();
      double* ga = (ap->requires_grad || !ap->parents.empty()) ? ap->ensure_grad().data() : nullptr;
      double* gb = (bp->requires_grad || !bp->parents.empty()) ? bp->ensure_grad().data() : nullptr;
      const double* pa = ap->data.data();
      const double* pb = bp->data.data();
      for (std::size_t i = 0; i < r; ++i) {
        const std::size_t ia = (ar == 1 ? 0 : i), ib = (br == 1 ? 0 : i);
        for (std::size_t j = 0; j < c; ++j) {
          const std::size_t ja = (ac == 1 ? 0 : j), jb = (bc == 1 ? 0 : j);
          const double av = pa[ia * ac + ja], bv = pb[ib * bc + jb];
          const double gv = g[i * c + j];
          if (ga) ga[ia * ac + ja] += dfda(av, bv) * gv;
          if (gb) gb[ib * bc + jb] += dfdb(av, bv) * gv;
        }
      }
    };
  }
  return Tensor(impl);
}

// Elementwise unary op; dfdx receives (x, f(x)).
template <typename F, typename D>
Tensor unary_op(const Tensor& x, F f, D dfdx) {
  std::vector<double> out(x.size());
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = f(x.data()[i]);
  auto impl = make_impl(x.shape(), std::move(out));
  impl->requires_grad = x.requires_grad();
  if (impl->requires_grad) {
    impl->parents = {x.ptr()};
    TensorImpl* self = impl.get();
    TensorImplPtr xp = x.ptr();
    impl->backprop = [self, xp, dfdx]() {
      double* gx = xp->ensure_grad().data();
      for (std::size_t i = 0; i < self->data.size(); ++i) {
        gx[i] += dfdx(xp->data[i], self->data[i]) * self->grad[i];
      }
    };
  }
  return Tensor(impl);
}

}  // namespace

std::string shape_str(const std::vector<std::size_t>& s) {
  std::ostringstream os;
  os << "(";
  for (std::size_t i = 0; i < s.size(); ++i) os << (i ? "," : "") << s[i];
  os << ")";
  return os.str();
}

Tensor Tensor::zeros(std::vector<std::size_t> shape, bool requires_grad) {
  std::size_t n = 1;
  for (auto d : shape) n *= d;
  auto impl = make_impl(std::move(shape), std::vector<double>(n, 0.0));
  impl->requires_grad = requires_grad;
  return Tensor(impl);
}

Tensor Tensor::full(std::vector<std::size_t> shape, double v, bool requires_grad) {
  std::size_t n = 1;
  for (auto d : shape) n *= d;
  auto impl = make_impl(std::move(shape), std::vector<double>(n, v));
  impl->requires_grad = requires_grad;
  return Tensor(impl);
}

Tensor Tensor::from(std::vector<std::size_t> shape, std::vector<double> values,
                    bool requires_grad) {
  std::size_t n = 1;
  for (auto d : shape) n *= d;
  if (n != values.size()) {
    throw ShapeError("Tensor::from: shape " + shape_str(shape) + " expects " +
                     std::to_string(n) + " values, got " + std::to_string(values.size()));
  }
  auto impl = make_impl(std::move(shape), std::move(values));
  impl->requires_grad = requires_grad;
  return Tensor(impl);
}

Tensor Tensor::scalar(double v, bool requires_grad) {
  return from({1}, {v}, requires_grad);
}

std::size_t Tensor::rows() const {
  std::size_t r, c;
  view2d(*this, r, c);
  return r;
}

std::size_t Tensor::cols() const {
  std::size_t r, c;
  view2d(*this, r, c);
  return c;
}

double Tensor::value() const {
  if (size() != 1) throw ShapeError("value(): tensor is not scalar, shape " + shape_str(shape()));
  return impl_->data[0];
}

double Tensor::at(std::size_t r, std::size_t c) const {
  return impl_->data[r * cols() + c];
}

Tensor add(const Tensor& a, const Tensor& b) {
  return binary_op(
      "add", a, b, [](double x, double y) { return x + y; },
      [](double, double) { return 1.0; }, [](double, double) { return 1.0; });
}

Tensor sub(const Tensor& a, const Tensor& b) {
  return binary_op(
      "subtract", a, b, [](double x, double y) { return x - y; },
      [](double, double) { return 1.0; }, [](double, double) { return -1.0; });
}

Tensor mul(const Tensor& a, const Tensor& b) {
  return binary_op(
      "multiply", a, b, [](double x, double y) { return x * y; },
      [](double, double y) { return y; }, [](double x, double) { return x; });
}

Tensor div(const Tensor& a, const Tensor& b) {
  return binary_op(
      "divide", a, b, [](double x, double y) { return x / y; },
      [](double, double y) { return 1.0 / y; },
      [](double x, double y) { return -x / (y * y); });
}

Tensor minimum(const Tensor& a, const Tensor& b) {
  return binary_op(
      "minimum", a, b, [](double x, double y) { return x < y ? x : y; },
      [](double x, double y) { return x <= y ? 1.0 : 0.0; },
      [](double x, double y) { return x <= y ? 0.0 : 1.0; });
}

Tensor matmul(const Tensor& a, const Tensor& b) {
  require_2d("matmul", a);
  require_2d("matmul", b);
  const std::size_t m = a.shape()[0], k = a.shape()[1], k2 = b.shape()[0], n = b.shape()[1];
  if (k != k2) shape_fail("matmul", a, b);

  std::vector<double> out(m * n);
  {
    CMapMat ma(a.data().data(), m, k), mb(b.data().data(), k, n);
    MapMat mo(out.data(), m, n);
    mo.noalias() = ma * mb;
  }
  auto impl = make_impl({m, n}, std::move(out));
  impl->requires_grad = a.requires_grad() || b.requires_grad();
  if (impl->requires_grad) {
    impl->parents = {a.ptr(), b.ptr()};
    TensorImpl* self = impl.get();
    TensorImplPtr ap = a.ptr(), bp = b.ptr();
    impl->backprop = [self, ap, bp, m, k, n]() {
      CMapMat g(self->grad.data(), m, n);
      CMapMat ma(ap->data.data(), m, k), mb(bp->data.data(), k, n);
      if (ap->requires_grad || !ap->parents.empty()) {
        MapMat ga(ap->ensure_grad().data(), m, k);
        ga.noalias() += g * mb.transpose();
      }
      if (bp->requires_grad || !bp->parents.empty()) {
        MapMat gb(bp->ensure_grad().data(), k, n);
        gb.noalias() += ma.transpose() * g;
      }
    };
  }
  return Tensor(impl);
}

Tensor neg(const Tensor& x) {
  return unary_op(x, [](double v) { return -v; }, [](double, double) { return -1.0; });
}

Tensor exp_(const Tensor& x) {
  return unary_op(x, [](double v) { return std::exp(v); }, [](double, double y) { return y; });
}

Tensor log_(const Tensor& x) {
  return unary_op(x, [](double v) { return std::log(v); },
                  [](double v, double) { return 1.0 / v; });
}

Tensor sqrt_(const Tensor& x) {
  return unary_op(x, [](double v) { return std::sqrt(v); },
                  [](double, double y) { return 0.5 / y; });
}

Tensor sigmoid(const Tensor& x) {
  return unary_op(x, [](double v) { return 1.0 / (1.0 + std::exp(-v)); },
                  [](double, double y) { return y * (1.0 - y); });
}

Tensor tanh_(const Tensor& x) {
  return unary_op(x, [](double v) { return std::tanh(v); },
                  [](double, double y) { return 1.0 - y * y; });
}

Tensor gelu(const Tensor& x) {
  constexpr double kAlpha = 0.7978845608028654;  // sqrt(2/pi)
  constexpr double kBeta = 0.044715;
  return unary_op(
      x,
      [](double v) {
        return 0.5 * v * (1.0 + std::tanh(kAlpha * (v + kBeta * v * v * v)));
      },
      [](double v, double) {
        const double t = std::tanh(kAlpha * (v + kBeta * v * v * v));
        return 0.5 * (1.0 + t) +
               0.5 * v * (1.0 - t * t) * kAlpha * (1.0 + 3.0 * kBeta * v * v);
      });
}

Tensor clip(const Tensor& x, double lo, double hi) {
  return unary_op(
      x, [lo, hi](double v) { return v < lo ? lo : (v > hi ? hi : v); },
      [lo, hi](double v, double) { return (v >= lo && v <= hi) ? 1.0 : 0.0; });
}

Tensor add_scalar(const Tensor& x, double c) {
  return unary_op(x, [c](double v) { return v + c; }, [](double, double) { return 1.0; });
}

Tensor mul_scalar(const Tensor& x, double c) {
  return unary_op(x, [c](double v) { return v * c; }, [c](double, double) { return c; });
}

Tensor sum(const Tensor& x, int axis) {
  require_2d("sum", x);
  const std::size_t r = x.shape()[0], c = x.shape()[1];
  std::vector<std::size_t> out_shape = axis == 0 ? std::vector<std::size_t>{1, c}
                                                 : std::vector<std::size_t>{r, 1};
  std::vector<double> out(axis == 0 ? c : r, 0.0);
  for (std::size_t i = 0; i < r; ++i) {
    for (std::size_t j = 0; j < c; ++j) {
      out[axis == 0 ? j : i] += x.data()[i * c + j];
    }
  }
  auto impl = make_impl(std::move(out_shape), std::move(out));
  impl->requires_grad = x.requires_grad();
  if (impl->requires_grad) {
    impl->parents = {x.ptr()};
    TensorImpl* self = impl.get();
    TensorImplPtr xp = x.ptr();
    impl->backprop = [self, xp, r, c, axis]() {
      double* gx = xp->ensure_grad().data();
      for (std::size_t i = 0; i < r; ++i) {
        for (std::size_t j = 0; j < c; ++j) {
          gx[i * c + j] += self->grad[axis == 0 ? j : i];
        }
      }
    };
  }
  return Tensor(impl);
}

Tensor mean(const Tensor& x, int axis) {
  const double n = static_cast<double>(axis == 0 ? x.shape()[0] : x.shape()[1]);
  return mul_scalar(sum(x, axis), 1.0 / n);
}

Tensor sum_all(const Tensor& x) {
  double s = 0.0;
  for (double v : x.data()) s += v;
  auto impl = make_impl({1}, {s});
  impl->requires_grad = x.requires_grad();
  if (impl->requires_grad) {
    impl->parents = {x.ptr()};
    TensorImpl* self = impl.get();
    TensorImplPtr xp = x.ptr();
    impl->backprop = [self, xp]() {
      double* gx = xp->ensure_grad().data();
      for (std::size_t i = 0; i < xp->data.size(); ++i) gx[i] += self->grad[0];
    };
  }
  return Tensor(impl);
}

Tensor mean_all(const Tensor& x) {
  return mul_scalar(sum_all(x), 1.0 / static_cast<double>(x.size()));
}

Tensor softmax_rows(const Tensor& x) {
  require_2d("softmax", x);
  const std::size_t r = x.shape()[0], c = x.shape()[1];
  std::vector<double> out(r * c);
  for (std::size_t i = 0; i < r; ++i) {
    double mx = x.data()[i * c];
    for (std::size_t j = 1; j < c; ++j) mx = std::max(mx, x.data()[i * c + j]);
    double s = 0.0;
    for (std::size_t j = 0; j < c; ++j) {
      out[i * c + j] = std::exp(x.data()[i * c + j] - mx);
      s += out[i * c + j];
    }
    for (std::size_t j = 0; j < c; ++j) out[i * c + j] /= s;
  }
  auto impl = make_impl({r, c}, std::move(out));
  impl->requires_grad = x.requires_grad();
  if (impl->requires_grad) {
    impl->parents = {x.ptr()};
    TensorImpl* self = impl.get();
    TensorImplPtr xp = x.ptr();
    impl->backprop = [self, xp, r, c]() {
      double* gx = xp->ensure_grad().data();
      for (std::size_t i = 0; i < r; ++i) {
        double dot = 0.0;
        for (std::size_t j = 0; j < c; ++j) {
          dot += self->grad[i * c + j] * self->data[i * c + j];
        }
        for (std::size_t j = 0; j < c; ++j) {
          gx[i * c + j] += self->data[i * c + j] * (self->grad[i * c + j] - dot);
        }
      }
    };
  }
  return Tensor(impl);
}

Tensor concat_cols(const Tensor& a, const Tensor& b) {
  require_2d("concat_cols", a);
  require_2d("concat_cols", b);
  const std::size_t r = a.shape()[0], ca = a.shape()[1], cb = b.shape()[1];
  if (b.shape()[0] != r) shape_fail("concat_cols", a, b);
  std::vector<double> out(r * (ca + cb));
  for (std::size_t i = 0; i < r; ++i) {
    std::copy_n(a.data().data() + i * ca, ca, out.data() + i * (ca + cb));
    std::copy_n(b.data().data() + i * cb, cb, out.data() + i * (ca + cb) + ca);
  }
  auto impl = make_impl({r, ca + cb}, std::move(out));
  impl->requires_grad = a.requires_grad() || b.requires_grad();
  if (impl->requires_grad) {
    impl->parents = {a.ptr(), b.ptr()};
    TensorImpl* self = impl.get();
    TensorImplPtr ap = a.ptr(), bp = b.ptr();
    impl->backprop = [self, ap, bp, r, ca, cb]() {
      for (std::size_t i = 0; i < r; ++i) {
        if (ap->requires_grad || !ap->parents.empty()) {
          double* ga = ap->ensure_grad().data();
          for (std::size_t j = 0; j < ca; ++j) ga[i * ca + j] += self->grad[i * (ca + cb) + j];
        }
        if (bp->requires_grad || !bp->parents.empty()) {
          double* gb = bp->ensure_grad().data();
          for (std::size_t j = 0; j < cb; ++j) {
            gb[i * cb + j] += self->grad[i * (ca + cb) + ca + j];
          }
        }
      }
    };
  }
  return Tensor(impl);
}

Tensor concat_rows(const Tensor& a, const Tensor& b) {
  require_2d("concat_rows", a);
  require_2d("concat_rows", b);
  const std::size_t ra = a.shape()[0], rb = b.shape()[0], c = a.shape()[1];
  if (b.shape()[1] != c) shape_fail("concat_rows", a, b);
  std::vector<double> out;
  out.reserve((ra + rb) * c);
  out.insert(out.end(), a.data().begin(), a.data().end());
  out.insert(out.end(), b.data().begin(), b.data().end());
  auto impl = make_impl({ra + rb, c}, std::move(out));
  impl->requires_grad = a.requires_grad() || b.requires_grad();
  if (impl->requires_grad) {
    impl->parents = {a.ptr(), b.ptr()};
    TensorImpl* self = impl.get();
    TensorImplPtr ap = a.ptr(), bp = b.ptr();
    impl->backprop = [self, ap, bp, ra, rb, c]() {
      if (ap->requires_grad || !ap->parents.empty()) {
        double* ga = ap->ensure_grad().data();
        for (std::size_t i = 0; i < ra * c; ++i) ga[i] += self->grad[i];
      }
      if (bp->requires_grad || !bp->parents.empty()) {
        double* gb = bp->ensure_grad().data();
        for (std::size_t i = 0; i < rb * c; ++i) gb[i] += self->grad[ra * c + i];
      }
    };
  }
  return Tensor(impl);
}

Tensor slice_rows(const Tensor& x, std::size_t r0, std::size_t r1) {
  require_2d("slice_rows", x);
  const std::size_t r = x.shape()[0], c = x.shape()[1];
  if (r0 > r1 || r1 > r) {
    throw ShapeError("slice_rows: range [" + std::to_string(r0) + "," + std::to_string(r1) +
                     ") out of bounds for shape " + shape_str(x.shape()));
  }
  std::vector<double> out(x.data().begin() + r0 * c, x.data().begin() + r1 * c);
  auto impl = make_impl({r1 - r0, c}, std::move(out));
  impl->requires_grad = x.requires_grad();
  if (impl->requires_grad) {
    impl->parents = {x.ptr()};
    TensorImpl* self = impl.get();
    TensorImplPtr xp = x.ptr();
    impl->backprop = [self, xp, r0, c]() {
      double* gx = xp->ensure_grad().data();
      for (std::size_t i = 0; i < self->data.size(); ++i) gx[r0 * c + i] += self->grad[i];
    };
  }
  return Tensor(impl);
}

Tensor slice_cols(const Tensor& x, std::size_t c0, std::size_t c1) {
  require_2d("slice_cols", x);
  const std::size_t r = x.shape()[0], c = x.shape()[1];
  if (c0 > c1 || c1 > c) {
    throw ShapeError("slice_cols: range [" + std::to_string(c0) + "," + std::to_string(c1) +
                     ") out of bounds for shape " + shape_str(x.shape()));
  }
  const std::size_t w = c1 - c0;
  std::vector<double> out(r * w);
  for (std::size_t i = 0; i < r; ++i) {
    std::copy_n(x.data().data() + i * c + c0, w, out.data() + i * w);
  }
  auto impl = make_impl({r, w}, std::move(out));
  impl->requires_grad = x.requires_grad();
  if (impl->requires_grad) {
    impl->parents = {x.ptr()};
    TensorImpl* self = impl.get();
    TensorImplPtr xp = x.ptr();
    impl->backprop = [self, xp, r, c, c0, w]() {
      double* gx = xp->ensure_grad().data();
      for (std::size_t i = 0; i < r; ++i) {
        for (std::size_t j = 0; j < w; ++j) gx[i * c + c0 + j] += self->grad[i * w + j];
      }
    };
  }
  return Tensor(impl);
}

Tensor transpose(const Tensor& x) {
  require_2d("transpose", x);
  const std::size_t r = x.shape()[0], c = x.shape()[1];
  std::vector<double> out(r * c);
  for (std::size_t i = 0; i < r; ++i) {
    for (std::size_t j = 0; j < c; ++j) out[j * r + i] = x.data()[i * c + j];
  }
  auto impl = make_impl({c, r}, std::move(out));
  impl->requires_grad = x.requires_grad();
  if (impl->requires_grad) {
    impl->parents = {x.ptr()};
    TensorImpl* self = impl.get();
    TensorImplPtr xp = x.ptr();
    impl->backprop = [self, xp, r, c]() {
      double* gx = xp->ensure_grad().data();
      for (std::size_t i = 0; i < r; ++i) {
        for (std::size_t j = 0; j < c; ++j) gx[i * c + j] += self->grad[j * r + i];
      }
    };
  }
  return Tensor(impl);
}

void backward(const Tensor& loss) {
  if (loss.size() != 1) {
    throw ShapeError("backward: loss must be scalar, got shape " + shape_str(loss.shape()));
  }
  // reverse topological order == descending creation id (parents precede children)
  std::vector<TensorImpl*> order;
  std::unordered_set<TensorImpl*> seen;
  std::vector<TensorImpl*> stack{loss.raw()};
  seen.insert(loss.raw());
  while (!stack.empty()) {
    TensorImpl* n = stack.back();
    stack.pop_back();
    order.push_back(n);
    for (const auto& p : n->parents) {
      if (seen.insert(p.get()).second) stack.push_back(p.get());
    }
  }
  std::sort(order.begin(), order.end(),
            [](const TensorImpl* a, const TensorImpl* b) { return a->id > b->id; });
  // Interior grads are scratch space for this pass; only leaves accumulate
  // across repeated backward calls.
  for (TensorImpl* n : order) {
    if (n->backprop) n->grad.assign(n->data.size(), 0.0);
  }
  loss.raw()->ensure_grad()[0] += 1.0;
  for (TensorImpl* n : order) {
    if (n->backprop && n->grad.size() == n->data.size()) n->backprop();
  }
}

}  // namespace dvf
