#include "taskemb/tensor.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <numeric>
#include <sstream>
#include <unordered_set>

namespace taskemb {

namespace detail {

struct Node {
  Shape shape;
  std::vector<Scalar> value;
  std::vector<Scalar> grad;
  bool requires_grad = false;
  bool leaf = true;
  bool grad_dirty = false;
  const char* op = "leaf";
  std::vector<std::shared_ptr<Node>> inputs;
  std::function<void(Node&)> backward;

  std::size_t numel() const { return value.size(); }
  std::size_t cols() const { return shape.empty() ? 1 : shape.back(); }
  std::size_t rows() const { return numel() / cols(); }

  Scalar* grad_buffer() {
    if (!requires_grad) return nullptr;
    if (grad.empty()) grad.assign(value.size(), 0.0);
    return grad.data();
  }
};

}  // namespace detail

using detail::Node;
using NodePtr = std::shared_ptr<Node>;

struct TensorAccess {
  static const NodePtr& node(const Tensor& t) {
    if (!t.node_) throw std::invalid_argument("use of an undefined tensor");
    return t.node_;
  }
  static Tensor wrap(NodePtr n) { return Tensor(std::move(n)); }
};

namespace {

thread_local bool g_grad_enabled = true;

std::string shape_str(const Shape& s) {
  std::ostringstream os;
  os << '[';
  for (std::size_t i = 0; i < s.size(); ++i) os << (i ? "," : "") << s[i];
  os << ']';
  return os.str();
}

std::size_t product(const Shape& s) {
  return std::accumulate(s.begin(), s.end(), std::size_t{1}, std::multiplies<>());
}

void validate_shape(const Shape& s) {
  if (s.empty()) throw std::invalid_argument("tensor shape must have at least one dimension");
  for (auto d : s) {
    if (d == 0) throw std::invalid_argument("tensor dimensions must be positive, got " + shape_str(s));
  }
}

const NodePtr& node_of(const Tensor& t) { return TensorAccess::node(t); }

void require_matrix(const Tensor& t, const char* op) {
  if (t.rank() != 2) {
    throw std::invalid_argument(std::string(op) + ": expected a matrix, got shape " + shape_str(t.shape()));
  }
}

void require_same_shape(const Tensor& a, const Tensor& b, const char* op) {
  if (a.shape() != b.shape()) {
    throw std::invalid_argument(std::string(op) + ": shape mismatch " + shape_str(a.shape()) + " vs " +
                                shape_str(b.shape()));
  }
}

using BackwardFn = std::function<void(Node&)>;

/// Creates the output node, checks finiteness, and records the graph edge when
/// gradients are being tracked.
Tensor make_result(Shape shape, std::vector<Scalar> value, const char* op, std::initializer_list<Tensor> inputs,
                   BackwardFn fn) {
  for (Scalar v : value) {
    if (!std::isfinite(v)) throw NumericError(std::string(op) + ": non-finite value produced");
  }
  auto n = std::make_shared<Node>();
  n->shape = std::move(shape);
  n->value = std::move(value);
  n->op = op;
  n->leaf = false;
  bool track = false;
  if (g_grad_enabled) {
    for (const auto& in : inputs) track = track || in.requires_grad();
  }
  if (track) {
    n->requires_grad = true;
    for (const auto& in : inputs) n->inputs.push_back(node_of(in));
    n->backward = std::move(fn);
  }
  return TensorAccess::wrap(std::move(n));
}

Tensor make_result_n(Shape shape, std::vector<Scalar> value, const char* op, std::span<const Tensor> inputs,
                     BackwardFn fn) {
  for (Scalar v : value) {
    if (!std::isfinite(v)) throw NumericError(std::string(op) + ": non-finite value produced");
  }
  auto n = std::make_shared<Node>();
  n->shape = std::move(shape);
  n->value = std::move(value);
  n->op = op;
  n->leaf = false;
  bool track = false;
  if (g_grad_enabled) {
    for (const auto& in : inputs) track = track || in.requires_grad();
  }
  if (track) {
    n->requires_grad = true;
    for (const auto& in : inputs) n->inputs.push_back(node_of(in));
    n->backward = std::move(fn);
  }
  return TensorAccess::wrap(std::move(n));
}

using ConstMap = Eigen::Map<const RowMatrix>;
using MutMap = Eigen::Map<RowMatrix>;

ConstMap view(const std::vector<Scalar>& v, std::size_t r, std::size_t c) {
  return ConstMap(v.data(), static_cast<Eigen::Index>(r), static_cast<Eigen::Index>(c));
}
MutMap view(Scalar* p, std::size_t r, std::size_t c) {
  return MutMap(p, static_cast<Eigen::Index>(r), static_cast<Eigen::Index>(c));
}

template <typename F>
Tensor unary(const Tensor& a, const char* op, F value_fn, std::function<Scalar(Scalar x, Scalar y)> deriv) {
  const auto& in = node_of(a)->value;
  std::vector<Scalar> out(in.size());
  for (std::size_t i = 0; i < in.size(); ++i) out[i] = value_fn(in[i]);
  return make_result(a.shape(), std::move(out), op, {a}, [deriv](Node& self) {
    Node& x = *self.inputs[0];
    if (Scalar* g = x.grad_buffer()) {
      for (std::size_t i = 0; i < self.value.size(); ++i) g[i] += self.grad[i] * deriv(x.value[i], self.value[i]);
    }
  });
}

}  // namespace

// ---------------------------------------------------------------------------
// Tensor

Tensor Tensor::zeros(Shape shape, bool requires_grad) {
  validate_shape(shape);
  std::vector<Scalar> v(product(shape), 0.0);
  return from(std::move(shape), std::move(v), requires_grad);
}

Tensor Tensor::from(Shape shape, std::vector<Scalar> values, bool requires_grad) {
  validate_shape(shape);
  if (product(shape) != values.size()) {
    throw std::invalid_argument("tensor data length " + std::to_string(values.size()) + " does not match shape " +
                                shape_str(shape));
  }
  for (Scalar v : values) {
    if (!std::isfinite(v)) throw NumericError("tensor initialised with a non-finite value");
  }
  auto n = std::make_shared<Node>();
  n->shape = std::move(shape);
  n->value = std::move(values);
  n->requires_grad = requires_grad;
  return Tensor(std::move(n));
}

Tensor Tensor::from_matrix(const RowMatrix& m, bool requires_grad) {
  std::vector<Scalar> v(m.data(), m.data() + m.size());
  return from({static_cast<std::size_t>(m.rows()), static_cast<std::size_t>(m.cols())}, std::move(v),
              requires_grad);
}

Tensor Tensor::scalar(Scalar v, bool requires_grad) { return from({1}, {v}, requires_grad); }

const Shape& Tensor::shape() const { return node_of(*this)->shape; }
std::size_t Tensor::numel() const { return node_of(*this)->numel(); }
std::size_t Tensor::rows() const { return node_of(*this)->rows(); }
std::size_t Tensor::cols() const { return node_of(*this)->cols(); }

std::span<const Scalar> Tensor::data() const { return node_of(*this)->value; }

std::span<Scalar> Tensor::mutable_data() {
  const auto& n = node_of(*this);
  if (!n->leaf) throw std::logic_error("mutable_data() on a non-leaf tensor");
  return n->value;
}

std::span<const Scalar> Tensor::grad() const { return node_of(*this)->grad; }

Eigen::Map<const RowMatrix> Tensor::matrix() const {
  const auto& n = node_of(*this);
  return view(n->value, n->rows(), n->cols());
}

RowMatrix Tensor::grad_matrix() const {
  const auto& n = node_of(*this);
  if (n->grad.empty()) return RowMatrix::Zero(static_cast<Eigen::Index>(n->rows()), static_cast<Eigen::Index>(n->cols()));
  return view(n->grad, n->rows(), n->cols());
}

Scalar Tensor::item() const {
  const auto& n = node_of(*this);
  if (n->numel() != 1) throw std::invalid_argument("item() on a tensor with " + std::to_string(n->numel()) + " elements");
  return n->value[0];
}

Scalar Tensor::at(std::size_t row, std::size_t col) const {
  const auto& n = node_of(*this);
  if (row >= n->rows() || col >= n->cols()) throw std::out_of_range("tensor index out of range");
  return n->value[row * n->cols() + col];
}

bool Tensor::requires_grad() const { return node_of(*this)->requires_grad; }

void Tensor::set_requires_grad(bool on) {
  const auto& n = node_of(*this);
  if (!n->leaf) throw std::logic_error("requires_grad can only be toggled on leaf tensors");
  n->requires_grad = on;
  if (!on) {
    n->grad.clear();
    n->grad_dirty = false;
  }
}

bool Tensor::is_leaf() const { return node_of(*this)->leaf; }
const char* Tensor::op_name() const { return node_of(*this)->op; }

void Tensor::zero_grad() {
  const auto& n = node_of(*this);
  n->grad.clear();
  n->grad_dirty = false;
}

Tensor Tensor::detach() const {
  const auto& n = node_of(*this);
  return from(n->shape, n->value, false);
}

NoGradGuard::NoGradGuard() : previous_(g_grad_enabled) { g_grad_enabled = false; }
NoGradGuard::~NoGradGuard() { g_grad_enabled = previous_; }
bool grad_mode_enabled() { return g_grad_enabled; }

// ---------------------------------------------------------------------------
// Backward

void backward(const Tensor& loss) {
  const NodePtr& root = node_of(loss);
  if (root->numel() != 1) throw std::invalid_argument("backward() needs a scalar loss");
  if (!root->requires_grad) throw std::logic_error("backward() on a loss detached from any grad-enabled tensor");

  // Iterative post-order DFS; `order` ends up topologically sorted.
  std::vector<Node*> order;
  std::unordered_set<Node*> visited;
  std::vector<std::pair<Node*, std::size_t>> stack{{root.get(), 0}};
  visited.insert(root.get());
  while (!stack.empty()) {
    auto& [node, next] = stack.back();
    if (next < node->inputs.size()) {
      Node* child = node->inputs[next++].get();
      if (child->requires_grad && visited.insert(child).second) stack.emplace_back(child, 0);
    } else {
      order.push_back(node);
      stack.pop_back();
    }
  }

  for (Node* n : order) {
    if (n->leaf && n->grad_dirty) {
      throw std::logic_error("backward() would accumulate into stale gradients; call zero_grads() first");
    }
  }
  for (Node* n : order) {
    if (!n->leaf) n->grad.assign(n->value.size(), 0.0);
  }
  root->grad_buffer()[0] = 1.0;
  for (auto it = order.rbegin(); it != order.rend(); ++it) {
    Node* n = *it;
    if (!n->leaf && n->backward) n->backward(*n);
  }
  for (Node* n : order) {
    if (n->leaf) {
      n->grad_buffer();
      n->grad_dirty = true;
    } else {
      // Intermediate gradients are not observable; release them.
      std::vector<Scalar>().swap(n->grad);
    }
  }
}

void zero_grads(std::span<Tensor> params) {
  for (auto& p : params) p.zero_grad();
}
void zero_grads(std::vector<Tensor>& params) { zero_grads(std::span<Tensor>(params)); }

// ---------------------------------------------------------------------------
// Primitives

Tensor matmul(const Tensor& a, const Tensor& b) {
  require_matrix(a, "matmul");
  require_matrix(b, "matmul");
  const std::size_t n = a.shape()[0], k = a.shape()[1], m = b.shape()[1];
  if (b.shape()[0] != k) {
    throw std::invalid_argument("matmul: inner dimensions differ, " + shape_str(a.shape()) + " x " + shape_str(b.shape()));
  }
  std::vector<Scalar> out(n * m);
  view(out.data(), n, m).noalias() = a.matrix() * b.matrix();
  return make_result({n, m}, std::move(out), "matmul", {a, b}, [n, k, m](Node& self) {
    Node& x = *self.inputs[0];
    Node& y = *self.inputs[1];
    auto g = view(self.grad, n, m);
    if (Scalar* gx = x.grad_buffer()) view(gx, n, k).noalias() += g * view(y.value, k, m).transpose();
    if (Scalar* gy = y.grad_buffer()) view(gy, k, m).noalias() += view(x.value, n, k).transpose() * g;
  });
}

Tensor transpose(const Tensor& a) {
  require_matrix(a, "transpose");
  const std::size_t r = a.shape()[0], c = a.shape()[1];
  std::vector<Scalar> out(r * c);
  view(out.data(), c, r) = a.matrix().transpose();
  return make_result({c, r}, std::move(out), "transpose", {a}, [r, c](Node& self) {
    Node& x = *self.inputs[0];
    if (Scalar* gx = x.grad_buffer()) view(gx, r, c) += view(self.grad, c, r).transpose();
  });
}

Tensor add(const Tensor& a, const Tensor& b) {
  require_same_shape(a, b, "add");
  auto out = std::vector<Scalar>(a.data().begin(), a.data().end());
  auto bd = b.data();
  for (std::size_t i = 0; i < out.size(); ++i) out[i] += bd[i];
  return make_result(a.shape(), std::move(out), "add", {a, b}, [](Node& self) {
    for (int s = 0; s < 2; ++s) {
      if (Scalar* g = self.inputs[s]->grad_buffer()) {
        for (std::size_t i = 0; i < self.grad.size(); ++i) g[i] += self.grad[i];
      }
    }
  });
}

Tensor sub(const Tensor& a, const Tensor& b) {
  require_same_shape(a, b, "sub");
  auto out = std::vector<Scalar>(a.data().begin(), a.data().end());
  auto bd = b.data();
  for (std::size_t i = 0; i < out.size(); ++i) out[i] -= bd[i];
  return make_result(a.shape(), std::move(out), "sub", {a, b}, [](Node& self) {
    if (Scalar* g = self.inputs[0]->grad_buffer()) {
      for (std::size_t i = 0; i < self.grad.size(); ++i) g[i] += self.grad[i];
    }
    if (Scalar* g = self.inputs[1]->grad_buffer()) {
      for (std::size_t i = 0; i < self.grad.size(); ++i) g[i] -= self.grad[i];
    }
  });
}

Tensor mul(const Tensor& a, const Tensor& b) {
  require_same_shape(a, b, "mul");
  auto ad = a.data();
  auto bd = b.data();
  std::vector<Scalar> out(ad.size());
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = ad[i] * bd[i];
  return make_result(a.shape(), std::move(out), "mul", {a, b}, [](Node& self) {
    Node& x = *self.inputs[0];
    Node& y = *self.inputs[1];
    if (Scalar* g = x.grad_buffer()) {
      for (std::size_t i = 0; i < self.grad.size(); ++i) g[i] += self.grad[i] * y.value[i];
    }
    if (Scalar* g = y.grad_buffer()) {
      for (std::size_t i = 0; i < self.grad.size(); ++i) g[i] += self.grad[i] * x.value[i];
    }
  });
}

Tensor div(const Tensor& a, const Tensor& b) {
  require_same_shape(a, b, "div");
  auto ad = a.data();
  auto bd = b.data();
  std::vector<Scalar> out(ad.size());
  for (std::size_t i = 0; i < out.size(); ++i) {
    if (bd[i] == 0.0) throw std::domain_error("div: division by zero");
    out[i] = ad[i] / bd[i];
  }
  return make_result(a.shape(), std::move(out), "div", {a, b}, [](Node& self) {
    Node& x = *self.inputs[0];
    Node& y = *self.inputs[1];
    if (Scalar* g = x.grad_buffer()) {
      for (std::size_t i = 0; i < self.grad.size(); ++i) g[i] += self.grad[i] / y.value[i];
    }
    if (Scalar* g = y.grad_buffer()) {
      for (std::size_t i = 0; i < self.grad.size(); ++i) g[i] -= self.grad[i] * self.value[i] / y.value[i];
    }
  });
}

namespace {

Eigen::Map<const Eigen::Matrix<Scalar, 1, Eigen::Dynamic>> row_vector(const Tensor& t) {
  return {t.data().data(), static_cast<Eigen::Index>(t.numel())};
}

}  // namespace

Tensor add_row(const Tensor& a, const Tensor& row) {
  const std::size_t r = a.rows(), c = a.cols();
  if (row.numel() != c) {
    throw std::invalid_argument("add_row: row of length " + std::to_string(row.numel()) + " vs " + std::to_string(c) +
                                " columns");
  }
  std::vector<Scalar> out(a.data().begin(), a.data().end());
  view(out.data(), r, c).rowwise() += row_vector(row);
  return make_result(a.shape(), std::move(out), "add_row", {a, row}, [r, c](Node& self) {
    if (Scalar* g = self.inputs[0]->grad_buffer()) {
      for (std::size_t i = 0; i < self.grad.size(); ++i) g[i] += self.grad[i];
    }
    if (Scalar* g = self.inputs[1]->grad_buffer()) {
      view(g, 1, c) += view(self.grad, r, c).colwise().sum();
    }
  });
}

Tensor add_scalar(const Tensor& a, Scalar s) {
  return unary(a, "add_scalar", [s](Scalar x) { return x + s; }, [](Scalar, Scalar) { return 1.0; });
}

Tensor mul_scalar(const Tensor& a, Scalar s) {
  return unary(a, "mul_scalar", [s](Scalar x) { return x * s; }, [s](Scalar, Scalar) { return s; });
}

Tensor exp(const Tensor& a) {
  return unary(a, "exp", [](Scalar x) { return std::exp(x); }, [](Scalar, Scalar y) { return y; });
}

Tensor log(const Tensor& a) {
  for (Scalar v : a.data()) {
    if (v <= 0.0) throw std::domain_error("log: non-positive argument");
  }
  return unary(a, "log", [](Scalar x) { return std::log(x); }, [](Scalar x, Scalar) { return 1.0 / x; });
}

Tensor pow(const Tensor& a, Scalar exponent) {
  if (exponent != std::floor(exponent)) {
    for (Scalar v : a.data()) {
      if (v < 0.0) throw std::domain_error("pow: negative base with non-integer exponent");
    }
  }
  return unary(
      a, "pow", [exponent](Scalar x) { return std::pow(x, exponent); },
      [exponent](Scalar x, Scalar) { return exponent * std::pow(x, exponent - 1.0); });
}

Tensor gelu(const Tensor& a) {
  constexpr Scalar inv_sqrt2 = 0.70710678118654752440;
  const Scalar inv_sqrt2pi = 1.0 / std::sqrt(2.0 * std::numbers::pi);
  return unary(
      a, "gelu", [](Scalar x) { return 0.5 * x * (1.0 + std::erf(x * inv_sqrt2)); },
      [inv_sqrt2pi](Scalar x, Scalar) {
        return 0.5 * (1.0 + std::erf(x * inv_sqrt2)) + x * inv_sqrt2pi * std::exp(-0.5 * x * x);
      });
}

Tensor sum(const Tensor& a, int axis) {
  require_matrix(a, "sum");
  const std::size_t r = a.shape()[0], c = a.shape()[1];
  if (axis == 0) {
    std::vector<Scalar> out(c);
    view(out.data(), 1, c) = a.matrix().colwise().sum();
    return make_result({c}, std::move(out), "sum0", {a}, [r, c](Node& self) {
      if (Scalar* g = self.inputs[0]->grad_buffer()) view(g, r, c).rowwise() += view(self.grad, 1, c).row(0);
    });
  }
  if (axis == 1) {
    std::vector<Scalar> out(r);
    view(out.data(), r, 1) = a.matrix().rowwise().sum();
    return make_result({r}, std::move(out), "sum1", {a}, [r, c](Node& self) {
      if (Scalar* g = self.inputs[0]->grad_buffer()) view(g, r, c).colwise() += view(self.grad, r, 1).col(0);
    });
  }
  throw std::invalid_argument("sum: axis must be 0 or 1");
}

Tensor mean(const Tensor& a, int axis) {
  require_matrix(a, "mean");
  const auto n = static_cast<Scalar>(axis == 0 ? a.shape()[0] : a.shape()[1]);
  return mul_scalar(sum(a, axis), 1.0 / n);
}

Tensor sum(const Tensor& a) {
  Scalar total = 0.0;
  for (Scalar v : a.data()) total += v;
  return make_result({1}, {total}, "sum", {a}, [](Node& self) {
    if (Scalar* g = self.inputs[0]->grad_buffer()) {
      for (std::size_t i = 0; i < self.inputs[0]->value.size(); ++i) g[i] += self.grad[0];
    }
  });
}

Tensor mean(const Tensor& a) { return mul_scalar(sum(a), 1.0 / static_cast<Scalar>(a.numel())); }

Tensor softmax_rows(const Tensor& a) {
  const std::size_t r = a.rows(), c = a.cols();
  std::vector<Scalar> out(a.numel());
  auto x = a.matrix();
  auto y = view(out.data(), r, c);
  for (Eigen::Index i = 0; i < y.rows(); ++i) {
    const Scalar mx = x.row(i).maxCoeff();
    y.row(i) = (x.row(i).array() - mx).exp();
    y.row(i) /= y.row(i).sum();
  }
  return make_result(a.shape(), std::move(out), "softmax", {a}, [r, c](Node& self) {
    if (Scalar* g = self.inputs[0]->grad_buffer()) {
      auto yv = view(self.value, r, c);
      auto gy = view(self.grad, r, c);
      auto gx = view(g, r, c);
      for (Eigen::Index i = 0; i < yv.rows(); ++i) {
        const Scalar dot = yv.row(i).dot(gy.row(i));
        gx.row(i).array() += yv.row(i).array() * (gy.row(i).array() - dot);
      }
    }
  });
}

Tensor layer_norm(const Tensor& x, const Tensor& gain, const Tensor& bias, Scalar eps) {
  const std::size_t r = x.rows(), c = x.cols();
  if (gain.numel() != c || bias.numel() != c) throw std::invalid_argument("layer_norm: gain/bias length mismatch");
  auto xm = x.matrix();
  RowMatrix xhat(static_cast<Eigen::Index>(r), static_cast<Eigen::Index>(c));
  Vector inv_std(static_cast<Eigen::Index>(r));
  for (Eigen::Index i = 0; i < xhat.rows(); ++i) {
    const Scalar mu = xm.row(i).mean();
    const Scalar var = (xm.row(i).array() - mu).square().mean();
    inv_std(i) = 1.0 / std::sqrt(var + eps);
    xhat.row(i) = (xm.row(i).array() - mu) * inv_std(i);
  }
  auto g = row_vector(gain);
  auto b = row_vector(bias);
  std::vector<Scalar> out(x.numel());
  auto y = view(out.data(), r, c);
  y = (xhat.array().rowwise() * g.array()).rowwise() + b.array();
  return make_result(x.shape(), std::move(out), "layer_norm", {x, gain, bias},
                     [r, c, xhat = std::move(xhat), inv_std = std::move(inv_std)](Node& self) {
                       auto gy = view(self.grad, r, c);
                       Node& xn = *self.inputs[0];
                       Node& gn = *self.inputs[1];
                       Node& bn = *self.inputs[2];
                       if (Scalar* gg = gn.grad_buffer()) {
                         view(gg, 1, c) += (gy.array() * xhat.array()).colwise().sum().matrix();
                       }
                       if (Scalar* gb = bn.grad_buffer()) view(gb, 1, c) += gy.colwise().sum();
                       if (Scalar* gx = xn.grad_buffer()) {
                         auto gain_row = view(gn.value, 1, c);
                         auto gxm = view(gx, r, c);
                         const auto n = static_cast<Scalar>(c);
                         for (Eigen::Index i = 0; i < gy.rows(); ++i) {
                           Eigen::Array<Scalar, 1, Eigen::Dynamic> dxhat = gy.row(i).array() * gain_row.array();
                           const Scalar m1 = dxhat.sum() / n;
                           const Scalar m2 = (dxhat * xhat.row(i).array()).sum() / n;
                           gxm.row(i).array() += inv_std(i) * (dxhat - m1 - xhat.row(i).array() * m2);
                         }
                       }
                     });
}

Tensor l2_normalize_rows(const Tensor& a) {
  const std::size_t r = a.rows(), c = a.cols();
  auto x = a.matrix();
  Vector norms = x.rowwise().norm();
  for (Eigen::Index i = 0; i < norms.size(); ++i) {
    if (norms(i) == 0.0) throw std::domain_error("l2_normalize_rows: row " + std::to_string(i) + " has zero norm");
  }
  std::vector<Scalar> out(a.numel());
  view(out.data(), r, c) = x.array().colwise() / norms.array();
  return make_result(a.shape(), std::move(out), "l2_normalize", {a}, [r, c, norms = std::move(norms)](Node& self) {
    if (Scalar* g = self.inputs[0]->grad_buffer()) {
      auto y = view(self.value, r, c);
      auto gy = view(self.grad, r, c);
      auto gx = view(g, r, c);
      for (Eigen::Index i = 0; i < y.rows(); ++i) {
        const Scalar dot = y.row(i).dot(gy.row(i));
        gx.row(i) += (gy.row(i) - dot * y.row(i)) / norms(i);
      }
    }
  });
}

Tensor embedding(const Tensor& table, std::span<const int> ids) {
  require_matrix(table, "embedding");
  const std::size_t vocab = table.shape()[0], d = table.shape()[1];
  if (ids.empty()) throw std::invalid_argument("embedding: empty id list");
  std::vector<int> idx(ids.begin(), ids.end());
  std::vector<Scalar> out(idx.size() * d);
  auto src = table.data();
  for (std::size_t i = 0; i < idx.size(); ++i) {
    if (idx[i] < 0 || static_cast<std::size_t>(idx[i]) >= vocab) {
      throw std::out_of_range("embedding: id " + std::to_string(idx[i]) + " outside table of " + std::to_string(vocab));
    }
    std::copy_n(src.begin() + static_cast<std::ptrdiff_t>(idx[i] * d), d, out.begin() + static_cast<std::ptrdiff_t>(i * d));
  }
  const std::size_t n = idx.size();
  return make_result({n, d}, std::move(out), "embedding", {table}, [d, idx = std::move(idx)](Node& self) {
    if (Scalar* g = self.inputs[0]->grad_buffer()) {
      for (std::size_t i = 0; i < idx.size(); ++i) {
        Scalar* dst = g + static_cast<std::size_t>(idx[i]) * d;
        const Scalar* s = self.grad.data() + i * d;
        for (std::size_t j = 0; j < d; ++j) dst[j] += s[j];
      }
    }
  });
}

Tensor slice(const Tensor& a, std::size_t row0, std::size_t nrows, std::size_t col0, std::size_t ncols) {
  require_matrix(a, "slice");
  const std::size_t r = a.shape()[0], c = a.shape()[1];
  if (nrows == 0 || ncols == 0 || row0 + nrows > r || col0 + ncols > c) {
    throw std::out_of_range("slice: window outside " + shape_str(a.shape()));
  }
  std::vector<Scalar> out(nrows * ncols);
  const auto ri = static_cast<Eigen::Index>(row0), ci = static_cast<Eigen::Index>(col0);
  const auto nr = static_cast<Eigen::Index>(nrows), nc = static_cast<Eigen::Index>(ncols);
  view(out.data(), nrows, ncols) = a.matrix().block(ri, ci, nr, nc);
  return make_result({nrows, ncols}, std::move(out), "slice", {a}, [r, c, ri, ci, nr, nc](Node& self) {
    if (Scalar* g = self.inputs[0]->grad_buffer()) {
      view(g, r, c).block(ri, ci, nr, nc) += view(self.grad, static_cast<std::size_t>(nr), static_cast<std::size_t>(nc));
    }
  });
}

Tensor slice_cols(const Tensor& a, std::size_t col0, std::size_t ncols) {
  require_matrix(a, "slice_cols");
  return slice(a, 0, a.shape()[0], col0, ncols);
}

Tensor concat_rows(std::span<const Tensor> parts) {
  if (parts.empty()) throw std::invalid_argument("concat_rows: nothing to concatenate");
  const std::size_t c = parts.front().cols();
  std::size_t total = 0;
  for (const auto& p : parts) {
    require_matrix(p, "concat_rows");
    if (p.cols() != c) throw std::invalid_argument("concat_rows: column count mismatch");
    total += p.rows();
  }
  std::vector<Scalar> out;
  out.reserve(total * c);
  std::vector<std::size_t> offsets;
  for (const auto& p : parts) {
    offsets.push_back(out.size());
    out.insert(out.end(), p.data().begin(), p.data().end());
  }
  return make_result_n({total, c}, std::move(out), "concat_rows", parts, [offsets = std::move(offsets)](Node& self) {
    for (std::size_t s = 0; s < self.inputs.size(); ++s) {
      Node& in = *self.inputs[s];
      if (Scalar* g = in.grad_buffer()) {
        for (std::size_t i = 0; i < in.value.size(); ++i) g[i] += self.grad[offsets[s] + i];
      }
    }
  });
}

Tensor concat_cols(std::span<const Tensor> parts) {
  if (parts.empty()) throw std::invalid_argument("concat_cols: nothing to concatenate");
  const std::size_t r = parts.front().rows();
  std::size_t total = 0;
  for (const auto& p : parts) {
    require_matrix(p, "concat_cols");
    if (p.rows() != r) throw std::invalid_argument("concat_cols: row count mismatch");
    total += p.cols();
  }
  std::vector<Scalar> out(r * total);
  auto y = view(out.data(), r, total);
  std::vector<std::size_t> offsets;
  Eigen::Index at = 0;
  for (const auto& p : parts) {
    offsets.push_back(static_cast<std::size_t>(at));
    y.middleCols(at, static_cast<Eigen::Index>(p.cols())) = p.matrix();
    at += static_cast<Eigen::Index>(p.cols());
  }
  return make_result_n({r, total}, std::move(out), "concat_cols", parts,
                       [r, total, offsets = std::move(offsets)](Node& self) {
                         auto gy = view(self.grad, r, total);
                         for (std::size_t s = 0; s < self.inputs.size(); ++s) {
                           Node& in = *self.inputs[s];
                           if (Scalar* g = in.grad_buffer()) {
                             view(g, r, in.cols()) +=
                                 gy.middleCols(static_cast<Eigen::Index>(offsets[s]), static_cast<Eigen::Index>(in.cols()));
                           }
                         }
                       });
}

Tensor reshape(const Tensor& a, Shape shape) {
  validate_shape(shape);
  if (product(shape) != a.numel()) {
    throw std::invalid_argument("reshape: " + shape_str(a.shape()) + " -> " + shape_str(shape));
  }
  std::vector<Scalar> out(a.data().begin(), a.data().end());
  return make_result(std::move(shape), std::move(out), "reshape", {a}, [](Node& self) {
    if (Scalar* g = self.inputs[0]->grad_buffer()) {
      for (std::size_t i = 0; i < self.grad.size(); ++i) g[i] += self.grad[i];
    }
  });
}

Tensor masked_fill(const Tensor& a, const Mask& mask, Scalar value) {
  if (mask.size() != a.numel()) throw std::invalid_argument("masked_fill: mask length mismatch");
  std::vector<Scalar> out(a.data().begin(), a.data().end());
  for (std::size_t i = 0; i < out.size(); ++i) {
    if (mask[i]) out[i] = value;
  }
  return make_result(a.shape(), std::move(out), "masked_fill", {a}, [mask](Node& self) {
    if (Scalar* g = self.inputs[0]->grad_buffer()) {
      for (std::size_t i = 0; i < self.grad.size(); ++i) {
        if (!mask[i]) g[i] += self.grad[i];
      }
    }
  });
}

Tensor logsumexp_rows(const Tensor& a) {
  // lse(x) = m + log(sum(exp(x - m))) with m the detached row maximum.
  const std::size_t r = a.rows(), c = a.cols();
  const Tensor x = a.rank() == 2 ? a : reshape(a, {r, c});
  Vector mx = x.matrix().rowwise().maxCoeff();
  RowMatrix shift = mx.replicate(1, static_cast<Eigen::Index>(c));
  const Tensor shifted = sub(x, Tensor::from_matrix(shift));
  const Tensor lse = log(sum(exp(shifted), 1));
  return add(lse, Tensor::from({r}, std::vector<Scalar>(mx.data(), mx.data() + mx.size())));
}

Tensor diagonal(const Tensor& a) {
  require_matrix(a, "diagonal");
  const std::size_t k = a.shape()[0];
  if (a.shape()[1] < k) throw std::invalid_argument("diagonal: matrix has fewer columns than rows");
  const std::size_t c = a.shape()[1];
  std::vector<Scalar> out(k);
  for (std::size_t i = 0; i < k; ++i) out[i] = a.data()[i * c + i];
  return make_result({k}, std::move(out), "diagonal", {a}, [k, c](Node& self) {
    if (Scalar* g = self.inputs[0]->grad_buffer()) {
      for (std::size_t i = 0; i < k; ++i) g[i * c + i] += self.grad[i];
    }
  });
}

Tensor cosine_similarity_matrix(const Tensor& a, const Tensor& b) {
  require_matrix(a, "cosine_similarity_matrix");
  require_matrix(b, "cosine_similarity_matrix");
  if (a.cols() != b.cols()) throw std::invalid_argument("cosine_similarity_matrix: embedding widths differ");
  return matmul(l2_normalize_rows(a), transpose(l2_normalize_rows(b)));
}

// ---------------------------------------------------------------------------

Scalar grad_check(const std::function<Tensor(const Tensor&)>& f, const Tensor& x, Scalar h) {
  Tensor probe = Tensor::from(x.shape(), std::vector<Scalar>(x.data().begin(), x.data().end()), true);
  const Tensor y = f(probe);
  if (y.numel() != 1) throw std::invalid_argument("grad_check: program is not scalar-valued");
  backward(y);
  const std::vector<Scalar> analytic(probe.grad().begin(), probe.grad().end());

  NoGradGuard no_grad;
  Scalar worst = 0.0;
  std::vector<Scalar> values(x.data().begin(), x.data().end());
  for (std::size_t i = 0; i < values.size(); ++i) {
    const Scalar orig = values[i];
    values[i] = orig + h;
    const Scalar up = f(Tensor::from(x.shape(), values)).item();
    values[i] = orig - h;
    const Scalar down = f(Tensor::from(x.shape(), values)).item();
    values[i] = orig;
    const Scalar numeric = (up - down) / (2.0 * h);
    worst = std::max(worst, std::abs(analytic[i] - numeric) / std::max(1.0, std::abs(numeric)));
  }
  return worst;
}

}  // namespace taskemb
