#pragma once

#include "taskemb/common.hpp"

#include <cstdint>
#include <functional>
#include <memory>
#include <span>
#include <vector>

namespace taskemb {

using Shape = std::vector<std::size_t>;

namespace detail {
struct Node;
}

/// Dense row-major array of doubles with optional participation in a
/// reverse-mode gradient graph.
///
/// A Tensor is a cheap shared handle. Tensors produced by primitives while
/// any input requires a gradient remember their inputs; everything else is a
/// plain value. Matrix-style primitives view a tensor as rows() x cols(),
/// where cols() is the last dimension.
class Tensor {
public:
  Tensor() = default;

  static Tensor zeros(Shape shape, bool requires_grad = false);
  static Tensor from(Shape shape, std::vector<Scalar> values, bool requires_grad = false);
  static Tensor from_matrix(const RowMatrix& m, bool requires_grad = false);
  static Tensor scalar(Scalar v, bool requires_grad = false);

  bool defined() const { return static_cast<bool>(node_); }
  const Shape& shape() const;
  std::size_t rank() const { return shape().size(); }
  std::size_t numel() const;
  std::size_t rows() const;
  std::size_t cols() const;

  std::span<const Scalar> data() const;
  /// Writable access to a leaf's values (parameters, inputs).
  std::span<Scalar> mutable_data();
  /// Empty span until a backward pass has reached this tensor.
  std::span<const Scalar> grad() const;

  Eigen::Map<const RowMatrix> matrix() const;
  /// Gradient viewed as rows() x cols(); zeros when no gradient was produced.
  RowMatrix grad_matrix() const;

  Scalar item() const;
  Scalar at(std::size_t row, std::size_t col) const;

  bool requires_grad() const;
  void set_requires_grad(bool on);
  bool is_leaf() const;
  const char* op_name() const;

  void zero_grad();
  /// Value copy cut from the graph.
  Tensor detach() const;

  bool same_storage(const Tensor& other) const { return node_ == other.node_; }

private:
  explicit Tensor(std::shared_ptr<detail::Node> node) : node_(std::move(node)) {}
  std::shared_ptr<detail::Node> node_;

  friend struct TensorAccess;
};

/// While alive on the current thread, primitives build no graph.
class NoGradGuard {
public:
  NoGradGuard();
  ~NoGradGuard();
  NoGradGuard(const NoGradGuard&) = delete;
  NoGradGuard& operator=(const NoGradGuard&) = delete;

private:
  bool previous_;
};

bool grad_mode_enabled();

/// Back-propagates d(loss)/d(leaf) into every grad-enabled leaf reachable
/// from `loss`. Leaves must have been reset with zero_grads() since the last
/// pass that touched them.
void backward(const Tensor& loss);
void zero_grads(std::span<Tensor> params);
void zero_grads(std::vector<Tensor>& params);

using Mask = std::vector<std::uint8_t>;

// Linear algebra
Tensor matmul(const Tensor& a, const Tensor& b);
Tensor transpose(const Tensor& a);

// Elementwise, identical shapes
Tensor add(const Tensor& a, const Tensor& b);
Tensor sub(const Tensor& a, const Tensor& b);
Tensor mul(const Tensor& a, const Tensor& b);
Tensor div(const Tensor& a, const Tensor& b);
/// rows x cols plus a length-cols vector broadcast over rows.
Tensor add_row(const Tensor& a, const Tensor& row);

Tensor add_scalar(const Tensor& a, Scalar s);
Tensor mul_scalar(const Tensor& a, Scalar s);
Tensor exp(const Tensor& a);
Tensor log(const Tensor& a);
Tensor pow(const Tensor& a, Scalar exponent);
Tensor gelu(const Tensor& a);

// Reductions. axis 0 collapses rows, axis 1 collapses columns.
Tensor sum(const Tensor& a, int axis);
Tensor mean(const Tensor& a, int axis);
Tensor sum(const Tensor& a);
Tensor mean(const Tensor& a);

// Row-wise
Tensor softmax_rows(const Tensor& a);
Tensor layer_norm(const Tensor& x, const Tensor& gain, const Tensor& bias, Scalar eps = 1e-12);
Tensor l2_normalize_rows(const Tensor& a);

// Indexing and layout
Tensor embedding(const Tensor& table, std::span<const int> ids);
Tensor slice(const Tensor& a, std::size_t row0, std::size_t nrows, std::size_t col0, std::size_t ncols);
Tensor slice_cols(const Tensor& a, std::size_t col0, std::size_t ncols);
Tensor concat_rows(std::span<const Tensor> parts);
Tensor concat_cols(std::span<const Tensor> parts);
Tensor reshape(const Tensor& a, Shape shape);
/// Positions with mask != 0 take `value` and pass no gradient.
Tensor masked_fill(const Tensor& a, const Mask& mask, Scalar value);

/// Row-wise log-sum-exp with the row maximum factored out; returns {rows}.
Tensor logsumexp_rows(const Tensor& a);
/// Diagonal of a square (or wide) matrix's leading k x k block as {k}.
Tensor diagonal(const Tensor& a);

/// s(i, j) = <a_i, b_j> / (|a_i| |b_j|).
Tensor cosine_similarity_matrix(const Tensor& a, const Tensor& b);

inline Tensor operator+(const Tensor& a, const Tensor& b) { return add(a, b); }
inline Tensor operator-(const Tensor& a, const Tensor& b) { return sub(a, b); }
inline Tensor operator*(const Tensor& a, const Tensor& b) { return mul(a, b); }
inline Tensor operator/(const Tensor& a, const Tensor& b) { return div(a, b); }
inline Tensor operator*(const Tensor& a, Scalar s) { return mul_scalar(a, s); }
inline Tensor operator*(Scalar s, const Tensor& a) { return mul_scalar(a, s); }
inline Tensor operator+(const Tensor& a, Scalar s) { return add_scalar(a, s); }
inline Tensor operator-(const Tensor& a) { return mul_scalar(a, -1.0); }

/// Max over coordinates of |analytic - central difference| / max(1, |central difference|)
/// for a scalar-valued program f at x.
Scalar grad_check(const std::function<Tensor(const Tensor&)>& f, const Tensor& x, Scalar h = 1e-6);

}  // namespace taskemb
