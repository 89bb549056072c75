#pragma once

#include "nae/errors.hpp"

#include <Eigen/Dense>

#include <cstddef>
#include <functional>
#include <initializer_list>
#include <memory>
#include <span>
#include <string>
#include <vector>

namespace nae {

/// Row-major dense matrix of 64-bit reals; the storage of every Tensor.
using Matrix = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
using RowVector = Eigen::Matrix<double, 1, Eigen::Dynamic>;
using BoolMatrix = Eigen::Array<bool, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
using Index = Eigen::Index;

namespace detail {

struct Node {
  Matrix value;
  Matrix grad;
  bool requires_grad = false;
  bool leaf = true;
  std::vector<std::shared_ptr<Node>> parents;
  std::function<void(const Matrix &)> backward;

  void accumulate(const Matrix &g);
};

} // namespace detail

/// Handle to a node of the reverse-mode tape.
///
/// Tensors are two-dimensional (rows x cols); a scalar is 1x1. Copies share
/// the underlying node, so a Parameter held by a module and the same
/// Parameter held by the optimizer see identical values and gradients.
class Tensor {
public:
  Tensor() = default;
  explicit Tensor(Matrix value, bool requires_grad = false);

  static Tensor zeros(Index rows, Index cols, bool requires_grad = false);
  static Tensor scalar(double v, bool requires_grad = false);

  bool defined() const noexcept { return node_ != nullptr; }
  Index rows() const { return node().value.rows(); }
  Index cols() const { return node().value.cols(); }
  Index size() const { return node().value.size(); }

  const Matrix &value() const { return node().value; }
  /// In-place access for leaves only (initialization, optimizer, checkpoints).
  Matrix &mutable_value();
  double item() const;

  bool requires_grad() const { return node().requires_grad; }
  bool is_leaf() const { return node().leaf; }
  bool has_grad() const { return node().grad.size() != 0; }
  /// Gradient, or an all-zero matrix of the value's shape if none accumulated.
  Matrix grad() const;
  void zero_grad();

  /// Reverse pass from a scalar. Leaf gradients accumulate across calls.
  void backward() const;

  bool same_node(const Tensor &other) const noexcept { return node_ == other.node_; }

  // Used by op implementations.
  const std::shared_ptr<detail::Node> &node_ptr() const { return node_; }
  static Tensor from_op(Matrix value, std::initializer_list<Tensor> inputs,
                        std::function<void(const Matrix &)> backward);
  static Tensor from_op(Matrix value, std::span<const Tensor> inputs,
                        std::function<void(const Matrix &)> backward);

private:
  detail::Node &node() const;
  std::shared_ptr<detail::Node> node_;
};

/// Disables tape recording on this thread for its lifetime.
class NoGradGuard {
public:
  NoGradGuard();
  ~NoGradGuard();
  NoGradGuard(const NoGradGuard &) = delete;
  NoGradGuard &operator=(const NoGradGuard &) = delete;

private:
  bool previous_;
};

bool grad_enabled() noexcept;

// ---- differentiable operations -------------------------------------------

Tensor matmul(const Tensor &a, const Tensor &b);
Tensor transpose(const Tensor &a);
Tensor add(const Tensor &a, const Tensor &b);
Tensor sub(const Tensor &a, const Tensor &b);
Tensor mul(const Tensor &a, const Tensor &b);
/// a (R x C) plus a broadcast 1 x C row.
Tensor add_row(const Tensor &a, const Tensor &row);
Tensor scale(const Tensor &a, double factor);
/// a scaled by a 1x1 tensor.
Tensor scale_by(const Tensor &a, const Tensor &factor);
Tensor sum(const Tensor &a);
Tensor mean(const Tensor &a);
/// Column means over rows: R x C -> 1 x C.
Tensor mean_rows(const Tensor &a);
Tensor slice_rows(const Tensor &a, Index start, Index count);
Tensor slice_cols(const Tensor &a, Index start, Index count);
Tensor concat_rows(std::span<const Tensor> parts);
Tensor concat_cols(std::span<const Tensor> parts);
/// Row lookup into an embedding table.
Tensor gather_rows(const Tensor &table, std::span<const Index> indices);
/// Places `a` inside a rows x cols matrix at (row0, col0); other cells hold `fill`.
Tensor place_block(const Tensor &a, Index rows, Index cols, Index row0, Index col0,
                   double fill);
Tensor gelu(const Tensor &a);
Tensor sigmoid(const Tensor &a);
Tensor layer_norm(const Tensor &a, const Tensor &gain, const Tensor &bias,
                  double eps = 1e-5);
/// Each row divided by its Euclidean norm. Zero rows raise NumericalError.
Tensor l2_normalize_rows(const Tensor &a);

/// Row softmax restricted to allowed cells, optionally rescaled by a
/// multiplier and renormalized: p_ij = m_ij e^{s_ij} / sum_k m_ik e^{s_ik}.
/// Blocked cells get exactly zero probability. A row with no allowed cell
/// raises ContractError.
Tensor masked_softmax(const Tensor &scores, const BoolMatrix *allowed,
                      const Tensor *multiplier);

/// Mean over rows of -log softmax(logits)[target].
Tensor cross_entropy(const Tensor &logits, std::span<const Index> targets);
/// Mean squared difference; target is treated as a constant.
Tensor mse(const Tensor &pred, const Matrix &target);

} // namespace nae
