#include "nae/tensor.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>
#include <unordered_set>

namespace nae {

namespace {

thread_local bool g_grad_enabled = true;

void require_same_shape(const Tensor &a, const Tensor &b, const char *op) {
  if (a.rows() != b.rows() || a.cols() != b.cols()) {
    throw DimensionError(std::string(op) + ": shape mismatch (" + std::to_string(a.rows()) +
                         "x" + std::to_string(a.cols()) + " vs " + std::to_string(b.rows()) +
                         "x" + std::to_string(b.cols()) + ")");
  }
}

using NodePtr = std::shared_ptr<detail::Node>;

} // namespace

void detail::Node::accumulate(const Matrix &g) {
  if (!requires_grad) {
    return;
  }
  if (grad.size() == 0) {
    grad = g;
  } else {
    grad += g;
  }
}

Tensor::Tensor(Matrix value, bool requires_grad) : node_(std::make_shared<detail::Node>()) {
  if (value.size() == 0) {
    throw DimensionError("Tensor: extents must be positive");
  }
  node_->value = std::move(value);
  node_->requires_grad = requires_grad;
}

Tensor Tensor::zeros(Index rows, Index cols, bool requires_grad) {
  return Tensor(Matrix::Zero(rows, cols), requires_grad);
}

Tensor Tensor::scalar(double v, bool requires_grad) {
  return Tensor(Matrix::Constant(1, 1, v), requires_grad);
}

detail::Node &Tensor::node() const {
  if (!node_) {
    throw ContractError("Tensor: use of an undefined tensor");
  }
  return *node_;
}

Matrix &Tensor::mutable_value() {
  if (!node().leaf) {
    throw ContractError("Tensor: only leaf values may be modified in place");
  }
  return node_->value;
}

double Tensor::item() const {
  if (size() != 1) {
    throw ContractError("Tensor::item: tensor is not a scalar");
  }
  return node().value(0, 0);
}

Matrix Tensor::grad() const {
  if (has_grad()) {
    return node().grad;
  }
  return Matrix::Zero(rows(), cols());
}

void Tensor::zero_grad() { node().grad.resize(0, 0); }

void Tensor::backward() const {
  if (size() != 1) {
    throw ContractError("backward: loss must be a scalar");
  }
  if (!requires_grad()) {
    return;
  }
  // Iterative post-order DFS gives a topological order.
  std::vector<detail::Node *> order;
  std::unordered_set<detail::Node *> visited;
  std::vector<std::pair<detail::Node *, std::size_t>> stack;
  stack.emplace_back(node_.get(), 0);
  visited.insert(node_.get());
  while (!stack.empty()) {
    auto &[n, next] = stack.back();
    if (next < n->parents.size()) {
      detail::Node *p = n->parents[next++].get();
      if (p->requires_grad && visited.insert(p).second) {
        stack.emplace_back(p, 0);
      }
    } else {
      order.push_back(n);
      stack.pop_back();
    }
  }
  for (detail::Node *n : order) {
    if (!n->leaf) {
      n->grad.resize(0, 0);
    }
  }
  node_->accumulate(Matrix::Ones(1, 1));
  for (auto it = order.rbegin(); it != order.rend(); ++it) {
    detail::Node *n = *it;
    if (!n->leaf && n->backward && n->grad.size() != 0) {
      n->backward(n->grad);
    }
  }
}

Tensor Tensor::from_op(Matrix value, std::initializer_list<Tensor> inputs,
                       std::function<void(const Matrix &)> backward) {
  return from_op(std::move(value), std::span<const Tensor>(inputs.begin(), inputs.size()),
                 std::move(backward));
}

Tensor Tensor::from_op(Matrix value, std::span<const Tensor> inputs,
                       std::function<void(const Matrix &)> backward) {
  Tensor out;
  out.node_ = std::make_shared<detail::Node>();
  out.node_->value = std::move(value);
  out.node_->leaf = false;
  if (!g_grad_enabled) {
    return out;
  }
  bool any = false;
  for (const Tensor &t : inputs) {
    any = any || t.requires_grad();
  }
  if (any) {
    out.node_->requires_grad = true;
    out.node_->parents.reserve(inputs.size());
    for (const Tensor &t : inputs) {
      out.node_->parents.push_back(t.node_ptr());
    }
    out.node_->backward = std::move(backward);
  }
  return out;
}

NoGradGuard::NoGradGuard() : previous_(g_grad_enabled) { g_grad_enabled = false; }
NoGradGuard::~NoGradGuard() { g_grad_enabled = previous_; }

bool grad_enabled() noexcept { return g_grad_enabled; }

// ---- operations ------------------------------------------------------------

Tensor matmul(const Tensor &a, const Tensor &b) {
  if (a.cols() != b.rows()) {
    throw DimensionError("matmul: inner dimensions differ (" + std::to_string(a.cols()) +
                         " vs " + std::to_string(b.rows()) + ")");
  }
  NodePtr na = a.node_ptr(), nb = b.node_ptr();
  return Tensor::from_op(a.value() * b.value(), {a, b}, [na, nb](const Matrix &g) {
    if (na->requires_grad) {
      na->accumulate(g * nb->value.transpose());
    }
    if (nb->requires_grad) {
      nb->accumulate(na->value.transpose() * g);
    }
  });
}

Tensor transpose(const Tensor &a) {
  NodePtr na = a.node_ptr();
  return Tensor::from_op(a.value().transpose(), {a},
                         [na](const Matrix &g) { na->accumulate(g.transpose()); });
}

Tensor add(const Tensor &a, const Tensor &b) {
  require_same_shape(a, b, "add");
  NodePtr na = a.node_ptr(), nb = b.node_ptr();
  return Tensor::from_op(a.value() + b.value(), {a, b}, [na, nb](const Matrix &g) {
    na->accumulate(g);
    nb->accumulate(g);
  });
}

Tensor sub(const Tensor &a, const Tensor &b) {
  require_same_shape(a, b, "sub");
  NodePtr na = a.node_ptr(), nb = b.node_ptr();
  return Tensor::from_op(a.value() - b.value(), {a, b}, [na, nb](const Matrix &g) {
    na->accumulate(g);
    nb->accumulate(-g);
  });
}

Tensor mul(const Tensor &a, const Tensor &b) {
  require_same_shape(a, b, "mul");
  NodePtr na = a.node_ptr(), nb = b.node_ptr();
  return Tensor::from_op(a.value().cwiseProduct(b.value()), {a, b},
                         [na, nb](const Matrix &g) {
                           if (na->requires_grad) {
                             na->accumulate(g.cwiseProduct(nb->value));
                           }
                           if (nb->requires_grad) {
                             nb->accumulate(g.cwiseProduct(na->value));
                           }
                         });
}

Tensor add_row(const Tensor &a, const Tensor &row) {
  if (row.rows() != 1 || row.cols() != a.cols()) {
    throw DimensionError("add_row: bias must be 1 x " + std::to_string(a.cols()));
  }
  NodePtr na = a.node_ptr(), nr = row.node_ptr();
  Matrix out = a.value().rowwise() + row.value().row(0);
  return Tensor::from_op(std::move(out), {a, row}, [na, nr](const Matrix &g) {
    na->accumulate(g);
    if (nr->requires_grad) {
      nr->accumulate(g.colwise().sum());
    }
  });
}

Tensor scale(const Tensor &a, double factor) {
  NodePtr na = a.node_ptr();
  return Tensor::from_op(a.value() * factor, {a},
                         [na, factor](const Matrix &g) { na->accumulate(g * factor); });
}

Tensor scale_by(const Tensor &a, const Tensor &factor) {
  if (factor.size() != 1) {
    throw DimensionError("scale_by: factor must be 1x1");
  }
  NodePtr na = a.node_ptr(), nf = factor.node_ptr();
  return Tensor::from_op(a.value() * factor.item(), {a, factor}, [na, nf](const Matrix &g) {
    if (na->requires_grad) {
      na->accumulate(g * nf->value(0, 0));
    }
    if (nf->requires_grad) {
      nf->accumulate(Matrix::Constant(1, 1, g.cwiseProduct(na->value).sum()));
    }
  });
}

Tensor sum(const Tensor &a) {
  NodePtr na = a.node_ptr();
  return Tensor::from_op(Matrix::Constant(1, 1, a.value().sum()), {a}, [na](const Matrix &g) {
    na->accumulate(Matrix::Constant(na->value.rows(), na->value.cols(), g(0, 0)));
  });
}

Tensor mean(const Tensor &a) { return scale(sum(a), 1.0 / static_cast<double>(a.size())); }

Tensor mean_rows(const Tensor &a) {
  NodePtr na = a.node_ptr();
  const double inv = 1.0 / static_cast<double>(a.rows());
  Matrix out = a.value().colwise().sum() * inv;
  return Tensor::from_op(std::move(out), {a}, [na, inv](const Matrix &g) {
    Matrix full = g.replicate(na->value.rows(), 1) * inv;
    na->accumulate(full);
  });
}

Tensor slice_rows(const Tensor &a, Index start, Index count) {
  if (start < 0 || count <= 0 || start + count > a.rows()) {
    throw DimensionError("slice_rows: range out of bounds");
  }
  NodePtr na = a.node_ptr();
  return Tensor::from_op(a.value().middleRows(start, count), {a},
                         [na, start, count](const Matrix &g) {
                           Matrix full = Matrix::Zero(na->value.rows(), na->value.cols());
                           full.middleRows(start, count) = g;
                           na->accumulate(full);
                         });
}

Tensor slice_cols(const Tensor &a, Index start, Index count) {
  if (start < 0 || count <= 0 || start + count > a.cols()) {
    throw DimensionError("slice_cols: range out of bounds");
  }
  NodePtr na = a.node_ptr();
  return Tensor::from_op(a.value().middleCols(start, count), {a},
                         [na, start, count](const Matrix &g) {
                           Matrix full = Matrix::Zero(na->value.rows(), na->value.cols());
                           full.middleCols(start, count) = g;
                           na->accumulate(full);
                         });
}

Tensor concat_rows(std::span<const Tensor> parts) {
  if (parts.empty()) {
    throw DimensionError("concat_rows: no inputs");
  }
  const Index cols = parts.front().cols();
  Index rows = 0;
  for (const Tensor &p : parts) {
    if (p.cols() != cols) {
      throw DimensionError("concat_rows: column counts differ");
    }
    rows += p.rows();
  }
  Matrix out(rows, cols);
  std::vector<NodePtr> nodes;
  Index r = 0;
  for (const Tensor &p : parts) {
    out.middleRows(r, p.rows()) = p.value();
    r += p.rows();
    nodes.push_back(p.node_ptr());
  }
  return Tensor::from_op(std::move(out), parts, [nodes](const Matrix &g) {
    Index r = 0;
    for (const NodePtr &n : nodes) {
      if (n->requires_grad) {
        n->accumulate(g.middleRows(r, n->value.rows()));
      }
      r += n->value.rows();
    }
  });
}

Tensor concat_cols(std::span<const Tensor> parts) {
  if (parts.empty()) {
    throw DimensionError("concat_cols: no inputs");
  }
  const Index rows = parts.front().rows();
  Index cols = 0;
  for (const Tensor &p : parts) {
    if (p.rows() != rows) {
      throw DimensionError("concat_cols: row counts differ");
    }
    cols += p.cols();
  }
  Matrix out(rows, cols);
  std::vector<NodePtr> nodes;
  Index c = 0;
  for (const Tensor &p : parts) {
    out.middleCols(c, p.cols()) = p.value();
    c += p.cols();
    nodes.push_back(p.node_ptr());
  }
  return Tensor::from_op(std::move(out), parts, [nodes](const Matrix &g) {
    Index c = 0;
    for (const NodePtr &n : nodes) {
      if (n->requires_grad) {
        n->accumulate(g.middleCols(c, n->value.cols()));
      }
      c += n->value.cols();
    }
  });
}

Tensor gather_rows(const Tensor &table, std::span<const Index> indices) {
  if (indices.empty()) {
    throw DimensionError("gather_rows: empty index list");
  }
  Matrix out(static_cast<Index>(indices.size()), table.cols());
  for (std::size_t i = 0; i < indices.size(); ++i) {
    if (indices[i] < 0 || indices[i] >= table.rows()) {
      throw std::out_of_range("gather_rows: index " + std::to_string(indices[i]) +
                              " outside table of " + std::to_string(table.rows()) + " rows");
    }
    out.row(static_cast<Index>(i)) = table.value().row(indices[i]);
  }
  NodePtr nt = table.node_ptr();
  std::vector<Index> idx(indices.begin(), indices.end());
  return Tensor::from_op(std::move(out), {table}, [nt, idx](const Matrix &g) {
    Matrix full = Matrix::Zero(nt->value.rows(), nt->value.cols());
    for (std::size_t i = 0; i < idx.size(); ++i) {
      full.row(idx[i]) += g.row(static_cast<Index>(i));
    }
    nt->accumulate(full);
  });
}

Tensor place_block(const Tensor &a, Index rows, Index cols, Index row0, Index col0,
                   double fill) {
  if (row0 < 0 || col0 < 0 || row0 + a.rows() > rows || col0 + a.cols() > cols) {
    throw DimensionError("place_block: block does not fit");
  }
  Matrix out = Matrix::Constant(rows, cols, fill);
  out.block(row0, col0, a.rows(), a.cols()) = a.value();
  NodePtr na = a.node_ptr();
  return Tensor::from_op(std::move(out), {a}, [na, row0, col0](const Matrix &g) {
    na->accumulate(g.block(row0, col0, na->value.rows(), na->value.cols()));
  });
}

Tensor gelu(const Tensor &a) {
  // tanh approximation
  constexpr double k = 0.7978845608028654; // sqrt(2/pi)
  constexpr double c = 0.044715;
  NodePtr na = a.node_ptr();
  Matrix out = a.value().unaryExpr([](double x) {
    return 0.5 * x * (1.0 + std::tanh(k * (x + c * x * x * x)));
  });
  return Tensor::from_op(std::move(out), {a}, [na](const Matrix &g) {
    Matrix d = na->value.unaryExpr([](double x) {
      const double u = k * (x + c * x * x * x);
      const double t = std::tanh(u);
      const double du = k * (1.0 + 3.0 * c * x * x);
      return 0.5 * (1.0 + t) + 0.5 * x * (1.0 - t * t) * du;
    });
    na->accumulate(g.cwiseProduct(d));
  });
}

Tensor sigmoid(const Tensor &a) {
  NodePtr na = a.node_ptr();
  Matrix out = a.value().unaryExpr([](double x) {
    if (x >= 0) {
      return 1.0 / (1.0 + std::exp(-x));
    }
    const double e = std::exp(x);
    return e / (1.0 + e);
  });
  Matrix saved = out;
  return Tensor::from_op(std::move(out), {a}, [na, saved](const Matrix &g) {
    na->accumulate(g.cwiseProduct(saved.cwiseProduct((1.0 - saved.array()).matrix())));
  });
}

Tensor layer_norm(const Tensor &a, const Tensor &gain, const Tensor &bias, double eps) {
  const Index n = a.cols();
  if (gain.rows() != 1 || gain.cols() != n || bias.rows() != 1 || bias.cols() != n) {
    throw DimensionError("layer_norm: gain and bias must be 1 x " + std::to_string(n));
  }
  const Matrix &x = a.value();
  Matrix xhat(x.rows(), n);
  Eigen::VectorXd inv_std(x.rows());
  for (Index r = 0; r < x.rows(); ++r) {
    const double mu = x.row(r).mean();
    const double var = (x.row(r).array() - mu).square().mean();
    inv_std(r) = 1.0 / std::sqrt(var + eps);
    xhat.row(r) = (x.row(r).array() - mu) * inv_std(r);
  }
  Matrix out = (xhat.array().rowwise() * gain.value().row(0).array()).matrix();
  out.rowwise() += bias.value().row(0);
  NodePtr na = a.node_ptr(), ng = gain.node_ptr(), nb = bias.node_ptr();
  return Tensor::from_op(std::move(out), {a, gain, bias},
                         [na, ng, nb, xhat, inv_std, n](const Matrix &g) {
                           if (ng->requires_grad) {
                             ng->accumulate(g.cwiseProduct(xhat).colwise().sum());
                           }
                           if (nb->requires_grad) {
                             nb->accumulate(g.colwise().sum());
                           }
                           if (na->requires_grad) {
                             Matrix gx = (g.array().rowwise() * ng->value.row(0).array()).matrix();
                             Matrix dx(g.rows(), n);
                             const double inv_n = 1.0 / static_cast<double>(n);
                             for (Index r = 0; r < g.rows(); ++r) {
                               const double m1 = gx.row(r).mean();
                               const double m2 = gx.row(r).cwiseProduct(xhat.row(r)).sum() * inv_n;
                               dx.row(r) = inv_std(r) *
                                           (gx.row(r).array() - m1 - xhat.row(r).array() * m2).matrix();
                             }
                             na->accumulate(dx);
                           }
                         });
}

Tensor l2_normalize_rows(const Tensor &a) {
  const Matrix &x = a.value();
  Eigen::VectorXd norms = x.rowwise().norm();
  for (Index r = 0; r < x.rows(); ++r) {
    if (!(norms(r) > 0.0)) {
      throw NumericalError("l2_normalize_rows: zero-norm row " + std::to_string(r));
    }
  }
  Matrix out = x.array().colwise() / norms.array();
  Matrix y = out;
  NodePtr na = a.node_ptr();
  return Tensor::from_op(std::move(out), {a}, [na, y, norms](const Matrix &g) {
    Matrix dx(g.rows(), g.cols());
    for (Index r = 0; r < g.rows(); ++r) {
      const double proj = g.row(r).dot(y.row(r));
      dx.row(r) = (g.row(r) - proj * y.row(r)) / norms(r);
    }
    na->accumulate(dx);
  });
}

Tensor masked_softmax(const Tensor &scores, const BoolMatrix *allowed, const Tensor *multiplier) {
  const Matrix &s = scores.value();
  const Index R = s.rows(), C = s.cols();
  if (allowed && (allowed->rows() != R || allowed->cols() != C)) {
    throw DimensionError("masked_softmax: mask shape differs from scores");
  }
  if (multiplier && (multiplier->rows() != R || multiplier->cols() != C)) {
    throw DimensionError("masked_softmax: multiplier shape differs from scores");
  }
  // e holds exp(s - rowmax) on allowed cells, 0 elsewhere; z the weighted row sums.
  Matrix e = Matrix::Zero(R, C);
  Eigen::VectorXd z(R);
  Matrix p = Matrix::Zero(R, C);
  for (Index r = 0; r < R; ++r) {
    double mx = -std::numeric_limits<double>::infinity();
    for (Index c = 0; c < C; ++c) {
      if (!allowed || (*allowed)(r, c)) {
        mx = std::max(mx, s(r, c));
      }
    }
    if (mx == -std::numeric_limits<double>::infinity()) {
      throw ContractError("masked_softmax: row " + std::to_string(r) + " has every key blocked");
    }
    double total = 0.0;
    for (Index c = 0; c < C; ++c) {
      if (!allowed || (*allowed)(r, c)) {
        e(r, c) = std::exp(s(r, c) - mx);
        const double m = multiplier ? multiplier->value()(r, c) : 1.0;
        total += m * e(r, c);
      }
    }
    if (!(total > 0.0)) {
      throw NumericalError("masked_softmax: row " + std::to_string(r) + " has zero mass");
    }
    z(r) = total;
    for (Index c = 0; c < C; ++c) {
      const double m = multiplier ? multiplier->value()(r, c) : 1.0;
      p(r, c) = m * e(r, c) / total;
    }
  }
  NodePtr ns = scores.node_ptr();
  NodePtr nm = multiplier ? multiplier->node_ptr() : nullptr;
  Matrix saved_p = p;
  auto backward = [ns, nm, saved_p, e, z](const Matrix &g) {
    Eigen::VectorXd dot = g.cwiseProduct(saved_p).rowwise().sum();
    if (ns->requires_grad) {
      Matrix ds = saved_p.cwiseProduct((g.colwise() - dot));
      ns->accumulate(ds);
    }
    if (nm && nm->requires_grad) {
      Matrix dm = (g.colwise() - dot).cwiseProduct(e);
      dm.array().colwise() /= z.array();
      nm->accumulate(dm);
    }
  };
  if (multiplier) {
    return Tensor::from_op(std::move(p), {scores, *multiplier}, std::move(backward));
  }
  return Tensor::from_op(std::move(p), {scores}, std::move(backward));
}

Tensor cross_entropy(const Tensor &logits, std::span<const Index> targets) {
  const Matrix &x = logits.value();
  const Index N = x.rows(), K = x.cols();
  if (static_cast<Index>(targets.size()) != N) {
    throw DimensionError("cross_entropy: one target per row required");
  }
  Matrix probs(N, K);
  double loss = 0.0;
  for (Index r = 0; r < N; ++r) {
    const Index t = targets[static_cast<std::size_t>(r)];
    if (t < 0 || t >= K) {
      throw std::out_of_range("cross_entropy: class " + std::to_string(t) + " outside [0," +
                              std::to_string(K) + ")");
    }
    const double mx = x.row(r).maxCoeff();
    const RowVector ex = (x.row(r).array() - mx).exp().matrix();
    const double total = ex.sum();
    probs.row(r) = ex / total;
    loss += -(x(r, t) - mx - std::log(total));
  }
  loss /= static_cast<double>(N);
  NodePtr nl = logits.node_ptr();
  std::vector<Index> tg(targets.begin(), targets.end());
  return Tensor::from_op(Matrix::Constant(1, 1, loss), {logits}, [nl, probs, tg, N](const Matrix &g) {
    Matrix d = probs;
    for (Index r = 0; r < N; ++r) {
      d(r, tg[static_cast<std::size_t>(r)]) -= 1.0;
    }
    nl->accumulate(d * (g(0, 0) / static_cast<double>(N)));
  });
}

Tensor mse(const Tensor &pred, const Matrix &target) {
  if (pred.rows() != target.rows() || pred.cols() != target.cols()) {
    throw DimensionError("mse: prediction and target shapes differ");
  }
  Matrix diff = pred.value() - target;
  const double n = static_cast<double>(diff.size());
  NodePtr np = pred.node_ptr();
  return Tensor::from_op(Matrix::Constant(1, 1, diff.squaredNorm() / n), {pred},
                         [np, diff, n](const Matrix &g) { np->accumulate(diff * (2.0 * g(0, 0) / n)); });
}

} // namespace nae
