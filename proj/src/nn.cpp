#include "nae/nn.hpp"

#include <cmath>

namespace nae {

Tensor ParameterStore::add(const std::string &name, Matrix init, bool decay) {
  if (index_.count(name) != 0) {
    throw ContractError("ParameterStore: duplicate parameter name '" + name + "'");
  }
  Parameter p;
  p.name = name;
  p.first_moment = Matrix::Zero(init.rows(), init.cols());
  p.second_moment = Matrix::Zero(init.rows(), init.cols());
  p.tensor = Tensor(std::move(init), true);
  p.decay = decay;
  index_.emplace(name, params_.size());
  params_.push_back(std::move(p));
  return params_.back().tensor;
}

Tensor ParameterStore::xavier(const std::string &name, Index fan_in, Index fan_out) {
  const double limit = std::sqrt(6.0 / static_cast<double>(fan_in + fan_out));
  return uniform(name, fan_in, fan_out, limit);
}

Tensor ParameterStore::uniform(const std::string &name, Index rows, Index cols, double limit) {
  std::uniform_real_distribution<double> dist(-limit, limit);
  Matrix m(rows, cols);
  for (Index i = 0; i < m.size(); ++i) {
    m.data()[i] = dist(rng_);
  }
  return add(name, std::move(m), true);
}

Tensor ParameterStore::zeros(const std::string &name, Index rows, Index cols, bool decay) {
  return add(name, Matrix::Zero(rows, cols), decay);
}

Tensor ParameterStore::constant(const std::string &name, Index rows, Index cols, double v,
                                bool decay) {
  return add(name, Matrix::Constant(rows, cols, v), decay);
}

Parameter &ParameterStore::at(const std::string &name) {
  auto it = index_.find(name);
  if (it == index_.end()) {
    throw std::out_of_range("ParameterStore: no parameter '" + name + "'");
  }
  return params_[it->second];
}

const Parameter &ParameterStore::at(const std::string &name) const {
  auto it = index_.find(name);
  if (it == index_.end()) {
    throw std::out_of_range("ParameterStore: no parameter '" + name + "'");
  }
  return params_[it->second];
}

void ParameterStore::zero_grad() {
  for (Parameter &p : params_) {
    p.tensor.zero_grad();
  }
}

std::size_t ParameterStore::scalar_count() const {
  std::size_t n = 0;
  for (const Parameter &p : params_) {
    n += static_cast<std::size_t>(p.tensor.size());
  }
  return n;
}

Linear::Linear(ParameterStore &store, const std::string &name, Index fan_in, Index fan_out)
    : weight(store.xavier(name + ".weight", fan_in, fan_out)),
      bias(store.zeros(name + ".bias", 1, fan_out)) {}

Tensor Linear::operator()(const Tensor &x) const { return add_row(matmul(x, weight), bias); }

LayerNorm::LayerNorm(ParameterStore &store, const std::string &name, Index width)
    : gain(store.constant(name + ".gain", 1, width, 1.0)),
      bias(store.zeros(name + ".bias", 1, width)) {}

Mlp::Mlp(ParameterStore &store, const std::string &name, Index in, Index width, Index outputs)
    : hidden(store, name + ".hidden", in, width), out(store, name + ".out", width, outputs) {}

MultiHeadAttention::MultiHeadAttention(ParameterStore &store, const std::string &name,
                                       Index width, Index heads)
    : query(store, name + ".query", width, width), key(store, name + ".key", width, width),
      value(store, name + ".value", width, width),
      output(store, name + ".output", width, width), width_(width), heads_(heads) {
  if (heads <= 0 || width % heads != 0) {
    throw DimensionError("MultiHeadAttention: width " + std::to_string(width) +
                         " not divisible by " + std::to_string(heads) + " heads");
  }
}

Tensor MultiHeadAttention::operator()(const Tensor &query_src, const Tensor &kv_src,
                                      const AttentionMask *mask,
                                      std::vector<Matrix> *weights) const {
  if (query_src.cols() != width_ || kv_src.cols() != width_) {
    throw DimensionError("MultiHeadAttention: inputs must have width " + std::to_string(width_));
  }
  if (mask && (mask->allowed.rows() != query_src.rows() || mask->allowed.cols() != kv_src.rows())) {
    throw DimensionError("MultiHeadAttention: mask must be " + std::to_string(query_src.rows()) +
                         " x " + std::to_string(kv_src.rows()));
  }
  const Tensor q = query(query_src);
  const Tensor k = key(kv_src);
  const Tensor v = value(kv_src);
  const Index head_width = width_ / heads_;
  const double scale_factor = 1.0 / std::sqrt(static_cast<double>(head_width));
  const BoolMatrix *allowed = mask ? &mask->allowed : nullptr;
  const Tensor *multiplier = (mask && mask->multiplier) ? &*mask->multiplier : nullptr;

  std::vector<Tensor> heads;
  heads.reserve(static_cast<std::size_t>(heads_));
  if (weights) {
    weights->clear();
  }
  for (Index h = 0; h < heads_; ++h) {
    const Tensor qh = slice_cols(q, h * head_width, head_width);
    const Tensor kh = slice_cols(k, h * head_width, head_width);
    const Tensor vh = slice_cols(v, h * head_width, head_width);
    const Tensor scores = scale(matmul(qh, transpose(kh)), scale_factor);
    const Tensor probs = masked_softmax(scores, allowed, multiplier);
    if (weights) {
      weights->push_back(probs.value());
    }
    heads.push_back(matmul(probs, vh));
  }
  const Tensor merged = heads.size() == 1 ? heads.front() : concat_cols(heads);
  return output(merged);
}

TransformerBlock::TransformerBlock(ParameterStore &store, const std::string &name, Index width,
                                   Index heads, Index ffn_width)
    : attn_norm(store, name + ".attn_norm", width), attn(store, name + ".attn", width, heads),
      ffn_norm(store, name + ".ffn_norm", width),
      ffn(store, name + ".ffn", width, ffn_width, width) {}

Tensor TransformerBlock::operator()(const Tensor &x, const AttentionMask *mask) const {
  const Tensor normed = attn_norm(x);
  const Tensor h = add(x, attn(normed, normed, mask));
  return add(h, ffn(ffn_norm(h)));
}

} // namespace nae
