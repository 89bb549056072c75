#pragma once

#include "nae/tensor.hpp"

#include <cstdint>
#include <map>
#include <optional>
#include <random>
#include <string>
#include <vector>

namespace nae {

/// A named trainable tensor together with its AdamW moments.
struct Parameter {
  std::string name;
  Tensor tensor;
  Matrix first_moment;
  Matrix second_moment;
  std::int64_t step = 0;
  bool decay = true;
};

/// Owns every Parameter of a model, in registration order.
class ParameterStore {
public:
  explicit ParameterStore(std::uint64_t seed = 0) : rng_(seed) {}

  ParameterStore(const ParameterStore &) = delete;
  ParameterStore &operator=(const ParameterStore &) = delete;
  ParameterStore(ParameterStore &&) = default;
  ParameterStore &operator=(ParameterStore &&) = default;

  Tensor add(const std::string &name, Matrix init, bool decay = true);
  Tensor xavier(const std::string &name, Index fan_in, Index fan_out);
  Tensor uniform(const std::string &name, Index rows, Index cols, double limit);
  Tensor zeros(const std::string &name, Index rows, Index cols, bool decay = false);
  Tensor constant(const std::string &name, Index rows, Index cols, double v, bool decay = false);

  std::vector<Parameter> &parameters() { return params_; }
  const std::vector<Parameter> &parameters() const { return params_; }
  Parameter &at(const std::string &name);
  const Parameter &at(const std::string &name) const;
  bool contains(const std::string &name) const { return index_.count(name) != 0; }

  void zero_grad();
  std::size_t scalar_count() const;

private:
  std::vector<Parameter> params_;
  std::map<std::string, std::size_t> index_;
  std::mt19937_64 rng_;
};

/// y = x W + b with W fan_in x fan_out.
struct Linear {
  Tensor weight;
  Tensor bias;

  Linear() = default;
  Linear(ParameterStore &store, const std::string &name, Index fan_in, Index fan_out);
  Tensor operator()(const Tensor &x) const;
};

struct LayerNorm {
  Tensor gain;
  Tensor bias;

  LayerNorm() = default;
  LayerNorm(ParameterStore &store, const std::string &name, Index width);
  Tensor operator()(const Tensor &x) const { return layer_norm(x, gain, bias); }
};

/// Two-layer perceptron with a GELU hidden layer.
struct Mlp {
  Linear hidden;
  Linear out;

  Mlp() = default;
  Mlp(ParameterStore &store, const std::string &name, Index in, Index width, Index outputs);
  Tensor operator()(const Tensor &x) const { return out(gelu(hidden(x))); }
};

/// Hard structure and optional soft multiplier applied to attention weights.
struct AttentionMask {
  BoolMatrix allowed;
  /// Same shape as `allowed`; multiplies probabilities before renormalization.
  std::optional<Tensor> multiplier;
};

/// Scaled dot-product attention over `heads` heads with learned Q/K/V/output
/// projections.
class MultiHeadAttention {
public:
  MultiHeadAttention() = default;
  MultiHeadAttention(ParameterStore &store, const std::string &name, Index width, Index heads);

  /// query_src: Q x D, kv_src: M x D, mask: Q x M. When `weights` is given it
  /// receives one Q x M probability matrix per head.
  Tensor operator()(const Tensor &query_src, const Tensor &kv_src, const AttentionMask *mask,
                    std::vector<Matrix> *weights = nullptr) const;

  Index width() const { return width_; }
  Index heads() const { return heads_; }

  Linear query, key, value, output;

private:
  Index width_ = 0;
  Index heads_ = 1;
};

/// Position-wise feed-forward: Linear -> GELU -> Linear.
using FeedForward = Mlp;

/// Pre-norm transformer block: x + Attn(LN x), then x + FFN(LN x).
struct TransformerBlock {
  LayerNorm attn_norm;
  MultiHeadAttention attn;
  LayerNorm ffn_norm;
  FeedForward ffn;

  TransformerBlock() = default;
  TransformerBlock(ParameterStore &store, const std::string &name, Index width, Index heads,
                   Index ffn_width);
  Tensor operator()(const Tensor &x, const AttentionMask *mask) const;
};

} // namespace nae
