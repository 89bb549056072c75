#pragma once

#include "nae/nn.hpp"
#include "nae/score_space.hpp"
#include "nae/text.hpp"

#include <span>
#include <vector>

namespace nae {

/// Token embeddings of the K class prompts, flattened class after class.
///
/// Prompts differ in length, so the K x L_p x D block is stored as a
/// (sum L_k) x D matrix plus per-class row offsets.
struct PromptEmbeddings {
  Tensor tokens;
  std::vector<Index> offsets; // K + 1 entries, offsets.front() == 0

  Index classes() const { return static_cast<Index>(offsets.size()) - 1; }
  Index width() const { return tokens.cols(); }
  /// K x sum(L_k) averaging matrix.
  Matrix pooling_matrix() const;
  /// Mean over each class's tokens: K x D.
  Tensor pooled() const;
};

/// Video token embeddings, M x D.
struct FeatureMatrix {
  Tensor tokens;
};

/// Small trainable text encoder: shared word embeddings, free "[X]" slot
/// rows, learned positions, then one pre-norm self-attention block applied
/// within each prompt.
class PromptEncoder {
public:
  PromptEncoder() = default;
  PromptEncoder(ParameterStore &store, const std::string &name, Tensor word_embedding,
                Index slot_count, Index max_length, Index width, Index heads, Index ffn_width);

  PromptEmbeddings operator()(std::span<const PromptText> prompts, const Vocabulary &vocab) const;

  /// Learnable slot embeddings, shared positionally across classes.
  Tensor slots;
  Tensor positions;
  Tensor word_embedding;
  TransformerBlock block;
};

/// Cross-attention with a learnable residual coefficient:
/// out = MHCA(query, kv) + gamma * query.
struct InteractionBlock {
  MultiHeadAttention attn;
  Tensor gamma;

  InteractionBlock() = default;
  InteractionBlock(ParameterStore &store, const std::string &name, Index width, Index heads,
                   double gamma_init = 1.0);
  Tensor operator()(const Tensor &query, const Tensor &kv) const;
};

/// E_P* = MHCA(E_P, E_V) + gamma_1 E_P; prompt tokens of all classes query
/// the video tokens.
PromptEmbeddings context_aware_refine(const InteractionBlock &block, const PromptEmbeddings &prompts,
                                      const FeatureMatrix &video);

/// E_V* = MHCA(E_V, E_P*) + gamma_2 E_V; video tokens query every refined
/// prompt token.
FeatureMatrix score_guided_refine(const InteractionBlock &block, const FeatureMatrix &video,
                                  const PromptEmbeddings &prompts);

/// Video-text matching logits: scale * cosine(pooled video, pooled prompt k).
struct MatchHead {
  Tensor logit_scale;

  MatchHead() = default;
  MatchHead(ParameterStore &store, const std::string &name, double scale_init);
  Tensor logits(const FeatureMatrix &video, const PromptEmbeddings &prompts) const;
};

struct MatchDistribution {
  Tensor logits;           // 1 x K
  RowVector probabilities; // softmax(logits)
  Index target = 0;        // 0-based class

  Index predicted() const;
};

struct MatchResult {
  MatchDistribution distribution;
  Tensor loss;
};

/// Cross-entropy of the matching distribution against the interval holding
/// `true_score`.
MatchResult match_loss(const MatchHead &head, const FeatureMatrix &video,
                       const PromptEmbeddings &prompts, std::span<const ScoreInterval> intervals,
                       double true_score);

/// Training-set score range used for min-max normalization.
struct ScoreRange {
  double min = 0.0;
  double max = 1.0;

  double normalize(double s) const { return (s - min) / (max - min); }
  double denormalize(double x) const { return min + x * (max - min); }
};

/// Score MLP plus one action MLP per part, all on the mean-pooled refined
/// video tokens.
class PredictionHeads {
public:
  PredictionHeads() = default;
  PredictionHeads(ParameterStore &store, const std::string &name, Index width, Index hidden,
                  std::vector<Index> classes_per_part);

  std::size_t parts() const { return actions_.size(); }
  const std::vector<Index> &classes_per_part() const { return classes_; }

  Mlp score;
  const std::vector<Mlp> &actions() const { return actions_; }

  /// Normalized score (1x1) and one logit row per part.
  std::pair<Tensor, std::vector<Tensor>> operator()(const FeatureMatrix &video) const;

private:
  std::vector<Mlp> actions_;
  std::vector<Index> classes_;
};

struct HeadResult {
  double score_pred = 0.0;  // denormalized
  Tensor score_normalized;  // 1x1
  std::vector<Tensor> action_logits;
  std::vector<Index> action_preds;
  Tensor mse_loss;
  Tensor action_loss; // mean of per-part cross-entropies
};

/// Throws DataError when `true_actions` does not have one entry per part.
HeadResult predict_heads(const PredictionHeads &heads, const FeatureMatrix &video,
                         const ScoreRange &range, double true_score,
                         std::span<const Index> true_actions);

} // namespace nae
