#include "nae/interaction.hpp"

#include <algorithm>

namespace nae {

Matrix PromptEmbeddings::pooling_matrix() const {
  const Index total = offsets.back();
  Matrix pool = Matrix::Zero(classes(), total);
  for (Index k = 0; k < classes(); ++k) {
    const Index begin = offsets[static_cast<std::size_t>(k)];
    const Index len = offsets[static_cast<std::size_t>(k) + 1] - begin;
    pool.block(k, begin, 1, len).setConstant(1.0 / static_cast<double>(len));
  }
  return pool;
}

Tensor PromptEmbeddings::pooled() const { return matmul(Tensor(pooling_matrix()), tokens); }

PromptEncoder::PromptEncoder(ParameterStore &store, const std::string &name, Tensor word_embedding_,
                             Index slot_count, Index max_length, Index width, Index heads,
                             Index ffn_width)
    : slots(store.uniform(name + ".slots", slot_count, width, 0.1)),
      positions(store.uniform(name + ".positions", max_length, width, 0.1)),
      word_embedding(std::move(word_embedding_)),
      block(store, name + ".block", width, heads, ffn_width) {}

PromptEmbeddings PromptEncoder::operator()(std::span<const PromptText> prompts,
                                           const Vocabulary &vocab) const {
  if (prompts.empty()) {
    throw std::invalid_argument("PromptEncoder: no prompts");
  }
  std::vector<Tensor> rows;
  std::vector<Index> offsets{0};
  for (const PromptText &p : prompts) {
    if (p.learnable_slots != slots.rows()) {
      throw DimensionError("PromptEncoder: prompt has " + std::to_string(p.learnable_slots) +
                           " slots, encoder has " + std::to_string(slots.rows()));
    }
    const std::vector<Index> ids = vocab.encode(p.words);
    const Index len = slots.rows() + static_cast<Index>(ids.size());
    if (len > positions.rows()) {
      throw DimensionError("PromptEncoder: prompt longer than the position table");
    }
    std::vector<Tensor> parts{slots};
    if (!ids.empty()) {
      parts.push_back(gather_rows(word_embedding, ids));
    }
    rows.push_back(add(concat_rows(parts), slice_rows(positions, 0, len)));
    offsets.push_back(offsets.back() + len);
  }
  const Index total = offsets.back();
  AttentionMask mask{BoolMatrix::Constant(total, total, false), std::nullopt};
  for (std::size_t k = 0; k + 1 < offsets.size(); ++k) {
    const Index len = offsets[k + 1] - offsets[k];
    mask.allowed.block(offsets[k], offsets[k], len, len).setConstant(true);
  }
  return {block(concat_rows(rows), &mask), std::move(offsets)};
}

InteractionBlock::InteractionBlock(ParameterStore &store, const std::string &name, Index width,
                                   Index heads, double gamma_init)
    : attn(store, name + ".attn", width, heads),
      gamma(store.constant(name + ".gamma", 1, 1, gamma_init)) {}

Tensor InteractionBlock::operator()(const Tensor &query, const Tensor &kv) const {
  return add(attn(query, kv, nullptr), scale_by(query, gamma));
}

PromptEmbeddings context_aware_refine(const InteractionBlock &block, const PromptEmbeddings &prompts,
                                      const FeatureMatrix &video) {
  if (prompts.width() != video.tokens.cols()) {
    throw DimensionError("context_aware_refine: prompt and video widths differ");
  }
  return {block(prompts.tokens, video.tokens), prompts.offsets};
}

FeatureMatrix score_guided_refine(const InteractionBlock &block, const FeatureMatrix &video,
                                  const PromptEmbeddings &prompts) {
  if (prompts.width() != video.tokens.cols()) {
    throw DimensionError("score_guided_refine: prompt and video widths differ");
  }
  return {block(video.tokens, prompts.tokens)};
}

MatchHead::MatchHead(ParameterStore &store, const std::string &name, double scale_init)
    : logit_scale(store.constant(name + ".logit_scale", 1, 1, scale_init)) {}

Tensor MatchHead::logits(const FeatureMatrix &video, const PromptEmbeddings &prompts) const {
  const Tensor v = l2_normalize_rows(mean_rows(video.tokens));
  const Tensor p = l2_normalize_rows(prompts.pooled());
  return scale_by(matmul(v, transpose(p)), logit_scale);
}

Index MatchDistribution::predicted() const {
  Index best = 0;
  probabilities.maxCoeff(&best);
  return best;
}

MatchResult match_loss(const MatchHead &head, const FeatureMatrix &video,
                       const PromptEmbeddings &prompts, std::span<const ScoreInterval> intervals,
                       double true_score) {
  if (static_cast<Index>(intervals.size()) != prompts.classes()) {
    throw DimensionError("match_loss: interval count differs from prompt classes");
  }
  MatchDistribution dist;
  dist.logits = head.logits(video, prompts);
  const RowVector ex = (dist.logits.value().row(0).array() - dist.logits.value().maxCoeff()).exp();
  dist.probabilities = ex / ex.sum();
  dist.target = classify_score(true_score, intervals) - 1;
  const Index targets[] = {dist.target};
  Tensor loss = cross_entropy(dist.logits, targets);
  return {std::move(dist), std::move(loss)};
}

PredictionHeads::PredictionHeads(ParameterStore &store, const std::string &name, Index width,
                                 Index hidden, std::vector<Index> classes_per_part)
    : score(store, name + ".score", width, hidden, 1), classes_(std::move(classes_per_part)) {
  for (std::size_t p = 0; p < classes_.size(); ++p) {
    actions_.emplace_back(store, name + ".action" + std::to_string(p), width, hidden, classes_[p]);
  }
}

std::pair<Tensor, std::vector<Tensor>> PredictionHeads::operator()(const FeatureMatrix &video) const {
  const Tensor pooled = mean_rows(video.tokens);
  std::vector<Tensor> logits;
  logits.reserve(actions_.size());
  for (const Mlp &head : actions_) {
    logits.push_back(head(pooled));
  }
  return {score(pooled), std::move(logits)};
}

HeadResult predict_heads(const PredictionHeads &heads, const FeatureMatrix &video,
                         const ScoreRange &range, double true_score,
                         std::span<const Index> true_actions) {
  if (true_actions.size() != heads.parts()) {
    throw DataError("predict_heads: " + std::to_string(true_actions.size()) +
                    " action labels for " + std::to_string(heads.parts()) + " parts");
  }
  HeadResult out;
  auto [score, logits] = heads(video);
  out.score_normalized = score;
  out.score_pred = range.denormalize(score.item());
  out.mse_loss = mse(score, Matrix::Constant(1, 1, range.normalize(true_score)));
  std::vector<Tensor> losses;
  for (std::size_t p = 0; p < logits.size(); ++p) {
    const Index target[] = {true_actions[p]};
    if (target[0] < 0 || target[0] >= heads.classes_per_part()[p]) {
      throw DataError("predict_heads: action class out of range for part " + std::to_string(p));
    }
    losses.push_back(cross_entropy(logits[p], target));
    Index best = 0;
    logits[p].value().row(0).maxCoeff(&best);
    out.action_preds.push_back(best);
  }
  out.action_logits = std::move(logits);
  if (losses.empty()) {
    out.action_loss = Tensor::scalar(0.0);
  } else {
    out.action_loss = scale(sum(concat_rows(losses)), 1.0 / static_cast<double>(losses.size()));
  }
  return out;
}

} // namespace nae
