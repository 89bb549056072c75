#pragma once

#include "nae/checkpoint.hpp"
#include "nae/config.hpp"
#include "nae/dataset.hpp"
#include "nae/generator.hpp"
#include "nae/interaction.hpp"
#include "nae/score_space.hpp"

#include <memory>
#include <span>
#include <string>
#include <vector>

namespace nae {

/// Score intervals and the training-set range they span.
struct ScoreSpace {
  std::vector<ScoreInterval> intervals;

  static ScoreSpace from_scores(std::span<const double> scores, int intervals);
  /// Shared bounds: left of interval 1 followed by every right bound.
  static ScoreSpace from_bounds(std::span<const double> bounds);

  ScoreRange range() const { return {intervals.front().left, intervals.back().right}; }
  std::vector<double> bounds() const;
};

/// Per-sample loss terms, each a tracked scalar.
struct SampleLosses {
  Tensor generation;
  Tensor match;
  Tensor score;
  Tensor action;
  /// generation + match + score + action (the sparse term is per step).
  Tensor total;
  bool interval_correct = false;
};

struct Prediction {
  std::string id;
  std::vector<std::string> tokens;
  std::string text;
  double score = 0.0;
  std::vector<Index> actions;
  Index interval = 0; // 0-based matching argmax
};

/// Full pipeline: video encoder -> context-aware prompt refinement ->
/// score-guided video refinement -> matching + heads -> template -> decoder.
class NaeModel {
public:
  NaeModel(const RunConfig &cfg, ScoreSpace space);

  NaeModel(const NaeModel &) = delete;
  NaeModel &operator=(const NaeModel &) = delete;

  const RunConfig &config() const { return cfg_; }
  const ScoreSpace &score_space() const { return space_; }
  const ActionLexicon &lexicon() const { return lexicon_; }
  const Vocabulary &vocab() const { return vocab_; }
  const std::vector<PromptText> &prompts() const { return prompts_; }
  ParameterStore &store() { return store_; }
  const ParameterStore &store() const { return store_; }

  PromptEmbeddings encode_prompts() const;
  FeatureMatrix encode_video(const Matrix &features) const;

  /// Teacher-forced losses; the template carries the gold score and actions.
  SampleLosses losses(const Sample &sample, const PromptEmbeddings &prompts) const;
  /// L_SPARSE for the shared video mask.
  Tensor sparse(double lambda) const { return sparse_loss(decoder_, lambda); }
  double video_mask_sum() const;

  Prediction predict(const Sample &sample, const PromptEmbeddings &prompts,
                     const DecodeOptions &options) const;
  DecodeOptions decode_options() const;

  /// Parameters plus the score-space bounds, in registration order.
  std::vector<NamedMatrix> state() const;
  void load_state(const std::vector<NamedMatrix> &entries);

  static constexpr const char *kBoundsEntry = "score_space.bounds";

  std::vector<Index> encode_caption(const std::string &caption) const;

  const TextDecoder &decoder() const { return decoder_; }
  const PredictionHeads &heads() const { return heads_; }
  const InteractionBlock &context_block() const { return context_block_; }
  const InteractionBlock &score_block() const { return score_block_; }
  const MatchHead &match_head() const { return match_; }

private:
  RunConfig cfg_;
  ScoreSpace space_;
  ActionLexicon lexicon_;
  Vocabulary vocab_;
  std::vector<PromptText> prompts_;
  ParameterStore store_;

  Tensor word_embedding_;
  Linear video_projection_;
  Tensor video_positions_;
  PromptEncoder prompt_encoder_;
  InteractionBlock context_block_;
  InteractionBlock score_block_;
  MatchHead match_;
  PredictionHeads heads_;
  TextDecoder decoder_;
};

/// Rebuilds a model from a checkpoint archive written by `state()`.
std::unique_ptr<NaeModel> load_model(const RunConfig &cfg, const std::vector<NamedMatrix> &entries);

} // namespace nae
