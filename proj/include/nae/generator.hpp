#pragma once

#include "nae/interaction.hpp"
#include "nae/nn.hpp"
#include "nae/text.hpp"

#include <span>
#include <string>
#include <vector>

namespace nae {

/// Action phrases per part and class: phrases[part][class].
struct ActionLexicon {
  std::vector<std::vector<std::string>> phrases;

  std::size_t parts() const { return phrases.size(); }
  std::vector<Index> classes_per_part() const;
  /// Every word appearing in a phrase.
  std::vector<std::string> words() const;
};

struct TemplateToken {
  bool learnable = false;
  Index slot = 0;   // learnable only
  std::string word; // fixed only
};

/// Decoder prompt mixing learnable slots with fixed action and score words.
struct Template {
  std::vector<TemplateToken> tokens;

  Index size() const { return static_cast<Index>(tokens.size()); }
  /// Fixed words verbatim, learnable slots as "[L]".
  std::string text() const;
};

/// [L]xg words(action_1) [L]xg ... words(action_n) [L]xg words(score) [L]xg.
/// Slot ids run 0..(parts+2)*g-1 in order of appearance. The score is spoken
/// with one decimal.
Template build_template(double score_pred, std::span<const Index> action_preds,
                        const ActionLexicon &lexicon, int slots_per_gap);

/// Learnable slots a template over `parts` parts uses.
Index template_slot_count(std::size_t parts, int slots_per_gap);

/// Block attention structure over (words | template | video).
struct TriTokenMask {
  Index words = 0;
  Index templ = 0;
  Index video = 0;
  BoolMatrix allowed;
  /// V = sigmoid(raw), M x M; undefined when M == 0.
  Tensor soft;

  Index total() const { return words + templ + video; }
  /// Hard structure plus V placed on the video-video block (1 elsewhere).
  AttentionMask attention() const;
};

/// Word row i attends words 0..i, all template and all video tokens; template
/// rows attend template and video; video rows attend video only, modulated by
/// sigmoid(raw_video_mask).
TriTokenMask build_tri_token_mask(Index words, Index templ, Index video,
                                  const Tensor *raw_video_mask);

struct DecoderConfig {
  Index width = 32;
  Index heads = 4;
  Index layers = 2;
  Index ffn_width = 64;
  Index max_words = 24; // caption tokens, excluding BOS/EOS
  Index max_template = 32;
  Index video_tokens = 8;
  Index template_slots = 8;
};

/// Transformer text decoder over Concat(words; template; video) under the
/// Tri-Token mask. The sparse video mask is shared by every layer and head.
class TextDecoder {
public:
  TextDecoder() = default;
  TextDecoder(ParameterStore &store, const std::string &name, Tensor word_embedding,
              Vocabulary vocab, const DecoderConfig &cfg);

  const DecoderConfig &config() const { return cfg_; }
  const Vocabulary &vocab() const { return vocab_; }
  Index vocab_size() const { return word_embedding.rows(); }

  /// Embedded input sequence: token + segment + per-block position.
  Tensor embed(std::span<const Index> words, const Template &templ,
               const FeatureMatrix &video) const;
  TriTokenMask mask(Index words, Index templ) const;
  /// Hidden states for every input row, (W + P + M) x D.
  Tensor hidden(std::span<const Index> words, const Template &templ,
                const FeatureMatrix &video) const;
  /// Next-token logits for the word rows, W x vocab.
  Tensor logits(std::span<const Index> words, const Template &templ,
                const FeatureMatrix &video) const;
  /// sum of V.
  Tensor video_mask_sum() const;

  Tensor word_embedding;
  Tensor slot_embedding;
  Tensor positions;
  Tensor segments;
  Tensor raw_video_mask;
  std::vector<TransformerBlock> blocks;
  LayerNorm final_norm;
  Linear vocab_projection;

private:
  Vocabulary vocab_;
  DecoderConfig cfg_;
};

struct DecoderOutput {
  Tensor logits;          // W x vocab
  Tensor generation_loss; // next-token cross-entropy over word rows
  Tensor sparse_loss;     // lambda * sum(V)
};

/// Teacher-forced pass: input words are BOS + caption, targets caption + EOS.
/// Throws DataError when the caption exceeds the configured length.
DecoderOutput decoder_forward(const TextDecoder &decoder, const FeatureMatrix &video,
                              const Template &templ, std::span<const Index> caption,
                              double lambda);

/// lambda * sum(V).
Tensor sparse_loss(const TextDecoder &decoder, double lambda);

enum class DecodeMode { Greedy, Beam };

struct DecodeOptions {
  DecodeMode mode = DecodeMode::Greedy;
  int beam_width = 3;
  Index max_len = 24;
};

/// Autoregressive decoding; returns caption ids without BOS/EOS. Special
/// tokens other than EOS are never emitted.
std::vector<Index> generate(const TextDecoder &decoder, const FeatureMatrix &video,
                            const Template &templ, const DecodeOptions &options);

} // namespace nae
