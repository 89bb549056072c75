#include "nae/generator.hpp"

#include "nae/number_words.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <set>

namespace nae {

namespace {

constexpr Index kSegmentWord = 0;
constexpr Index kSegmentTemplate = 1;
constexpr Index kSegmentVideo = 2;

void push_slots(Template &t, Index &next_slot, int count) {
  for (int i = 0; i < count; ++i) {
    t.tokens.push_back({true, next_slot++, {}});
  }
}

void push_words(Template &t, const std::vector<std::string> &words) {
  for (const auto &w : words) {
    t.tokens.push_back({false, 0, w});
  }
}

RowVector log_softmax_row(const Matrix &logits, Index row) {
  const double mx = logits.row(row).maxCoeff();
  const double lse = mx + std::log((logits.row(row).array() - mx).exp().sum());
  return (logits.row(row).array() - lse).matrix();
}

void forbid_specials(RowVector &logp) {
  constexpr double kNeg = -std::numeric_limits<double>::infinity();
  logp(Vocabulary::kPad) = kNeg;
  logp(Vocabulary::kBos) = kNeg;
  logp(Vocabulary::kUnk) = kNeg;
}

} // namespace

std::vector<Index> ActionLexicon::classes_per_part() const {
  std::vector<Index> out;
  for (const auto &part : phrases) {
    out.push_back(static_cast<Index>(part.size()));
  }
  return out;
}

std::vector<std::string> ActionLexicon::words() const {
  std::set<std::string> out;
  for (const auto &part : phrases) {
    for (const auto &phrase : part) {
      for (auto &w : tokenize(phrase)) {
        out.insert(std::move(w));
      }
    }
  }
  return {out.begin(), out.end()};
}

std::string Template::text() const {
  std::string out;
  for (const TemplateToken &t : tokens) {
    if (!out.empty()) {
      out += ' ';
    }
    out += t.learnable ? std::string("[L]") : t.word;
  }
  return out;
}

Index template_slot_count(std::size_t parts, int slots_per_gap) {
  return static_cast<Index>(parts + 2) * slots_per_gap;
}

Template build_template(double score_pred, std::span<const Index> action_preds,
                        const ActionLexicon &lexicon, int slots_per_gap) {
  if (slots_per_gap < 0) {
    throw std::invalid_argument("build_template: slots_per_gap must be >= 0");
  }
  if (action_preds.size() != lexicon.parts()) {
    throw DataError("build_template: " + std::to_string(action_preds.size()) +
                    " predicted actions for " + std::to_string(lexicon.parts()) + " parts");
  }
  Template t;
  Index next_slot = 0;
  for (std::size_t p = 0; p < action_preds.size(); ++p) {
    const auto &classes = lexicon.phrases[p];
    const Index cls = action_preds[p];
    if (cls < 0 || cls >= static_cast<Index>(classes.size())) {
      throw DataError("build_template: no lexicon entry for class " + std::to_string(cls) +
                      " of part " + std::to_string(p));
    }
    push_slots(t, next_slot, slots_per_gap);
    push_words(t, tokenize(classes[static_cast<std::size_t>(cls)]));
  }
  push_slots(t, next_slot, slots_per_gap);
  push_words(t, number_to_words(score_pred, 1));
  push_slots(t, next_slot, slots_per_gap);
  return t;
}

AttentionMask TriTokenMask::attention() const {
  AttentionMask m{allowed, std::nullopt};
  if (video > 0 && soft.defined()) {
    const Index start = words + templ;
    m.multiplier = place_block(soft, total(), total(), start, start, 1.0);
  }
  return m;
}

TriTokenMask build_tri_token_mask(Index words, Index templ, Index video,
                                  const Tensor *raw_video_mask) {
  if (words < 0 || templ < 0 || video < 0) {
    throw std::invalid_argument("build_tri_token_mask: negative extent");
  }
  TriTokenMask m;
  m.words = words;
  m.templ = templ;
  m.video = video;
  const Index total = words + templ + video;
  m.allowed = BoolMatrix::Constant(total, total, false);
  const Index t0 = words, v0 = words + templ;
  for (Index i = 0; i < words; ++i) {
    m.allowed.block(i, 0, 1, i + 1).setConstant(true);
    m.allowed.block(i, t0, 1, templ + video).setConstant(true);
  }
  if (templ > 0) {
    m.allowed.block(t0, t0, templ, templ + video).setConstant(true);
  }
  if (video > 0) {
    m.allowed.block(v0, v0, video, video).setConstant(true);
    if (raw_video_mask) {
      if (raw_video_mask->rows() != video || raw_video_mask->cols() != video) {
        throw DimensionError("build_tri_token_mask: raw video mask must be M x M");
      }
      m.soft = sigmoid(*raw_video_mask);
    }
  }
  return m;
}

TextDecoder::TextDecoder(ParameterStore &store, const std::string &name, Tensor word_embedding_,
                         Vocabulary vocab, const DecoderConfig &cfg)
    : word_embedding(std::move(word_embedding_)),
      slot_embedding(store.uniform(name + ".template_slots", std::max<Index>(cfg.template_slots, 1),
                                   cfg.width, 0.1)),
      positions(store.uniform(name + ".positions",
                              std::max({cfg.max_words + 1, cfg.max_template, cfg.video_tokens}),
                              cfg.width, 0.1)),
      segments(store.uniform(name + ".segments", 3, cfg.width, 0.1)),
      raw_video_mask(store.zeros(name + ".raw_video_mask", cfg.video_tokens, cfg.video_tokens)),
      vocab_(std::move(vocab)), cfg_(cfg) {
  if (word_embedding.rows() != vocab_.size()) {
    throw DimensionError("TextDecoder: embedding rows differ from vocabulary size");
  }
  for (Index l = 0; l < cfg.layers; ++l) {
    blocks.emplace_back(store, name + ".layer" + std::to_string(l), cfg.width, cfg.heads,
                        cfg.ffn_width);
  }
  final_norm = LayerNorm(store, name + ".final_norm", cfg.width);
  vocab_projection = Linear(store, name + ".vocab_projection", cfg.width, vocab_.size());
}

Tensor TextDecoder::embed(std::span<const Index> words, const Template &templ,
                          const FeatureMatrix &video) const {
  if (video.tokens.rows() != cfg_.video_tokens || video.tokens.cols() != cfg_.width) {
    throw DimensionError("TextDecoder: video tokens must be " + std::to_string(cfg_.video_tokens) +
                         " x " + std::to_string(cfg_.width));
  }
  if (static_cast<Index>(words.size()) > cfg_.max_words + 1) {
    throw DataError("TextDecoder: word block longer than max caption length");
  }
  if (templ.size() > cfg_.max_template) {
    throw DataError("TextDecoder: template longer than max_template");
  }
  std::vector<Tensor> blocks_in;
  auto segment_row = [this](Index segment, Index rows) {
    const std::vector<Index> ids(static_cast<std::size_t>(rows), segment);
    return gather_rows(segments, ids);
  };
  if (!words.empty()) {
    const Index n = static_cast<Index>(words.size());
    blocks_in.push_back(add(add(gather_rows(word_embedding, words), slice_rows(positions, 0, n)),
                            segment_row(kSegmentWord, n)));
  }
  if (templ.size() > 0) {
    std::vector<Tensor> rows;
    for (const TemplateToken &t : templ.tokens) {
      if (t.learnable) {
        if (t.slot < 0 || t.slot >= slot_embedding.rows()) {
          throw DataError("TextDecoder: template slot id out of range");
        }
        rows.push_back(slice_rows(slot_embedding, t.slot, 1));
      } else {
        const Index ids[] = {vocab_.id(t.word)};
        rows.push_back(gather_rows(word_embedding, ids));
      }
    }
    const Index n = templ.size();
    blocks_in.push_back(add(add(concat_rows(rows), slice_rows(positions, 0, n)),
                            segment_row(kSegmentTemplate, n)));
  }
  const Index m = video.tokens.rows();
  blocks_in.push_back(
      add(add(video.tokens, slice_rows(positions, 0, m)), segment_row(kSegmentVideo, m)));
  return concat_rows(blocks_in);
}

TriTokenMask TextDecoder::mask(Index words, Index templ) const {
  return build_tri_token_mask(words, templ, cfg_.video_tokens, &raw_video_mask);
}

Tensor TextDecoder::hidden(std::span<const Index> words, const Template &templ,
                           const FeatureMatrix &video) const {
  Tensor x = embed(words, templ, video);
  const TriTokenMask tri = mask(static_cast<Index>(words.size()), templ.size());
  const AttentionMask attn = tri.attention();
  for (const TransformerBlock &block : blocks) {
    x = block(x, &attn);
  }
  return final_norm(x);
}

Tensor TextDecoder::logits(std::span<const Index> words, const Template &templ,
                           const FeatureMatrix &video) const {
  if (words.empty()) {
    throw ContractError("TextDecoder::logits: at least the BOS token is required");
  }
  const Tensor h = hidden(words, templ, video);
  return vocab_projection(slice_rows(h, 0, static_cast<Index>(words.size())));
}

Tensor TextDecoder::video_mask_sum() const { return sum(sigmoid(raw_video_mask)); }

Tensor sparse_loss(const TextDecoder &decoder, double lambda) {
  return scale(decoder.video_mask_sum(), lambda);
}

DecoderOutput decoder_forward(const TextDecoder &decoder, const FeatureMatrix &video,
                              const Template &templ, std::span<const Index> caption,
                              double lambda) {
  if (static_cast<Index>(caption.size()) > decoder.config().max_words) {
    throw DataError("decoder_forward: caption of " + std::to_string(caption.size()) +
                    " tokens exceeds max length " + std::to_string(decoder.config().max_words));
  }
  std::vector<Index> input{Vocabulary::kBos};
  input.insert(input.end(), caption.begin(), caption.end());
  std::vector<Index> targets(caption.begin(), caption.end());
  targets.push_back(Vocabulary::kEos);
  DecoderOutput out;
  out.logits = decoder.logits(input, templ, video);
  out.generation_loss = cross_entropy(out.logits, targets);
  out.sparse_loss = sparse_loss(decoder, lambda);
  return out;
}

namespace {

std::vector<Index> greedy(const TextDecoder &decoder, const FeatureMatrix &video,
                          const Template &templ, Index max_len) {
  std::vector<Index> words{Vocabulary::kBos};
  for (Index step = 0; step < max_len; ++step) {
    const Tensor logits = decoder.logits(words, templ, video);
    RowVector logp = log_softmax_row(logits.value(), logits.rows() - 1);
    forbid_specials(logp);
    Index best = 0;
    logp.maxCoeff(&best);
    if (best == Vocabulary::kEos) {
      break;
    }
    words.push_back(best);
  }
  return {words.begin() + 1, words.end()};
}

struct Hypothesis {
  std::vector<Index> words; // includes BOS
  double logp = 0.0;
  std::size_t length = 0; // emitted tokens including EOS
};

std::vector<Index> beam(const TextDecoder &decoder, const FeatureMatrix &video,
                        const Template &templ, Index max_len, int width) {
  if (width < 1) {
    throw std::invalid_argument("generate: beam width must be >= 1");
  }
  const auto w = static_cast<std::size_t>(width);
  std::vector<Hypothesis> alive{{{Vocabulary::kBos}, 0.0, 0}};
  std::vector<Hypothesis> finished;
  struct Candidate {
    std::size_t hyp;
    Index token;
    double logp;
  };
  for (Index step = 0; step < max_len && !alive.empty(); ++step) {
    std::vector<Candidate> candidates;
    for (std::size_t h = 0; h < alive.size(); ++h) {
      const Tensor logits = decoder.logits(alive[h].words, templ, video);
      RowVector logp = log_softmax_row(logits.value(), logits.rows() - 1);
      forbid_specials(logp);
      for (Index t = 0; t < logp.size(); ++t) {
        if (std::isfinite(logp(t))) {
          candidates.push_back({h, t, alive[h].logp + logp(t)});
        }
      }
    }
    std::stable_sort(candidates.begin(), candidates.end(),
                     [](const Candidate &a, const Candidate &b) { return a.logp > b.logp; });
    std::vector<Hypothesis> next;
    for (std::size_t rank = 0; rank < candidates.size(); ++rank) {
      if (next.size() == w && rank >= w) {
        break;
      }
      const Candidate &c = candidates[rank];
      const Hypothesis &parent = alive[c.hyp];
      if (c.token == Vocabulary::kEos) {
        if (rank < w) {
          finished.push_back({parent.words, c.logp, parent.words.size()});
        }
        continue;
      }
      if (next.size() < w) {
        Hypothesis h{parent.words, c.logp, parent.words.size()};
        h.words.push_back(c.token);
        next.push_back(std::move(h));
      }
    }
    alive = std::move(next);
    if (finished.size() >= w) {
      break;
    }
  }
  for (Hypothesis &h : alive) {
    h.length = h.words.size() - 1;
    finished.push_back(std::move(h));
  }
  const Hypothesis *best = nullptr;
  double best_score = -std::numeric_limits<double>::infinity();
  for (const Hypothesis &h : finished) {
    const double norm = h.logp / static_cast<double>(std::max<std::size_t>(h.length, 1));
    if (best == nullptr || norm > best_score) {
      best = &h;
      best_score = norm;
    }
  }
  if (best == nullptr) {
    return {};
  }
  return {best->words.begin() + 1, best->words.end()};
}

} // namespace

std::vector<Index> generate(const TextDecoder &decoder, const FeatureMatrix &video,
                            const Template &templ, const DecodeOptions &options) {
  NoGradGuard no_grad;
  const Index max_len = std::min(options.max_len, decoder.config().max_words);
  if (options.mode == DecodeMode::Greedy) {
    return greedy(decoder, video, templ, max_len);
  }
  return beam(decoder, video, templ, max_len, options.beam_width);
}

} // namespace nae
