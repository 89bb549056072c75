#include "nae/model.hpp"

#include <algorithm>
#include <cmath>

namespace nae {

namespace {

Index max_phrase_tokens(const ActionLexicon &lexicon) {
  Index longest = 0;
  for (const auto &part : lexicon.phrases) {
    for (const auto &phrase : part) {
      longest = std::max<Index>(longest, static_cast<Index>(tokenize(phrase).size()));
    }
  }
  return longest;
}

// Longest spoken number below 1000 at one decimal ("nine hundred ninety-nine point nine").
constexpr Index kMaxNumberTokens = 5;

DecoderConfig decoder_config(const RunConfig &cfg, const ActionLexicon &lexicon) {
  DecoderConfig d;
  d.width = cfg.width;
  d.heads = cfg.heads;
  d.layers = cfg.decoder_layers;
  d.ffn_width = cfg.ffn_width;
  d.max_words = cfg.max_caption_len;
  d.video_tokens = cfg.video_tokens;
  d.template_slots = template_slot_count(lexicon.parts(), cfg.template_slots);
  d.max_template = d.template_slots +
                   static_cast<Index>(lexicon.parts()) * max_phrase_tokens(lexicon) +
                   kMaxNumberTokens;
  return d;
}

} // namespace

ScoreSpace ScoreSpace::from_scores(std::span<const double> scores, int intervals) {
  const ScoreList list(std::vector<double>(scores.begin(), scores.end()));
  return {partition_scores(list, intervals)};
}

ScoreSpace ScoreSpace::from_bounds(std::span<const double> bounds) {
  if (bounds.size() < 2) {
    throw CheckpointError("score space: at least two bounds required");
  }
  ScoreSpace s;
  for (std::size_t r = 1; r < bounds.size(); ++r) {
    if (bounds[r] < bounds[r - 1]) {
      throw CheckpointError("score space: bounds must be nondecreasing");
    }
    s.intervals.push_back({static_cast<int>(r), bounds[r - 1], bounds[r]});
  }
  return s;
}

std::vector<double> ScoreSpace::bounds() const {
  std::vector<double> out{intervals.front().left};
  for (const ScoreInterval &iv : intervals) {
    out.push_back(iv.right);
  }
  return out;
}

NaeModel::NaeModel(const RunConfig &cfg, ScoreSpace space)
    : cfg_(cfg), space_(std::move(space)),
      lexicon_(builtin_lexicon(cfg.parts, cfg.actions_per_part)),
      vocab_(build_vocabulary(lexicon_)),
      prompts_(build_prompt_texts(space_.intervals, cfg.prompt_slots)),
      store_(cfg.seed * 6364136223846793005ULL + 1442695040888963407ULL) {
  cfg_.validate();
  if (static_cast<int>(space_.intervals.size()) != cfg.intervals) {
    throw DimensionError("NaeModel: score space has " + std::to_string(space_.intervals.size()) +
                         " intervals, config asks for " + std::to_string(cfg.intervals));
  }
  if (!(space_.range().max > space_.range().min)) {
    throw DegenerateDistributionError("NaeModel: empty score range");
  }
  const Index width = cfg.width;
  word_embedding_ = store_.uniform("word_embedding", vocab_.size(), width, 0.1);
  video_projection_ = Linear(store_, "video.projection", cfg.feature_dim, width);
  video_positions_ = store_.uniform("video.positions", cfg.video_tokens, width, 0.1);
  prompt_encoder_ = PromptEncoder(store_, "prompt_encoder", word_embedding_, cfg.prompt_slots,
                                  cfg.prompt_slots + 2 * kMaxNumberTokens + 1, width, cfg.heads,
                                  cfg.ffn_width);
  context_block_ = InteractionBlock(store_, "context_aware", width, cfg.heads, cfg.gamma_init);
  score_block_ = InteractionBlock(store_, "score_guided", width, cfg.heads, cfg.gamma_init);
  match_ = MatchHead(store_, "match", cfg.logit_scale_init);
  heads_ = PredictionHeads(store_, "heads", width, cfg.head_hidden, lexicon_.classes_per_part());
  decoder_ = TextDecoder(store_, "decoder", word_embedding_, vocab_, decoder_config(cfg, lexicon_));
}

PromptEmbeddings NaeModel::encode_prompts() const { return prompt_encoder_(prompts_, vocab_); }

FeatureMatrix NaeModel::encode_video(const Matrix &features) const {
  if (features.rows() != cfg_.video_tokens || features.cols() != cfg_.feature_dim) {
    throw DataError("NaeModel: features must be " + std::to_string(cfg_.video_tokens) + " x " +
                    std::to_string(cfg_.feature_dim));
  }
  return {add(video_projection_(Tensor(features)), video_positions_)};
}

std::vector<Index> NaeModel::encode_caption(const std::string &caption) const {
  const auto tokens = tokenize(caption);
  std::vector<Index> ids = vocab_.encode(tokens);
  for (std::size_t i = 0; i < ids.size(); ++i) {
    if (ids[i] == Vocabulary::kUnk) {
      throw DataError("caption word '" + tokens[i] + "' is not in the vocabulary");
    }
  }
  return ids;
}

SampleLosses NaeModel::losses(const Sample &sample, const PromptEmbeddings &prompts) const {
  if (sample.captions.empty()) {
    throw DataError("sample '" + sample.id + "' has no caption");
  }
  const FeatureMatrix video = encode_video(sample.features);
  const PromptEmbeddings prompts_star = context_aware_refine(context_block_, prompts, video);
  const FeatureMatrix video_star = score_guided_refine(score_block_, video, prompts_star);

  const MatchResult match =
      match_loss(match_, video_star, prompts_star, space_.intervals, sample.score);
  const HeadResult heads =
      predict_heads(heads_, video_star, space_.range(), sample.score, sample.actions);
  const Template templ = build_template(sample.score, sample.actions, lexicon_, cfg_.template_slots);
  const std::vector<Index> caption = encode_caption(sample.captions.front());
  const DecoderOutput dec = decoder_forward(decoder_, video_star, templ, caption, 0.0);

  SampleLosses out;
  out.generation = dec.generation_loss;
  out.match = match.loss;
  out.score = heads.mse_loss;
  out.action = heads.action_loss;
  out.total = add(add(out.generation, out.match), add(out.score, out.action));
  out.interval_correct = match.distribution.predicted() == match.distribution.target;
  return out;
}

double NaeModel::video_mask_sum() const {
  NoGradGuard no_grad;
  return decoder_.video_mask_sum().item();
}

DecodeOptions NaeModel::decode_options() const {
  DecodeOptions o;
  o.mode = cfg_.decode_mode == "beam" ? DecodeMode::Beam : DecodeMode::Greedy;
  o.beam_width = cfg_.beam_width;
  o.max_len = cfg_.max_caption_len;
  return o;
}

Prediction NaeModel::predict(const Sample &sample, const PromptEmbeddings &prompts,
                             const DecodeOptions &options) const {
  NoGradGuard no_grad;
  const FeatureMatrix video = encode_video(sample.features);
  const PromptEmbeddings prompts_star = context_aware_refine(context_block_, prompts, video);
  const FeatureMatrix video_star = score_guided_refine(score_block_, video, prompts_star);
  const Tensor logits = match_.logits(video_star, prompts_star);
  auto [score, action_logits] = heads_(video_star);

  Prediction out;
  out.id = sample.id;
  logits.value().row(0).maxCoeff(&out.interval);
  const ScoreRange range = space_.range();
  out.score = std::clamp(range.denormalize(score.item()), range.min, range.max);
  for (const Tensor &l : action_logits) {
    Index best = 0;
    l.value().row(0).maxCoeff(&best);
    out.actions.push_back(best);
  }
  const Template templ = build_template(out.score, out.actions, lexicon_, cfg_.template_slots);
  out.tokens = vocab_.decode(generate(decoder_, video_star, templ, options));
  out.text = join_tokens(out.tokens);
  return out;
}

std::vector<NamedMatrix> NaeModel::state() const {
  std::vector<NamedMatrix> out = snapshot(store_);
  const auto b = space_.bounds();
  out.push_back({kBoundsEntry, Eigen::Map<const Matrix>(b.data(), 1, static_cast<Index>(b.size()))});
  return out;
}

void NaeModel::load_state(const std::vector<NamedMatrix> &entries) {
  restore(store_, entries, {kBoundsEntry});
}

std::unique_ptr<NaeModel> load_model(const RunConfig &cfg, const std::vector<NamedMatrix> &entries) {
  auto it = std::find_if(entries.begin(), entries.end(),
                         [](const NamedMatrix &e) { return e.name == NaeModel::kBoundsEntry; });
  if (it == entries.end()) {
    throw CheckpointError("checkpoint: missing score-space bounds");
  }
  const std::vector<double> bounds(it->value.data(), it->value.data() + it->value.size());
  auto model = std::make_unique<NaeModel>(cfg, ScoreSpace::from_bounds(bounds));
  model->load_state(entries);
  return model;
}

} // namespace nae
