#pragma once

#include "nae/config.hpp"
#include "nae/generator.hpp"
#include "nae/text.hpp"

#include <cstdint>
#include <iosfwd>
#include <span>
#include <string>
#include <string_view>
#include <vector>

namespace nae {

struct Sample {
  std::string id;
  Matrix features; // video_tokens x feature_dim
  std::vector<std::string> captions;
  double score = 0.0;
  std::vector<Index> actions; // class per part
};

struct Dataset {
  std::vector<Sample> train;
  std::vector<Sample> test;
};

/// Built-in diving-style lexicon truncated to `parts` x `actions_per_part`.
/// Throws std::invalid_argument when fewer than 4 actions per part are asked
/// for or more than the built-in table holds.
ActionLexicon builtin_lexicon(int parts, int actions_per_part);

/// Number of caption sentence templates.
std::size_t caption_template_count();

/// Renders the caption for a label set. The template is chosen from the
/// action classes, so the caption is a function of the labels.
std::string render_caption(double score, std::span<const Index> actions,
                           const ActionLexicon &lexicon);

/// Specials, number words, lexicon words and caption template words.
Vocabulary build_vocabulary(const ActionLexicon &lexicon);

/// Deterministic synthetic set: labels drawn uniformly, scores rounded to
/// one decimal, features a fixed seeded linear embedding of (action one-hots,
/// normalized score) plus Gaussian noise of stddev noise_sigma.
Dataset generate_dataset(const RunConfig &cfg);

/// Label-to-feature map for the run's seed (noise free).
Matrix clean_features(const RunConfig &cfg, double score, std::span<const Index> actions);

std::string base64_encode(std::string_view bytes);
std::string base64_decode(std::string_view text);

/// One JSON object per line: id, rows, cols, features (base64 little-endian
/// float64, row-major), captions, score, actions.
void write_samples(std::ostream &out, std::span<const Sample> samples);
std::vector<Sample> read_samples(std::istream &in);
void save_samples(const std::string &path, std::span<const Sample> samples);
std::vector<Sample> load_samples(const std::string &path);

} // namespace nae
