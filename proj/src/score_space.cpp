#include "nae/score_space.hpp"

#include "nae/number_words.hpp"

#include <algorithm>
#include <cstdio>

namespace nae {

ScoreList::ScoreList(std::vector<double> scores) : scores_(std::move(scores)), sorted_(scores_) {
  if (scores_.size() < 2) {
    throw std::invalid_argument("ScoreList: at least two scores required");
  }
  std::sort(sorted_.begin(), sorted_.end());
}

std::vector<ScoreInterval> partition_scores(const ScoreList &scores, int intervals) {
  const long long n = static_cast<long long>(scores.size());
  if (intervals < 1 || intervals > n - 1) {
    throw std::invalid_argument("partition_scores: interval count " + std::to_string(intervals) +
                                " outside [1, " + std::to_string(n - 1) + "]");
  }
  if (scores.min() == scores.max()) {
    throw DegenerateDistributionError("partition_scores: all scores are identical");
  }
  const auto &sorted = scores.sorted();
  std::vector<ScoreInterval> out;
  out.reserve(static_cast<std::size_t>(intervals));
  for (int r = 1; r <= intervals; ++r) {
    const auto lo = static_cast<std::size_t>(((n - 1) * (r - 1)) / intervals);
    const auto hi = static_cast<std::size_t>(((n - 1) * r) / intervals);
    out.push_back({r, sorted[lo], sorted[hi]});
  }
  return out;
}

int classify_score(double score, std::span<const ScoreInterval> intervals) {
  if (intervals.empty()) {
    throw std::invalid_argument("classify_score: empty interval list");
  }
  for (const ScoreInterval &iv : intervals.first(intervals.size() - 1)) {
    if (score < iv.right) {
      return iv.index;
    }
  }
  return intervals.back().index;
}

std::string PromptText::text() const {
  std::string out;
  for (int i = 0; i < learnable_slots; ++i) {
    out += "[X]";
  }
  for (const auto &w : words) {
    if (!out.empty()) {
      out += ' ';
    }
    out += w;
  }
  return out;
}

std::vector<PromptText> build_prompt_texts(std::span<const ScoreInterval> intervals,
                                           int slot_count, int decimals) {
  if (slot_count < 1) {
    throw std::invalid_argument("build_prompt_texts: slot_count must be >= 1");
  }
  std::vector<PromptText> out;
  out.reserve(intervals.size());
  for (const ScoreInterval &iv : intervals) {
    PromptText p;
    p.class_index = iv.index;
    p.learnable_slots = slot_count;
    p.words = number_to_words(iv.left, decimals);
    p.words.emplace_back("to");
    const auto right = number_to_words(iv.right, decimals);
    p.words.insert(p.words.end(), right.begin(), right.end());
    out.push_back(std::move(p));
  }
  return out;
}

std::string partition_table(std::span<const ScoreInterval> intervals) {
  std::string out = "r left right\n";
  char buf[96];
  for (const ScoreInterval &iv : intervals) {
    std::snprintf(buf, sizeof buf, "%d %.6f %.6f\n", iv.index, iv.left, iv.right);
    out += buf;
  }
  return out;
}

} // namespace nae
