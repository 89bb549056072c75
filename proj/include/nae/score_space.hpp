#pragma once

#include <span>
#include <stdexcept>
#include <string>
#include <vector>

namespace nae {

class DegenerateDistributionError : public std::invalid_argument {
public:
  using std::invalid_argument::invalid_argument;
};

/// Training-set scores and their ascending copy.
class ScoreList {
public:
  explicit ScoreList(std::vector<double> scores);

  const std::vector<double> &scores() const { return scores_; }
  const std::vector<double> &sorted() const { return sorted_; }
  std::size_t size() const { return scores_.size(); }
  double min() const { return sorted_.front(); }
  double max() const { return sorted_.back(); }

private:
  std::vector<double> scores_;
  std::vector<double> sorted_;
};

struct ScoreInterval {
  int index = 1; // 1..R
  double left = 0.0;
  double right = 0.0;
};

/// Quantile bounds: interval r spans sorted[floor((N-1)(r-1)/R)] to
/// sorted[floor((N-1)r/R)], indices 0-based. Requires 1 <= R <= N-1 and at
/// least two distinct scores.
std::vector<ScoreInterval> partition_scores(const ScoreList &scores, int intervals);

/// 1-based class of `score`: the r with left <= score < right, the last
/// interval closed on the right. Scores outside the partition clamp to the
/// first or last interval.
int classify_score(double score, std::span<const ScoreInterval> intervals);

struct PromptText {
  int class_index = 1;
  int learnable_slots = 0;
  /// Rendered bounds: "<left words> to <right words>".
  std::vector<std::string> words;

  /// "[X]...[X] twenty-five point six to thirty-six point three"
  std::string text() const;
};

std::vector<PromptText> build_prompt_texts(std::span<const ScoreInterval> intervals,
                                           int slot_count, int decimals = 1);

/// Audit table, one "r left right" row per interval.
std::string partition_table(std::span<const ScoreInterval> intervals);

} // namespace nae
