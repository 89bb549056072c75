#pragma once

#include "nae/generator.hpp"
#include "nae/interaction.hpp"
#include "nae/text.hpp"

#include <Eigen/Dense>

#include <array>
#include <cmath>
#include <compare>
#include <optional>
#include <set>
#include <span>
#include <string>
#include <string_view>
#include <vector>

namespace nae {

struct ActionLabel {
  Index part = 0;
  Index cls = 0;
  auto operator<=>(const ActionLabel &) const = default;
};

struct ExtractedInfo {
  std::optional<double> score;
  std::set<ActionLabel> actions;
};

/// Phrase table for longest-match action lookup over tokenized text.
class PhraseMatcher {
public:
  /// Throws std::invalid_argument if two phrases tokenize identically.
  explicit PhraseMatcher(const ActionLexicon &lexicon);
  std::set<ActionLabel> find(std::span<const std::string> tokens) const;

private:
  std::vector<std::pair<std::vector<std::string>, ActionLabel>> phrases_; // longest first
};

/// Score: first digit-form or number-word mention. Actions: every
/// longest-match lexicon phrase.
ExtractedInfo extract_eval_info(std::string_view text, const PhraseMatcher &matcher);
ExtractedInfo extract_eval_info(std::string_view text, const ActionLexicon &lexicon);

/// Average ranks (1-based, ties averaged).
template <typename Derived>
Eigen::VectorXd average_ranks(const Eigen::MatrixBase<Derived> &values) {
  const Index n = values.size();
  std::vector<Index> order(static_cast<std::size_t>(n));
  for (Index i = 0; i < n; ++i) {
    order[static_cast<std::size_t>(i)] = i;
  }
  std::stable_sort(order.begin(), order.end(),
                   [&](Index a, Index b) { return values(a) < values(b); });
  Eigen::VectorXd ranks(n);
  Index i = 0;
  while (i < n) {
    Index j = i;
    while (j + 1 < n && values(order[static_cast<std::size_t>(j + 1)]) ==
                            values(order[static_cast<std::size_t>(i)])) {
      ++j;
    }
    const double avg = 0.5 * static_cast<double>(i + j) + 1.0;
    for (Index k = i; k <= j; ++k) {
      ranks(order[static_cast<std::size_t>(k)]) = avg;
    }
    i = j + 1;
  }
  return ranks;
}

/// Spearman's rho: Pearson correlation of average ranks. Throws
/// NumericalError when either input is constant.
template <typename DerivedA, typename DerivedB>
double spearman(const Eigen::MatrixBase<DerivedA> &pred, const Eigen::MatrixBase<DerivedB> &gold) {
  if (pred.size() != gold.size()) {
    throw DimensionError("spearman: inputs differ in length");
  }
  if (pred.size() < 2) {
    throw std::invalid_argument("spearman: at least two samples required");
  }
  const Eigen::VectorXd a = average_ranks(pred);
  const Eigen::VectorXd b = average_ranks(gold);
  const Eigen::VectorXd da = a.array() - a.mean();
  const Eigen::VectorXd db = b.array() - b.mean();
  const double denom = std::sqrt(da.squaredNorm() * db.squaredNorm());
  if (!(denom > 0.0)) {
    throw NumericalError("spearman: correlation undefined for constant input");
  }
  return da.dot(db) / denom;
}

double spearman(std::span<const double> pred, std::span<const double> gold);

/// (100/N) * sum(((|s - s_hat|) / (max - min))^2).
template <typename DerivedA, typename DerivedB>
double r_l2(const Eigen::MatrixBase<DerivedA> &pred, const Eigen::MatrixBase<DerivedB> &gold,
            const ScoreRange &range) {
  if (!(range.max > range.min)) {
    throw std::invalid_argument("r_l2: degenerate score range");
  }
  if (pred.size() != gold.size() || pred.size() == 0) {
    throw DimensionError("r_l2: inputs must be nonempty and equally long");
  }
  const double span = range.max - range.min;
  return 100.0 * ((pred - gold).array().abs() / span).square().mean();
}

double r_l2(std::span<const double> pred, std::span<const double> gold, const ScoreRange &range);

/// Per-sample squared relative distance ((|s - s_hat|) / (max - min))^2.
double relative_l2(double pred, double gold, const ScoreRange &range);

using Tokens = std::vector<std::string>;

/// Corpus BLEU-4 with clipped counts, closest-reference brevity penalty and
/// epsilon (1e-9) smoothing of zero matches.
double bleu4(std::span<const Tokens> candidates, std::span<const std::vector<Tokens>> references);

/// METEOR with exact then suffix-stem unigram matching; alpha 0.9, beta 3,
/// gamma 0.5. Per candidate the best reference is used; corpus value is the
/// mean over candidates.
double meteor(std::span<const Tokens> candidates, std::span<const std::vector<Tokens>> references);
double meteor_sentence(const Tokens &candidate, const Tokens &reference);

/// Light suffix stripper used for METEOR's stem stage.
std::string stem(const std::string &word);

struct CiderResult {
  double corpus = 0.0;
  std::vector<double> per_sample;
};

/// CIDEr over n = 1..4: TF-IDF n-gram vectors with IDF from the reference
/// sets, cosine against each reference averaged, mean over n, times 10.
CiderResult cider(std::span<const Tokens> candidates, std::span<const std::vector<Tokens>> references);

/// Fraction of gold (part, class) slots present in `extracted`.
double action_accuracy(const std::set<ActionLabel> &extracted, std::span<const Index> gold);

struct SampleEval {
  std::string id;
  double cider = 0.0;
  double distance = 1.0; // relative squared distance d
  double accuracy = 0.0;
};

inline constexpr std::array<double, 5> kDistanceThresholds = {0.003, 0.005, 0.010, 0.015, 0.020};
inline constexpr std::array<double, 5> kCiderThresholds = {0.05, 0.10, 0.15, 0.20, 0.25};
inline constexpr std::array<double, 4> kAccuracyThresholds = {0.25, 0.50, 0.75, 1.0};

struct NaeMap {
  double map = 0.0;
  /// 100 cells, distance-major, then CIDEr, then accuracy threshold.
  std::array<double, 100> grid{};
};

/// AP per threshold cell = fraction of samples with d <= t_d, CIDEr >= t_c
/// and accuracy >= t_a; mAP = mean over the 100 cells.
NaeMap nae_map(std::span<const SampleEval> samples);

/// One line of the evaluation input.
struct EvalRecord {
  std::string id;
  std::string text;
  std::vector<std::string> references;
  double score = 0.0;
  std::vector<Index> actions;
};

struct EvalReport {
  std::size_t samples = 0;
  std::size_t scores_extracted = 0;
  double map = 0.0;
  std::optional<double> rho;
  double r_l2 = 0.0;
  double bleu4 = 0.0;
  double meteor = 0.0;
  double cider = 0.0;
  double accuracy = 0.0;
  std::array<double, 100> grid{};
  std::vector<SampleEval> per_sample;
};

/// Full metric stack over generated texts. A missing score gives d = 1;
/// rho is computed over samples with an extracted score and left empty when
/// undefined.
EvalReport evaluate_records(std::span<const EvalRecord> records, const ActionLexicon &lexicon,
                            const ScoreRange &range);

/// Structured text report: headline metrics then the 100-cell grid.
std::string format_report(const EvalReport &report);

} // namespace nae
