#include "nae/metrics.hpp"

#include "nae/number_words.hpp"

#include <algorithm>
#include <cstdio>
#include <map>
#include <regex>

namespace nae {

namespace {

using NGramCounts = std::map<Tokens, int>;

NGramCounts ngram_counts(const Tokens &tokens, std::size_t n) {
  NGramCounts out;
  if (tokens.size() < n) {
    return out;
  }
  for (std::size_t i = 0; i + n <= tokens.size(); ++i) {
    ++out[Tokens(tokens.begin() + static_cast<std::ptrdiff_t>(i),
                 tokens.begin() + static_cast<std::ptrdiff_t>(i + n))];
  }
  return out;
}

void check_corpus(std::size_t candidates, std::size_t references, const char *who) {
  if (candidates != references) {
    throw DimensionError(std::string(who) + ": one reference set per candidate required");
  }
  if (candidates == 0) {
    throw std::invalid_argument(std::string(who) + ": empty corpus");
  }
}

bool is_digit_number(const std::string &token) {
  static const std::regex pattern(R"(^[0-9]+(\.[0-9]+)?$)");
  return std::regex_match(token, pattern);
}

} // namespace

PhraseMatcher::PhraseMatcher(const ActionLexicon &lexicon) {
  std::set<Tokens> seen;
  for (std::size_t p = 0; p < lexicon.phrases.size(); ++p) {
    for (std::size_t c = 0; c < lexicon.phrases[p].size(); ++c) {
      Tokens toks = tokenize(lexicon.phrases[p][c]);
      if (toks.empty()) {
        throw std::invalid_argument("PhraseMatcher: empty action phrase");
      }
      if (!seen.insert(toks).second) {
        throw std::invalid_argument("PhraseMatcher: duplicate action phrase '" +
                                    lexicon.phrases[p][c] + "'");
      }
      phrases_.push_back({std::move(toks), {static_cast<Index>(p), static_cast<Index>(c)}});
    }
  }
  std::stable_sort(phrases_.begin(), phrases_.end(),
                   [](const auto &a, const auto &b) { return a.first.size() > b.first.size(); });
}

std::set<ActionLabel> PhraseMatcher::find(std::span<const std::string> tokens) const {
  std::set<ActionLabel> out;
  std::size_t i = 0;
  while (i < tokens.size()) {
    bool matched = false;
    for (const auto &[phrase, label] : phrases_) {
      if (i + phrase.size() <= tokens.size() &&
          std::equal(phrase.begin(), phrase.end(), tokens.begin() + static_cast<std::ptrdiff_t>(i))) {
        out.insert(label);
        i += phrase.size();
        matched = true;
        break;
      }
    }
    if (!matched) {
      ++i;
    }
  }
  return out;
}

ExtractedInfo extract_eval_info(std::string_view text, const PhraseMatcher &matcher) {
  const Tokens tokens = tokenize(text);
  ExtractedInfo out;
  for (std::size_t i = 0; i < tokens.size() && !out.score; ++i) {
    if (is_digit_number(tokens[i])) {
      out.score = std::stod(tokens[i]);
    } else if (auto m = match_number(tokens, i)) {
      out.score = m->value;
    }
  }
  out.actions = matcher.find(tokens);
  return out;
}

ExtractedInfo extract_eval_info(std::string_view text, const ActionLexicon &lexicon) {
  return extract_eval_info(text, PhraseMatcher(lexicon));
}

double spearman(std::span<const double> pred, std::span<const double> gold) {
  using Map = Eigen::Map<const Eigen::VectorXd>;
  return spearman(Map(pred.data(), static_cast<Index>(pred.size())),
                  Map(gold.data(), static_cast<Index>(gold.size())));
}

double r_l2(std::span<const double> pred, std::span<const double> gold, const ScoreRange &range) {
  using Map = Eigen::Map<const Eigen::VectorXd>;
  return r_l2(Map(pred.data(), static_cast<Index>(pred.size())),
              Map(gold.data(), static_cast<Index>(gold.size())), range);
}

double relative_l2(double pred, double gold, const ScoreRange &range) {
  if (!(range.max > range.min)) {
    throw std::invalid_argument("relative_l2: degenerate score range");
  }
  const double r = std::abs(pred - gold) / (range.max - range.min);
  return r * r;
}

double bleu4(std::span<const Tokens> candidates, std::span<const std::vector<Tokens>> references) {
  check_corpus(candidates.size(), references.size(), "bleu4");
  constexpr double kEps = 1e-9;
  std::array<double, 4> matched{}, total{};
  double cand_len = 0.0, ref_len = 0.0;
  for (std::size_t s = 0; s < candidates.size(); ++s) {
    const Tokens &cand = candidates[s];
    cand_len += static_cast<double>(cand.size());
    // Closest reference length, ties to the shorter.
    std::size_t best = 0;
    bool have = false;
    for (const Tokens &ref : references[s]) {
      const auto diff = [&](std::size_t len) {
        return len > cand.size() ? len - cand.size() : cand.size() - len;
      };
      if (!have || diff(ref.size()) < diff(best) ||
          (diff(ref.size()) == diff(best) && ref.size() < best)) {
        best = ref.size();
        have = true;
      }
    }
    ref_len += static_cast<double>(best);
    for (std::size_t n = 1; n <= 4; ++n) {
      const NGramCounts cc = ngram_counts(cand, n);
      std::map<Tokens, int> max_ref;
      for (const Tokens &ref : references[s]) {
        for (const auto &[g, c] : ngram_counts(ref, n)) {
          max_ref[g] = std::max(max_ref[g], c);
        }
      }
      for (const auto &[g, c] : cc) {
        total[n - 1] += c;
        auto it = max_ref.find(g);
        if (it != max_ref.end()) {
          matched[n - 1] += std::min(c, it->second);
        }
      }
    }
  }
  if (cand_len == 0.0) {
    return 0.0;
  }
  double log_sum = 0.0;
  for (std::size_t n = 0; n < 4; ++n) {
    const double p = (matched[n] > 0 ? matched[n] : kEps) / (total[n] > 0 ? total[n] : 1.0);
    log_sum += std::log(p);
  }
  const double bp = cand_len > ref_len ? 1.0 : std::exp(1.0 - ref_len / cand_len);
  return bp * std::exp(log_sum / 4.0);
}

std::string stem(const std::string &word) {
  static const std::array<std::string_view, 6> suffixes = {"ing", "ed", "es", "ly", "er", "s"};
  for (std::string_view suf : suffixes) {
    if (word.size() >= suf.size() + 3 &&
        word.compare(word.size() - suf.size(), suf.size(), suf) == 0) {
      return word.substr(0, word.size() - suf.size());
    }
  }
  return word;
}

double meteor_sentence(const Tokens &candidate, const Tokens &reference) {
  constexpr double kAlpha = 0.9, kBeta = 3.0, kGamma = 0.5;
  if (candidate.empty() || reference.empty()) {
    return 0.0;
  }
  std::vector<long> align(candidate.size(), -1); // candidate -> reference position
  std::vector<bool> used(reference.size(), false);
  auto run_stage = [&](auto &&same) {
    for (std::size_t i = 0; i < candidate.size(); ++i) {
      if (align[i] >= 0) {
        continue;
      }
      long pick = -1;
      const long follow = (i > 0 && align[i - 1] >= 0) ? align[i - 1] + 1 : -1;
      if (follow >= 0 && follow < static_cast<long>(reference.size()) && !used[follow] &&
          same(candidate[i], reference[follow])) {
        pick = follow;
      } else {
        for (std::size_t j = 0; j < reference.size(); ++j) {
          if (!used[j] && same(candidate[i], reference[j])) {
            pick = static_cast<long>(j);
            break;
          }
        }
      }
      if (pick >= 0) {
        align[i] = pick;
        used[static_cast<std::size_t>(pick)] = true;
      }
    }
  };
  run_stage([](const std::string &a, const std::string &b) { return a == b; });
  run_stage([](const std::string &a, const std::string &b) { return stem(a) == stem(b); });

  double matches = 0.0;
  double chunks = 0.0;
  long prev_ref = -2;
  bool prev_aligned = false;
  for (std::size_t i = 0; i < candidate.size(); ++i) {
    if (align[i] < 0) {
      prev_aligned = false;
      continue;
    }
    matches += 1.0;
    if (!prev_aligned || align[i] != prev_ref + 1) {
      chunks += 1.0;
    }
    prev_ref = align[i];
    prev_aligned = true;
  }
  if (matches == 0.0) {
    return 0.0;
  }
  const double precision = matches / static_cast<double>(candidate.size());
  const double recall = matches / static_cast<double>(reference.size());
  const double fmean = precision * recall / (kAlpha * precision + (1.0 - kAlpha) * recall);
  const double penalty = kGamma * std::pow(chunks / matches, kBeta);
  return fmean * (1.0 - penalty);
}

double meteor(std::span<const Tokens> candidates, std::span<const std::vector<Tokens>> references) {
  check_corpus(candidates.size(), references.size(), "meteor");
  double total = 0.0;
  for (std::size_t s = 0; s < candidates.size(); ++s) {
    double best = 0.0;
    for (const Tokens &ref : references[s]) {
      best = std::max(best, meteor_sentence(candidates[s], ref));
    }
    total += best;
  }
  return total / static_cast<double>(candidates.size());
}

CiderResult cider(std::span<const Tokens> candidates, std::span<const std::vector<Tokens>> references) {
  check_corpus(candidates.size(), references.size(), "cider");
  constexpr std::size_t kMaxN = 4;
  const double log_docs = std::log(static_cast<double>(references.size()));
  // Document frequency: number of reference sets containing each n-gram.
  std::map<Tokens, double> df;
  for (const auto &refs : references) {
    std::set<Tokens> present;
    for (const Tokens &ref : refs) {
      for (std::size_t n = 1; n <= kMaxN; ++n) {
        for (const auto &[g, c] : ngram_counts(ref, n)) {
          present.insert(g);
        }
      }
    }
    for (const Tokens &g : present) {
      df[g] += 1.0;
    }
  }
  auto tfidf = [&](const NGramCounts &counts, double &norm) {
    std::map<Tokens, double> vec;
    norm = 0.0;
    for (const auto &[g, c] : counts) {
      auto it = df.find(g);
      const double d = it == df.end() ? 1.0 : std::max(1.0, it->second);
      const double w = static_cast<double>(c) * (log_docs - std::log(d));
      vec[g] = w;
      norm += w * w;
    }
    norm = std::sqrt(norm);
    return vec;
  };
  CiderResult out;
  out.per_sample.reserve(candidates.size());
  for (std::size_t s = 0; s < candidates.size(); ++s) {
    double score = 0.0;
    for (std::size_t n = 1; n <= kMaxN; ++n) {
      double cn = 0.0;
      const auto cand_vec = tfidf(ngram_counts(candidates[s], n), cn);
      double acc = 0.0;
      for (const Tokens &ref : references[s]) {
        double rn = 0.0;
        const auto ref_vec = tfidf(ngram_counts(ref, n), rn);
        double dot = 0.0;
        for (const auto &[g, w] : cand_vec) {
          auto it = ref_vec.find(g);
          if (it != ref_vec.end()) {
            dot += w * it->second;
          }
        }
        if (cn > 0.0 && rn > 0.0) {
          acc += dot / (cn * rn);
        }
      }
      if (!references[s].empty()) {
        score += acc / static_cast<double>(references[s].size());
      }
    }
    out.per_sample.push_back(score / static_cast<double>(kMaxN) * 10.0);
  }
  double total = 0.0;
  for (double v : out.per_sample) {
    total += v;
  }
  out.corpus = total / static_cast<double>(out.per_sample.size());
  return out;
}

double action_accuracy(const std::set<ActionLabel> &extracted, std::span<const Index> gold) {
  if (gold.empty()) {
    throw std::invalid_argument("action_accuracy: no gold action slots");
  }
  std::size_t hit = 0;
  for (std::size_t p = 0; p < gold.size(); ++p) {
    if (extracted.count({static_cast<Index>(p), gold[p]}) != 0) {
      ++hit;
    }
  }
  return static_cast<double>(hit) / static_cast<double>(gold.size());
}

NaeMap nae_map(std::span<const SampleEval> samples) {
  if (samples.empty()) {
    throw std::invalid_argument("nae_map: no samples");
  }
  NaeMap out;
  const double n = static_cast<double>(samples.size());
  std::size_t cell = 0;
  double total = 0.0;
  for (double td : kDistanceThresholds) {
    for (double tc : kCiderThresholds) {
      for (double ta : kAccuracyThresholds) {
        std::size_t pass = 0;
        for (const SampleEval &s : samples) {
          if (s.distance <= td && s.cider >= tc && s.accuracy >= ta) {
            ++pass;
          }
        }
        out.grid[cell++] = static_cast<double>(pass) / n;
        total += out.grid[cell - 1];
      }
    }
  }
  out.map = total / static_cast<double>(out.grid.size());
  return out;
}

EvalReport evaluate_records(std::span<const EvalRecord> records, const ActionLexicon &lexicon,
                            const ScoreRange &range) {
  if (records.empty()) {
    throw std::invalid_argument("evaluate_records: no records");
  }
  const PhraseMatcher matcher(lexicon);
  EvalReport report;
  report.samples = records.size();
  std::vector<Tokens> candidates;
  std::vector<std::vector<Tokens>> references;
  std::vector<double> pred_scores, gold_scores;
  double distance_sum = 0.0, accuracy_sum = 0.0;
  for (const EvalRecord &r : records) {
    if (r.references.empty()) {
      throw DataError("evaluate_records: record '" + r.id + "' has no reference caption");
    }
    candidates.push_back(tokenize(r.text));
    std::vector<Tokens> refs;
    for (const auto &ref : r.references) {
      refs.push_back(tokenize(ref));
    }
    references.push_back(std::move(refs));
    const ExtractedInfo info = extract_eval_info(r.text, matcher);
    SampleEval s;
    s.id = r.id;
    if (info.score) {
      s.distance = relative_l2(*info.score, r.score, range);
      pred_scores.push_back(*info.score);
      gold_scores.push_back(r.score);
      ++report.scores_extracted;
    }
    s.accuracy = action_accuracy(info.actions, r.actions);
    distance_sum += s.distance;
    accuracy_sum += s.accuracy;
    report.per_sample.push_back(std::move(s));
  }
  const CiderResult c = cider(candidates, references);
  for (std::size_t i = 0; i < records.size(); ++i) {
    report.per_sample[i].cider = c.per_sample[i];
  }
  const NaeMap m = nae_map(report.per_sample);
  const double n = static_cast<double>(records.size());
  report.map = m.map;
  report.grid = m.grid;
  report.r_l2 = 100.0 * distance_sum / n;
  report.accuracy = accuracy_sum / n;
  report.bleu4 = bleu4(candidates, references);
  report.meteor = meteor(candidates, references);
  report.cider = c.corpus;
  if (pred_scores.size() >= 2) {
    try {
      report.rho = spearman(pred_scores, gold_scores);
    } catch (const NumericalError &) {
      report.rho.reset();
    }
  }
  return report;
}

std::string format_report(const EvalReport &report) {
  std::string out = "# NAE evaluation report\n";
  char buf[160];
  auto line = [&](const char *key, double v) {
    std::snprintf(buf, sizeof buf, "%-16s %.6f\n", key, v);
    out += buf;
  };
  std::snprintf(buf, sizeof buf, "%-16s %zu\n%-16s %zu\n", "samples", report.samples,
                "scores_extracted", report.scores_extracted);
  out += buf;
  line("mAP", report.map);
  if (report.rho) {
    line("rho", *report.rho);
  } else {
    std::snprintf(buf, sizeof buf, "%-16s %s\n", "rho", "n/a");
    out += buf;
  }
  line("R-l2", report.r_l2);
  line("B4", report.bleu4);
  line("M", report.meteor);
  line("C", report.cider);
  line("Acc", report.accuracy);
  out += "\n# ap_grid: t_distance t_cider t_accuracy ap\n";
  std::size_t cell = 0;
  for (double td : kDistanceThresholds) {
    for (double tc : kCiderThresholds) {
      for (double ta : kAccuracyThresholds) {
        std::snprintf(buf, sizeof buf, "%.3f %.2f %.2f %.6f\n", td, tc, ta, report.grid[cell++]);
        out += buf;
      }
    }
  }
  return out;
}

} // namespace nae
