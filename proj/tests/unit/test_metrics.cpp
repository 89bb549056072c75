#include "oracles.hpp"

#include "nae/metrics.hpp"

#include <gtest/gtest.h>

#include <cmath>
#include <random>

using namespace nae;

namespace {

Tokens toks(const std::string &s) { return tokenize(s); }

ActionLexicon lexicon() {
  return {{{"forward somersault", "back dive", "inward dive"}, {"pike", "tuck"}}};
}

} // namespace

TEST(Spearman, SwappedPairIsExactlyHalf) {
  const std::vector<double> a = {1, 2, 3}, b = {1, 3, 2};
  EXPECT_EQ(spearman(a, b), 0.5);
}

TEST(Spearman, MatchesClosedFormWithoutTies) {
  std::mt19937_64 rng(3);
  std::normal_distribution<double> n(0.0, 1.0);
  for (int trial = 0; trial < 50; ++trial) {
    std::vector<double> a(12), b(12);
    for (std::size_t i = 0; i < a.size(); ++i) {
      a[i] = n(rng);
      b[i] = a[i] + n(rng);
    }
    EXPECT_NEAR(spearman(a, b), testkit::spearman_closed_form(a, b), 1e-12);
  }
}

TEST(Spearman, TiesUseAverageRanks) {
  const Eigen::Vector4d v(3.0, 1.0, 3.0, 2.0);
  const Eigen::VectorXd r = average_ranks(v);
  EXPECT_EQ(r(0), 3.5);
  EXPECT_EQ(r(1), 1.0);
  EXPECT_EQ(r(3), 2.0);
}

TEST(Spearman, ConstantInputThrows) {
  const std::vector<double> a = {2, 2, 2}, b = {1, 2, 3};
  EXPECT_THROW(spearman(a, b), NumericalError);
  const std::vector<double> one = {1};
  EXPECT_THROW(spearman(one, one), std::invalid_argument);
}

TEST(RelativeL2, SingleSample) {
  const std::vector<double> pred = {55}, gold = {50};
  EXPECT_NEAR(r_l2(pred, gold, {0, 100}), 0.25, 1e-15);
  EXPECT_NEAR(relative_l2(55, 50, {0, 100}), 0.0025, 1e-18);
  EXPECT_THROW(r_l2(pred, gold, {1, 1}), std::invalid_argument);
}

TEST(Bleu, OneWordOffFromFiveGram) {
  const std::vector<Tokens> c = {toks("a b c d e")};
  const std::vector<std::vector<Tokens>> r = {{toks("a b c d f")}};
  EXPECT_NEAR(bleu4(c, r), std::pow(0.2, 0.25), 1e-15);
}

TEST(Bleu, DisjointIsEpsilonSmoothed) {
  const std::vector<Tokens> c = {toks("a b c d")};
  const std::vector<std::vector<Tokens>> r = {{toks("e f g h")}};
  EXPECT_NEAR(bleu4(c, r), 1e-9 / std::pow(24.0, 0.25), 1e-22);
}

TEST(Bleu, BrevityPenaltyUsesClosestReference) {
  const std::vector<Tokens> c = {toks("a b c d")};
  const std::vector<std::vector<Tokens>> r = {{toks("a b c d e f g h"), toks("a b c d x y")}};
  EXPECT_NEAR(bleu4(c, r), std::exp(1.0 - 6.0 / 4.0), 1e-15);
}

TEST(Meteor, FragmentedMatch) {
  EXPECT_NEAR(meteor_sentence(toks("the cat sat"), toks("the dog sat")), 1.0 / 3.0, 1e-15);
}

TEST(Meteor, StemStageMatchesInflections) {
  EXPECT_EQ(stem("jumped"), stem("jumping"));
  EXPECT_EQ(stem("go"), "go");
  EXPECT_EQ(meteor_sentence(toks("jumped"), toks("jumping")),
            meteor_sentence(toks("jump"), toks("jump")));
  EXPECT_EQ(meteor_sentence(toks("x"), toks("y")), 0.0);
}

TEST(Meteor, CorpusIsMeanOfBestReference) {
  const std::vector<Tokens> c = {toks("the cat sat"), toks("a b")};
  const std::vector<std::vector<Tokens>> r = {{toks("q"), toks("the dog sat")}, {toks("a b")}};
  EXPECT_NEAR(meteor(c, r), 0.5 * (1.0 / 3.0 + meteor_sentence(toks("a b"), toks("a b"))), 1e-15);
}

TEST(Cider, IdenticalCandidateInDisjointCorpus) {
  const std::vector<Tokens> c = {toks("a b c d e"), toks("f g h i j")};
  const std::vector<std::vector<Tokens>> r = {{toks("a b c d e")}, {toks("f g h i j")}};
  const auto res = cider(c, r);
  EXPECT_NEAR(res.per_sample[0], 10.0, 1e-12);
  EXPECT_NEAR(res.corpus, 10.0, 1e-12);
}

TEST(Cider, NoOverlapIsZero) {
  const std::vector<Tokens> c = {toks("x y z"), toks("f g h i j")};
  const std::vector<std::vector<Tokens>> r = {{toks("a b c d e")}, {toks("f g h i j")}};
  EXPECT_EQ(cider(c, r).per_sample[0], 0.0);
}

TEST(Cider, MatchesStringKeyedOracle) {
  const std::vector<std::string> cand = {"a forward somersault with pike scored eighty point one",
                                         "back dive tuck scored seventy",
                                         "inward dive with tuck tuck scored ninety point five",
                                         "a pike"};
  const std::vector<std::vector<std::string>> refs = {
      {"a forward somersault in pike scored eighty point one", "forward somersault pike"},
      {"back dive in tuck position scored seventy point zero"},
      {"inward dive with tuck scored ninety point five", "an inward dive tuck"},
      {"back dive pike scored ten"}};
  std::vector<Tokens> c;
  std::vector<std::vector<Tokens>> r;
  for (std::size_t i = 0; i < cand.size(); ++i) {
    c.push_back(toks(cand[i]));
    r.emplace_back();
    for (const auto &s : refs[i]) {
      r.back().push_back(toks(s));
    }
  }
  const auto res = cider(c, r);
  const auto expected = testkit::cider_oracle(cand, refs);
  for (std::size_t i = 0; i < cand.size(); ++i) {
    EXPECT_NEAR(res.per_sample[i], expected[i], 1e-12) << i;
  }
}

TEST(ActionAccuracy, FractionOfGoldParts) {
  const std::set<ActionLabel> got = {{0, 1}, {1, 0}, {2, 3}, {3, 1}};
  const Index gold[] = {1, 0, 3, 2};
  EXPECT_EQ(action_accuracy(got, gold), 0.75);
}

TEST(Extract, NumberWordsAndActions) {
  const auto info =
      extract_eval_info("An inward dive in the tuck position scored eighty-five point five.", lexicon());
  ASSERT_TRUE(info.score.has_value());
  EXPECT_EQ(*info.score, 85.5);
  EXPECT_EQ(info.actions, (std::set<ActionLabel>{{0, 2}, {1, 1}}));
}

TEST(Extract, DigitsAndMissingScore) {
  EXPECT_EQ(*extract_eval_info("judges gave 71.25 to a pike", lexicon()).score, 71.25);
  EXPECT_FALSE(extract_eval_info("a graceful dive", lexicon()).score.has_value());
}

TEST(Extract, MissingScoreCountsAsMaximalDistance) {
  const std::vector<EvalRecord> records = {
      {"a", "back dive pike", {"back dive pike scored ten point zero"}, 10.0, {1, 0}},
      {"b", "forward somersault tuck scored twenty", {"forward somersault tuck scored twenty"}, 20.0,
       {0, 1}}};
  const auto report = evaluate_records(records, lexicon(), {0, 100});
  EXPECT_EQ(report.per_sample[0].distance, 1.0);
  EXPECT_EQ(report.per_sample[1].distance, 0.0);
  EXPECT_EQ(report.scores_extracted, 1u);
  EXPECT_FALSE(report.rho.has_value());
}

TEST(PhraseMatcher, DuplicatePhrasesAreRejected) {
  const ActionLexicon dup{{{"pike", "Pike"}}};
  EXPECT_THROW(PhraseMatcher{dup}, std::invalid_argument);
}

TEST(NaeMap, PerfectAndFailingExtremes) {
  const std::vector<SampleEval> perfect(5, SampleEval{"x", 10.0, 0.0, 1.0});
  EXPECT_EQ(nae_map(perfect).map, 1.0);
  const std::vector<SampleEval> failing(5, SampleEval{"x", 0.0, 1.0, 0.0});
  EXPECT_EQ(nae_map(failing).map, 0.0);
  EXPECT_THROW(nae_map(std::span<const SampleEval>{}), std::invalid_argument);
}

TEST(NaeMap, BoundaryValuesAreInclusive) {
  const std::vector<SampleEval> s = {{"x", 0.25, 0.003, 1.0}};
  EXPECT_EQ(nae_map(s).map, 1.0);
  const std::vector<SampleEval> loosest = {{"x", 0.25, 0.020, 1.0}};
  EXPECT_NEAR(nae_map(loosest).map, 0.2, 1e-15);
  const std::vector<SampleEval> just_out = {{"x", 0.25, 0.0200001, 1.0}};
  EXPECT_EQ(nae_map(just_out).map, 0.0);
}

TEST(NaeMap, MatchesIndependentPasses) {
  std::mt19937_64 rng(11);
  std::uniform_real_distribution<double> d(0.0, 0.03), c(0.0, 0.3);
  std::uniform_int_distribution<int> a(0, 4);
  for (int trial = 0; trial < 20; ++trial) {
    std::vector<SampleEval> s(9);
    for (auto &x : s) {
      x = {"s", c(rng), d(rng), a(rng) / 4.0};
    }
    const auto got = nae_map(s);
    const auto want = testkit::nae_map_oracle(s);
    EXPECT_NEAR(got.map, want.map, 1e-15);
    for (std::size_t k = 0; k < got.grid.size(); ++k) {
      ASSERT_EQ(got.grid[k], want.grid[k]) << k;
    }
  }
}

TEST(EvaluateRecords, GoldCaptionsScorePerfectly) {
  const std::vector<EvalRecord> records = {
      {"a", "a forward somersault pike scored eighty-five point five",
       {"a forward somersault pike scored eighty-five point five"}, 85.5, {0, 0}},
      {"b", "back dive tuck scored twelve point three", {"back dive tuck scored twelve point three"},
       12.3, {1, 1}},
      {"c", "inward dive pike scored forty point zero", {"inward dive pike scored forty point zero"},
       40.0, {2, 0}}};
  const auto report = evaluate_records(records, lexicon(), {0, 100});
  EXPECT_EQ(report.map, 1.0);
  EXPECT_EQ(report.r_l2, 0.0);
  EXPECT_EQ(report.accuracy, 1.0);
  ASSERT_TRUE(report.rho.has_value());
  EXPECT_NEAR(*report.rho, 1.0, 1e-15);
  EXPECT_NEAR(report.bleu4, 1.0, 1e-15);
  const std::string text = format_report(report);
  EXPECT_NE(text.find("mAP"), std::string::npos);
}
