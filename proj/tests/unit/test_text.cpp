#include "nae/number_words.hpp"
#include "nae/text.hpp"

#include <gtest/gtest.h>

#include <cmath>

using namespace nae;

namespace {

std::vector<std::string> split(const std::string &s) { return tokenize(s); }

} // namespace

TEST(NumberWords, OneDecimalBounds) {
  EXPECT_EQ(number_to_text(25.6, 1), "twenty-five point six");
  EXPECT_EQ(number_to_text(36.3, 1), "thirty-six point three");
}

TEST(NumberWords, SimpleForms) {
  EXPECT_EQ(number_to_text(0, 0), "zero");
  EXPECT_EQ(number_to_text(0, 1), "zero point zero");
  EXPECT_EQ(number_to_text(13, 0), "thirteen");
  EXPECT_EQ(number_to_text(40, 0), "forty");
  EXPECT_EQ(number_to_text(100, 1), "one hundred point zero");
  EXPECT_EQ(number_to_text(907, 0), "nine hundred seven");
  EXPECT_EQ(number_to_text(999.9, 1), "nine hundred ninety-nine point nine");
}

TEST(NumberWords, TwoDecimals) {
  EXPECT_EQ(number_to_text(98.75, 2), "ninety-eight point seven five");
  EXPECT_EQ(words_to_number("ninety-eight point seven five"), 98.75);
  EXPECT_EQ(number_to_text(3.05, 2), "three point zero five");
}

TEST(NumberWords, RejectsOutOfRange) {
  EXPECT_THROW(number_to_words(1000.0, 0), std::invalid_argument);
  EXPECT_THROW(number_to_words(-0.5, 1), std::invalid_argument);
  EXPECT_THROW(number_to_words(999.96, 1), std::invalid_argument);
  EXPECT_THROW(number_to_words(5.0, 3), std::invalid_argument);
}

TEST(NumberWords, ParserAcceptsVariants) {
  EXPECT_EQ(words_to_number("twenty five"), 25.0);
  EXPECT_EQ(words_to_number("one hundred and five point two"), 105.2);
  EXPECT_EQ(words_to_number("zero point five"), 0.5);
}

TEST(NumberWords, ParserRejectsGarbage) {
  EXPECT_THROW(words_to_number(""), ParseError);
  EXPECT_THROW(words_to_number("twenty banana"), ParseError);
  EXPECT_THROW(words_to_number("point five"), ParseError);
  EXPECT_THROW(words_to_number("five point"), ParseError);
  EXPECT_THROW(words_to_number("twenty twenty"), ParseError);
}

TEST(NumberWords, RoundTripFullOneDecimalGrid) {
  for (int tenths = 0; tenths < 10000; ++tenths) {
    const double x = tenths / 10.0;
    const auto words = number_to_words(x, 1);
    ASSERT_EQ(words_to_number(words), x) << x;
  }
}

TEST(NumberWords, MatchFindsLongestPhraseInContext) {
  const auto tokens = split("judges award eighty-one point four for a dive");
  const auto m = match_number(tokens, 2);
  ASSERT_TRUE(m.has_value());
  EXPECT_EQ(m->value, 81.4);
  EXPECT_EQ(m->length, 3u);
  EXPECT_FALSE(match_number(tokens, 0).has_value());
}

TEST(NumberWords, MatchStopsBeforeDanglingPoint) {
  const auto tokens = split("scored seven point and then");
  const auto m = match_number(tokens, 1);
  ASSERT_TRUE(m.has_value());
  EXPECT_EQ(m->value, 7.0);
  EXPECT_EQ(m->length, 1u);
}

TEST(NumberWords, VocabularyCoversEveryRendering) {
  const auto vocab = number_word_vocabulary();
  for (int tenths = 0; tenths < 10000; tenths += 7) {
    for (const auto &w : number_to_words(tenths / 10.0, 1)) {
      ASSERT_TRUE(std::binary_search(vocab.begin(), vocab.end(), w)) << w;
    }
  }
}

TEST(Tokenize, LowercasesAndStripsPunctuation) {
  EXPECT_EQ(tokenize("Twenty-five, 85.5!"), (std::vector<std::string>{"twenty-five", "85.5"}));
  EXPECT_EQ(tokenize("  A  dive. (Great) "), (std::vector<std::string>{"a", "dive", "great"}));
  EXPECT_EQ(tokenize("end."), (std::vector<std::string>{"end"}));
  EXPECT_TRUE(tokenize("?!").empty());
}

TEST(Tokenize, KeepsOriginal) {
  const TokenizedText t("Hello, World");
  EXPECT_EQ(t.original, "Hello, World");
  EXPECT_EQ(t.tokens, (std::vector<std::string>{"hello", "world"}));
}

TEST(Vocabulary, SpecialsFirstThenSortedWords) {
  const Vocabulary v({"zeta", "alpha", "alpha"});
  EXPECT_EQ(v.size(), 6);
  EXPECT_EQ(v.id("alpha"), 4);
  EXPECT_EQ(v.id("zeta"), 5);
  EXPECT_EQ(v.id("missing"), Vocabulary::kUnk);
  EXPECT_THROW(v.token(99), std::out_of_range);
}

TEST(Vocabulary, DecodeDropsSpecials) {
  const Vocabulary v({"a", "b"});
  const auto ids = v.encode({"b", "a", "q"});
  EXPECT_EQ(ids, (std::vector<Index>{5, 4, Vocabulary::kUnk}));
  EXPECT_EQ(v.decode({Vocabulary::kBos, 4, Vocabulary::kPad, 5, Vocabulary::kEos}),
            (std::vector<std::string>{"a", "b"}));
  EXPECT_EQ(join_tokens({"a", "b"}), "a b");
}
