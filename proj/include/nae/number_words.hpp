#pragma once

#include <cstddef>
#include <optional>
#include <span>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

namespace nae {

class ParseError : public std::runtime_error {
public:
  using std::runtime_error::runtime_error;
};

/// English cardinal rendering for 0 <= x < 1000 with `decimals` in {0,1,2}:
/// 25.6 -> {"twenty-five", "point", "six"}. Fractional digits are spoken one
/// by one after "point"; compound tens are hyphenated.
std::vector<std::string> number_to_words(double x, int decimals);
std::string number_to_text(double x, int decimals);

/// Exact inverse of number_to_words. Also accepts unhyphenated compounds
/// ("twenty five") and "and" after "hundred". Throws ParseError unless the
/// whole token stream is one number.
double words_to_number(std::span<const std::string> tokens);
double words_to_number(std::string_view text);

struct NumberMatch {
  double value = 0.0;
  std::size_t length = 0; // tokens consumed
};

/// Longest number-word phrase starting at tokens[start], if any.
std::optional<NumberMatch> match_number(std::span<const std::string> tokens, std::size_t start);

/// Every token number_to_words can emit, sorted.
std::vector<std::string> number_word_vocabulary();

} // namespace nae
