#include "nae/number_words.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <set>
#include <sstream>

namespace nae {

namespace {

constexpr std::array<std::string_view, 20> kSmall = {
    "zero",    "one",     "two",       "three",    "four",     "five",    "six",
    "seven",   "eight",   "nine",      "ten",      "eleven",   "twelve",  "thirteen",
    "fourteen", "fifteen", "sixteen",  "seventeen", "eighteen", "nineteen"};

constexpr std::array<std::string_view, 10> kTens = {"",      "",      "twenty",  "thirty", "forty",
                                                    "fifty", "sixty", "seventy", "eighty", "ninety"};

int small_value(std::string_view w) {
  for (std::size_t i = 0; i < kSmall.size(); ++i) {
    if (kSmall[i] == w) {
      return static_cast<int>(i);
    }
  }
  return -1;
}

int tens_value(std::string_view w) {
  for (std::size_t i = 2; i < kTens.size(); ++i) {
    if (kTens[i] == w) {
      return static_cast<int>(i) * 10;
    }
  }
  return -1;
}

bool is_number_subword(std::string_view w) {
  return small_value(w) >= 0 || tens_value(w) >= 0 || w == "hundred" || w == "point" || w == "and";
}

std::string below_hundred(int n) {
  if (n < 20) {
    return std::string(kSmall[static_cast<std::size_t>(n)]);
  }
  std::string out(kTens[static_cast<std::size_t>(n / 10)]);
  if (n % 10 != 0) {
    out += "-";
    out += kSmall[static_cast<std::size_t>(n % 10)];
  }
  return out;
}

void integer_words(int n, std::vector<std::string> &out) {
  if (n == 0) {
    out.emplace_back("zero");
    return;
  }
  if (n >= 100) {
    out.emplace_back(kSmall[static_cast<std::size_t>(n / 100)]);
    out.emplace_back("hundred");
    n %= 100;
    if (n == 0) {
      return;
    }
  }
  out.push_back(below_hundred(n));
}

// Parses 1..99 from words[pos..limit); returns consumed count (0 if none).
std::size_t parse_below_hundred(const std::vector<std::string> &words, std::size_t pos,
                                std::size_t limit, int &value) {
  if (pos >= limit) {
    return 0;
  }
  const int tens = tens_value(words[pos]);
  if (tens > 0) {
    value = tens;
    if (pos + 1 < limit) {
      const int unit = small_value(words[pos + 1]);
      if (unit >= 1 && unit <= 9) {
        value += unit;
        return 2;
      }
    }
    return 1;
  }
  const int small = small_value(words[pos]);
  if (small >= 1) {
    value = small;
    return 1;
  }
  return 0;
}

struct SubwordParse {
  std::size_t consumed = 0;
  long long scaled = 0; // value * 10^digits
  int digits = 0;
};

// Longest number over words[0..limit).
std::optional<SubwordParse> parse_subwords(const std::vector<std::string> &words,
                                           std::size_t limit) {
  std::size_t pos = 0;
  int integer = 0;
  if (limit == 0) {
    return std::nullopt;
  }
  if (words[0] == "zero") {
    pos = 1;
  } else {
    const int lead = small_value(words[0]);
    if (lead >= 1 && lead <= 9 && limit >= 2 && words[1] == "hundred") {
      integer = lead * 100;
      pos = 2;
      std::size_t after = pos;
      if (after < limit && words[after] == "and") {
        ++after;
      }
      int rest = 0;
      const std::size_t n = parse_below_hundred(words, after, limit, rest);
      if (n > 0) {
        integer += rest;
        pos = after + n;
      }
    } else {
      const std::size_t n = parse_below_hundred(words, 0, limit, integer);
      if (n == 0) {
        return std::nullopt;
      }
      pos = n;
    }
  }
  SubwordParse out{pos, integer, 0};
  if (pos < limit && words[pos] == "point") {
    std::size_t q = pos + 1;
    long long scaled = integer;
    int digits = 0;
    while (q < limit) {
      const int d = small_value(words[q]);
      if (d < 0 || d > 9) {
        break;
      }
      scaled = scaled * 10 + d;
      ++digits;
      ++q;
    }
    if (digits > 0) {
      out = {q, scaled, digits};
    }
  }
  return out;
}

} // namespace

std::vector<std::string> number_to_words(double x, int decimals) {
  if (decimals < 0 || decimals > 2) {
    throw std::invalid_argument("number_to_words: decimals must be 0, 1 or 2");
  }
  if (!std::isfinite(x) || x < 0.0 || x >= 1000.0) {
    throw std::invalid_argument("number_to_words: value outside [0, 1000)");
  }
  long long unit = 1;
  for (int i = 0; i < decimals; ++i) {
    unit *= 10;
  }
  const long long scaled = std::llround(x * static_cast<double>(unit));
  if (scaled >= 1000 * unit) {
    throw std::invalid_argument("number_to_words: value rounds to 1000 or more");
  }
  std::vector<std::string> out;
  integer_words(static_cast<int>(scaled / unit), out);
  if (decimals > 0) {
    out.emplace_back("point");
    std::string frac = std::to_string(scaled % unit);
    frac.insert(0, static_cast<std::size_t>(decimals) - frac.size(), '0');
    for (char c : frac) {
      out.emplace_back(kSmall[static_cast<std::size_t>(c - '0')]);
    }
  }
  return out;
}

std::string number_to_text(double x, int decimals) {
  const auto words = number_to_words(x, decimals);
  std::string out;
  for (const auto &w : words) {
    if (!out.empty()) {
      out += ' ';
    }
    out += w;
  }
  return out;
}

std::optional<NumberMatch> match_number(std::span<const std::string> tokens, std::size_t start) {
  // Split tokens into hyphen-separated subwords, recording token boundaries.
  std::vector<std::string> words;
  std::vector<std::size_t> boundary{0}; // subword count after each whole token
  for (std::size_t t = start; t < tokens.size(); ++t) {
    std::vector<std::string> parts;
    std::string cur;
    for (char c : tokens[t]) {
      if (c == '-') {
        parts.push_back(cur);
        cur.clear();
      } else {
        cur += c;
      }
    }
    parts.push_back(cur);
    const bool numeric = std::all_of(parts.begin(), parts.end(),
                                     [](const std::string &p) { return is_number_subword(p); });
    if (!numeric) {
      break;
    }
    words.insert(words.end(), parts.begin(), parts.end());
    boundary.push_back(words.size());
  }
  std::size_t limit = words.size();
  while (limit > 0) {
    auto parsed = parse_subwords(words, limit);
    if (!parsed) {
      return std::nullopt;
    }
    auto it = std::find(boundary.begin(), boundary.end(), parsed->consumed);
    if (it != boundary.end()) {
      double value = static_cast<double>(parsed->scaled);
      if (parsed->digits > 0) {
        long long unit = 1;
        for (int i = 0; i < parsed->digits; ++i) {
          unit *= 10;
        }
        value = static_cast<double>(parsed->scaled) / static_cast<double>(unit);
      }
      return NumberMatch{value, static_cast<std::size_t>(it - boundary.begin())};
    }
    // Parse ended inside a hyphenated token; retry up to the previous token boundary.
    auto prev = std::upper_bound(boundary.begin(), boundary.end(), parsed->consumed);
    limit = *(prev - 1);
  }
  return std::nullopt;
}

double words_to_number(std::span<const std::string> tokens) {
  if (tokens.empty()) {
    throw ParseError("words_to_number: empty token stream");
  }
  const auto m = match_number(tokens, 0);
  if (!m || m->length != tokens.size()) {
    std::string joined;
    for (const auto &t : tokens) {
      joined += (joined.empty() ? "" : " ") + t;
    }
    throw ParseError("words_to_number: cannot parse '" + joined + "'");
  }
  return m->value;
}

double words_to_number(std::string_view text) {
  std::istringstream in{std::string(text)};
  std::vector<std::string> tokens;
  std::string t;
  while (in >> t) {
    tokens.push_back(t);
  }
  return words_to_number(tokens);
}

std::vector<std::string> number_word_vocabulary() {
  std::set<std::string> words{"hundred", "point"};
  for (int n = 0; n < 100; ++n) {
    words.insert(below_hundred(n));
  }
  return {words.begin(), words.end()};
}

} // namespace nae
