#pragma once

#include "nae/tensor.hpp"

#include <map>
#include <string>
#include <string_view>
#include <vector>

namespace nae {

/// Lowercased word tokens with punctuation stripped. Hyphens between letters
/// and decimal points between digits stay inside their token, so
/// "Twenty-five, 85.5!" -> {"twenty-five", "85.5"}.
std::vector<std::string> tokenize(std::string_view text);

struct TokenizedText {
  std::string original;
  std::vector<std::string> tokens;

  explicit TokenizedText(std::string text) : original(std::move(text)), tokens(tokenize(original)) {}
};

std::string join_tokens(const std::vector<std::string> &tokens);

/// Word <-> id mapping shared by the prompt encoder and the text decoder.
class Vocabulary {
public:
  static constexpr Index kPad = 0;
  static constexpr Index kBos = 1;
  static constexpr Index kEos = 2;
  static constexpr Index kUnk = 3;

  Vocabulary();
  /// Specials first, then `words` deduplicated and sorted.
  explicit Vocabulary(std::vector<std::string> words);

  Index size() const { return static_cast<Index>(tokens_.size()); }
  Index id(const std::string &token) const;
  bool contains(const std::string &token) const { return ids_.count(token) != 0; }
  const std::string &token(Index id) const;
  std::vector<Index> encode(const std::vector<std::string> &tokens) const;
  /// Drops specials.
  std::vector<std::string> decode(const std::vector<Index> &ids) const;

private:
  std::vector<std::string> tokens_;
  std::map<std::string, Index> ids_;
};

} // namespace nae
