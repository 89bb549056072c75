#include "nae/text.hpp"

#include <algorithm>
#include <cctype>
#include <set>
#include <stdexcept>

namespace nae {

namespace {

bool is_alnum(char c) { return std::isalnum(static_cast<unsigned char>(c)) != 0; }
bool is_digit(char c) { return std::isdigit(static_cast<unsigned char>(c)) != 0; }

} // namespace

std::vector<std::string> tokenize(std::string_view text) {
  std::vector<std::string> out;
  std::string cur;
  auto flush = [&] {
    if (!cur.empty()) {
      out.push_back(cur);
      cur.clear();
    }
  };
  for (std::size_t i = 0; i < text.size(); ++i) {
    const char c = text[i];
    if (is_alnum(c)) {
      cur += static_cast<char>(std::tolower(static_cast<unsigned char>(c)));
      continue;
    }
    const bool has_next = i + 1 < text.size();
    if (c == '-' && !cur.empty() && has_next && is_alnum(text[i + 1]) && is_alnum(cur.back())) {
      cur += '-';
      continue;
    }
    if (c == '.' && !cur.empty() && is_digit(cur.back()) && has_next && is_digit(text[i + 1])) {
      cur += '.';
      continue;
    }
    flush();
  }
  flush();
  return out;
}

std::string join_tokens(const std::vector<std::string> &tokens) {
  std::string out;
  for (const auto &t : tokens) {
    if (!out.empty()) {
      out += ' ';
    }
    out += t;
  }
  return out;
}

Vocabulary::Vocabulary() : Vocabulary(std::vector<std::string>{}) {}

Vocabulary::Vocabulary(std::vector<std::string> words) {
  tokens_ = {"<pad>", "<bos>", "<eos>", "<unk>"};
  std::set<std::string> unique(words.begin(), words.end());
  for (const auto &w : tokens_) {
    unique.erase(w);
  }
  tokens_.insert(tokens_.end(), unique.begin(), unique.end());
  for (std::size_t i = 0; i < tokens_.size(); ++i) {
    ids_.emplace(tokens_[i], static_cast<Index>(i));
  }
}

Index Vocabulary::id(const std::string &token) const {
  auto it = ids_.find(token);
  return it == ids_.end() ? kUnk : it->second;
}

const std::string &Vocabulary::token(Index id) const {
  if (id < 0 || id >= size()) {
    throw std::out_of_range("Vocabulary: id " + std::to_string(id) + " out of range");
  }
  return tokens_[static_cast<std::size_t>(id)];
}

std::vector<Index> Vocabulary::encode(const std::vector<std::string> &tokens) const {
  std::vector<Index> out;
  out.reserve(tokens.size());
  for (const auto &t : tokens) {
    out.push_back(id(t));
  }
  return out;
}

std::vector<std::string> Vocabulary::decode(const std::vector<Index> &ids) const {
  std::vector<std::string> out;
  for (Index i : ids) {
    if (i == kPad || i == kBos || i == kEos || i == kUnk) {
      continue;
    }
    out.push_back(token(i));
  }
  return out;
}

} // namespace nae
