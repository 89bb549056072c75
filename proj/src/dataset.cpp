#include "nae/dataset.hpp"

#include "nae/number_words.hpp"

#include <json.hpp>

#include <array>
#include <bit>
#include <cmath>
#include <fstream>
#include <istream>
#include <ostream>
#include <random>
#include <set>

namespace nae {

namespace {

const std::vector<std::vector<std::string>> &action_table() {
  static const std::vector<std::vector<std::string>> table = {
      {"forward somersault", "back somersault", "reverse somersault", "inward somersault",
       "armstand dive", "twisting dive"},
      {"pike position", "tuck position", "straight position", "free position",
       "layout entry", "rip entry"},
  };
  return table;
}

// {a} expands to the action phrases, {s} to the spoken score.
constexpr std::array<std::string_view, 3> kCaptionTemplates = {
    "the diver performs a {a} and earns {s} points",
    "a {a} is executed and receives a score of {s}",
    "judges award {s} for a {a}",
};

std::string replace_all(std::string s, std::string_view from, const std::string &to) {
  std::size_t pos = 0;
  while ((pos = s.find(from, pos)) != std::string::npos) {
    s.replace(pos, from.size(), to);
    pos += to.size();
  }
  return s;
}

constexpr char kAlphabet[] = "ABCDEFGHIJKLMNOPQRSTUVWXYZabcdefghijklmnopqrstuvwxyz0123456789+/";

} // namespace

ActionLexicon builtin_lexicon(int parts, int actions_per_part) {
  const auto &table = action_table();
  if (actions_per_part < 4) {
    throw std::invalid_argument("lexicon: at least 4 actions per part required");
  }
  if (parts < 1 || parts > static_cast<int>(table.size()) ||
      actions_per_part > static_cast<int>(table.front().size())) {
    throw std::invalid_argument("lexicon: built-in table holds " + std::to_string(table.size()) +
                                " parts of " + std::to_string(table.front().size()) + " actions");
  }
  ActionLexicon lex;
  for (int p = 0; p < parts; ++p) {
    lex.phrases.emplace_back(table[static_cast<std::size_t>(p)].begin(),
                             table[static_cast<std::size_t>(p)].begin() + actions_per_part);
  }
  return lex;
}

std::size_t caption_template_count() { return kCaptionTemplates.size(); }

std::string render_caption(double score, std::span<const Index> actions,
                           const ActionLexicon &lexicon) {
  if (actions.size() != lexicon.parts()) {
    throw DataError("render_caption: one action per part required");
  }
  std::string phrase;
  Index selector = 0;
  for (std::size_t p = 0; p < actions.size(); ++p) {
    const auto &classes = lexicon.phrases[p];
    if (actions[p] < 0 || actions[p] >= static_cast<Index>(classes.size())) {
      throw DataError("render_caption: action class outside lexicon");
    }
    if (p > 0) {
      phrase += " with a ";
    }
    phrase += classes[static_cast<std::size_t>(actions[p])];
    selector += actions[p];
  }
  const auto tmpl = kCaptionTemplates[static_cast<std::size_t>(selector) % kCaptionTemplates.size()];
  return replace_all(replace_all(std::string(tmpl), "{a}", phrase), "{s}", number_to_text(score, 1));
}

Vocabulary build_vocabulary(const ActionLexicon &lexicon) {
  std::vector<std::string> words = number_word_vocabulary();
  for (auto &w : lexicon.words()) {
    words.push_back(std::move(w));
  }
  words.emplace_back("to");
  words.emplace_back("with");
  for (std::string_view t : kCaptionTemplates) {
    for (auto &w : tokenize(t)) {
      words.push_back(std::move(w));
    }
  }
  return Vocabulary(std::move(words));
}

Matrix clean_features(const RunConfig &cfg, double score, std::span<const Index> actions) {
  if (static_cast<int>(actions.size()) != cfg.parts) {
    throw DataError("clean_features: one action per part required");
  }
  const Index label_dim = static_cast<Index>(cfg.parts) * cfg.actions_per_part + 1;
  Eigen::VectorXd label = Eigen::VectorXd::Zero(label_dim);
  for (std::size_t p = 0; p < actions.size(); ++p) {
    label(static_cast<Index>(p) * cfg.actions_per_part + actions[p]) = 1.0;
  }
  label(label_dim - 1) = (score - cfg.score_min) / (cfg.score_max - cfg.score_min);

  // The embedding depends only on the seed, never on the sample.
  std::mt19937_64 rng(cfg.seed ^ 0x9e3779b97f4a7c15ULL);
  std::normal_distribution<double> normal(0.0, 1.0);
  Matrix out(cfg.video_tokens, cfg.feature_dim);
  const double s = 1.0 / std::sqrt(static_cast<double>(label_dim));
  for (Index m = 0; m < cfg.video_tokens; ++m) {
    Matrix a(cfg.feature_dim, label_dim);
    for (Index i = 0; i < a.size(); ++i) {
      a.data()[i] = normal(rng) * s;
    }
    Eigen::VectorXd bias(cfg.feature_dim);
    for (Index i = 0; i < bias.size(); ++i) {
      bias(i) = 0.1 * normal(rng);
    }
    out.row(m) = (a * label + bias).transpose();
  }
  return out;
}

Dataset generate_dataset(const RunConfig &cfg) {
  cfg.validate();
  const ActionLexicon lex = builtin_lexicon(cfg.parts, cfg.actions_per_part);
  std::mt19937_64 rng(cfg.seed);
  std::uniform_real_distribution<double> uniform(cfg.score_min, cfg.score_max);
  std::uniform_int_distribution<Index> action(0, cfg.actions_per_part - 1);
  std::normal_distribution<double> noise(0.0, 1.0);
  auto make = [&](const std::string &prefix, int i) {
    Sample s;
    char id[32];
    std::snprintf(id, sizeof id, "%s-%04d", prefix.c_str(), i);
    s.id = id;
    s.score = std::round(uniform(rng) * 10.0) / 10.0;
    for (int p = 0; p < cfg.parts; ++p) {
      s.actions.push_back(action(rng));
    }
    s.features = clean_features(cfg, s.score, s.actions);
    if (cfg.noise_sigma > 0.0) {
      for (Index k = 0; k < s.features.size(); ++k) {
        s.features.data()[k] += cfg.noise_sigma * noise(rng);
      }
    }
    s.captions.push_back(render_caption(s.score, s.actions, lex));
    return s;
  };
  Dataset d;
  for (int i = 0; i < cfg.n_train; ++i) {
    d.train.push_back(make("train", i));
  }
  for (int i = 0; i < cfg.n_test; ++i) {
    d.test.push_back(make("test", i));
  }
  return d;
}

std::string base64_encode(std::string_view bytes) {
  std::string out;
  out.reserve((bytes.size() + 2) / 3 * 4);
  std::size_t i = 0;
  for (; i + 3 <= bytes.size(); i += 3) {
    const unsigned v = (static_cast<unsigned char>(bytes[i]) << 16) |
                       (static_cast<unsigned char>(bytes[i + 1]) << 8) |
                       static_cast<unsigned char>(bytes[i + 2]);
    out += kAlphabet[(v >> 18) & 63];
    out += kAlphabet[(v >> 12) & 63];
    out += kAlphabet[(v >> 6) & 63];
    out += kAlphabet[v & 63];
  }
  const std::size_t rest = bytes.size() - i;
  if (rest > 0) {
    unsigned v = static_cast<unsigned char>(bytes[i]) << 16;
    if (rest == 2) {
      v |= static_cast<unsigned char>(bytes[i + 1]) << 8;
    }
    out += kAlphabet[(v >> 18) & 63];
    out += kAlphabet[(v >> 12) & 63];
    out += rest == 2 ? kAlphabet[(v >> 6) & 63] : '=';
    out += '=';
  }
  return out;
}

std::string base64_decode(std::string_view text) {
  auto value = [](char c) -> int {
    if (c >= 'A' && c <= 'Z') return c - 'A';
    if (c >= 'a' && c <= 'z') return c - 'a' + 26;
    if (c >= '0' && c <= '9') return c - '0' + 52;
    if (c == '+') return 62;
    if (c == '/') return 63;
    return -1;
  };
  if (text.size() % 4 != 0) {
    throw DataError("base64: length not a multiple of 4");
  }
  std::string out;
  for (std::size_t i = 0; i < text.size(); i += 4) {
    int v[4];
    int pad = 0;
    for (int k = 0; k < 4; ++k) {
      const char c = text[i + static_cast<std::size_t>(k)];
      if (c == '=' && i + 4 == text.size() && k >= 2) {
        v[k] = 0;
        ++pad;
      } else if (pad > 0 || (v[k] = value(c)) < 0) {
        throw DataError("base64: invalid character");
      }
    }
    const unsigned bits = (v[0] << 18) | (v[1] << 12) | (v[2] << 6) | v[3];
    out += static_cast<char>((bits >> 16) & 0xff);
    if (pad < 2) out += static_cast<char>((bits >> 8) & 0xff);
    if (pad < 1) out += static_cast<char>(bits & 0xff);
  }
  return out;
}

void write_samples(std::ostream &out, std::span<const Sample> samples) {
  for (const Sample &s : samples) {
    std::string bytes;
    bytes.reserve(static_cast<std::size_t>(s.features.size()) * 8);
    for (Index i = 0; i < s.features.size(); ++i) {
      const auto bits = std::bit_cast<std::uint64_t>(s.features.data()[i]);
      for (int b = 0; b < 8; ++b) {
        bytes += static_cast<char>((bits >> (8 * b)) & 0xff);
      }
    }
    nlohmann::ordered_json j;
    j["id"] = s.id;
    j["rows"] = s.features.rows();
    j["cols"] = s.features.cols();
    j["features"] = base64_encode(bytes);
    j["captions"] = s.captions;
    j["score"] = s.score;
    j["actions"] = s.actions;
    out << j.dump() << '\n';
  }
}

std::vector<Sample> read_samples(std::istream &in) {
  std::vector<Sample> out;
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.empty()) {
      continue;
    }
    try {
      const auto j = nlohmann::json::parse(line);
      Sample s;
      s.id = j.at("id").get<std::string>();
      const Index rows = j.at("rows").get<Index>();
      const Index cols = j.at("cols").get<Index>();
      const std::string bytes = base64_decode(j.at("features").get<std::string>());
      if (rows <= 0 || cols <= 0 || bytes.size() != static_cast<std::size_t>(rows * cols) * 8) {
        throw DataError("feature payload size disagrees with rows x cols");
      }
      s.features.resize(rows, cols);
      for (Index i = 0; i < rows * cols; ++i) {
        std::uint64_t bits = 0;
        for (int b = 0; b < 8; ++b) {
          bits |= static_cast<std::uint64_t>(static_cast<unsigned char>(
                      bytes[static_cast<std::size_t>(i * 8 + b)]))
                  << (8 * b);
        }
        s.features.data()[i] = std::bit_cast<double>(bits);
        if (!std::isfinite(s.features.data()[i])) {
          throw DataError("non-finite feature value");
        }
      }
      s.captions = j.at("captions").get<std::vector<std::string>>();
      s.score = j.at("score").get<double>();
      s.actions = j.at("actions").get<std::vector<Index>>();
      out.push_back(std::move(s));
    } catch (const nlohmann::json::exception &e) {
      throw DataError("dataset line " + std::to_string(lineno) + ": " + e.what());
    } catch (const DataError &e) {
      throw DataError("dataset line " + std::to_string(lineno) + ": " + e.what());
    }
  }
  return out;
}

void save_samples(const std::string &path, std::span<const Sample> samples) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) {
    throw DataError("cannot open '" + path + "' for writing");
  }
  write_samples(out, samples);
}

std::vector<Sample> load_samples(const std::string &path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) {
    throw DataError("cannot open '" + path + "'");
  }
  return read_samples(in);
}

} // namespace nae
