#include "nae/config.hpp"

#include <cstdio>
#include <fstream>
#include <functional>
#include <istream>
#include <sstream>
#include <stdexcept>
#include <variant>
#include <vector>

namespace nae {

namespace {

using FieldRef = std::variant<std::uint64_t *, int *, double *, std::string *>;

std::vector<std::pair<std::string, FieldRef>> fields(RunConfig &c) {
  return {
      {"seed", &c.seed},
      {"feature_dim", &c.feature_dim},
      {"width", &c.width},
      {"heads", &c.heads},
      {"decoder_layers", &c.decoder_layers},
      {"ffn_width", &c.ffn_width},
      {"head_hidden", &c.head_hidden},
      {"video_tokens", &c.video_tokens},
      {"intervals", &c.intervals},
      {"parts", &c.parts},
      {"actions_per_part", &c.actions_per_part},
      {"prompt_slots", &c.prompt_slots},
      {"template_slots", &c.template_slots},
      {"max_caption_len", &c.max_caption_len},
      {"lambda_sparse", &c.lambda_sparse},
      {"logit_scale_init", &c.logit_scale_init},
      {"gamma_init", &c.gamma_init},
      {"peak_lr", &c.peak_lr},
      {"weight_decay", &c.weight_decay},
      {"beta1", &c.beta1},
      {"beta2", &c.beta2},
      {"adam_eps", &c.adam_eps},
      {"warmup_fraction", &c.warmup_fraction},
      {"steps", &c.steps},
      {"batch_size", &c.batch_size},
      {"n_train", &c.n_train},
      {"n_test", &c.n_test},
      {"noise_sigma", &c.noise_sigma},
      {"score_min", &c.score_min},
      {"score_max", &c.score_max},
      {"decode_mode", &c.decode_mode},
      {"beam_width", &c.beam_width},
      {"log_every", &c.log_every},
  };
}

std::string trim(const std::string &s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string::npos) {
    return {};
  }
  const auto e = s.find_last_not_of(" \t\r");
  return s.substr(b, e - b + 1);
}

template <typename T> T parse_number(const std::string &key, const std::string &value) {
  std::istringstream in(value);
  T out{};
  in >> out;
  if (!in || !in.eof()) {
    throw std::invalid_argument("config: bad value '" + value + "' for " + key);
  }
  return out;
}

} // namespace

void RunConfig::validate() const {
  auto positive = [](int v, const char *name) {
    if (v <= 0) {
      throw std::invalid_argument(std::string("config: ") + name + " must be positive");
    }
  };
  positive(feature_dim, "feature_dim");
  positive(width, "width");
  positive(heads, "heads");
  positive(decoder_layers, "decoder_layers");
  positive(ffn_width, "ffn_width");
  positive(head_hidden, "head_hidden");
  positive(video_tokens, "video_tokens");
  positive(intervals, "intervals");
  positive(parts, "parts");
  positive(actions_per_part, "actions_per_part");
  positive(prompt_slots, "prompt_slots");
  positive(max_caption_len, "max_caption_len");
  positive(steps, "steps");
  positive(batch_size, "batch_size");
  positive(n_train, "n_train");
  positive(beam_width, "beam_width");
  positive(log_every, "log_every");
  if (width % heads != 0) {
    throw std::invalid_argument("config: width must be divisible by heads");
  }
  if (template_slots < 0 || n_test < 0) {
    throw std::invalid_argument("config: template_slots and n_test must be >= 0");
  }
  if (!(warmup_fraction > 0.0 && warmup_fraction < 1.0)) {
    throw std::invalid_argument("config: warmup_fraction must lie in (0, 1)");
  }
  if (!(score_max > score_min) || score_min < 0.0 || score_max >= 1000.0) {
    throw std::invalid_argument("config: need 0 <= score_min < score_max < 1000");
  }
  if (lambda_sparse < 0.0 || peak_lr < 0.0 || weight_decay < 0.0 || noise_sigma < 0.0) {
    throw std::invalid_argument("config: lambda_sparse, peak_lr, weight_decay, noise_sigma must be >= 0");
  }
  if (decode_mode != "greedy" && decode_mode != "beam") {
    throw std::invalid_argument("config: decode_mode must be greedy or beam");
  }
}

void set_config_value(RunConfig &cfg, const std::string &key, const std::string &value) {
  for (auto &[name, ref] : fields(cfg)) {
    if (name != key) {
      continue;
    }
    std::visit(
        [&](auto *field) {
          using T = std::remove_pointer_t<decltype(field)>;
          if constexpr (std::is_same_v<T, std::string>) {
            *field = value;
          } else {
            *field = parse_number<T>(key, value);
          }
        },
        ref);
    return;
  }
  throw std::invalid_argument("config: unknown key '" + key + "'");
}

RunConfig parse_config(std::istream &in, RunConfig base) {
  std::string line;
  int lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    const auto hash = line.find('#');
    if (hash != std::string::npos) {
      line.erase(hash);
    }
    line = trim(line);
    if (line.empty()) {
      continue;
    }
    const auto eq = line.find('=');
    if (eq == std::string::npos) {
      throw std::invalid_argument("config: line " + std::to_string(lineno) + " is not key = value");
    }
    set_config_value(base, trim(line.substr(0, eq)), trim(line.substr(eq + 1)));
  }
  return base;
}

RunConfig load_config(const std::string &path, RunConfig base) {
  std::ifstream in(path);
  if (!in) {
    throw std::invalid_argument("config: cannot open '" + path + "'");
  }
  return parse_config(in, std::move(base));
}

std::string dump_config(const RunConfig &cfg) {
  RunConfig copy = cfg;
  std::string out;
  char buf[64];
  for (auto &[name, ref] : fields(copy)) {
    out += name + " = ";
    std::visit(
        [&](auto *field) {
          using T = std::remove_pointer_t<decltype(field)>;
          if constexpr (std::is_same_v<T, std::string>) {
            out += *field;
          } else if constexpr (std::is_same_v<T, double>) {
            std::snprintf(buf, sizeof buf, "%.17g", *field);
            out += buf;
          } else {
            out += std::to_string(*field);
          }
        },
        ref);
    out += '\n';
  }
  return out;
}

} // namespace nae
