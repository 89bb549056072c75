#pragma once

#include <cstdint>
#include <iosfwd>
#include <string>

namespace nae {

/// Every knob of a run. Serialized as a flat `key = value` text file.
struct RunConfig {
  std::uint64_t seed = 7;

  // model dimensions
  int feature_dim = 16; // D_in of the synthetic video features
  int width = 32;
  int heads = 4;
  int decoder_layers = 2;
  int ffn_width = 64;
  int head_hidden = 32;
  int video_tokens = 8;
  int intervals = 8; // K = R
  int parts = 2;
  int actions_per_part = 4;
  int prompt_slots = 6;
  int template_slots = 2; // learnable slots per template gap
  int max_caption_len = 24;

  // losses and initial values
  double lambda_sparse = 5.0;
  double logit_scale_init = 14.3;
  double gamma_init = 1.0;

  // optimizer and schedule
  double peak_lr = 3e-3;
  double weight_decay = 0.01;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double adam_eps = 1e-8;
  double warmup_fraction = 0.1;
  int steps = 3000;
  int batch_size = 16;

  // synthetic data
  int n_train = 32;
  int n_test = 11;
  double noise_sigma = 0.05;
  double score_min = 0.0;
  double score_max = 100.0;

  // decoding
  std::string decode_mode = "greedy"; // greedy | beam
  int beam_width = 3;

  int log_every = 100;

  /// Throws std::invalid_argument on an inconsistent setting.
  void validate() const;
};

/// Applies `key = value` lines (blank lines and '#' comments ignored) on top
/// of `base`. Unknown keys are an error.
RunConfig parse_config(std::istream &in, RunConfig base = {});
RunConfig load_config(const std::string &path, RunConfig base = {});
void set_config_value(RunConfig &cfg, const std::string &key, const std::string &value);
std::string dump_config(const RunConfig &cfg);

} // namespace nae
