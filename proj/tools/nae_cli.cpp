#include "nae/checkpoint.hpp"
#include "nae/config.hpp"
#include "nae/dataset.hpp"
#include "nae/metrics.hpp"
#include "nae/model.hpp"
#include "nae/trainer.hpp"

#include <CLI11.hpp>

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>

namespace fs = std::filesystem;

namespace {

struct Common {
  std::string config_path;
  std::optional<std::uint64_t> seed;
  std::string out = ".";
};

nae::RunConfig resolve_config(const Common &c, const std::string &fallback = {}) {
  nae::RunConfig cfg;
  if (!c.config_path.empty()) {
    cfg = nae::load_config(c.config_path);
  } else if (!fallback.empty() && fs::exists(fallback)) {
    cfg = nae::load_config(fallback);
  }
  if (c.seed) {
    cfg.seed = *c.seed;
  }
  cfg.validate();
  return cfg;
}

void write_text(const fs::path &path, const std::string &text) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) {
    throw std::runtime_error("cannot write " + path.string());
  }
  out << text;
}

std::ofstream open_out(const fs::path &path) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) {
    throw std::runtime_error("cannot write " + path.string());
  }
  return out;
}

std::vector<nae::Sample> samples_for(const nae::RunConfig &cfg, const std::string &data_dir,
                                     const std::string &split) {
  if (split != "train" && split != "test") {
    throw std::invalid_argument("split must be train or test");
  }
  if (!data_dir.empty()) {
    return nae::load_samples((fs::path(data_dir) / (split + ".jsonl")).string());
  }
  nae::Dataset d = nae::generate_dataset(cfg);
  return split == "train" ? std::move(d.train) : std::move(d.test);
}

void add_common(CLI::App *app, Common &c) {
  app->add_option("--config", c.config_path, "key = value config file");
  app->add_option("--seed", c.seed, "overrides the config seed");
  app->add_option("--out", c.out, "output directory");
}

} // namespace

int main(int argc, char **argv) {
  CLI::App app{"Narrative action evaluation: synthetic data, training, decoding and metrics"};
  app.require_subcommand(0, 1);

  Common top;
  bool dump = false;
  app.add_flag("--dump-config", dump, "print the effective configuration and exit");
  app.add_option("--config", top.config_path, "key = value config file");
  app.add_option("--seed", top.seed, "overrides the config seed");

  Common gen_opts;
  auto *gen = app.add_subcommand("gen-data", "write train.jsonl and test.jsonl");
  add_common(gen, gen_opts);

  Common train_opts;
  std::string train_data;
  auto *train = app.add_subcommand("train", "train a model and write checkpoint.bin");
  add_common(train, train_opts);
  train->add_option("--data", train_data, "directory holding train.jsonl (default: generate)");

  Common eval_opts;
  std::string eval_ckpt, eval_data, eval_split = "test";
  auto *eval = app.add_subcommand("eval", "decode a split and write report.txt");
  add_common(eval, eval_opts);
  eval->add_option("--checkpoint", eval_ckpt, "checkpoint.bin from train")->required();
  eval->add_option("--data", eval_data, "dataset directory (default: generate)");
  eval->add_option("--split", eval_split, "train or test");

  Common dec_opts;
  std::string dec_ckpt, dec_data, dec_split = "test";
  auto *decode = app.add_subcommand("decode", "write generations.jsonl");
  add_common(decode, dec_opts);
  decode->add_option("--checkpoint", dec_ckpt, "checkpoint.bin from train")->required();
  decode->add_option("--data", dec_data, "dataset directory (default: generate)");
  decode->add_option("--split", dec_split, "train or test");

  Common met_opts;
  std::string records_path;
  std::optional<double> range_min, range_max;
  auto *metrics = app.add_subcommand("metrics", "score an existing record file");
  add_common(metrics, met_opts);
  metrics->add_option("--records", records_path, "JSONL with id, text, references, score, actions")
      ->required();
  metrics->add_option("--range-min", range_min, "score range low end (default: score_min)");
  metrics->add_option("--range-max", range_max, "score range high end (default: score_max)");

  CLI11_PARSE(app, argc, argv);

  try {
    if (dump) {
      std::cout << nae::dump_config(resolve_config(top));
      return 0;
    }
    if (app.get_subcommands().empty()) {
      std::cout << app.help();
      return 0;
    }

    if (gen->parsed()) {
      const nae::RunConfig cfg = resolve_config(gen_opts);
      fs::create_directories(gen_opts.out);
      const nae::Dataset d = nae::generate_dataset(cfg);
      nae::save_samples((fs::path(gen_opts.out) / "train.jsonl").string(), d.train);
      nae::save_samples((fs::path(gen_opts.out) / "test.jsonl").string(), d.test);
      write_text(fs::path(gen_opts.out) / "config.txt", nae::dump_config(cfg));
      std::printf("wrote %zu train and %zu test samples to %s\n", d.train.size(), d.test.size(),
                  gen_opts.out.c_str());
    } else if (train->parsed()) {
      const nae::RunConfig cfg = resolve_config(train_opts);
      const fs::path out = train_opts.out;
      fs::create_directories(out);
      const auto samples = samples_for(cfg, train_data, "train");
      std::vector<double> scores;
      for (const auto &s : samples) {
        scores.push_back(s.score);
      }
      nae::NaeModel model(cfg, nae::ScoreSpace::from_scores(scores, cfg.intervals));
      write_text(out / "config.txt", nae::dump_config(cfg));
      write_text(out / "partition.txt", nae::partition_table(model.score_space().intervals));

      auto csv = open_out(out / "losses.csv");
      csv << nae::loss_csv_header() << '\n';
      nae::train(model, samples, [&](const nae::StepLog &l) {
        csv << nae::loss_csv_row(l) << '\n';
        if (l.step % cfg.log_every == 0 || l.step == cfg.steps) {
          std::printf("step %5d  lr %.2e  gen %.4f  ce_s %.4f  mse %.5f  ce_a %.4f  sparse %.4f  "
                      "total %.4f\n",
                      l.step, l.lr, l.generation, l.match, l.score, l.action, l.sparse, l.total);
          std::fflush(stdout);
        }
      });
      nae::save_checkpoint((out / "checkpoint.bin").string(), model.state());
      std::printf("checkpoint: %s\n", (out / "checkpoint.bin").c_str());
    } else if (eval->parsed() || decode->parsed()) {
      const bool is_eval = eval->parsed();
      const Common &opts = is_eval ? eval_opts : dec_opts;
      const std::string &ckpt = is_eval ? eval_ckpt : dec_ckpt;
      const nae::RunConfig cfg =
          resolve_config(opts, (fs::path(ckpt).parent_path() / "config.txt").string());
      const auto model = nae::load_model(cfg, nae::load_checkpoint(ckpt));
      const auto samples =
          samples_for(cfg, is_eval ? eval_data : dec_data, is_eval ? eval_split : dec_split);
      const fs::path out = opts.out;
      fs::create_directories(out);
      if (is_eval) {
        const nae::Evaluation e = nae::evaluate(*model, samples, model->decode_options());
        write_text(out / "report.txt", nae::format_report(e.report));
        auto per_sample = open_out(out / "samples.jsonl");
        nae::write_predictions(per_sample, e.predictions, &e.report);
        auto records = open_out(out / "records.jsonl");
        nae::write_records(records, e.records);
        std::cout << nae::format_report(e.report);
        std::printf("interval accuracy %.6f\n", e.interval_accuracy);
      } else {
        const auto predictions = nae::predict_all(*model, samples, model->decode_options());
        auto gens = open_out(out / "generations.jsonl");
        nae::write_predictions(gens, predictions);
        std::printf("wrote %zu generations to %s\n", predictions.size(),
                    (out / "generations.jsonl").c_str());
      }
    } else if (metrics->parsed()) {
      const nae::RunConfig cfg = resolve_config(met_opts);
      std::ifstream in(records_path);
      if (!in) {
        throw std::runtime_error("cannot open " + records_path);
      }
      const auto records = nae::read_records(in);
      const nae::ScoreRange range{range_min.value_or(cfg.score_min),
                                  range_max.value_or(cfg.score_max)};
      const auto report = nae::evaluate_records(
          records, nae::builtin_lexicon(cfg.parts, cfg.actions_per_part), range);
      fs::create_directories(met_opts.out);
      write_text(fs::path(met_opts.out) / "report.txt", nae::format_report(report));
      std::cout << nae::format_report(report);
    }
  } catch (const std::exception &e) {
    std::fprintf(stderr, "nae: %s\n", e.what());
    return 1;
  }
  return 0;
}
