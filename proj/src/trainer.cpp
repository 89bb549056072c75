#include "nae/trainer.hpp"

#include "nae/optim.hpp"

#include <json.hpp>

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <istream>
#include <numeric>
#include <ostream>
#include <random>

namespace nae {

namespace {

void check_term(const char *name, double v, int step) {
  if (!std::isfinite(v)) {
    throw NumericalError("training diverged at step " + std::to_string(step) + ": " + name +
                         " is " + std::to_string(v));
  }
}

} // namespace

std::string loss_csv_header() {
  return "step,lr,generation,match,score,action,sparse,mask_sum,total,interval_accuracy";
}

std::string loss_csv_row(const StepLog &l) {
  char buf[512];
  std::snprintf(buf, sizeof buf, "%d,%.17g,%.17g,%.17g,%.17g,%.17g,%.17g,%.17g,%.17g,%.17g",
                l.step, l.lr, l.generation, l.match, l.score, l.action, l.sparse, l.mask_sum,
                l.total, l.interval_accuracy);
  return buf;
}

std::vector<StepLog> train(NaeModel &model, std::span<const Sample> samples,
                           const std::function<void(const StepLog &)> &on_step) {
  if (samples.empty()) {
    throw DataError("train: empty training set");
  }
  const RunConfig &cfg = model.config();
  const Schedule schedule{cfg.steps, cfg.warmup_fraction, cfg.peak_lr, cfg.weight_decay};
  const AdamWConfig adam{cfg.beta1, cfg.beta2, cfg.adam_eps};
  const std::size_t batch = std::min<std::size_t>(static_cast<std::size_t>(cfg.batch_size),
                                                  samples.size());

  std::mt19937_64 rng(cfg.seed + 0x5851f42d4c957f2dULL);
  std::vector<std::size_t> order(samples.size());
  std::iota(order.begin(), order.end(), 0);
  std::size_t cursor = order.size();

  std::vector<StepLog> logs;
  logs.reserve(static_cast<std::size_t>(cfg.steps));
  for (int step = 1; step <= cfg.steps; ++step) {
    const PromptEmbeddings prompts = model.encode_prompts();
    StepLog log;
    log.step = step;
    log.lr = schedule.lr(step);

    Tensor batch_total = Tensor::scalar(0.0);
    std::size_t correct = 0;
    for (std::size_t b = 0; b < batch; ++b) {
      if (cursor == order.size()) {
        std::shuffle(order.begin(), order.end(), rng);
        cursor = 0;
      }
      const SampleLosses l = model.losses(samples[order[cursor++]], prompts);
      batch_total = add(batch_total, l.total);
      log.generation += l.generation.item();
      log.match += l.match.item();
      log.score += l.score.item();
      log.action += l.action.item();
      correct += l.interval_correct ? 1 : 0;
    }
    const double inv = 1.0 / static_cast<double>(batch);
    log.generation *= inv;
    log.match *= inv;
    log.score *= inv;
    log.action *= inv;
    log.interval_accuracy = static_cast<double>(correct) * inv;

    const Tensor mask_sum = model.decoder().video_mask_sum();
    const Tensor sparse = scale(mask_sum, cfg.lambda_sparse);
    const Tensor total = add(scale(batch_total, inv), sparse);
    log.mask_sum = mask_sum.item();
    log.sparse = sparse.item();
    log.total = total.item();

    check_term("generation loss", log.generation, step);
    check_term("interval loss", log.match, step);
    check_term("score loss", log.score, step);
    check_term("action loss", log.action, step);
    check_term("sparse loss", log.sparse, step);

    total.backward();
    adamw_step(model.store().parameters(), schedule, step, adam);

    logs.push_back(log);
    if (on_step) {
      on_step(log);
    }
  }
  return logs;
}

std::vector<Prediction> predict_all(const NaeModel &model, std::span<const Sample> samples,
                                    const DecodeOptions &options) {
  NoGradGuard no_grad;
  const PromptEmbeddings prompts = model.encode_prompts();
  std::vector<Prediction> out;
  out.reserve(samples.size());
  for (const Sample &s : samples) {
    out.push_back(model.predict(s, prompts, options));
  }
  return out;
}

std::vector<EvalRecord> make_records(std::span<const Prediction> predictions,
                                     std::span<const Sample> samples) {
  if (predictions.size() != samples.size()) {
    throw DataError("make_records: prediction and sample counts differ");
  }
  std::vector<EvalRecord> out;
  out.reserve(samples.size());
  for (std::size_t i = 0; i < samples.size(); ++i) {
    out.push_back({samples[i].id, predictions[i].text, samples[i].captions, samples[i].score,
                   samples[i].actions});
  }
  return out;
}

double interval_accuracy(const NaeModel &model, std::span<const Prediction> predictions,
                         std::span<const Sample> samples) {
  if (predictions.size() != samples.size() || samples.empty()) {
    throw DataError("interval_accuracy: prediction and sample counts differ");
  }
  std::size_t hits = 0;
  for (std::size_t i = 0; i < samples.size(); ++i) {
    const int gold = classify_score(samples[i].score, model.score_space().intervals);
    hits += predictions[i].interval + 1 == gold ? 1 : 0;
  }
  return static_cast<double>(hits) / static_cast<double>(samples.size());
}

Evaluation evaluate(const NaeModel &model, std::span<const Sample> samples,
                    const DecodeOptions &options) {
  Evaluation e;
  e.predictions = predict_all(model, samples, options);
  e.records = make_records(e.predictions, samples);
  e.report = evaluate_records(e.records, model.lexicon(), model.score_space().range());
  e.interval_accuracy = interval_accuracy(model, e.predictions, samples);
  return e;
}

void write_records(std::ostream &out, std::span<const EvalRecord> records) {
  for (const EvalRecord &r : records) {
    nlohmann::ordered_json j;
    j["id"] = r.id;
    j["text"] = r.text;
    j["references"] = r.references;
    j["score"] = r.score;
    j["actions"] = r.actions;
    out << j.dump() << '\n';
  }
}

std::vector<EvalRecord> read_records(std::istream &in) {
  std::vector<EvalRecord> out;
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.empty()) {
      continue;
    }
    try {
      const auto j = nlohmann::json::parse(line);
      EvalRecord r;
      r.id = j.at("id").get<std::string>();
      r.text = j.at("text").get<std::string>();
      r.references = j.at("references").get<std::vector<std::string>>();
      r.score = j.at("score").get<double>();
      r.actions = j.at("actions").get<std::vector<Index>>();
      out.push_back(std::move(r));
    } catch (const nlohmann::json::exception &e) {
      throw DataError("record line " + std::to_string(lineno) + ": " + e.what());
    }
  }
  return out;
}

void write_predictions(std::ostream &out, std::span<const Prediction> predictions,
                       const EvalReport *report) {
  for (std::size_t i = 0; i < predictions.size(); ++i) {
    const Prediction &p = predictions[i];
    nlohmann::ordered_json j;
    j["id"] = p.id;
    j["text"] = p.text;
    j["predicted_score"] = p.score;
    j["predicted_actions"] = p.actions;
    j["interval"] = p.interval + 1;
    if (report != nullptr && i < report->per_sample.size()) {
      const SampleEval &s = report->per_sample[i];
      j["cider"] = s.cider;
      j["distance"] = s.distance;
      j["accuracy"] = s.accuracy;
    }
    out << j.dump() << '\n';
  }
}

} // namespace nae
