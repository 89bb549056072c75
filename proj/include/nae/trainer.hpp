#pragma once

#include "nae/metrics.hpp"
#include "nae/model.hpp"

#include <functional>
#include <iosfwd>
#include <span>
#include <string>
#include <vector>

namespace nae {

/// Batch-mean loss components after one optimizer step.
struct StepLog {
  int step = 0;
  double lr = 0.0;
  double generation = 0.0;
  double match = 0.0;
  double score = 0.0;
  double action = 0.0;
  double sparse = 0.0;
  double mask_sum = 0.0; // sum of sigmoid(raw video mask) seen by the step
  double total = 0.0;
  double interval_accuracy = 0.0;
};

std::string loss_csv_header();
std::string loss_csv_row(const StepLog &log);

/// Runs cfg.steps AdamW steps over shuffled minibatches. Throws
/// NumericalError when a loss term turns non-finite.
std::vector<StepLog> train(NaeModel &model, std::span<const Sample> samples,
                           const std::function<void(const StepLog &)> &on_step = {});

std::vector<Prediction> predict_all(const NaeModel &model, std::span<const Sample> samples,
                                    const DecodeOptions &options);

/// Pairs predictions with their samples' references and gold labels.
std::vector<EvalRecord> make_records(std::span<const Prediction> predictions,
                                     std::span<const Sample> samples);

/// Fraction of predictions whose matching argmax is the gold interval.
double interval_accuracy(const NaeModel &model, std::span<const Prediction> predictions,
                         std::span<const Sample> samples);

struct Evaluation {
  std::vector<Prediction> predictions;
  std::vector<EvalRecord> records;
  EvalReport report;
  double interval_accuracy = 0.0;
};

Evaluation evaluate(const NaeModel &model, std::span<const Sample> samples,
                    const DecodeOptions &options);

/// One JSON object per line: id, text, references, score, actions.
void write_records(std::ostream &out, std::span<const EvalRecord> records);
std::vector<EvalRecord> read_records(std::istream &in);

/// Per-sample lines: id, text, predicted score and actions, interval, metrics.
void write_predictions(std::ostream &out, std::span<const Prediction> predictions,
                       const EvalReport *report = nullptr);

} // namespace nae
