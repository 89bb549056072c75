#include "gradcheck.hpp"

#include "nae/checkpoint.hpp"
#include "nae/dataset.hpp"
#include "nae/model.hpp"
#include "nae/trainer.hpp"

#include <gtest/gtest.h>

#include <algorithm>
#include <chrono>
#include <sstream>

using namespace nae;

namespace {

std::vector<double> scores_of(const std::vector<Sample> &samples) {
  std::vector<double> s;
  for (const Sample &x : samples) {
    s.push_back(x.score);
  }
  return s;
}

std::string checkpoint_bytes(const NaeModel &model) {
  std::ostringstream out;
  write_checkpoint(out, model.state());
  return out.str();
}

} // namespace

TEST(Model, ComposedGradientsMatchFiniteDifferences) {
  const auto start = std::chrono::steady_clock::now();
  const auto r = testkit::check_model_gradients(3, 6);
  const double seconds =
      std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
  EXPECT_LT(r.max_error, 1e-4) << r.worst;
  EXPECT_GT(r.coordinates, 0u);
  EXPECT_LT(seconds, 60.0);
}

TEST(Model, RejectsMismatchedScoreSpace) {
  const RunConfig cfg = testkit::tiny_config(1);
  EXPECT_THROW(NaeModel(cfg, ScoreSpace::from_scores(std::vector<double>{1, 2, 3, 4, 5}, 3)), DimensionError);
}

TEST(Model, UnknownCaptionWordIsDataError) {
  const RunConfig cfg = testkit::tiny_config(2);
  const Dataset d = generate_dataset(cfg);
  NaeModel model(cfg, ScoreSpace::from_scores(scores_of(d.train), cfg.intervals));
  Sample s = d.train[0];
  s.captions = {"an unheard-of zxqv"};
  EXPECT_THROW(model.losses(s, model.encode_prompts()), DataError);
  s = d.train[0];
  s.features = Matrix::Zero(1, 1);
  EXPECT_THROW(model.losses(s, model.encode_prompts()), DataError);
}

TEST(Trainer, ZeroLearningRateLeavesParametersUnchanged) {
  RunConfig cfg = testkit::tiny_config(4);
  cfg.peak_lr = 0.0;
  cfg.steps = 3;
  cfg.batch_size = 2;
  const Dataset d = generate_dataset(cfg);
  NaeModel model(cfg, ScoreSpace::from_scores(scores_of(d.train), cfg.intervals));
  const std::string before = checkpoint_bytes(model);
  const auto logs = train(model, d.train);
  EXPECT_EQ(logs.size(), 3u);
  EXPECT_EQ(checkpoint_bytes(model), before);
}

TEST(Trainer, LogsSparseTermExactlyAndReducesLoss) {
  RunConfig cfg = testkit::tiny_config(5);
  cfg.steps = 60;
  cfg.batch_size = 4;
  cfg.peak_lr = 1e-2;
  const Dataset d = generate_dataset(cfg);
  NaeModel model(cfg, ScoreSpace::from_scores(scores_of(d.train), cfg.intervals));
  std::size_t seen = 0;
  const auto logs = train(model, d.train, [&](const StepLog &) { ++seen; });
  ASSERT_EQ(logs.size(), 60u);
  EXPECT_EQ(seen, 60u);
  for (const StepLog &l : logs) {
    ASSERT_EQ(l.sparse, cfg.lambda_sparse * l.mask_sum) << l.step;
  }
  EXPECT_EQ(logs.front().step, 1);
  EXPECT_EQ(logs.back().lr, 0.0);
  EXPECT_LT(logs.back().total, logs.front().total);
  const std::string row = loss_csv_row(logs.front()), header = loss_csv_header();
  EXPECT_EQ(std::count(row.begin(), row.end(), ','), std::count(header.begin(), header.end(), ','));
}

TEST(Trainer, CheckpointRestoresPredictions) {
  RunConfig cfg = testkit::tiny_config(6);
  cfg.steps = 10;
  cfg.batch_size = 2;
  const Dataset d = generate_dataset(cfg);
  NaeModel model(cfg, ScoreSpace::from_scores(scores_of(d.train), cfg.intervals));
  train(model, d.train);
  std::istringstream in(checkpoint_bytes(model));
  const auto loaded = load_model(cfg, read_checkpoint(in));
  EXPECT_EQ(checkpoint_bytes(*loaded), checkpoint_bytes(model));
  const auto a = predict_all(model, d.train, model.decode_options());
  const auto b = predict_all(*loaded, d.train, loaded->decode_options());
  ASSERT_EQ(a.size(), b.size());
  for (std::size_t i = 0; i < a.size(); ++i) {
    EXPECT_EQ(a[i].tokens, b[i].tokens);
    EXPECT_EQ(a[i].score, b[i].score);
    EXPECT_EQ(a[i].interval, b[i].interval);
    EXPECT_GE(a[i].score, cfg.score_min);
    EXPECT_LE(a[i].score, cfg.score_max);
  }
}

TEST(Trainer, CheckpointWithoutBoundsIsRejected) {
  const RunConfig cfg = testkit::tiny_config(7);
  const Dataset d = generate_dataset(cfg);
  NaeModel model(cfg, ScoreSpace::from_scores(scores_of(d.train), cfg.intervals));
  auto entries = model.state();
  entries.erase(std::remove_if(entries.begin(), entries.end(),
                               [](const NamedMatrix &e) { return e.name == NaeModel::kBoundsEntry; }),
                entries.end());
  EXPECT_THROW(load_model(cfg, entries), CheckpointError);
}

TEST(Records, JsonlRoundTrip) {
  const std::vector<EvalRecord> records = {
      {"a", "back dive \"quoted\"", {"r1", "r2"}, 12.5, {1, 0}},
      {"b", "", {}, 0.1, {}}};
  std::stringstream io;
  write_records(io, records);
  const auto back = read_records(io);
  ASSERT_EQ(back.size(), 2u);
  EXPECT_EQ(back[0].text, records[0].text);
  EXPECT_EQ(back[0].references, records[0].references);
  EXPECT_EQ(back[0].score, 12.5);
  EXPECT_EQ(back[0].actions, records[0].actions);
  EXPECT_EQ(back[1].id, "b");
}
