// Copyright 2026 The t2v Authors. All Rights Reserved.
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#include <gtest/gtest.h>

#include <cmath>
#include <limits>

#include "t2v/trainer.hpp"
#include "test_support.hpp"

namespace t2v {
namespace {

using testing::TempDir;
using testing::read_file;
using T = Tensor<double>;
using json = nlohmann::ordered_json;

// ---------------------------------------------------------------------------
// Ranger

/// Scalar reference written from the textbook form: bias-corrected first
/// moment, variance rectification term r_t, then lookahead interpolation.
struct ScalarRanger {
  double theta, slow, m = 0, v = 0;
  RangerOptions o;
  int t = 0;

  void step(double g, double lr, double wd) {
    ++t;
    theta *= 1 - lr * wd;
    m = o.beta1 * m + (1 - o.beta1) * g;
    v = o.beta2 * v + (1 - o.beta2) * g * g;
    const double m_hat = m / (1 - std::pow(o.beta1, t));
    const double rho_inf = 2 / (1 - o.beta2) - 1;
    const double b2t = std::pow(o.beta2, t);
    const double rho = rho_inf - 2 * t * b2t / (1 - b2t);
    if (rho > o.sma_threshold) {
      const double r = std::sqrt((rho - 4) * (rho - 2) * rho_inf / ((rho_inf - 4) * (rho_inf - 2) * rho));
      // eps is added to sqrt(v) before bias correction
      theta -= lr * r * m_hat / ((std::sqrt(v) + o.eps) / std::sqrt(1 - b2t));
    } else {
      theta -= lr * m_hat;
    }
    if (o.lookahead_k && t % int(o.lookahead_k) == 0) {
      slow += o.lookahead_alpha * (theta - slow);
      theta = slow;
    }
  }
};

TEST(Ranger, ZeroGradientWithoutDecayLeavesParametersAlone) {
  ParameterSet<double> ps;
  ps.add("w", T::from_rows({{1.5, -2.0}}));
  Ranger<double> opt;
  for (int i = 0; i < 13; ++i) {
    ps.zero_grad();
    opt.step(ps, 0.1, 0.0);
  }
  EXPECT_EQ(ps.at("w").value()(0, 0), 1.5);
  EXPECT_EQ(ps.at("w").value()(0, 1), -2.0);
}

TEST(Ranger, MatchesScalarReference) {
  for (double wd : {0.0, 1e-2}) {
    ParameterSet<double> ps;
    ps.add("w", T::from_rows({{0.8}}));
    Ranger<double> opt;
    ScalarRanger ref{0.8, 0.8, 0, 0, RangerOptions{}};
    for (int step = 0; step < 25; ++step) {
      const double g = 3.0 * ps.at("w").value()[0] + std::sin(step);  // curved objective plus drift
      ps.at("w").grad()[0] = g;
      opt.step(ps, 0.05, wd);
      ref.step(g, 0.05, wd);
      ASSERT_NEAR(ps.at("w").value()[0], ref.theta, 1e-10) << "step " << step + 1 << " wd " << wd;
    }
  }
}

TEST(Ranger, DecoupledWeightDecayShrinksByLrTimesLambda) {
  RangerOptions o;
  o.lookahead_k = 0;
  ParameterSet<double> ps;
  ps.add("w", T::from_rows({{2.0, -4.0}}));
  Ranger<double> opt(o);
  ps.zero_grad();
  opt.step(ps, 0.1, 0.5);
  EXPECT_DOUBLE_EQ(ps.at("w").value()[0], 2.0 * (1 - 0.05));
  EXPECT_DOUBLE_EQ(ps.at("w").value()[1], -4.0 * (1 - 0.05));
}

TEST(Ranger, LookaheadSyncsEveryKSteps) {
  RangerOptions o;
  o.lookahead_k = 3;
  ParameterSet<double> ps;
  ps.add("w", T::from_rows({{1.0}}));
  Ranger<double> opt(o);
  for (int step = 1; step <= 6; ++step) {
    ps.at("w").grad()[0] = 1.0;
    opt.step(ps, 0.1, 0.0);
    const double fast = ps.at("w").value()[0];
    const double slow = opt.slots().at("w").slow[0];
    if (step % 3 == 0) EXPECT_EQ(fast, slow) << step;
    else EXPECT_NE(fast, slow) << step;
  }
}

TEST(Ranger, NonFiniteGradientNamesTheParameter) {
  ParameterSet<double> ps;
  ps.add("fine", T::from_rows({{1.0}}));
  ps.add("broken", T::from_rows({{1.0}}));
  ps.at("broken").grad()[0] = std::numeric_limits<double>::quiet_NaN();
  Ranger<double> opt;
  try {
    opt.step(ps, 0.1, 0.0);
    FAIL() << "expected NumericalError";
  } catch (const NumericalError& e) {
    EXPECT_NE(std::string(e.what()).find("'broken'"), std::string::npos);
  }
  EXPECT_EQ(opt.step_count(), 0u);
  EXPECT_EQ(ps.at("fine").value()[0], 1.0);
}

TEST(LearningRate, StepDecay) {
  EXPECT_DOUBLE_EQ(lr_at_epoch(0, 1e-4), 1e-4);
  EXPECT_DOUBLE_EQ(lr_at_epoch(4, 1e-4), 1e-4);
  EXPECT_DOUBLE_EQ(lr_at_epoch(5, 1e-4), 0.9e-4);
  EXPECT_NEAR(lr_at_epoch(10, 1e-4), 0.81e-4, 1e-18);
  EXPECT_NEAR(TrainConfig::reference().lr_at(14), 0.81e-4, 1e-18);
}

// ---------------------------------------------------------------------------
// Configuration

TEST(Config, ReferencePresetHoldsFullScaleDefaults) {
  const auto c = TrainConfig::reference();
  EXPECT_EQ(c.learning_rate, 1e-4);
  EXPECT_EQ(c.weight_decay, 1e-4);
  EXPECT_EQ(c.margin, 0.02);
  EXPECT_EQ(c.batch_size, 64u);
  EXPECT_EQ(c.dim, 768u);
  EXPECT_EQ(c.heads, 4u);
  EXPECT_EQ(c.optimizer.beta1, 0.95);
  EXPECT_EQ(c.optimizer.lookahead_k, 6u);
  EXPECT_EQ(c.optimizer.lookahead_alpha, 0.5);
  EXPECT_EQ(c.optimizer.eps, 1e-5);
}

TEST(Config, RunConfigRoundTripsAndTakesOverrides) {
  auto rc = run_config_from_json(json::parse(R"({"preset": "reference", "epochs": 3, "ablation": "separate_vlad",
                                                 "optimizer": {"lookahead_k": 4}, "paths": {"out_dir": "x"}})"));
  EXPECT_EQ(rc.train.epochs, 3u);
  EXPECT_EQ(rc.train.dim, 768u);
  EXPECT_EQ(rc.train.ablation, Ablation::kSeparateVlad);
  EXPECT_EQ(rc.train.optimizer.lookahead_k, 4u);
  EXPECT_EQ(rc.paths.out_dir, "x");
  const auto again = run_config_from_json(run_config_to_json(rc));
  EXPECT_EQ(run_config_to_json(again).dump(), run_config_to_json(rc).dump());
  EXPECT_EQ(run_config_from_json(json::object()).train.dim, TrainConfig::desk().dim);
}

TEST(Config, ErrorsNameTheJsonPointer) {
  auto message = [](const char* text) {
    try {
      run_config_from_json(json::parse(text));
    } catch (const ConfigError& e) {
      return std::string(e.what());
    }
    return std::string("<no error>");
  };
  EXPECT_NE(message(R"({"optimizer": {"betaX": 1}})").find("/optimizer/betaX: unknown key"), std::string::npos);
  EXPECT_NE(message(R"({"learnin_rate": 1})").find("/learnin_rate"), std::string::npos);
  EXPECT_NE(message(R"({"epochs": "ten"})").find("/epochs"), std::string::npos);
  EXPECT_NE(message(R"({"heads": 3})").find("/heads"), std::string::npos);
  EXPECT_NE(message(R"({"ablation": "nothing"})").find("/ablation"), std::string::npos);
  EXPECT_NE(message(R"({"preset": "huge"})").find("/preset"), std::string::npos);
  EXPECT_NE(message(R"({"batch_size": 1})").find("/batch_size"), std::string::npos);
}

TEST(Config, ModelRecordRebuildsTheModelConfig) {
  TempDir dir;
  auto data = testing::load_synthetic<double>(testing::tiny_synthetic(3, 1), dir.path(), 5);
  auto tc = TrainConfig::desk();
  tc.ablation = Ablation::kTextOnlyVlad;
  const auto rec = parse_model_record(model_record_json(tc, data.manifest).dump());
  const auto mc = rec.model_config();
  EXPECT_EQ(mc.experts, data.manifest.experts);
  EXPECT_EQ(mc.text, data.manifest.text);
  EXPECT_EQ(mc.ablation, Ablation::kTextOnlyVlad);
  EXPECT_EQ(mc.dim, tc.dim);
}

// ---------------------------------------------------------------------------
// Checkpoints

TEST(Checkpoint, SaveLoadSaveIsByteStable) {
  TempDir dir;
  Checkpoint c;
  c.epoch = 3;
  c.config_json = R"({"a":1})";
  c.config_hash = fnv1a64(c.config_json);
  c.params = {{"w", T::from_rows({{1.0 / 3, -0.0}})}, {"b", T({0, 4})}};
  c.optimizer_step = 17;
  c.optimizer = {{"m/w", T::from_rows({{1e-300, 2}})}};
  c.best_metric = 12.5;
  c.best_epoch = 2;
  c.rng_state = "1 2 3";
  save_checkpoint(c, dir / "a.ckpt");
  const auto back = load_checkpoint(dir / "a.ckpt");
  EXPECT_EQ(back.params, c.params);
  EXPECT_EQ(back.optimizer, c.optimizer);
  EXPECT_EQ(back.rng_state, c.rng_state);
  save_checkpoint(back, dir / "b.ckpt");
  EXPECT_EQ(read_file(dir / "a.ckpt"), read_file(dir / "b.ckpt"));
}

TEST(Checkpoint, CorruptionIsDetected) {
  TempDir dir;
  Checkpoint c;
  c.config_json = "{}";
  c.params = {{"w", T::from_rows({{1.0}})}};
  auto bytes = serialize_checkpoint(c);
  EXPECT_THROW(deserialize_checkpoint(bytes.substr(0, bytes.size() - 3)), DataError);
  auto bad = bytes;
  bad[0] = 'X';
  EXPECT_THROW(deserialize_checkpoint(bad), DataError);
  EXPECT_THROW(deserialize_checkpoint(bytes + "junk"), DataError);
}

// ---------------------------------------------------------------------------
// Trainer

TrainConfig tiny_train_config() {
  auto c = TrainConfig::desk();
  c.dim = 8;
  c.centers = 3;
  c.heads = 2;
  c.batch_size = 4;
  c.epochs = 3;
  c.max_tokens = 5;
  c.learning_rate = 1e-2;
  c.dropout = 0.1;
  return c;
}

struct TinyRun {
  explicit TinyRun(std::size_t pairs = 6)
      : data(testing::load_synthetic<double>(testing::tiny_synthetic(pairs, 3), dir.path() / "data", 5)) {}
  TempDir dir;
  Dataset<double> data;
};

TEST(Trainer, OneEpochSmoke) {
  TinyRun run(4);
  auto cfg = tiny_train_config();
  cfg.epochs = 1;
  Trainer<double> trainer(cfg, run.data);
  const auto before = export_params(trainer.model().params());
  const auto records = trainer.train();
  ASSERT_EQ(records.size(), 1u);
  EXPECT_TRUE(std::isfinite(records[0].train_loss));
  EXPECT_GT(records[0].train_loss, 0.0);
  EXPECT_NE(export_params(trainer.model().params()), before);
  EXPECT_EQ(trainer.optimizer().step_count(), 1u);
}

TEST(Trainer, SameSeedSameBytes) {
  TinyRun run;
  auto cfg = tiny_train_config();
  Trainer<double> a(cfg, run.data), b(cfg, run.data);
  a.train();
  b.train();
  EXPECT_EQ(serialize_checkpoint(a.checkpoint()), serialize_checkpoint(b.checkpoint()));
  cfg.seed = 1;
  Trainer<double> c(cfg, run.data);
  c.train();
  EXPECT_NE(export_params(c.model().params()), export_params(a.model().params()));
}

TEST(Trainer, ResumeReplaysTheUninterruptedRun) {
  TinyRun run;
  const auto cfg = tiny_train_config();
  Trainer<double> full(cfg, run.data, &run.data);
  const auto full_records = full.train(TrainOutputs{run.dir / "full"});

  auto first = cfg;
  first.epochs = 1;
  Trainer<double> part(first, run.data, &run.data);
  part.train(TrainOutputs{run.dir / "resumed"});
  Trainer<double> rest(cfg, run.data, &run.data);
  rest.restore(load_checkpoint(run.dir / "resumed" / "last.ckpt"));
  EXPECT_EQ(rest.epochs_done(), 1u);
  const auto rest_records = rest.train(TrainOutputs{run.dir / "resumed"});
  ASSERT_EQ(rest_records.size(), 2u);
  EXPECT_EQ(rest_records[1].train_loss, full_records[2].train_loss);
  EXPECT_EQ(read_file(run.dir / "full" / "last.ckpt"), read_file(run.dir / "resumed" / "last.ckpt"));
  EXPECT_EQ(read_file(run.dir / "full" / "train_log.jsonl"), read_file(run.dir / "resumed" / "train_log.jsonl"));
}

TEST(Trainer, RestoreRejectsADifferentConfiguration) {
  TinyRun run;
  Trainer<double> a(tiny_train_config(), run.data);
  auto other = tiny_train_config();
  other.margin = 0.05;
  Trainer<double> b(other, run.data);
  EXPECT_THROW(b.restore(a.checkpoint()), ConfigError);
}

TEST(Trainer, WritesLogAndCheckpoints) {
  TinyRun run;
  Trainer<double> trainer(tiny_train_config(), run.data, &run.data);
  trainer.train(TrainOutputs{run.dir / "out"});
  std::istringstream log(read_file(run.dir / "out" / "train_log.jsonl"));
  std::string line;
  std::size_t n = 0;
  while (std::getline(log, line)) {
    const auto j = json::parse(line);
    EXPECT_EQ(j.at("epoch").get<std::size_t>(), n);
    EXPECT_DOUBLE_EQ(j.at("lr").get<double>(), tiny_train_config().lr_at(n));
    EXPECT_TRUE(j.at("val_metrics").contains("text_to_video"));
    EXPECT_TRUE(j.at("val_metrics").at("video_to_text").contains("r1"));
    EXPECT_EQ(j.at("ablation"), "none");
    ++n;
  }
  EXPECT_EQ(n, 3u);
  EXPECT_TRUE(std::filesystem::exists(run.dir / "out" / "best.ckpt"));
  const auto model = model_from_checkpoint<double>(load_checkpoint(run.dir / "out" / "last.ckpt"));
  EXPECT_EQ(export_params(model.params()), export_params(trainer.model().params()));
}

TEST(Trainer, DivergenceKeepsTheLastGoodEpoch) {
  TinyRun run;
  Trainer<double> trainer(tiny_train_config(), run.data);
  auto& poisoned = const_cast<Dataset<double>&>(run.data);
  try {
    trainer.train(TrainOutputs{run.dir / "out"}, [&](const EpochRecord& rec) {
      if (rec.epoch == 0) poisoned.videos[0].features[0](0, 0) = std::numeric_limits<double>::infinity();
    });
    FAIL() << "expected NumericalError";
  } catch (const NumericalError& e) {
    EXPECT_NE(std::string(e.what()).find("epoch 1"), std::string::npos) << e.what();
  }
  EXPECT_EQ(load_checkpoint(run.dir / "out" / "last.ckpt").epoch, 1u);
}

TEST(Trainer, SinglePrecisionTrains) {
  TempDir dir;
  auto data = testing::load_synthetic<float>(testing::tiny_synthetic(6, 3), dir.path(), 5);
  auto cfg = tiny_train_config();
  cfg.precision = "single";
  Trainer<float> trainer(cfg, data);
  const auto records = trainer.train();
  for (const auto& r : records) EXPECT_TRUE(std::isfinite(r.train_loss));
}

}  // namespace
}  // namespace t2v
