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

#ifndef T2V_TRAINER_HPP
#define T2V_TRAINER_HPP

#include <cmath>
#include <filesystem>
#include <fstream>
#include <functional>
#include <optional>
#include <string>
#include <vector>

#include "t2v/checkpoint.hpp"
#include "t2v/config.hpp"
#include "t2v/evaluate.hpp"

namespace t2v {

struct EpochRecord {
  std::size_t epoch = 0;  // 0-based
  double lr = 0.0;
  double train_loss = 0.0;
  std::optional<RetrievalReport> val_text_to_video;
  std::optional<RetrievalReport> val_video_to_text;
  Ablation ablation = Ablation::kNone;
};

/// One JSON-lines record: {epoch, lr, train_loss, val_metrics, ablation}.
/// val_metrics is empty when there is no validation split.
inline nlohmann::ordered_json epoch_record_json(const EpochRecord& r) {
  nlohmann::ordered_json val = nlohmann::ordered_json::object();
  if (r.val_text_to_video) val["text_to_video"] = report_to_json(*r.val_text_to_video);
  if (r.val_video_to_text) val["video_to_text"] = report_to_json(*r.val_video_to_text);
  return {{"epoch", r.epoch},
          {"lr", r.lr},
          {"train_loss", r.train_loss},
          {"val_metrics", val},
          {"ablation", to_string(r.ablation)}};
}

struct TrainOutputs {
  std::filesystem::path out_dir;  // empty: keep everything in memory
  std::string log_name = "train_log.jsonl";
  std::string last_name = "last.ckpt";
  std::string best_name = "best.ckpt";

  std::filesystem::path log() const { return out_dir / log_name; }
  std::filesystem::path last() const { return out_dir / last_name; }
  std::filesystem::path best() const { return out_dir / best_name; }
};

/// Owns the model, optimizer and dropout stream for one training run.
///
/// Every number a run produces is a function of (config, data, seed): batch
/// order comes from a per-epoch stream and dropout from a single stream
/// whose state is checkpointed, so a resumed run replays the remaining
/// epochs of an uninterrupted one exactly.
template <class Real>
class Trainer {
 public:
  Trainer(TrainConfig cfg, const Dataset<Real>& train, const Dataset<Real>* val = nullptr)
      : cfg_(std::move(cfg)),
        train_(train),
        val_(val),
        model_(cfg_.model_config(train.manifest), cfg_.seed),
        opt_(cfg_.optimizer),
        dropout_rng_(derive_rng(cfg_.seed, {0xd20})) {
    cfg_.validate();
    if (train_.size() < 2) throw DataError("training needs at least two items");
    if (val_) check_compatible(model_.config(), val_->manifest);
    record_json_ = model_record_json(cfg_, train_.manifest).dump();
  }

  const TrainConfig& config() const { return cfg_; }
  Model<Real>& model() { return model_; }
  const Model<Real>& model() const { return model_; }
  const Ranger<Real>& optimizer() const { return opt_; }
  std::size_t epochs_done() const { return epoch_; }
  double best_metric() const { return best_metric_; }
  std::size_t best_epoch() const { return best_epoch_; }

  /// Mean loss of one forward/backward pass over a batch, without an update.
  double batch_loss(const Batch& batch, Rng* rng) {
    auto S = model_.batch_similarity(train_, batch, true, rng, model_.training_mode());
    auto loss = margin_ranking_loss(S, Real(cfg_.margin));
    model_.params().zero_grad();
    backward(loss);
    return static_cast<double>(loss.item());
  }

  /// Runs the next epoch and returns its log record.
  EpochRecord run_epoch() {
    EpochRecord rec;
    rec.epoch = epoch_;
    rec.lr = cfg_.lr_at(epoch_);
    rec.ablation = cfg_.ablation;
    std::vector<std::size_t> captions_per_item;
    for (const auto& c : train_.captions) captions_per_item.push_back(c.size());
    const auto batches = epoch_batches(captions_per_item, cfg_.batch_size, cfg_.seed, epoch_, cfg_.shuffle);
    if (batches.empty()) throw DataError("no batch of at least two pairs can be formed");
    double total = 0.0;
    for (const auto& b : batches) {
      const double loss = batch_loss(b, &dropout_rng_);
      if (!std::isfinite(loss))
        throw NumericalError("training loss became non-finite in epoch " + std::to_string(epoch_));
      opt_.step(model_.params(), rec.lr, cfg_.weight_decay);
      total += loss;
    }
    rec.train_loss = total / static_cast<double>(batches.size());
    if (val_) {
      auto r = evaluate(model_, *val_);
      rec.val_text_to_video = r.text_to_video;
      rec.val_video_to_text = r.video_to_text;
    }
    ++epoch_;
    return rec;
  }

  /// Best model: highest validation text-to-video R@1, or the latest epoch
  /// without a validation split. Returns true when `rec` is the new best.
  bool update_best(const EpochRecord& rec) {
    const double metric = rec.val_text_to_video ? rec.val_text_to_video->r1 : static_cast<double>(rec.epoch);
    if (best_metric_ >= 0 && metric <= best_metric_) return false;
    best_metric_ = metric;
    best_epoch_ = rec.epoch;
    return true;
  }

  Checkpoint checkpoint() const {
    Checkpoint c;
    c.epoch = epoch_;
    c.config_json = record_json_;
    c.config_hash = fnv1a64(c.config_json);
    c.params = export_params(model_.params());
    c.optimizer_step = opt_.step_count();
    c.optimizer = export_optimizer(opt_);
    c.best_metric = best_metric_;
    c.best_epoch = best_epoch_;
    c.rng_state = rng_state(dropout_rng_);
    return c;
  }

  /// Restores a run. The stored configuration must match this one except
  /// for the epoch budget, which may be extended.
  void restore(const Checkpoint& c) {
    auto stored = nlohmann::ordered_json::parse(c.config_json);
    auto mine = nlohmann::ordered_json::parse(record_json_);
    stored["train"].erase("epochs");
    mine["train"].erase("epochs");
    if (stored != mine) throw ConfigError("checkpoint was written by a different configuration or dataset schema");
    import_params(model_.params(), c.params);
    import_optimizer(opt_, c.optimizer_step, c.optimizer);
    epoch_ = c.epoch;
    best_metric_ = c.best_metric;
    best_epoch_ = c.best_epoch;
    set_rng_state(dropout_rng_, c.rng_state);
  }

  /// Trains until the configured epoch count. Writes the JSON-lines log and
  /// checkpoints when `out.out_dir` is set. On a numerical failure the last
  /// completed epoch is saved and the error is rethrown.
  std::vector<EpochRecord> train(const TrainOutputs& out = {},
                                 const std::function<void(const EpochRecord&)>& on_epoch = {}) {
    const bool to_disk = !out.out_dir.empty();
    std::ofstream log;
    if (to_disk) {
      std::filesystem::create_directories(out.out_dir);
      log.open(out.log(), epoch_ == 0 ? std::ios::trunc : std::ios::app);
      if (!log) throw DataError("cannot write training log: " + out.log().string());
    }
    std::vector<EpochRecord> records;
    Checkpoint last_good = checkpoint();
    while (epoch_ < cfg_.epochs) {
      EpochRecord rec;
      try {
        rec = run_epoch();
      } catch (const NumericalError& e) {
        std::string where;
        if (to_disk) {
          save_checkpoint(last_good, out.last());
          where = "; last good state (epoch " + std::to_string(last_good.epoch) + ") saved to " + out.last().string();
        }
        throw NumericalError(std::string(e.what()) + where);
      }
      const bool best = update_best(rec);
      last_good = checkpoint();
      if (to_disk) {
        log << epoch_record_json(rec).dump() << '\n' << std::flush;
        save_checkpoint(last_good, out.last());
        if (best) save_checkpoint(last_good, out.best());
      }
      if (on_epoch) on_epoch(rec);
      records.push_back(std::move(rec));
    }
    return records;
  }

 private:
  TrainConfig cfg_;
  const Dataset<Real>& train_;
  const Dataset<Real>* val_;
  Model<Real> model_;
  Ranger<Real> opt_;
  Rng dropout_rng_;
  std::size_t epoch_ = 0;
  double best_metric_ = -1.0;
  std::size_t best_epoch_ = 0;
  std::string record_json_;
};

/// Rebuilds a model from a checkpoint written by Trainer.
template <class Real>
Model<Real> model_from_checkpoint(const Checkpoint& c) {
  const auto record = parse_model_record(c.config_json);
  Model<Real> m(record.model_config(), record.train.seed);
  import_params(m.params(), c.params);
  return m;
}

}  // namespace t2v

#endif  // T2V_TRAINER_HPP
