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

// Command-line front end: gen-synth, train, evaluate, retrieve, inspect.
//
// Machine-readable results go to stdout (JSON) or to files; progress and
// diagnostics go to stderr. Exit codes: 0 ok, 1 usage, 2 data, 3 numerical.

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <string>

#include <CLI11.hpp>
#include <nlohmann/json.hpp>

#include "t2v/checkpoint.hpp"
#include "t2v/config.hpp"
#include "t2v/evaluate.hpp"
#include "t2v/synthetic.hpp"
#include "t2v/trainer.hpp"

namespace fs = std::filesystem;
using json = nlohmann::ordered_json;

namespace {

enum ExitCode { kOk = 0, kUsage = 1, kData = 2, kNumerical = 3 };

struct GenSynthArgs {
  std::size_t pairs = 400;
  std::size_t test_pairs = 0;
  std::size_t topics = 8;
  std::size_t captions = 2;
  double noise = 0.3;
  std::string text_kind = "embeddings";
  std::uint64_t seed = 0;
  std::string out;
};

struct TrainArgs {
  std::string config;
  std::string manifest, val_manifest, out, resume;
  std::optional<std::string> ablation, precision;
  std::optional<std::uint64_t> seed;
  std::optional<std::size_t> epochs;
};

struct ModelArgs {
  std::string checkpoint, manifest, precision = "double", out;
  std::optional<std::uint64_t> seed;  // accepted for uniformity; inference is deterministic
};

struct EvaluateArgs : ModelArgs {
  std::string median = "lower";
};

struct RetrieveArgs : ModelArgs {
  std::string caption, query_blob;
  std::size_t top_k = 10;
};

struct InspectArgs : ModelArgs {
  std::string item;
  std::size_t caption = 0;
};

void print_json(const json& j) { std::cout << j.dump(2) << std::endl; }

int cmd_gen_synth(const GenSynthArgs& a) {
  if (a.pairs == 0) throw t2v::ConfigError("--pairs must be positive");
  t2v::SyntheticConfig cfg;
  cfg.num_pairs = a.pairs;
  cfg.num_test_pairs = a.test_pairs;
  cfg.num_topics = a.topics;
  // Fit the default topics-per-item range to small topic counts.
  cfg.topics_per_item_max = std::min(cfg.topics_per_item_max, a.topics);
  cfg.topics_per_item_min = std::min(cfg.topics_per_item_min, cfg.topics_per_item_max);
  cfg.captions_per_video = a.captions;
  cfg.noise_sigma = a.noise;
  cfg.text_kind = a.text_kind;
  cfg.seed = a.seed;
  auto ds = t2v::generate_synthetic_dataset(cfg);
  const auto manifest = t2v::write_synthetic_dataset(ds, a.out);
  std::cerr << "wrote " << ds.train.items.size() << " training items";
  if (!ds.test.items.empty()) std::cerr << " and " << ds.test.items.size() << " test items";
  std::cerr << " to " << a.out << "\n";
  json summary{{"manifest", manifest.string()},
               {"items", ds.train.items.size()},
               {"test_manifest", ds.test.items.empty() ? "" : (fs::path(a.out) / "test.json").string()},
               {"test_items", ds.test.items.size()},
               {"blobs", ds.blobs.size()}};
  print_json(summary);
  return kOk;
}

template <class Real>
int run_training(const t2v::RunConfig& rc, const std::string& resume) {
  if (rc.paths.manifest.empty()) throw t2v::ConfigError("/paths/manifest: a training manifest is required");
  const t2v::PaddingConfig pad{rc.train.max_tokens};
  auto train = t2v::load_dataset<Real>(t2v::load_manifest(rc.paths.manifest), pad);
  std::optional<t2v::Dataset<Real>> val;
  if (!rc.paths.val_manifest.empty()) val = t2v::load_dataset<Real>(t2v::load_manifest(rc.paths.val_manifest), pad);
  if (train.truncated_captions > 0)
    std::cerr << "note: " << train.truncated_captions << " captions truncated to " << pad.max_tokens << " tokens\n";

  t2v::Trainer<Real> trainer(rc.train, train, val ? &*val : nullptr);
  if (!resume.empty()) {
    trainer.restore(t2v::load_checkpoint(resume));
    std::cerr << "resumed after epoch " << trainer.epochs_done() << " from " << resume << "\n";
  }
  t2v::TrainOutputs out;
  out.out_dir = rc.paths.out_dir;
  fs::create_directories(out.out_dir);
  {
    std::ofstream cfg_out(out.out_dir / "run_config.json");
    cfg_out << t2v::run_config_to_json(rc).dump(2) << "\n";
  }
  trainer.train(out, [](const t2v::EpochRecord& r) {
    std::cerr << "epoch " << r.epoch << "  lr " << r.lr << "  loss " << r.train_loss;
    if (r.val_text_to_video) std::cerr << "  val t2v R@1 " << r.val_text_to_video->r1;
    std::cerr << "\n";
  });
  print_json({{"epochs", trainer.epochs_done()},
              {"log", out.log().string()},
              {"checkpoint", out.last().string()},
              {"best_checkpoint", out.best().string()},
              {"best_epoch", trainer.best_epoch()},
              {"ablation", t2v::to_string(rc.train.ablation)}});
  return kOk;
}

int cmd_train(const TrainArgs& a) {
  t2v::RunConfig rc = a.config.empty() ? t2v::RunConfig{} : t2v::load_run_config(a.config);
  if (!a.manifest.empty()) rc.paths.manifest = a.manifest;
  if (!a.val_manifest.empty()) rc.paths.val_manifest = a.val_manifest;
  if (!a.out.empty()) rc.paths.out_dir = a.out;
  if (a.ablation) rc.train.ablation = t2v::ablation_from_string(*a.ablation);
  if (a.precision) rc.train.precision = *a.precision;
  if (a.seed) rc.train.seed = *a.seed;
  if (a.epochs) rc.train.epochs = *a.epochs;
  rc.train.validate();
  return rc.train.precision == "single" ? run_training<float>(rc, a.resume) : run_training<double>(rc, a.resume);
}

template <class Real>
struct Loaded {
  t2v::Model<Real> model;
  t2v::Dataset<Real> data;
};

template <class Real>
Loaded<Real> load_model_and_data(const ModelArgs& a) {
  if (a.checkpoint.empty()) throw t2v::ConfigError("--checkpoint is required");
  if (a.manifest.empty()) throw t2v::ConfigError("--manifest is required");
  const auto ckpt = t2v::load_checkpoint(a.checkpoint);
  auto model = t2v::model_from_checkpoint<Real>(ckpt);
  auto manifest = t2v::load_manifest(a.manifest);
  t2v::check_compatible(model.config(), manifest);
  auto data = t2v::load_dataset<Real>(std::move(manifest), t2v::PaddingConfig{model.config().max_tokens});
  return {std::move(model), std::move(data)};
}

template <class Real>
int run_evaluate(const EvaluateArgs& a) {
  auto [model, data] = load_model_and_data<Real>(a);
  if (a.median != "lower" && a.median != "midpoint") throw t2v::ConfigError("--median must be lower or midpoint");
  const auto rule = a.median == "lower" ? t2v::MedianRule::kLower : t2v::MedianRule::kMidpoint;
  const auto r = t2v::evaluate(model, data, rule);
  const json j = t2v::evaluation_to_json(r);
  if (!a.out.empty()) {
    fs::create_directories(a.out);
    std::ofstream os(fs::path(a.out) / "report.json");
    os << j.dump(2) << "\n";
  }
  std::cerr << "text->video R@1 " << r.text_to_video.r1 << "  video->text R@1 " << r.video_to_text.r1 << "\n";
  print_json(j);
  return kOk;
}

template <class Real>
int run_retrieve(const RetrieveArgs& a) {
  auto [model, data] = load_model_and_data<Real>(a);
  if (a.caption.empty() == a.query_blob.empty())
    throw t2v::ConfigError("exactly one of --caption and --query-blob is required");
  const t2v::PaddingConfig pad{model.config().max_tokens};
  t2v::TextFeatureSet<Real> query;
  std::string label;
  if (!a.caption.empty()) {
    bool found = false;
    for (std::size_t i = 0; i < data.size() && !found; ++i)
      for (std::size_t c = 0; c < data.captions[i].size(); ++c)
        if (data.manifest.items[i].captions[c].caption_id == a.caption) {
          query = data.captions[i][c];
          found = true;
          break;
        }
    if (!found) throw t2v::DataError("unknown caption id '" + a.caption + "'");
    label = a.caption;
  } else {
    const std::size_t cols = data.manifest.text.blob_cols();
    std::error_code ec;
    const auto bytes = fs::file_size(a.query_blob, ec);
    if (ec) throw t2v::DataError("cannot read query blob " + a.query_blob + ": " + ec.message());
    if (bytes == 0 || bytes % (4 * cols) != 0)
      throw t2v::DataError("query blob " + a.query_blob + " holds " + std::to_string(bytes) +
                           " bytes, not a positive multiple of " + std::to_string(4 * cols));
    auto raw = t2v::load_tensor_blob<Real>(a.query_blob, bytes / (4 * cols), cols);
    query = t2v::make_text_features(raw, data.manifest.text, pad, "query blob " + a.query_blob);
    label = a.query_blob;
  }
  t2v::NoGradGuard guard;
  const auto videos = t2v::encode_videos(model, data);
  const auto ranked = t2v::rank_videos(model, model.encode_text(query, false, nullptr), videos, data.manifest, a.top_k);
  json results = json::array();
  for (std::size_t r = 0; r < ranked.size(); ++r)
    results.push_back({{"rank", r + 1}, {"video_id", ranked[r].video_id}, {"score", ranked[r].score}});
  print_json({{"query", label}, {"top_k", a.top_k}, {"results", results}});
  return kOk;
}

template <class Real>
int run_inspect(const InspectArgs& a) {
  auto [model, data] = load_model_and_data<Real>(a);
  if (!model.config().uses_vlad()) throw t2v::ConfigError("the global-only model has no centers to inspect");
  const std::size_t idx = data.manifest.item_index(a.item);
  if (a.caption >= data.captions[idx].size())
    throw t2v::DataError("item '" + a.item + "' has no caption " + std::to_string(a.caption));

  t2v::NoGradGuard guard;
  const auto& cfg = model.config();
  const auto text = t2v::encode_text(data.captions[idx][a.caption], model.params(), cfg, false, nullptr);
  std::vector<std::string> text_labels;
  for (std::size_t t = 0; t < text.mask.size(); ++t) text_labels.push_back("token" + std::to_string(t));
  const auto video = t2v::encode_video_local(data.videos[idx], model.params(), cfg, false, nullptr);
  std::vector<std::string> video_labels;
  std::vector<std::size_t> seen(cfg.experts.size(), 0);
  for (std::size_t e : video.expert) video_labels.push_back(cfg.experts[e].name + "/" + std::to_string(seen[e]++));

  const fs::path dir = a.out.empty() ? fs::path(".") : fs::path(a.out);
  fs::create_directories(dir);
  const fs::path text_csv = dir / (a.item + "_text_assignments.csv");
  const fs::path video_csv = dir / (a.item + "_video_assignments.csv");
  auto write = [](const fs::path& p, const std::vector<t2v::AssignmentRow>& rows) {
    std::ofstream os(p);
    if (!os) throw t2v::DataError("cannot write " + p.string());
    t2v::write_assignments_csv(os, rows);
  };
  write(text_csv, t2v::export_assignments(text.tokens, text.mask, model.text_centers(), text_labels));
  if (cfg.ablation == t2v::Ablation::kTextOnlyVlad) {
    write(video_csv, {});
    std::cerr << "note: video tokens are not assigned to centers in the text_only_vlad variant\n";
  } else {
    write(video_csv, t2v::export_assignments(video.tokens, video.mask, model.video_centers(), video_labels));
  }
  print_json({{"item", a.item},
              {"caption", data.manifest.items[idx].captions[a.caption].caption_id},
              {"centers", cfg.centers + 1},
              {"text_csv", text_csv.string()},
              {"video_csv", video_csv.string()}});
  return kOk;
}

template <class Args, class F>
int with_precision(const Args& a, F&& run) {
  if (a.precision == "single") return run(float{});
  if (a.precision == "double") return run(double{});
  throw t2v::ConfigError("--precision must be single or double");
}

void add_model_options(CLI::App* cmd, ModelArgs& a) {
  cmd->add_option("--checkpoint", a.checkpoint, "Checkpoint written by train")->required();
  cmd->add_option("--manifest", a.manifest, "Dataset manifest")->required();
  cmd->add_option("--precision", a.precision, "single or double")->check(CLI::IsMember({"single", "double"}));
  cmd->add_option("--seed", a.seed, "Accepted for uniformity; inference draws no random numbers");
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Global-local text-video alignment: synthetic data, training, evaluation and retrieval"};
  app.require_subcommand(1);

  GenSynthArgs gen;
  auto* gen_cmd = app.add_subcommand("gen-synth", "Write a synthetic dataset (manifest + float32 blobs)");
  gen_cmd->add_option("--pairs", gen.pairs, "Training pairs (videos)");
  gen_cmd->add_option("--test-pairs", gen.test_pairs, "Held-out pairs written to test.json");
  gen_cmd->add_option("--topics", gen.topics, "Number of latent topics");
  gen_cmd->add_option("--captions", gen.captions, "Captions per video");
  gen_cmd->add_option("--noise", gen.noise, "Feature noise standard deviation");
  gen_cmd->add_option("--text-kind", gen.text_kind, "embeddings or token_ids")
      ->check(CLI::IsMember({"embeddings", "token_ids"}));
  gen_cmd->add_option("--seed", gen.seed, "Generator seed");
  gen_cmd->add_option("--out", gen.out, "Output directory")->required();

  TrainArgs train;
  auto* train_cmd = app.add_subcommand("train", "Train a model; writes a JSON-lines log and checkpoints");
  train_cmd->add_option("--config", train.config, "Run config JSON (defaults to the desk preset)");
  train_cmd->add_option("--manifest", train.manifest, "Training manifest (overrides paths.manifest)");
  train_cmd->add_option("--val-manifest", train.val_manifest, "Validation manifest (overrides paths.val_manifest)");
  train_cmd->add_option("--out", train.out, "Output directory (overrides paths.out_dir)");
  train_cmd->add_option("--ablation", train.ablation, "none, global_only, local_only_eval, separate_vlad, text_only_vlad");
  train_cmd->add_option("--precision", train.precision, "single or double")
      ->check(CLI::IsMember({"single", "double"}));
  train_cmd->add_option("--seed", train.seed, "Seed for initialization, batching and dropout");
  train_cmd->add_option("--epochs", train.epochs, "Epoch budget");
  train_cmd->add_option("--resume", train.resume, "Continue from a checkpoint");

  EvaluateArgs eval;
  auto* eval_cmd = app.add_subcommand("evaluate", "Retrieval metrics in both directions");
  add_model_options(eval_cmd, eval);
  eval_cmd->add_option("--median", eval.median, "Median rule for even counts: lower or midpoint");
  eval_cmd->add_option("--out", eval.out, "Also write report.json into this directory");

  RetrieveArgs retr;
  auto* retr_cmd = app.add_subcommand("retrieve", "Rank the manifest's videos for one text query");
  add_model_options(retr_cmd, retr);
  retr_cmd->add_option("--caption", retr.caption, "Caption id from the manifest");
  retr_cmd->add_option("--query-blob", retr.query_blob, "Float32 blob of query token features");
  retr_cmd->add_option("--top-k", retr.top_k, "Number of videos to return")->check(CLI::PositiveNumber);

  InspectArgs insp;
  auto* insp_cmd = app.add_subcommand("inspect", "Write center-assignment tables for one item");
  add_model_options(insp_cmd, insp);
  insp_cmd->add_option("--item", insp.item, "Video id")->required();
  insp_cmd->add_option("--caption", insp.caption, "Caption index within the item");
  insp_cmd->add_option("--out", insp.out, "Output directory for the CSV files");

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return kUsage;
  }

  try {
    if (gen_cmd->parsed()) return cmd_gen_synth(gen);
    if (train_cmd->parsed()) return cmd_train(train);
    if (eval_cmd->parsed())
      return with_precision(eval, [&](auto r) { return run_evaluate<decltype(r)>(eval); });
    if (retr_cmd->parsed())
      return with_precision(retr, [&](auto r) { return run_retrieve<decltype(r)>(retr); });
    if (insp_cmd->parsed())
      return with_precision(insp, [&](auto r) { return run_inspect<decltype(r)>(insp); });
  } catch (const t2v::ConfigError& e) {
    std::cerr << "usage error: " << e.what() << "\n";
    return kUsage;
  } catch (const t2v::NumericalError& e) {
    std::cerr << "numerical failure: " << e.what() << "\n";
    return kNumerical;
  } catch (const t2v::Error& e) {
    std::cerr << "data error: " << e.what() << "\n";
    return kData;
  } catch (const nlohmann::json::exception& e) {
    std::cerr << "data error: " << e.what() << "\n";
    return kData;
  } catch (const std::filesystem::filesystem_error& e) {
    std::cerr << "data error: " << e.what() << "\n";
    return kData;
  }
  return kUsage;
}
