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

#ifndef T2V_CONFIG_HPP
#define T2V_CONFIG_HPP

#include <fstream>
#include <set>
#include <string>

#include <nlohmann/json.hpp>

#include "t2v/featureio.hpp"
#include "t2v/model_config.hpp"
#include "t2v/optimizer.hpp"

namespace t2v {

/// Training hyperparameters. Defaults are the full-scale reference setup
/// (C = 768, 4 heads, margin 0.02, lr 1e-4 decayed x0.9 every 5 epochs,
/// weight decay 1e-4, batch 64). `desk()` is a small preset that trains the
/// synthetic benchmark on one CPU core in minutes.
struct TrainConfig {
  double learning_rate = 1e-4;
  double lr_decay = 0.9;
  std::size_t lr_decay_every = 5;
  double weight_decay = 1e-4;
  double margin = 0.02;
  std::size_t batch_size = 64;
  std::size_t epochs = 30;
  std::uint64_t seed = 0;
  std::string precision = "double";
  Ablation ablation = Ablation::kNone;
  std::size_t centers = 9;
  std::size_t dim = 768;
  std::size_t heads = 4;
  double dropout = 0.1;
  bool attention_ffn = false;
  std::size_t max_tokens = 32;
  bool shuffle = true;
  RangerOptions optimizer;

  static TrainConfig reference() { return {}; }

  static TrainConfig desk() {
    TrainConfig c;
    c.dim = 128;
    c.centers = 8;
    c.batch_size = 32;
    c.learning_rate = 1e-2;
    c.epochs = 30;
    return c;
  }

  double lr_at(std::size_t epoch) const { return lr_at_epoch(epoch, learning_rate, lr_decay, lr_decay_every); }

  void validate() const {
    if (!(learning_rate > 0)) throw ConfigError("/learning_rate: must be positive");
    if (!(lr_decay > 0)) throw ConfigError("/lr_decay: must be positive");
    if (weight_decay < 0) throw ConfigError("/weight_decay: must be non-negative");
    if (!(margin > 0)) throw ConfigError("/margin: must be positive");
    if (batch_size < 2) throw ConfigError("/batch_size: must be at least 2");
    if (precision != "single" && precision != "double") throw ConfigError("/precision: must be 'single' or 'double'");
    if (dim == 0) throw ConfigError("/dim: must be positive");
    if (centers == 0) throw ConfigError("/centers: must be positive");
    if (heads == 0 || dim % heads != 0) throw ConfigError("/heads: must divide dim");
    if (dropout < 0 || dropout >= 1) throw ConfigError("/dropout: must be in [0, 1)");
    if (max_tokens == 0) throw ConfigError("/max_tokens: must be positive");
    if (optimizer.lookahead_alpha <= 0 || optimizer.lookahead_alpha > 1)
      throw ConfigError("/optimizer/lookahead_alpha: must be in (0, 1]");
  }

  ModelConfig model_config(const DatasetManifest& m) const {
    ModelConfig mc;
    mc.experts = m.experts;
    mc.text = m.text;
    mc.dim = dim;
    mc.centers = centers;
    mc.heads = heads;
    mc.dropout = dropout;
    mc.attention_ffn = attention_ffn;
    mc.max_tokens = max_tokens;
    mc.ablation = ablation;
    return mc;
  }
};

struct RunPaths {
  std::string manifest;
  std::string val_manifest;
  std::string checkpoint;
  std::string out_dir = "t2v_out";
};

struct RunConfig {
  std::string preset = "desk";
  TrainConfig train = TrainConfig::desk();
  RunPaths paths;
};

inline nlohmann::ordered_json train_config_to_json(const TrainConfig& c) {
  return {{"learning_rate", c.learning_rate},
          {"lr_decay", c.lr_decay},
          {"lr_decay_every", c.lr_decay_every},
          {"weight_decay", c.weight_decay},
          {"margin", c.margin},
          {"batch_size", c.batch_size},
          {"epochs", c.epochs},
          {"seed", c.seed},
          {"precision", c.precision},
          {"ablation", to_string(c.ablation)},
          {"centers", c.centers},
          {"dim", c.dim},
          {"heads", c.heads},
          {"dropout", c.dropout},
          {"attention_ffn", c.attention_ffn},
          {"max_tokens", c.max_tokens},
          {"shuffle", c.shuffle},
          {"optimizer",
           {{"beta1", c.optimizer.beta1},
            {"beta2", c.optimizer.beta2},
            {"eps", c.optimizer.eps},
            {"sma_threshold", c.optimizer.sma_threshold},
            {"lookahead_k", c.optimizer.lookahead_k},
            {"lookahead_alpha", c.optimizer.lookahead_alpha}}}};
}

inline nlohmann::ordered_json run_config_to_json(const RunConfig& r) {
  nlohmann::ordered_json j{{"preset", r.preset}};
  const auto train = train_config_to_json(r.train);
  for (const auto& [k, v] : train.items()) j[k] = v;
  j["paths"] = {{"manifest", r.paths.manifest},
                {"val_manifest", r.paths.val_manifest},
                {"checkpoint", r.paths.checkpoint},
                {"out_dir", r.paths.out_dir}};
  return j;
}

namespace detail {

class JsonReader {
 public:
  JsonReader(const nlohmann::ordered_json& j, std::string pointer) : j_(j), ptr_(std::move(pointer)) {
    if (!j_.is_object()) throw ConfigError((ptr_.empty() ? "/" : ptr_) + ": expected an object");
  }

  void check_keys(const std::set<std::string>& allowed) const {
    for (const auto& [k, v] : j_.items())
      if (!allowed.count(k)) throw ConfigError(ptr_ + "/" + k + ": unknown key");
  }

  template <class T>
  void number(const char* key, T& out) const {
    if (!j_.contains(key)) return;
    const auto& v = j_.at(key);
    if constexpr (std::is_integral_v<T>) {
      if (!v.is_number_integer() || v.get<long long>() < 0)
        throw ConfigError(ptr_ + "/" + key + ": expected a non-negative integer");
    } else {
      if (!v.is_number()) throw ConfigError(ptr_ + "/" + key + ": expected a number");
    }
    out = v.get<T>();
  }

  void boolean(const char* key, bool& out) const {
    if (!j_.contains(key)) return;
    if (!j_.at(key).is_boolean()) throw ConfigError(ptr_ + "/" + key + ": expected a boolean");
    out = j_.at(key).get<bool>();
  }

  void string(const char* key, std::string& out) const {
    if (!j_.contains(key)) return;
    if (!j_.at(key).is_string()) throw ConfigError(ptr_ + "/" + key + ": expected a string");
    out = j_.at(key).get<std::string>();
  }

  bool has(const char* key) const { return j_.contains(key); }
  JsonReader child(const char* key) const { return JsonReader(j_.at(key), ptr_ + "/" + key); }
  const std::string& pointer() const { return ptr_; }

 private:
  const nlohmann::ordered_json& j_;
  std::string ptr_;
};

inline const std::set<std::string> kTrainKeys = {
    "learning_rate", "lr_decay", "lr_decay_every", "weight_decay", "margin",        "batch_size",
    "epochs",        "seed",     "precision",      "ablation",     "centers",       "dim",
    "heads",         "dropout",  "attention_ffn",  "max_tokens",   "shuffle",       "optimizer"};

inline void read_train_fields(const JsonReader& r, TrainConfig& c) {
  r.number("learning_rate", c.learning_rate);
  r.number("lr_decay", c.lr_decay);
  r.number("lr_decay_every", c.lr_decay_every);
  r.number("weight_decay", c.weight_decay);
  r.number("margin", c.margin);
  r.number("batch_size", c.batch_size);
  r.number("epochs", c.epochs);
  r.number("seed", c.seed);
  r.string("precision", c.precision);
  if (r.has("ablation")) {
    std::string a;
    r.string("ablation", a);
    try {
      c.ablation = ablation_from_string(a);
    } catch (const ConfigError&) {
      throw ConfigError(r.pointer() + "/ablation: unknown ablation '" + a + "'");
    }
  }
  r.number("centers", c.centers);
  r.number("dim", c.dim);
  r.number("heads", c.heads);
  r.number("dropout", c.dropout);
  r.boolean("attention_ffn", c.attention_ffn);
  r.number("max_tokens", c.max_tokens);
  r.boolean("shuffle", c.shuffle);
  if (r.has("optimizer")) {
    auto o = r.child("optimizer");
    o.check_keys({"beta1", "beta2", "eps", "sma_threshold", "lookahead_k", "lookahead_alpha"});
    o.number("beta1", c.optimizer.beta1);
    o.number("beta2", c.optimizer.beta2);
    o.number("eps", c.optimizer.eps);
    o.number("sma_threshold", c.optimizer.sma_threshold);
    o.number("lookahead_k", c.optimizer.lookahead_k);
    o.number("lookahead_alpha", c.optimizer.lookahead_alpha);
  }
}

}  // namespace detail

inline TrainConfig train_config_from_json(const nlohmann::ordered_json& j, const std::string& pointer = "") {
  detail::JsonReader r(j, pointer);
  r.check_keys(detail::kTrainKeys);
  TrainConfig c;
  detail::read_train_fields(r, c);
  c.validate();
  return c;
}

/// Parses a run config. Unknown keys are rejected; absent keys take the
/// preset's values. Errors name the offending JSON pointer.
inline RunConfig run_config_from_json(const nlohmann::ordered_json& j) {
  detail::JsonReader r(j, "");
  auto keys = detail::kTrainKeys;
  keys.insert({"preset", "paths"});
  r.check_keys(keys);
  RunConfig rc;
  r.string("preset", rc.preset);
  if (rc.preset == "desk") rc.train = TrainConfig::desk();
  else if (rc.preset == "reference") rc.train = TrainConfig::reference();
  else throw ConfigError("/preset: must be 'desk' or 'reference'");
  detail::read_train_fields(r, rc.train);
  if (r.has("paths")) {
    auto p = r.child("paths");
    p.check_keys({"manifest", "val_manifest", "checkpoint", "out_dir"});
    p.string("manifest", rc.paths.manifest);
    p.string("val_manifest", rc.paths.val_manifest);
    p.string("checkpoint", rc.paths.checkpoint);
    p.string("out_dir", rc.paths.out_dir);
  }
  rc.train.validate();
  return rc;
}

inline RunConfig load_run_config(const std::filesystem::path& path) {
  std::ifstream is(path);
  if (!is) throw ConfigError("cannot open config: " + path.string());
  nlohmann::ordered_json j;
  try {
    j = nlohmann::ordered_json::parse(is);
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError("config " + path.string() + " is not valid JSON: " + e.what());
  }
  return run_config_from_json(j);
}

/// Everything needed to rebuild a model: training config plus the data schema.
inline nlohmann::ordered_json model_record_json(const TrainConfig& c, const DatasetManifest& m) {
  nlohmann::ordered_json experts = nlohmann::ordered_json::array();
  for (const auto& e : m.experts)
    experts.push_back({{"name", e.name}, {"dim", e.dim}, {"max_segments", e.max_segments}});
  nlohmann::ordered_json text{{"kind", m.text.kind}, {"dim", m.text.dim}, {"vocab", m.text.vocab}};
  return {{"train", train_config_to_json(c)}, {"experts", experts}, {"text", text}};
}

struct ModelRecord {
  TrainConfig train;
  std::vector<ExpertSpec> experts;
  TextSpec text;

  ModelConfig model_config() const {
    DatasetManifest m;
    m.experts = experts;
    m.text = text;
    return train.model_config(m);
  }
};

inline ModelRecord parse_model_record(const std::string& json_text) {
  const auto j = nlohmann::ordered_json::parse(json_text);
  ModelRecord r;
  r.train = train_config_from_json(j.at("train"), "/train");
  for (const auto& e : j.at("experts"))
    r.experts.push_back({e.at("name").get<std::string>(), e.at("dim").get<std::size_t>(),
                         e.at("max_segments").get<std::size_t>()});
  r.text.kind = j.at("text").at("kind").get<std::string>();
  r.text.dim = j.at("text").at("dim").get<std::size_t>();
  r.text.vocab = j.at("text").at("vocab").get<std::size_t>();
  return r;
}

}  // namespace t2v

#endif  // T2V_CONFIG_HPP
