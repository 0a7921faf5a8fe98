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

// Acceptance suite. Prints one PASS/FAIL line per criterion and exits
// non-zero when any criterion fails. `--only N[,M...]` runs a subset.

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <functional>
#include <iostream>
#include <numeric>
#include <set>
#include <sstream>
#include <string>

#include "t2v/gradcheck.hpp"
#include "t2v/trainer.hpp"
#include "test_support.hpp"

namespace t2v {
namespace {

using testing::TempDir;
using testing::read_file;
using T = Tensor<double>;
using V = Var<double>;
using LD = long double;
using Clock = std::chrono::steady_clock;

struct Outcome {
  bool pass = false;
  std::string detail;
};

double seconds_since(Clock::time_point t0) { return std::chrono::duration<double>(Clock::now() - t0).count(); }

std::string fmt(const char* f, double a) {
  char buf[64];
  std::snprintf(buf, sizeof buf, f, a);
  return buf;
}

// ---------------------------------------------------------------------------
// 1. Gradient integrity of the whole objective

Outcome gradient_integrity() {
  const auto t0 = Clock::now();
  TempDir dir("t2v_acc1");
  auto data = testing::load_synthetic<double>(testing::tiny_synthetic(3, 5), dir.path(), 5);
  auto cfg = testing::tiny_model_config(data.manifest, /*dim=*/8, /*centers=*/3, /*heads=*/2);
  Model<double> model(cfg, 9);
  const Batch batch{{0, 0}, {1, 1}, {2, 0}};
  auto build = [&]() -> V {
    return margin_ranking_loss(model.batch_similarity(data, batch, false, nullptr, SimilarityMode::kCombined), 0.02);
  };
  const double loss = build().item();
  const auto r = finite_difference_check(build, model.params());
  const double secs = seconds_since(t0);
  Outcome o;
  o.pass = loss > 0 && r.max_error < 1e-4 && r.entries_checked == model.params().num_values() && secs < 60;
  o.detail = "max rel err " + fmt("%.2e", r.max_error) + " over " + std::to_string(r.entries_checked) +
             " entries (worst " + r.worst_parameter + "), loss " + fmt("%.4f", loss) + ", " + fmt("%.1f s", secs);
  return o;
}

// ---------------------------------------------------------------------------
// 2. VLAD against straight loops

Outcome vlad_oracle() {
  const auto t0 = Clock::now();
  Rng rng = derive_rng(2024, {});
  double worst = 0;
  for (int inst = 0; inst < 100; ++inst) {
    const std::size_t M = 1 + uniform_index(rng, 10), K = 1 + uniform_index(rng, 5), C = 1 + uniform_index(rng, 16);
    const T z = testing::random_matrix(M, C, rng);
    Mask mask(M);
    for (auto& b : mask) b = uniform01(rng) < 0.75;
    mask[uniform_index(rng, M)] = 1;
    const T c = testing::random_matrix(K + 1, C, rng, 0.5), a = testing::random_matrix(K + 1, C, rng, 0.5);
    const T b = testing::random_matrix(1, K + 1, rng, 0.5);
    const auto got = aggregate(constant(z), mask, SharedCenters<double>{constant(c), constant(a), constant(b)})
                         .vectors.value();

    // soft assignment, one token at a time
    std::vector<std::vector<LD>> w(M, std::vector<LD>(K + 1, 0));
    for (std::size_t i = 0; i < M; ++i) {
      if (!mask[i]) continue;
      LD mx = -INFINITY;
      for (std::size_t j = 0; j <= K; ++j) {
        LD s = b[j];
        for (std::size_t d = 0; d < C; ++d) s += LD(z(i, d)) * c(j, d);
        w[i][j] = s;
        mx = std::max(mx, s);
      }
      LD tot = 0;
      for (std::size_t j = 0; j <= K; ++j) tot += (w[i][j] = std::exp(w[i][j] - mx));
      for (std::size_t j = 0; j <= K; ++j) w[i][j] /= tot;
    }
    // residual sums over (center, token, dim), then per-center normalization
    for (std::size_t j = 0; j < K; ++j) {
      std::vector<LD> g(C, 0);
      for (std::size_t i = 0; i < M; ++i)
        for (std::size_t d = 0; d < C; ++d) g[d] += w[i][j] * (LD(z(i, d)) - a(j, d));
      LD n = 0;
      for (LD x : g) n += x * x;
      n = std::sqrt(n);
      for (std::size_t d = 0; d < C; ++d)
        worst = std::max(worst, double(std::fabs(LD(got(j, d)) - (n > 1e-12L ? g[d] / n : 0))));
    }
    if (got.rows() != K) worst = INFINITY;
  }
  const double secs = seconds_since(t0);
  return {worst < 1e-10 && secs < 10, "max abs diff " + fmt("%.2e", worst) + " on 100 instances, " + fmt("%.2f s", secs)};
}

// ---------------------------------------------------------------------------
// 3. The background center is excluded from the descriptor

Outcome background_exclusion() {
  TempDir dir("t2v_acc3");
  auto data = testing::load_synthetic<double>(testing::tiny_synthetic(4, 6), dir.path(), 5);
  bool ok = true;
  std::string detail;
  for (auto ablation : {Ablation::kNone, Ablation::kSeparateVlad}) {
    auto cfg = testing::tiny_model_config(data.manifest);
    cfg.ablation = ablation;
    Model<double> model(cfg, 3);
    model.params().zero_grad();
    double rest = 0, bg = 0;
    for (std::size_t i = 0; i < 4; ++i) {
      auto v = model.encode_video(data.videos[i], false, nullptr);
      auto t = model.encode_text(data.captions[(i + 1) % 4][0], false, nullptr);
      ok = ok && v.descriptor.num_centers() == cfg.centers && t.descriptor.num_centers() == cfg.centers;
      backward(model.pair_similarity(t, v, SimilarityMode::kLocal));
    }
    for (const auto& side : {model.text_centers(), model.video_centers()}) {
      const auto& g = side.anchors.node()->grad;
      for (std::size_t d = 0; d < g.cols(); ++d) {
        bg = std::max(bg, std::abs(g(cfg.centers, d)));
        for (std::size_t j = 0; j < cfg.centers; ++j) rest = std::max(rest, std::abs(g(j, d)));
      }
    }
    ok = ok && bg == 0.0 && rest > 0.0;
    detail += to_string(ablation) + ": |grad c'_bg| = " + fmt("%g", bg) + " (others up to " + fmt("%.2e", rest) + "); ";
  }
  return {ok, detail + "descriptors expose K vectors"};
}

// ---------------------------------------------------------------------------
// 4. Permutation invariance

Outcome permutation_invariance() {
  TempDir dir("t2v_acc4");
  auto data = testing::load_synthetic<double>(testing::tiny_synthetic(6, 7), dir.path(), 5);
  auto cfg = testing::tiny_model_config(data.manifest);
  Model<double> model(cfg, 4);
  Rng rng = derive_rng(44, {});
  double worst_local = 0, worst_global = 0;
  for (std::size_t i = 0; i < data.size(); ++i) {
    const auto& video = data.videos[i];
    const auto& text = data.captions[i][0];

    // Shuffle every expert's rows together with their mask entries.
    auto pv = video;
    for (std::size_t n = 0; n < pv.num_experts(); ++n) {
      const std::size_t S = pv.features[n].rows();
      std::vector<std::size_t> perm(S);
      std::iota(perm.begin(), perm.end(), 0);
      for (std::size_t k = S; k > 1; --k) std::swap(perm[k - 1], perm[uniform_index(rng, k)]);
      for (std::size_t s = 0; s < S; ++s) {
        pv.masks[n][s] = video.masks[n][perm[s]];
        for (std::size_t d = 0; d < pv.features[n].cols(); ++d) pv.features[n](s, d) = video.features[n](perm[s], d);
      }
    }
    auto pt = text;
    const std::size_t B = pt.mask.size();
    std::vector<std::size_t> perm(B);
    std::iota(perm.begin(), perm.end(), 0);
    for (std::size_t k = B; k > 1; --k) std::swap(perm[k - 1], perm[uniform_index(rng, k)]);
    for (std::size_t s = 0; s < B; ++s) {
      pt.mask[s] = text.mask[perm[s]];
      for (std::size_t d = 0; d < pt.embeddings.cols(); ++d) pt.embeddings(s, d) = text.embeddings(perm[s], d);
    }

    const auto ve = model.encode_video(video, false, nullptr), pve = model.encode_video(pv, false, nullptr);
    const auto te = model.encode_text(text, false, nullptr), pte = model.encode_text(pt, false, nullptr);
    for (auto mode : {SimilarityMode::kLocal, SimilarityMode::kGlobal}) {
      const double d = std::abs(model.pair_similarity(te, ve, mode).item() - model.pair_similarity(pte, pve, mode).item());
      (mode == SimilarityMode::kLocal ? worst_local : worst_global) = std::max(
          mode == SimilarityMode::kLocal ? worst_local : worst_global, d);
    }
  }
  return {worst_local < 1e-10 && worst_global < 1e-10,
          "max change s_local " + fmt("%.2e", worst_local) + ", s_global " + fmt("%.2e", worst_global) +
              " over 6 pairs"};
}

// ---------------------------------------------------------------------------
// 5. Metrics against sort-and-scan

struct OracleReport {
  double r[4];
  double mdr;
};

OracleReport brute_force(const T& S, bool text_to_video) {
  const std::size_t B = S.rows();
  std::vector<std::size_t> ranks;
  for (std::size_t q = 0; q < B; ++q) {
    std::vector<std::pair<double, int>> cands;  // (score, is_gt); gt sorts after equal scores
    for (std::size_t j = 0; j < B; ++j)
      cands.push_back({text_to_video ? S(q, j) : S(j, q), j == q ? 1 : 0});
    std::sort(cands.begin(), cands.end(), [](auto a, auto b) {
      return a.first != b.first ? a.first > b.first : a.second < b.second;
    });
    for (std::size_t k = 0; k < B; ++k)
      if (cands[k].second) ranks.push_back(k + 1);
  }
  OracleReport o{};
  const std::size_t ks[4] = {1, 5, 10, 50};
  for (int k = 0; k < 4; ++k) {
    std::size_t hits = 0;
    for (auto r : ranks) hits += r <= ks[k];
    o.r[k] = 100.0 * double(hits) / double(B);
  }
  std::sort(ranks.begin(), ranks.end());
  o.mdr = double(ranks[(ranks.size() - 1) / 2]);
  return o;
}

Outcome metric_oracle() {
  Rng rng = derive_rng(55, {});
  std::size_t mismatches = 0, tied = 0;
  for (int inst = 0; inst < 200; ++inst) {
    T S = testing::random_matrix(50, 50, rng);
    if (inst % 10 == 0) {
      S.fill(0.5);
      ++tied;
    } else if (inst % 3 == 0) {
      for (auto& v : S.values()) v = std::round(v * 3);  // many partial ties
    }
    const auto [t2v, v2t] = report(S);
    for (const auto& [rep, dir] : {std::pair{t2v, true}, std::pair{v2t, false}}) {
      const auto o = brute_force(S, dir);
      if (rep.r1 != o.r[0] || rep.r5 != o.r[1] || rep.r10 != o.r[2] || rep.r50 != o.r[3] || rep.mdr != o.mdr)
        ++mismatches;
    }
  }
  return {mismatches == 0, std::to_string(mismatches) + " mismatches over 200 matrices x 2 directions (" +
                               std::to_string(tied) + " fully tied)"};
}

// ---------------------------------------------------------------------------
// 6 and 7. Training on the synthetic benchmark

struct BenchRun {
  double test_r1 = 0, first_loss = 0, final_loss = 0, seconds = 0;
  std::size_t epochs = 0;
};

BenchRun benchmark(std::uint64_t seed, Ablation ablation) {
  const auto t0 = Clock::now();
  TempDir dir("t2v_bench");
  SyntheticConfig sc;
  sc.num_pairs = 400;
  sc.num_test_pairs = 100;
  sc.seed = seed;
  auto ds = generate_synthetic_dataset(sc);
  write_synthetic_dataset(ds, dir.path());
  auto cfg = TrainConfig::desk();
  cfg.seed = seed;
  cfg.ablation = ablation;
  const PaddingConfig pad{cfg.max_tokens};
  const auto train = load_dataset<double>(load_manifest(dir / "manifest.json"), pad);
  const auto test = load_dataset<double>(load_manifest(dir / "test.json"), pad);
  Trainer<double> trainer(cfg, train);
  const auto records = trainer.train();
  BenchRun r;
  r.epochs = records.size();
  r.first_loss = records.front().train_loss;
  r.final_loss = records.back().train_loss;
  r.test_r1 = evaluate(trainer.model(), test).text_to_video.r1;
  r.seconds = seconds_since(t0);
  std::cerr << "  [bench] seed " << seed << " " << to_string(ablation) << ": R@1 " << r.test_r1 << ", loss "
            << r.first_loss << " -> " << r.final_loss << ", " << fmt("%.0f s", r.seconds) << "\n";
  return r;
}

BenchRun& shared_seed0() {
  static BenchRun run = benchmark(0, Ablation::kNone);
  return run;
}

Outcome synthetic_learning() {
  const auto& r = shared_seed0();
  const double ratio = r.final_loss / r.first_loss;
  const bool ok = r.epochs <= 30 && r.test_r1 >= 25.0 && ratio < 0.25 && r.seconds < 15 * 60;
  return {ok, "test text->video R@1 " + fmt("%.1f%%", r.test_r1) + " (need >= 25), final/first loss " +
                  fmt("%.4f", ratio) + " (need < 0.25), " + std::to_string(r.epochs) + " epochs, " +
                  fmt("%.0f s", r.seconds)};
}

Outcome ablation_ordering() {
  // Matched seeds: seed s drives both the generated corpus and training.
  double shared = 0, separate = 0, global = 0;
  std::string per_seed;
  for (std::uint64_t seed : {0, 1, 2}) {
    const double a = seed == 0 ? shared_seed0().test_r1 : benchmark(seed, Ablation::kNone).test_r1;
    const double b = benchmark(seed, Ablation::kSeparateVlad).test_r1;
    const double c = benchmark(seed, Ablation::kGlobalOnly).test_r1;
    shared += a / 3;
    separate += b / 3;
    global += c / 3;
    per_seed += " s" + std::to_string(seed) + "=" + fmt("%.1f", a) + "/" + fmt("%.1f", b) + "/" + fmt("%.1f", c);
  }
  const bool ok = shared >= separate - 1.0 && shared >= global - 1.0;
  return {ok, "mean R@1 shared " + fmt("%.2f", shared) + ", separate " + fmt("%.2f", separate) + ", global-only " +
                  fmt("%.2f", global) + " (tolerance 1 point; per seed shared/separate/global:" + per_seed + ")"};
}

// ---------------------------------------------------------------------------
// 8. Determinism and resume

Outcome determinism() {
  TempDir dir("t2v_acc8");
  auto sc = testing::tiny_synthetic(24, 8);
  auto train = testing::load_synthetic<double>(sc, dir / "data", 8);
  auto cfg = TrainConfig::desk();
  cfg.dim = 16;
  cfg.centers = 4;
  cfg.batch_size = 8;
  cfg.epochs = 5;
  cfg.max_tokens = 8;
  cfg.seed = 17;

  auto run_to = [&](const std::string& name, std::size_t epochs) {
    auto c = cfg;
    c.epochs = epochs;
    Trainer<double> t(c, train, &train);
    t.train(TrainOutputs{dir / name});
  };
  run_to("a", 5);
  run_to("b", 5);
  run_to("r", 2);
  {
    Trainer<double> t(cfg, train, &train);
    t.restore(load_checkpoint(dir / "r" / "last.ckpt"));
    t.train(TrainOutputs{dir / "r"});
  }
  const auto log_a = read_file(dir / "a" / "train_log.jsonl");
  const bool same_logs = !log_a.empty() && log_a == read_file(dir / "b" / "train_log.jsonl");
  const bool same_ckpt = read_file(dir / "a" / "last.ckpt") == read_file(dir / "b" / "last.ckpt");
  const bool resumed = log_a == read_file(dir / "r" / "train_log.jsonl") &&
                       read_file(dir / "a" / "last.ckpt") == read_file(dir / "r" / "last.ckpt");
  return {same_logs && same_ckpt && resumed,
          std::string("repeat run logs ") + (same_logs ? "identical" : "DIFFER") + ", checkpoints " +
              (same_ckpt ? "identical" : "DIFFER") + "; resume after epoch 2 of 5 " +
              (resumed ? "reproduces log lines and final checkpoint" : "DIVERGES")};
}

// ---------------------------------------------------------------------------
// 9. Byte-stable format round trips

Outcome format_round_trips() {
  Rng rng = derive_rng(99, {});
  std::size_t failures = 0;
  for (int inst = 0; inst < 20; ++inst) {
    TempDir dir("t2v_acc9");
    SyntheticConfig sc = testing::tiny_synthetic(2 + uniform_index(rng, 6), rng());
    sc.captions_per_video = 1 + uniform_index(rng, 3);
    sc.text_kind = inst % 4 == 3 ? "token_ids" : "embeddings";
    sc.experts.clear();
    const std::size_t N = 1 + uniform_index(rng, 4);
    for (std::size_t n = 0; n < N; ++n)
      sc.experts.push_back({"e" + std::to_string(n), 1 + uniform_index(rng, 9), 1 + uniform_index(rng, 4)});
    auto ds = generate_synthetic_dataset(sc);
    write_synthetic_dataset(ds, dir / "a");

    // manifest and blobs: read, write elsewhere, compare bytes
    auto m = load_manifest(dir / "a" / "manifest.json");
    save_manifest(m, dir / "b" / "manifest.json");
    bool ok = read_file(dir / "a" / "manifest.json") == read_file(dir / "b" / "manifest.json");
    for (std::size_t e = 0; e < m.experts.size(); ++e)
      for (const auto& item : m.items) {
        const auto& f = item.features[e];
        if (f.segments == 0) continue;
        save_tensor_blob(dir / "b" / f.path, load_tensor_blob<double>(dir / "a" / f.path, f.segments, m.experts[e].dim));
        ok = ok && read_file(dir / "a" / f.path) == read_file(dir / "b" / f.path);
      }
    for (const auto& item : m.items)
      for (const auto& c : item.captions) {
        save_tensor_blob(dir / "b" / c.path, load_tensor_blob<float>(dir / "a" / c.path, c.tokens, m.text.blob_cols()));
        ok = ok && read_file(dir / "a" / c.path) == read_file(dir / "b" / c.path);
      }
    ok = ok && load_manifest(dir / "b" / "manifest.json").same_content(m);

    // checkpoint of a randomly initialized, briefly trained model
    auto data = load_dataset<double>(m, PaddingConfig{5});
    auto cfg = TrainConfig::desk();
    cfg.dim = 4 * (1 + uniform_index(rng, 3));
    cfg.heads = 2;
    cfg.centers = 1 + uniform_index(rng, 4);
    cfg.batch_size = 2 + uniform_index(rng, 3);
    cfg.epochs = 1;
    cfg.max_tokens = 5;
    cfg.seed = rng();
    cfg.ablation = static_cast<Ablation>(uniform_index(rng, 5));
    if (data.size() >= 2) {
      Trainer<double> t(cfg, data);
      t.train();
      save_checkpoint(t.checkpoint(), dir / "a.ckpt");
      save_checkpoint(load_checkpoint(dir / "a.ckpt"), dir / "b.ckpt");
      ok = ok && read_file(dir / "a.ckpt") == read_file(dir / "b.ckpt");
    }
    failures += !ok;
  }
  return {failures == 0, std::to_string(failures) + " of 20 randomized instances changed bytes"};
}

}  // namespace
}  // namespace t2v

int main(int argc, char** argv) {
  using namespace t2v;
  std::set<int> only;
  for (int i = 1; i < argc; ++i) {
    const std::string a = argv[i];
    if (a == "--only" && i + 1 < argc) {
      std::stringstream ss(argv[++i]);
      for (std::string tok; std::getline(ss, tok, ',');) only.insert(std::stoi(tok));
    } else {
      std::cerr << "usage: " << argv[0] << " [--only N[,M...]]\n";
      return 2;
    }
  }
  const std::vector<std::pair<const char*, std::function<Outcome()>>> criteria = {
      {"gradient integrity of the full loss", gradient_integrity},
      {"VLAD matches naive loops", vlad_oracle},
      {"background center excluded", background_exclusion},
      {"permutation invariance", permutation_invariance},
      {"retrieval metrics match brute force", metric_oracle},
      {"synthetic end-to-end learning", synthetic_learning},
      {"ablation ordering", ablation_ordering},
      {"determinism and resume", determinism},
      {"byte-stable format round trips", format_round_trips},
  };
  int failed = 0;
  for (std::size_t i = 0; i < criteria.size(); ++i) {
    const int id = int(i) + 1;
    if (!only.empty() && !only.count(id)) continue;
    Outcome o;
    try {
      o = criteria[i].second();
    } catch (const std::exception& e) {
      o = {false, std::string("threw: ") + e.what()};
    }
    failed += !o.pass;
    std::cout << "criterion " << id << ": " << (o.pass ? "PASS" : "FAIL") << " - " << criteria[i].first << ": "
              << o.detail << std::endl;
  }
  return failed == 0 ? 0 : 1;
}
