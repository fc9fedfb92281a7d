/*
 * Copyright 2026 The cdlab Authors.
 * Licensed under the Apache License, Version 2.0 (the "License");
 * you may not use this file except in compliance with the License.
 * You may obtain a copy of the License at
 *
 *     https://www.apache.org/licenses/LICENSE-2.0
 *
 * Unless required by applicable law or agreed to in writing, software
 * distributed under the License is distributed on an "AS IS" BASIS,
 * WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
 * See the License for the specific language governing permissions and
 * limitations under the License.
 */

// Acceptance suite: one PASS/FAIL line per criterion.

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <functional>
#include <iostream>
#include <sstream>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "cdlab/acd/hierarchy.h"
#include "cdlab/awd/distill.h"
#include "cdlab/awd/dwt.h"
#include "cdlab/bench/color.h"
#include "cdlab/bench/frequency.h"
#include "cdlab/bench/motif.h"
#include "cdlab/bench/negation.h"
#include "cdlab/bench/toys.h"
#include "cdlab/cd/cd.h"
#include "cdlab/cdep/trainer.h"
#include "cdlab/gradcheck.h"
#include "cdlab/net/dataset.h"
#include "cdlab/net/model_io.h"
#include "cdlab/random.h"
#include "random_nets.h"

namespace {

using namespace cdlab;
using Clock = std::chrono::steady_clock;

struct Outcome {
  bool pass = false;
  std::string detail;
};

double Seconds(Clock::time_point start) {
  return std::chrono::duration<double>(Clock::now() - start).count();
}

std::string Fmt(const char* format, auto... args) {
  char buf[512];
  std::snprintf(buf, sizeof(buf), format, args...);
  return buf;
}

Shape WithBatch(int64_t b, const Shape& s) {
  Shape out{b};
  out.insert(out.end(), s.begin(), s.end());
  return out;
}

// 1. beta + gamma reproduces every logit.
Outcome Additivity() {
  const auto start = Clock::now();
  Rng rng = MakeRng(101);
  double worst = 0.0;
  int64_t checks = 0;
  for (int trial = 0; trial < 200; ++trial) {
    const net::Network n = testing::RandomNetwork(rng);
    for (int s = 0; s < 3; ++s) {
      const Tensor x = NormalTensor(n.input_shape, 0.0, 1.0, rng);
      const Tensor logits = net::Logits(n, net::AddBatchAxis(x));
      std::vector<Tensor> masks;
      for (int g = 0; g < 5; ++g) masks.push_back(testing::RandomMask(n.input_shape, rng));
      for (int c = 0; c < n.num_classes; ++c) {
        const auto scores = cd::ComputeCdScores(n, x, masks, c);
        for (const auto& sc : scores) {
          const double err = std::abs(sc.beta_logit + sc.gamma_logit - logits[c]) /
                             std::max(std::abs(logits[c]), 1e-300);
          worst = std::max(worst, err);
          ++checks;
        }
      }
    }
  }
  const double secs = Seconds(start);
  return {worst <= 1e-6 && secs <= 60.0,
          Fmt("CD additivity: max relative |beta+gamma-logit| = %.3g over %lld checks on 200 nets "
              "(<= 1e-6), %.1f s (<= 60 s)",
              worst, static_cast<long long>(checks), secs)};
}

// 2. Full and empty masks, and bias-free linear networks.
Outcome Identities() {
  Rng rng = MakeRng(102);
  double gamma_full = 0.0, beta_empty = 0.0, linear_err = 0.0;
  for (int trial = 0; trial < 200; ++trial) {
    const net::Network n = testing::RandomNetwork(rng);
    const Tensor x = NormalTensor(n.input_shape, 0.0, 1.0, rng);
    const Tensor full = Tensor::Full(n.input_shape, 1.0), empty = Tensor::Zeros(n.input_shape);
    for (int c = 0; c < n.num_classes; ++c) {
      gamma_full = std::max(gamma_full, std::abs(cd::ComputeCdScore(n, x, full, c).gamma_logit));
      beta_empty = std::max(beta_empty, std::abs(cd::ComputeCdScore(n, x, empty, c).beta_logit));
    }
  }
  for (int trial = 0; trial < 50; ++trial) {
    const int64_t d = 3 + trial % 6, depth = 1 + trial % 3;
    net::Network n;
    n.input_shape = {d};
    int64_t width = d;
    for (int64_t l = 0; l < depth; ++l) {
      const int64_t out = l + 1 == depth ? 2 : 3 + (trial + l) % 4;
      net::Layer lin;
      lin.kind = net::LayerKind::kLinear;
      lin.params = {NormalTensor({out, width}, 0.0, 1.0, rng), Tensor::Zeros({out})};
      n.layers.push_back(lin);
      width = out;
    }
    n.num_classes = 2;
    const Tensor x = NormalTensor({d}, 0.0, 1.0, rng);
    const Tensor mask = testing::RandomMask({d}, rng);
    std::vector<double> masked(d);
    for (int64_t i = 0; i < d; ++i) masked[i] = x[i] * mask[i];
    const Tensor expected = net::Logits(n, net::AddBatchAxis(Tensor({d}, masked)));
    for (int c = 0; c < 2; ++c) {
      linear_err = std::max(linear_err,
                            std::abs(cd::ComputeCdScore(n, x, mask, c).beta_logit - expected[c]));
    }
  }
  return {gamma_full == 0.0 && beta_empty == 0.0 && linear_err <= 1e-12,
          Fmt("CD identities: max |gamma| full mask = %.3g (== 0), max |beta| empty mask = %.3g "
              "(== 0), bias-free linear |beta - masked response| = %.3g (<= 1e-12)",
              gamma_full, beta_empty, linear_err)};
}

// 3. Greedy merges against an exhaustive search, and the planted pair.
Outcome AcdOracle() {
  Rng rng = MakeRng(103);
  int steps = 0, matched = 0;
  for (int trial = 0; trial < 50; ++trial) {
    const int64_t d = 4 + trial % 5;
    net::Architecture arch;
    arch.input_shape = {d};
    arch.num_classes = 2;
    const net::LayerKind act = trial % 2 ? net::LayerKind::kTanh : net::LayerKind::kRelu;
    arch.layers = {{net::LayerKind::kLinear, 6}, {act}, {net::LayerKind::kLinear, 2}};
    const net::Network n = net::InitRandom(arch, rng());
    const Tensor x = UniformTensor({d}, -1.0, 1.0, rng);
    const acd::Adjacency adj = acd::Adjacency::Chain(d);
    const acd::Hierarchy h = acd::BuildHierarchy(n, x, 1, adj, {20.0, 0});
    for (const acd::MergeStep& s : h.steps) {
      const auto& units = h.nodes[s.group].units;
      double best = -INFINITY;
      int best_unit = -1;
      for (const auto& cand : acd::CandidateGroups(units, adj)) {
        int added = -1;
        for (int v : cand) {
          if (!std::binary_search(units.begin(), units.end(), v)) added = v;
        }
        const int one[] = {added};
        const double score = cd::InteractionScore(n, x, acd::UnitMask(adj, units),
                                                  acd::UnitMask(adj, one), 1);
        if (score > best && !acd::ScoreTies(score, best)) {
          best = score;
          best_unit = added;
        }
      }
      ++steps;
      const auto it = std::find(s.candidate_units.begin(), s.candidate_units.end(), s.chosen_unit);
      const double chosen = s.interactions[it - s.candidate_units.begin()];
      matched += s.chosen_unit == best_unit || acd::ScoreTies(chosen, best);
    }
  }
  int hits = 0;
  const int seeds = 50;
  for (int seed = 0; seed < seeds; ++seed) {
    const int64_t pair = seed % 5;
    const net::Network n = bench::PlantedPairNetwork(6, pair, 2.0, 3, 0.2, seed);
    const Tensor x = bench::PlantedPairInput(6, seed);
    const acd::Hierarchy h = acd::BuildHierarchy(n, x, 1, acd::Adjacency::Chain(6));
    hits += h.nodes[h.steps.front().result].units ==
            std::vector<int>{static_cast<int>(pair), static_cast<int>(pair + 1)};
  }
  const double rate = static_cast<double>(hits) / seeds;
  return {matched == steps && rate >= 0.9,
          Fmt("ACD oracle: %d/%d greedy merges match the exhaustive argmax; planted pair merged "
              "first in %.0f%% of %d seeds (>= 90%%)",
              matched, steps, 100 * rate, seeds)};
}

// 4. Planted frequency recovery.
Outcome FrequencyRecovery() {
  const auto start = Clock::now();
  const bench::FrequencyConfig c;
  const auto r = bench::RunFrequencyRecovery(c);
  const double secs = Seconds(start);
  const double cd = r.error_pct[0], ig = r.error_pct[1];
  return {cd <= 10.0 && cd <= ig && secs <= 600.0,
          Fmt("TRIM frequency recovery: CD error %.1f%% +- %.1f (<= 10%%), IG error %.1f%% +- "
              "%.1f (CD <= IG), %d datasets, %d skipped, %.0f s (<= 600 s)",
              cd, r.stderr_pct[0], ig, r.stderr_pct[1], c.n_datasets, r.skipped, secs)};
}

// 5. Color bias.
Outcome ColorBias() {
  const auto start = Clock::now();
  const auto c = bench::DefaultColorBiasConfig();
  const auto r = bench::RunColorBias(c);
  const double secs = Seconds(start);
  return {r.vanilla_test_mean <= 0.05 && r.cdep_test_mean >= 0.20 && r.lambda_zero_identical &&
              secs <= 900.0,
          Fmt("CDEP color bias: inverted-test accuracy vanilla %.1f%% (<= 5%%), CDEP %.1f%% "
              "(>= 20%%), lambda=0 identical: %s, %d seeds, %.0f s (<= 900 s)",
              100 * r.vanilla_test_mean, 100 * r.cdep_test_mean,
              r.lambda_zero_identical ? "yes" : "no", c.seeds, secs)};
}

// 6. Explanation-term gradients by central differences.
Outcome CdepGradients() {
  Rng rng = MakeRng(106);
  int passed = 0;
  double worst = 0.0;
  for (int trial = 0; trial < 20; ++trial) {
    const net::Network n = testing::RandomNetwork(rng);
    const Tensor x = NormalTensor(WithBatch(2, n.input_shape), 0.0, 1.0, rng);
    const std::vector<cdep::ExplanationTarget> expl = {
        {-1, testing::RandomMask(n.input_shape, rng), 0.1},
        {0, testing::RandomMask(n.input_shape, rng), -0.2}};
    const std::vector<int> y = {0, 1};
    Tape tape;
    RecordingScope rec(tape);
    const auto params = net::TrackParams(n, tape);
    const auto loss = cdep::CdepLoss(n, params, x, y, {}, expl, 1.0);
    bool ok = true;
    for (const auto& layer : params) {
      for (const Var& p : layer) {
        const auto rep = FiniteDifferenceCheck(tape, loss.explanation, p.node());
        ok = ok && rep.passed;
        worst = std::max(worst, rep.max_relative_error);
      }
    }
    passed += ok;
  }
  return {passed == 20, Fmt("CDEP gradient check: %d/20 random nets within 1e-4 relative "
                            "(worst %.3g)",
                            passed, worst)};
}

// 7. Wavelet validity and a stationary start.
Outcome AwdValidity() {
  const double haar = awd::EvaluateConstraints(awd::HaarFilter()).Total();
  const double db5 = awd::EvaluateConstraints(awd::Daubechies5Filter()).Total();
  Rng rng = MakeRng(107);
  double recon = 0.0, parseval = 0.0;
  for (const Tensor& h : {awd::HaarFilter(), awd::Daubechies5Filter()}) {
    for (int i = 0; i < 50; ++i) {
      const Tensor x = NormalTensor({64}, 0.0, 1.0, rng);
      const Tensor c = awd::Dwt(h, x, 3);
      const Tensor back = awd::Idwt(h, c, 3);
      double ex = 0.0, ec = 0.0;
      for (int64_t k = 0; k < 64; ++k) {
        recon = std::max(recon, std::abs(back[k] - x[k]));
        ex += x[k] * x[k];
        ec += c[k] * c[k];
      }
      parseval = std::max(parseval, std::abs(ex - ec) / ex);
    }
  }
  net::Architecture arch;
  arch.input_shape = {32};
  arch.num_classes = 1;
  arch.layers = {{net::LayerKind::kLinear, 4}, {net::LayerKind::kRelu},
                 {net::LayerKind::kLinear, 1}};
  const net::Network f = net::InitRandom(arch, 7);
  awd::AwdConfig c;
  c.lambda = 0.0;
  c.interp_weight = 0.0;
  c.levels = 2;
  c.iterations = 100;
  const auto r = awd::Distill(f, NormalTensor({8, 32}, 0.0, 1.0, rng), c);
  const double moved = MaxAbsDiff(r.filter, awd::Daubechies5Filter());
  return {haar <= 1e-10 && db5 <= 1e-10 && recon <= 1e-8 && parseval <= 1e-8 && moved <= 1e-6,
          Fmt("AWD validity: constraint loss Haar %.2g, DB5 %.2g (<= 1e-10); reconstruction "
              "%.2g (<= 1e-8); Parseval %.2g (<= 1e-8); DB5 start moved %.2g (<= 1e-6)",
              haar, db5, recon, parseval, moved)};
}

// 8. Distilled filter against its initialization.
Outcome AwdDistillation() {
  const auto c = bench::DefaultMotifConfig();
  const auto r = bench::RunMotif(c);
  double ic = 0, lc = 0, ir = 0, lr = 0;
  for (const auto& row : r.rows) {
    ic += row.initial.compression / c.seeds;
    lc += row.learned.compression / c.seeds;
    ir += row.initial.r2 / c.seeds;
    lr += row.learned.r2 / c.seeds;
  }
  return {lc < ic && lr >= ir,
          Fmt("AWD distillation (mean of %d seeds): compression %.4f learned vs %.4f DB5 "
              "(strictly lower); R^2 %.4f learned vs %.4f DB5 (>=); per-seed wins %d/%d "
              "compression, %d/%d R^2",
              c.seeds, lc, ic, lr, ir, r.compression_wins, c.seeds, r.r2_wins, c.seeds)};
}

// 9. Every CLI subcommand twice with the same seed and config.
std::string ReadFile(const std::filesystem::path& p) {
  std::ifstream f(p, std::ios::binary);
  std::stringstream ss;
  ss << f.rdbuf();
  return ss.str();
}

Outcome Determinism() {
  namespace fs = std::filesystem;
  const fs::path root = fs::temp_directory_path() / "cdlab_acceptance_determinism";
  fs::remove_all(root);
  fs::create_directories(root);
  const std::string cli = CDLAB_CLI_PATH;
  const std::string r = root.string();
  {
    std::ofstream(root / "arch.json")
        << R"({"input_shape": [32], "num_classes": 2, "layers": [{"kind": "linear", "out": 8},)"
        << R"( {"kind": "relu"}, {"kind": "linear", "out": 2}]})";
    std::ofstream(root / "teacher_arch.json")
        << R"({"input_shape": [64], "num_classes": 1, "layers": [{"kind": "linear", "out": 8},)"
        << R"( {"kind": "relu"}, {"kind": "linear", "out": 1}]})";
    std::ofstream(root / "x.json") << R"({"shape": [32], "data": [)" << [] {
      std::string s;
      for (int i = 0; i < 32; ++i) s += (i ? "," : "") + std::to_string(std::sin(0.7 * i));
      return s;
    }() << "]}";
  }
  // Shared inputs, produced once.
  const std::vector<std::string> setup = {
      cli + " simulate frequency --data-only --set n_samples=64 --set signal_length=32 --seed 5 "
            "--out " + r + "/fdata",
      cli + " simulate awd --data-only --set n_train=16 --set length=64 --seed 5 --out " + r +
          "/adata",
  };
  for (const auto& cmd : setup) {
    if (std::system((cmd + " 2>/dev/null").c_str()) != 0) return {false, "setup failed: " + cmd};
  }
  struct Case {
    std::string name, args;
  };
  const std::vector<Case> cases = {
      {"init-model", "init-model --arch " + r + "/arch.json --seed 3 --model {out}/model.json"},
      {"attribute", "attribute --model " + r + "/run_a_init-model/model.json --input " + r +
                        "/x.json --set indices=[1,2,3] --set class=1"},
      {"acd", "acd --model " + r + "/run_a_init-model/model.json --input " + r +
                  "/x.json --set class=1"},
      {"trim", "trim --model " + r + "/run_a_init-model/model.json --input " + r +
                   "/x.json --set class=1 --set method=ig --set ig_steps=16"},
      {"train-cdep", "train-cdep --model " + r + "/run_a_init-model/model.json --data " + r +
                         "/fdata/data.json --set epochs=2 --set lambda=0.5 --set pixels_per_batch=0 "
                         "--set 'groups=[[0,1,2],[8,9]]' --seed 2"},
      {"distill-awd", "distill-awd --model " + r + "/teacher.json --data " + r +
                          "/adata/data.json --set iterations=3 --set levels=3 --seed 2"},
      {"simulate frequency", "simulate frequency --set n_datasets=2 --set n_samples=128 "
                             "--set signal_length=32 --set epochs=3 --set eval_samples=4 "
                             "--set ig_steps=16 --seed 1"},
      {"simulate color", "simulate color --set seeds=1 --set n_per_class=4 --set size=8 "
                         "--set architecture=mlp --set vanilla.epochs=1 --set cdep.epochs=1 "
                         "--set cdep.pixels_per_batch=2 --seed 1"},
      {"simulate negation", "simulate negation --set n_train=64 --set n_test=32 --set hidden=6 "
                            "--set train.epochs=1 --seed 1"},
      {"simulate awd", "simulate awd --set seeds=1 --set n_train=32 --set n_test=16 "
                       "--set length=64 --set hidden=4 --set teacher.epochs=2 "
                       "--set distill_signals=4 --set awd.iterations=2 --set awd.levels=3 "
                       "--seed 1"},
  };
  if (std::system((cli + " init-model --arch " + r + "/teacher_arch.json --seed 4 --model " + r +
                   "/teacher.json --out " + r + "/teacher_init 2>/dev/null")
                      .c_str()) != 0) {
    return {false, "setup failed: teacher model"};
  }
  int identical = 0;
  std::string failures;
  for (const Case& c : cases) {
    std::string dirs[2];
    bool ran = true;
    for (int k = 0; k < 2; ++k) {
      std::string tag = c.name;
      std::replace(tag.begin(), tag.end(), ' ', '_');
      dirs[k] = r + "/run_" + (k ? "b_" : "a_") + tag;
      std::string args = c.args;
      const auto at = args.find("{out}");
      if (at != std::string::npos) args.replace(at, 5, dirs[k]);
      if (std::system((cli + " " + args + " --out " + dirs[k] + " 2>/dev/null").c_str()) != 0) {
        ran = false;
      }
    }
    bool same = ran;
    for (const char* file : {"metrics.json", "metrics.csv"}) {
      same = same && fs::exists(fs::path(dirs[0]) / file) &&
             ReadFile(fs::path(dirs[0]) / file) == ReadFile(fs::path(dirs[1]) / file);
    }
    identical += same;
    if (!same) failures += " " + c.name;
  }
  fs::remove_all(root);
  return {identical == static_cast<int>(cases.size()),
          Fmt("Determinism: %d/%zu CLI runs byte-identical on rerun", identical, cases.size()) +
              (failures.empty() ? "" : "; differing:" + failures)};
}

// 10. Negation flips the sign of a positive word.
Outcome Negation() {
  const auto r = bench::RunNegation(bench::DefaultNegationConfig());
  return {r.train_accuracy >= 0.95 && r.flip_rate >= 0.80,
          Fmt("Negation: LSTM train accuracy %.1f%% (>= 95%%); 'not <positive>' opposite in sign "
              "to '<positive>' alone in %d/%d test occurrences = %.1f%% (>= 80%%)",
              100 * r.train_accuracy, r.flipped, r.occurrences, 100 * r.flip_rate)};
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"cdlab acceptance suite"};
  int only = 0;
  app.add_option("--criterion", only, "Run one criterion (1-10); all by default")
      ->check(CLI::Range(0, 10));
  CLI11_PARSE(app, argc, argv);
  const std::vector<std::function<Outcome()>> criteria = {
      Additivity, Identities, AcdOracle, FrequencyRecovery, ColorBias,
      CdepGradients, AwdValidity, AwdDistillation, Determinism, Negation};
  bool all = true;
  for (int i = 1; i <= 10; ++i) {
    if (only != 0 && only != i) continue;
    Outcome o;
    try {
      o = criteria[i - 1]();
    } catch (const std::exception& e) {
      o = {false, std::string("error: ") + e.what()};
    }
    std::cout << "criterion " << i << " " << (o.pass ? "PASS" : "FAIL") << ": " << o.detail
              << std::endl;
    all = all && o.pass;
  }
  return all ? 0 : 1;
}
