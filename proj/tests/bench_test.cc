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

#include <unsupported/Eigen/FFT>

#include <algorithm>
#include <charconv>
#include <cmath>
#include <complex>
#include <filesystem>
#include <fstream>
#include <set>

#include <gtest/gtest.h>

#include "cdlab/bench/color.h"
#include "cdlab/bench/experiments.h"
#include "cdlab/bench/frequency.h"
#include "cdlab/bench/motif.h"
#include "cdlab/bench/negation.h"
#include "cdlab/bench/report.h"
#include "cdlab/cd/cd.h"
#include "cdlab/cdep/trainer.h"
#include "cdlab/errors.h"
#include "cdlab/net/dataset.h"
#include "cdlab/net/model_io.h"

namespace cdlab::bench {
namespace {

TEST(FrequencyTaskTest, LabelsSplitAtTheMedianPlantedMagnitude) {
  const FrequencyTask task = SimulateFrequencyTask(200, 32, 11);
  ASSERT_GE(task.planted, 1);
  ASSERT_LE(task.planted, 15);
  Eigen::FFT<double> fft;
  std::vector<double> mag;
  for (int64_t i = 0; i < 200; ++i) {
    std::vector<double> row(task.data.inputs.data().begin() + i * 32,
                            task.data.inputs.data().begin() + (i + 1) * 32);
    std::vector<std::complex<double>> spectrum;
    fft.fwd(spectrum, row);
    mag.push_back(std::abs(spectrum[task.planted]));
  }
  std::vector<double> sorted = mag;
  std::sort(sorted.begin(), sorted.end());
  const double median = 0.5 * (sorted[99] + sorted[100]);
  int ones = 0;
  for (int64_t i = 0; i < 200; ++i) {
    EXPECT_EQ(task.data.labels[i], mag[i] > median ? 1 : 0) << i;
    ones += task.data.labels[i];
  }
  EXPECT_EQ(ones, 100);
}

TEST(FrequencyTaskTest, DeterministicAndValidated) {
  const auto a = SimulateFrequencyTask(16, 16, 3), b = SimulateFrequencyTask(16, 16, 3);
  EXPECT_EQ(a.planted, b.planted);
  EXPECT_EQ(a.data.inputs.ToVector(), b.data.inputs.ToVector());
  EXPECT_THROW(SimulateFrequencyTask(16, 24, 3), InvalidArgument);
  EXPECT_THROW(SimulateFrequencyTask(1, 16, 3), InvalidArgument);
}

TEST(FrequencyScoresTest, OneScorePerBin) {
  const net::Network net = FrequencyClassifier(16, 8, 1);
  const auto task = SimulateFrequencyTask(4, 16, 2);
  const auto s = FrequencyScores(net, task.data.inputs, trim::AttributionMethod::kCd);
  EXPECT_EQ(s.size(), 9u);
  for (double v : s) EXPECT_GE(v, 0.0);
}

TEST(ColorBiasTest, PaletteIsDistinctAndPairedByInversion) {
  const auto& p = ColorPalette();
  ASSERT_EQ(p.size(), 10u);
  std::set<Color> distinct(p.begin(), p.end());
  EXPECT_EQ(distinct.size(), 10u);
  for (size_t k = 0; k < p.size(); k += 2) {
    for (int ch = 0; ch < 3; ++ch) EXPECT_DOUBLE_EQ(p[k + 1][ch], 1.0 - p[k][ch]);
  }
}

TEST(ColorBiasTest, TestSplitInvertsColorsAndKeepsShapes) {
  const ColorBiasData d = MakeColorBiasDataset(3, 12, 10, 5);
  ASSERT_EQ(d.train.inputs.shape(), (Shape{30, 3, 12, 12}));
  EXPECT_EQ(d.train.labels, d.test.labels);
  const auto tr = d.train.inputs.data(), te = d.test.inputs.data();
  const int64_t plane = 144;
  for (int64_t i = 0; i < 30; ++i) {
    const int k = d.train.labels[i];
    int64_t stroke = 0;
    for (int64_t px = 0; px < plane; ++px) {
      const bool on = tr[(i * 3) * plane + px] != 0.0 || tr[(i * 3 + 1) * plane + px] != 0.0 ||
                      tr[(i * 3 + 2) * plane + px] != 0.0;
      stroke += on;
      for (int ch = 0; ch < 3; ++ch) {
        const double a = tr[(i * 3 + ch) * plane + px], b = te[(i * 3 + ch) * plane + px];
        if (on) {
          EXPECT_DOUBLE_EQ(a, ColorPalette()[k][ch]);
          EXPECT_DOUBLE_EQ(b, 1.0 - a);
        } else {
          EXPECT_EQ(b, 0.0);
        }
      }
    }
    EXPECT_GT(stroke, 0) << i;
  }
  EXPECT_EQ(Grayscale(d.train.inputs).ToVector(), Grayscale(d.test.inputs).ToVector());
}

TEST(ColorBiasTest, ClassesAreBalanced) {
  const ColorBiasData d = MakeColorBiasDataset(4, 10, 10, 1);
  std::vector<int> counts(10, 0);
  for (int y : d.train.labels) ++counts[y];
  for (int c : counts) EXPECT_EQ(c, 4);
}

TEST(NegationGrammarTest, NegationIntensifierAndFillers) {
  const Vocabulary v;
  auto ids = [&](std::initializer_list<const char*> words) {
    std::vector<int> out;
    for (const char* w : words) out.push_back(v.Id(w));
    return out;
  };
  EXPECT_EQ(CompositionalScore(v, ids({"good"})), 1.0);
  EXPECT_EQ(CompositionalScore(v, ids({"not", "good"})), -1.0);
  EXPECT_EQ(CompositionalScore(v, ids({"not", "not", "good"})), 1.0);
  EXPECT_EQ(CompositionalScore(v, ids({"very", "great"})), 4.0);
  EXPECT_EQ(CompositionalScore(v, ids({"not", "bad"})), 1.0);
  EXPECT_EQ(CompositionalScore(v, ids({"not", "the", "good"})), 1.0);
  EXPECT_EQ(CompositionalScore(v, ids({"good", "and", "not", "awful"})), 3.0);
  EXPECT_THROW(v.Id("excellent"), InvalidArgument);
}

TEST(NegationGrammarTest, LabelsFollowTheScore) {
  const NegationData d = MakeNegationSentiment(100, Vocabulary(), 4);
  ASSERT_EQ(d.data.size(), 100);
  for (size_t i = 0; i < d.sentences.size(); ++i) {
    const Sentence& s = d.sentences[i];
    EXPECT_NE(s.score, 0.0);
    EXPECT_EQ(s.score, CompositionalScore(d.vocab, s.tokens));
    EXPECT_EQ(d.data.labels[i], s.score > 0 ? 1 : 0);
    const Tensor x = EncodeTokens(s.tokens, 14, d.vocab.size());
    const auto row = d.data.inputs.data().subspan(i * x.numel(), x.numel());
    EXPECT_TRUE(std::equal(row.begin(), row.end(), x.data().begin()));
  }
}

TEST(MotifTaskTest, TargetsAndLabelsAgree) {
  const net::Dataset d = MakeMotifTask(40, 64, 9);
  ASSERT_EQ(d.inputs.shape(), (Shape{40, 64}));
  for (int64_t i = 0; i < 40; ++i) {
    if (d.labels[i] == 0) {
      EXPECT_EQ(d.targets[i], 0.0);
    } else {
      EXPECT_GE(d.targets[i], 0.5);
      EXPECT_LE(d.targets[i], 2.0);
    }
  }
  EXPECT_THROW(MakeMotifTask(4, 48, 0), InvalidArgument);
}

TEST(ReportTest, FormatDoubleRoundTrips) {
  for (double v : {0.1, 1.0 / 3.0, -2.5e-300, 123456789.0, 0.0}) {
    const std::string s = FormatDouble(v);
    double back = 0.0;
    std::from_chars(s.data(), s.data() + s.size(), back);
    EXPECT_EQ(back, v) << s;
  }
}

TEST(ReportTest, CsvIsLongFormat) {
  Table t{"acc", {"seed", "value"}, {{int64_t{1}, 0.5}, {int64_t{2}, std::string("x")}}};
  EXPECT_EQ(TableCsv({t}),
            "table,row,column,value\nacc,0,seed,1\nacc,0,value,0.5\nacc,1,seed,2\nacc,1,value,x\n");
}

TEST(ReportTest, ConfigHashIsStableAndSensitive) {
  const nlohmann::json a = {{"lambda", 1.0}}, b = {{"lambda", 2.0}};
  EXPECT_EQ(ConfigHash(a), ConfigHash(nlohmann::json::parse(a.dump())));
  EXPECT_NE(ConfigHash(a), ConfigHash(b));
  EXPECT_EQ(ConfigHash(a).size(), 16u);
}

TEST(ReportTest, EmptyReportStillWritesValidFiles) {
  const auto dir = std::filesystem::temp_directory_path() / "cdlab_empty_report";
  std::filesystem::remove_all(dir);
  Report r;
  r.kind = "empty";
  EmitReport(r, dir.string());
  std::ifstream f(dir / "metrics.json");
  const auto j = nlohmann::json::parse(f);
  EXPECT_EQ(j.at("schema"), kReportSchema);
  EXPECT_TRUE(std::filesystem::exists(dir / "metrics.csv"));
  EXPECT_TRUE(std::filesystem::exists(dir / "config.json"));
  std::filesystem::remove_all(dir);
}

TEST(ReportTest, UnwritableDirectoryIsAnIoError) {
  Report r;
  try {
    EmitReport(r, "/proc/cdlab/forbidden");
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), "io_error");
  }
}

TEST(ExperimentConfigTest, UnknownKeysAreRejected) {
  EXPECT_THROW(FrequencyConfigFromJson({{"n_dataset", 3}}), InvalidArgument);
  const auto c = FrequencyConfigFromJson({{"n_datasets", 3}});
  EXPECT_EQ(c.n_datasets, 3);
  EXPECT_EQ(c.signal_length, FrequencyConfig().signal_length);
}

TEST(DatasetJsonTest, RoundTripAndErrors) {
  net::Dataset d;
  d.inputs = Tensor({2, 3}, {1, 2, 3, 4, 5, 6});
  d.labels = {0, 1};
  d.targets = {0.25, -1.0};
  const net::Dataset back = net::DatasetFromJson(net::DatasetToJson(d));
  EXPECT_EQ(back.inputs.shape(), d.inputs.shape());
  EXPECT_EQ(back.inputs.ToVector(), d.inputs.ToVector());
  EXPECT_EQ(back.labels, d.labels);
  EXPECT_EQ(back.targets, d.targets);
  auto j = net::DatasetToJson(d);
  j["version"] = 2;
  EXPECT_THROW(net::DatasetFromJson(j), VersionMismatchError);
  j = net::DatasetToJson(d);
  j["labels"] = {1};
  EXPECT_THROW(net::DatasetFromJson(j), ShapeInconsistencyError);
  EXPECT_THROW(net::TensorFromJson({{"shape", {2, 2}}, {"data", {1, 2, 3}}}), ModelFormatError);
}

TEST(TrainConfigJsonTest, ScopeRoundTrips) {
  cdep::TrainConfig c;
  c.scope = cdep::ExplanationScope::kAllClasses;
  EXPECT_EQ(cdep::TrainConfigFromJson(cdep::TrainConfigToJson(c)).scope,
            cdep::ExplanationScope::kAllClasses);
  EXPECT_THROW(cdep::TrainConfigFromJson({{"scope", "some-classes"}}), InvalidArgument);
}

// Every hidden ReLU is off, so both bias sides of the last layer vanish; the
// full group must still own the whole logit.
TEST(CdBiasTest, FullMaskWithDeadReluKeepsGammaZero) {
  net::Architecture arch;
  arch.input_shape = {3};
  arch.num_classes = 2;
  arch.layers = {{net::LayerKind::kLinear, 4}, {net::LayerKind::kRelu},
                 {net::LayerKind::kLinear, 2}};
  net::Network n = net::InitRandom(arch, 1);
  n.layers[0].params[0] = Tensor::Full({4, 3}, 1.0);
  n.layers[0].params[1] = Tensor::Full({4}, -10.0);
  const Tensor x({3}, {0.1, 0.2, 0.3});
  const Tensor logits = net::Logits(n, net::AddBatchAxis(x));
  for (int c = 0; c < 2; ++c) {
    const cd::CdScore full = cd::ComputeCdScore(n, x, Tensor::Full({3}, 1.0), c);
    EXPECT_EQ(full.gamma_logit, 0.0);
    EXPECT_EQ(full.beta_logit, logits[c]);
    EXPECT_EQ(cd::ComputeCdScore(n, x, Tensor::Zeros({3}), c).beta_logit, 0.0);
  }
}

}  // namespace
}  // namespace cdlab::bench
