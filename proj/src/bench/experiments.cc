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

#include "cdlab/bench/experiments.h"

#include <cmath>
#include <set>

#include "cdlab/awd/dwt.h"
#include "cdlab/errors.h"

namespace cdlab::bench {

namespace {

using nlohmann::json;

void RejectUnknown(const json& j, const json& known, const std::string& what) {
  if (!j.is_object()) throw InvalidArgument(what + " config must be a JSON object");
  for (const auto& [key, value] : j.items()) {
    if (!known.contains(key)) throw InvalidArgument(what + " config: unknown key '" + key + "'");
  }
}

cdep::TrainConfig MergeTrain(const cdep::TrainConfig& base, const json& j) {
  json merged = cdep::TrainConfigToJson(base);
  merged.erase("explanations");
  RejectUnknown(j, merged, "training");
  merged.update(j);
  return cdep::TrainConfigFromJson(merged);
}

awd::AwdConfig MergeAwd(const awd::AwdConfig& base, const json& j) {
  json merged = awd::AwdConfigToJson(base);
  RejectUnknown(j, merged, "awd");
  merged.update(j);
  return awd::AwdConfigFromJson(merged);
}

Cell D(double v) { return v; }
Cell I(int64_t v) { return v; }

}  // namespace

json FrequencyConfigToJson(const FrequencyConfig& c) {
  return {{"n_datasets", c.n_datasets},   {"n_samples", c.n_samples},
          {"signal_length", c.signal_length}, {"hidden", c.hidden},
          {"epochs", c.epochs},           {"learning_rate", c.learning_rate},
          {"momentum", c.momentum},       {"batch_size", c.batch_size},
          {"eval_samples", c.eval_samples}, {"ig_steps", c.ig_steps},
          {"methods", c.methods},         {"seed", c.seed}};
}

FrequencyConfig FrequencyConfigFromJson(const json& j) {
  FrequencyConfig c;
  RejectUnknown(j, FrequencyConfigToJson(c), "frequency");
  c.n_datasets = j.value("n_datasets", c.n_datasets);
  c.n_samples = j.value("n_samples", c.n_samples);
  c.signal_length = j.value("signal_length", c.signal_length);
  c.hidden = j.value("hidden", c.hidden);
  c.epochs = j.value("epochs", c.epochs);
  c.learning_rate = j.value("learning_rate", c.learning_rate);
  c.momentum = j.value("momentum", c.momentum);
  c.batch_size = j.value("batch_size", c.batch_size);
  c.eval_samples = j.value("eval_samples", c.eval_samples);
  c.ig_steps = j.value("ig_steps", c.ig_steps);
  c.methods = j.value("methods", c.methods);
  c.seed = j.value("seed", c.seed);
  return c;
}

json ColorBiasConfigToJson(const ColorBiasConfig& c) {
  json v = cdep::TrainConfigToJson(c.vanilla), p = cdep::TrainConfigToJson(c.cdep);
  v.erase("explanations");
  p.erase("explanations");
  return {{"n_per_class", c.n_per_class}, {"size", c.size},
          {"n_classes", c.n_classes},     {"hidden", c.hidden},
          {"architecture", c.architecture}, {"channels", c.channels},
          {"seeds", c.seeds},             {"seed", c.seed},
          {"vanilla", v},                 {"cdep", p}};
}

ColorBiasConfig ColorBiasConfigFromJson(const json& j) {
  ColorBiasConfig c = DefaultColorBiasConfig();
  RejectUnknown(j, ColorBiasConfigToJson(c), "color");
  c.n_per_class = j.value("n_per_class", c.n_per_class);
  c.size = j.value("size", c.size);
  c.n_classes = j.value("n_classes", c.n_classes);
  c.hidden = j.value("hidden", c.hidden);
  c.architecture = j.value("architecture", c.architecture);
  c.channels = j.value("channels", c.channels);
  c.seeds = j.value("seeds", c.seeds);
  c.seed = j.value("seed", c.seed);
  if (j.contains("vanilla")) c.vanilla = MergeTrain(c.vanilla, j.at("vanilla"));
  if (j.contains("cdep")) c.cdep = MergeTrain(c.cdep, j.at("cdep"));
  return c;
}

json NegationConfigToJson(const NegationConfig& c) {
  json t = cdep::TrainConfigToJson(c.train);
  t.erase("explanations");
  return {{"n_train", c.n_train}, {"n_test", c.n_test}, {"hidden", c.hidden},
          {"seed", c.seed},       {"train", t}};
}

NegationConfig NegationConfigFromJson(const json& j) {
  NegationConfig c = DefaultNegationConfig();
  RejectUnknown(j, NegationConfigToJson(c), "negation");
  c.n_train = j.value("n_train", c.n_train);
  c.n_test = j.value("n_test", c.n_test);
  c.hidden = j.value("hidden", c.hidden);
  c.seed = j.value("seed", c.seed);
  if (j.contains("train")) c.train = MergeTrain(c.train, j.at("train"));
  return c;
}

json MotifConfigToJson(const MotifConfig& c) {
  json t = cdep::TrainConfigToJson(c.teacher);
  t.erase("explanations");
  return {{"n_train", c.n_train},
          {"n_test", c.n_test},
          {"length", c.length},
          {"hidden", c.hidden},
          {"distill_signals", c.distill_signals},
          {"per_scale", c.per_scale},
          {"alphas", c.alphas},
          {"seeds", c.seeds},
          {"seed", c.seed},
          {"teacher", t},
          {"awd", awd::AwdConfigToJson(c.awd)}};
}

MotifConfig MotifConfigFromJson(const json& j) {
  MotifConfig c = DefaultMotifConfig();
  RejectUnknown(j, MotifConfigToJson(c), "awd");
  c.n_train = j.value("n_train", c.n_train);
  c.n_test = j.value("n_test", c.n_test);
  c.length = j.value("length", c.length);
  c.hidden = j.value("hidden", c.hidden);
  c.distill_signals = j.value("distill_signals", c.distill_signals);
  c.per_scale = j.value("per_scale", c.per_scale);
  c.alphas = j.value("alphas", c.alphas);
  c.seeds = j.value("seeds", c.seeds);
  c.seed = j.value("seed", c.seed);
  if (j.contains("teacher")) c.teacher = MergeTrain(c.teacher, j.at("teacher"));
  if (j.contains("awd")) c.awd = MergeAwd(c.awd, j.at("awd"));
  return c;
}

Report FrequencyReport(const FrequencyConfig& c, const FrequencyResult& r) {
  Report rep;
  rep.kind = "frequency-sim";
  rep.seed = c.seed;
  rep.config = FrequencyConfigToJson(c);
  Table summary{"error_rate", {"method", "error_pct", "stderr_pct", "datasets", "skipped"}, {}};
  for (size_t k = 0; k < r.methods.size(); ++k) {
    summary.rows.push_back({r.methods[k], D(r.error_pct[k]), D(r.stderr_pct[k]),
                            I(static_cast<int64_t>(r.rows.size())), I(r.skipped)});
    rep.summary[r.methods[k]] = {{"error_pct", r.error_pct[k]}, {"stderr_pct", r.stderr_pct[k]}};
  }
  rep.summary["skipped"] = r.skipped;
  Table rows{"datasets", {"dataset", "seed", "planted", "train_accuracy", "skipped"}, {}};
  for (const auto& m : r.methods) rows.columns.push_back("recovered_" + m);
  for (const auto& row : r.rows) {
    std::vector<Cell> cells = {I(row.dataset), std::to_string(row.seed), I(row.planted),
                               D(row.train_accuracy), I(row.skipped ? 1 : 0)};
    for (size_t k = 0; k < r.methods.size(); ++k) {
      cells.push_back(I(row.skipped ? -1 : row.recovered[k]));
    }
    rows.rows.push_back(std::move(cells));
  }
  rep.tables = {summary, rows};
  for (const auto& row : r.rows) {
    if (row.skipped) continue;
    LinePlot plot{"attribution_vs_frequency", "Attribution by frequency (dataset " +
                                                  std::to_string(row.dataset) + ", planted " +
                                                  std::to_string(row.planted) + ")",
                  "frequency", "normalized |score|", {}};
    for (size_t k = 0; k < r.methods.size(); ++k) {
      Series s{r.methods[k], {}, {}};
      double peak = 0.0;
      for (double v : row.scores[k]) peak = std::max(peak, v);
      for (size_t f = 0; f < row.scores[k].size(); ++f) {
        s.x.push_back(static_cast<double>(f));
        s.y.push_back(peak > 0 ? row.scores[k][f] / peak : 0.0);
      }
      plot.series.push_back(std::move(s));
    }
    rep.line_plots.push_back(std::move(plot));
    break;
  }
  return rep;
}

Report ColorBiasReport(const ColorBiasConfig& c, const ColorBiasResult& r) {
  Report rep;
  rep.kind = "color-bias";
  rep.seed = c.seed;
  rep.config = ColorBiasConfigToJson(c);
  Table t{"accuracy",
          {"seed", "vanilla_train", "vanilla_test", "cdep_train", "cdep_test",
           "lambda_zero_identical"},
          {}};
  for (const auto& row : r.rows) {
    t.rows.push_back({std::to_string(row.seed), D(row.vanilla_train), D(row.vanilla_test),
                      D(row.cdep_train), D(row.cdep_test), I(row.lambda_zero_identical)});
  }
  rep.tables = {t};
  rep.summary = {{"vanilla_test_mean", r.vanilla_test_mean},
                 {"cdep_test_mean", r.cdep_test_mean},
                 {"lambda_zero_identical", r.lambda_zero_identical}};
  return rep;
}

Report NegationReport(const NegationConfig& c, const NegationResult& r) {
  Report rep;
  rep.kind = "negation-sentiment";
  rep.seed = c.seed;
  rep.config = NegationConfigToJson(c);
  rep.tables = {{"negation",
                 {"data_seed", "train_accuracy", "test_accuracy", "occurrences", "flipped",
                  "flip_rate", "context_flipped"},
                 {{std::to_string(r.data_seed), D(r.train_accuracy), D(r.test_accuracy),
                   I(r.occurrences), I(r.flipped), D(r.flip_rate), I(r.context_flipped)}}}};
  rep.summary = {{"train_accuracy", r.train_accuracy}, {"flip_rate", r.flip_rate}};
  return rep;
}

Report MotifReport(const MotifConfig& c, const MotifResult& r) {
  Report rep;
  rep.kind = "awd-distill";
  rep.seed = c.seed;
  rep.config = MotifConfigToJson(c);
  Table t{"filters",
          {"seed", "teacher_r2", "initial_compression", "learned_compression", "initial_r2",
           "learned_r2", "constraint_residual"},
          {}};
  double ic = 0, lc = 0, ir = 0, lr = 0;
  for (const auto& row : r.rows) {
    t.rows.push_back({std::to_string(row.seed), D(row.teacher_r2), D(row.initial.compression),
                      D(row.learned.compression), D(row.initial.r2), D(row.learned.r2),
                      D(row.constraint_residual)});
    ic += row.initial.compression;
    lc += row.learned.compression;
    ir += row.initial.r2;
    lr += row.learned.r2;
  }
  const double n = r.rows.empty() ? 1.0 : static_cast<double>(r.rows.size());
  rep.tables = {t};
  rep.summary = {{"initial_compression_mean", ic / n}, {"learned_compression_mean", lc / n},
                 {"initial_r2_mean", ir / n},          {"learned_r2_mean", lr / n},
                 {"compression_wins", r.compression_wins}, {"r2_wins", r.r2_wins}};
  if (!r.rows.empty()) {
    LinePlot plot{"learned_filter", "Learned lowpass filter (first seed)", "tap", "h", {}};
    Series learned{"learned", {}, r.rows.front().filter.ToVector()};
    Series initial{"initial",
                   {},
                   (c.awd.init.defined() ? c.awd.init : awd::Daubechies5Filter()).ToVector()};
    for (size_t i = 0; i < learned.y.size(); ++i) learned.x.push_back(static_cast<double>(i));
    for (size_t i = 0; i < initial.y.size(); ++i) initial.x.push_back(static_cast<double>(i));
    plot.series = {initial, learned};
    rep.line_plots.push_back(std::move(plot));
  }
  return rep;
}

Report RunExperiment(const std::string& name, const json& config) {
  if (name == "frequency") {
    const auto c = FrequencyConfigFromJson(config);
    return FrequencyReport(c, RunFrequencyRecovery(c));
  }
  if (name == "color") {
    const auto c = ColorBiasConfigFromJson(config);
    return ColorBiasReport(c, RunColorBias(c));
  }
  if (name == "negation") {
    const auto c = NegationConfigFromJson(config);
    return NegationReport(c, RunNegation(c));
  }
  if (name == "awd") {
    const auto c = MotifConfigFromJson(config);
    return MotifReport(c, RunMotif(c));
  }
  throw InvalidArgument("unknown experiment '" + name +
                        "' (expected frequency, color, negation or awd)");
}

}  // namespace cdlab::bench
