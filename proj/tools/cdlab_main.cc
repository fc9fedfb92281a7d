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

// Command-line front end: attribution, hierarchies, transformed-space scores,
// penalized training, wavelet distillation and the synthetic harnesses.

#include <algorithm>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "cdlab/acd/hierarchy.h"
#include "cdlab/awd/distill.h"
#include "cdlab/awd/dwt.h"
#include "cdlab/bench/experiments.h"
#include "cdlab/bench/report.h"
#include "cdlab/cd/cd.h"
#include "cdlab/cdep/trainer.h"
#include "cdlab/errors.h"
#include "cdlab/net/dataset.h"
#include "cdlab/net/model_io.h"
#include "cdlab/trim/transforms.h"
#include "json.hpp"

namespace {

using nlohmann::json;
using namespace cdlab;

struct Common {
  std::string config_path;
  std::vector<std::string> sets;
  std::optional<uint64_t> seed;
  std::string out = "out";
};

void AddCommon(CLI::App* app, Common& c) {
  app->add_option("--config", c.config_path, "JSON config file");
  app->add_option("--set", c.sets, "Override a config field: key=value (dotted keys nest)");
  app->add_option("--seed", c.seed, "Random seed");
  app->add_option("--out", c.out, "Output directory")->capture_default_str();
}

json ReadJsonFile(const std::string& path) {
  std::ifstream f(path);
  if (!f) throw IoError("cannot open " + path);
  try {
    return json::parse(f);
  } catch (const json::parse_error& e) {
    throw InvalidArgument(path + ": " + e.what());
  }
}

void WriteText(const std::string& path, const std::string& text) {
  std::ofstream f(path, std::ios::binary);
  if (!f) throw IoError("cannot open " + path + " for writing");
  f << text;
  if (!f) throw IoError("failed writing " + path);
}

// File config, then --set overrides, then --seed.
json LoadConfig(const Common& c) {
  json cfg = c.config_path.empty() ? json::object() : ReadJsonFile(c.config_path);
  if (!cfg.is_object()) throw InvalidArgument("config must be a JSON object");
  for (const std::string& s : c.sets) {
    const auto eq = s.find('=');
    if (eq == std::string::npos || eq == 0) {
      throw InvalidArgument("--set expects key=value, got '" + s + "'");
    }
    const std::string value = s.substr(eq + 1);
    json parsed = json::parse(value, nullptr, false);
    if (parsed.is_discarded()) parsed = value;
    json::json_pointer ptr("/" + [&] {
      std::string k = s.substr(0, eq);
      for (char& ch : k) if (ch == '.') ch = '/';
      return k;
    }());
    cfg[ptr] = parsed;
  }
  if (c.seed) cfg["seed"] = *c.seed;
  return cfg;
}

void RejectUnknown(const json& cfg, const std::vector<std::string>& known) {
  for (const auto& [key, value] : cfg.items()) {
    if (std::find(known.begin(), known.end(), key) == known.end()) {
      throw InvalidArgument("unknown config key '" + key + "'");
    }
  }
}

Tensor LoadInput(const std::string& path, const net::Network& net) {
  Tensor x = net::TensorFromJson(ReadJsonFile(path));
  if (x.shape() != net.input_shape) {
    throw ShapeError("input " + ShapeToString(x.shape()) + " does not match model input " +
                     ShapeToString(net.input_shape));
  }
  return x;
}

// --- init-model -------------------------------------------------------------

int InitModel(const Common& c, const std::string& arch_path, const std::string& model_path) {
  json cfg = LoadConfig(c);
  RejectUnknown(cfg, {"architecture", "seed"});
  if (!arch_path.empty()) cfg["architecture"] = ReadJsonFile(arch_path);
  if (!cfg.contains("architecture")) throw InvalidArgument("init-model needs --arch");
  const uint64_t seed = cfg.value("seed", uint64_t{0});
  const auto arch = net::ArchitectureFromJson(cfg.at("architecture").dump());
  const auto net = net::InitRandom(arch, seed);
  const auto parent = std::filesystem::path(model_path).parent_path();
  if (!parent.empty()) std::filesystem::create_directories(parent);
  net::SaveModel(net, model_path);
  bench::Report rep;
  rep.kind = "init-model";
  rep.seed = seed;
  rep.config = cfg;
  bench::Table t{"model", {"layers", "num_classes", "parameters"}, {}};
  int64_t params = 0;
  for (const auto& layer : net.layers) {
    for (const auto& p : layer.params) params += p.numel();
  }
  t.rows.push_back({int64_t(net.layers.size()), net.num_classes, params});
  rep.tables = {t};
  bench::EmitReport(rep, c.out);
  return 0;
}

// --- attribute --------------------------------------------------------------

int Attribute(const Common& c, const std::string& model_path, const std::string& input_path,
              const std::string& group_path) {
  json cfg = LoadConfig(c);
  RejectUnknown(cfg, {"class", "indices", "seed"});
  const auto net = net::LoadModel(model_path);
  const Tensor x = LoadInput(input_path, net);
  Tensor mask;
  if (!group_path.empty()) {
    mask = net::TensorFromJson(ReadJsonFile(group_path));
  } else if (cfg.contains("indices")) {
    std::vector<double> m(x.numel(), 0.0);
    for (int64_t i : cfg.at("indices").get<std::vector<int64_t>>()) {
      if (i < 0 || i >= x.numel()) throw InvalidArgument("index " + std::to_string(i) + " out of range");
      m[i] = 1.0;
    }
    mask = Tensor(x.shape(), std::move(m));
  } else {
    throw InvalidArgument("attribute needs --group or --set indices=[...]");
  }
  const int cls = cfg.value("class", 0);
  const auto s = cd::ComputeCdScore(net, x, mask, cls);
  bench::Report rep;
  rep.kind = "attribute";
  rep.seed = cfg.value("seed", uint64_t{0});
  rep.config = cfg;
  rep.tables = {{"attribution",
                 {"class", "beta", "gamma", "logit"},
                 {{int64_t(cls), s.beta_logit, s.gamma_logit, s.beta_logit + s.gamma_logit}}}};
  rep.summary = {{"beta", s.beta_logit}, {"gamma", s.gamma_logit}};
  bench::EmitReport(rep, c.out);
  return 0;
}

// --- acd --------------------------------------------------------------------

acd::Adjacency AdjacencyFor(const Tensor& x) {
  const Shape& s = x.shape();
  if (s.size() == 1) return acd::Adjacency::Chain(s[0]);
  if (s.size() == 3) return acd::Adjacency::Grid(s);
  if (s.size() == 2) {
    int64_t len = 0;
    const auto d = x.data();
    for (int64_t t = 0; t < s[0]; ++t) {
      for (int64_t v = 0; v < s[1]; ++v) {
        if (d[t * s[1] + v] != 0.0) len = t + 1;
      }
    }
    return acd::Adjacency::Sequence(s, std::max<int64_t>(len, 1));
  }
  throw ShapeError("acd: unsupported input shape " + ShapeToString(s));
}

int Acd(const Common& c, const std::string& model_path, const std::string& input_path) {
  json cfg = LoadConfig(c);
  RejectUnknown(cfg, {"class", "k_percent", "max_levels", "labels", "seed"});
  const auto net = net::LoadModel(model_path);
  const Tensor x = LoadInput(input_path, net);
  const auto adj = AdjacencyFor(x);
  acd::HierarchyOptions opt;
  opt.k_percent = cfg.value("k_percent", opt.k_percent);
  opt.max_levels = cfg.value("max_levels", opt.max_levels);
  const int cls = cfg.value("class", 0);
  const auto h = acd::BuildHierarchy(net, x, cls, adj, opt);
  std::filesystem::create_directories(c.out);
  WriteText(c.out + "/hierarchy.json", acd::HierarchyToJson(h, adj) + "\n");
  std::vector<std::string> labels = cfg.value("labels", std::vector<std::string>());
  labels.resize(adj.num_units());
  for (int u = 0; u < adj.num_units(); ++u) {
    if (labels[u].empty()) labels[u] = std::to_string(u);
  }
  bench::Report rep;
  rep.kind = "acd";
  rep.seed = cfg.value("seed", uint64_t{0});
  rep.config = cfg;
  bench::Table t{"nodes", {"node", "level", "score", "units"}, {}};
  for (size_t i = 0; i < h.nodes.size(); ++i) {
    std::string units;
    for (int u : h.nodes[i].units) units += (units.empty() ? "" : " ") + std::to_string(u);
    t.rows.push_back({int64_t(i), int64_t(h.nodes[i].level), h.nodes[i].score, units});
  }
  rep.tables = {t};
  rep.summary = {{"levels", h.levels}, {"nodes", h.nodes.size()}};
  rep.box_plots.push_back({"hierarchy", bench::HierarchySvg(h, labels)});
  bench::EmitReport(rep, c.out);
  return 0;
}

// --- trim -------------------------------------------------------------------

Tensor NamedFilter(const json& f) {
  if (f.is_array()) return Tensor::Vector(f.get<std::vector<double>>());
  const std::string name = f.get<std::string>();
  if (name == "db5") return awd::Daubechies5Filter();
  if (name == "db2") return awd::Daubechies2Filter();
  if (name == "haar") return awd::HaarFilter();
  throw InvalidArgument("unknown filter '" + name + "'");
}

int Trim(const Common& c, const std::string& model_path, const std::string& input_path) {
  json cfg = LoadConfig(c);
  RejectUnknown(cfg,
                {"class", "transform", "method", "ig_steps", "filter", "levels", "bands", "seed"});
  const auto net = net::LoadModel(model_path);
  const Tensor x = LoadInput(input_path, net);
  const int cls = cfg.value("class", 0);
  const std::string kind = cfg.value("transform", std::string("dft"));
  const auto method = trim::AttributionMethodFromName(cfg.value("method", std::string("cd")));
  const int steps = cfg.value("ig_steps", 256);
  std::optional<trim::TransformSpec> t;
  std::vector<Tensor> masks;
  std::vector<std::string> names;
  std::vector<double> centers;
  if (kind == "dft") {
    t = trim::TransformSpec::Fourier(x.shape());
    if (cfg.contains("bands")) {
      for (const auto& b : cfg.at("bands")) {
        const double lo = b.at(0).get<double>(), hi = b.at(1).get<double>();
        masks.push_back(trim::BandMask(x.shape(), lo, hi));
        names.push_back(bench::FormatDouble(lo) + "-" + bench::FormatDouble(hi));
        centers.push_back(0.5 * (lo + hi));
      }
    } else {
      if (x.rank() != 1) throw InvalidArgument("trim: give bands for multi-axis inputs");
      for (int64_t f = 0; f <= x.shape()[0] / 2; ++f) {
        masks.push_back(trim::FrequencyBinMask(x.shape()[0], f));
        names.push_back(std::to_string(f));
        centers.push_back(static_cast<double>(f));
      }
    }
  } else if (kind == "dwt") {
    if (x.rank() != 1) throw InvalidArgument("trim: dwt needs a 1-d input");
    const int levels = cfg.value("levels", 4);
    t = trim::TransformSpec::Wavelet(x.shape()[0], Var(NamedFilter(cfg.value("filter", json("db5")))),
                                     levels);
    const auto bounds = awd::ScaleBounds(x.shape()[0], levels);
    for (size_t k = 0; k < bounds.size(); ++k) {
      std::vector<double> m(x.numel(), 0.0);
      for (int64_t i = 0; i < bounds[k].second; ++i) m[bounds[k].first + i] = 1.0;
      masks.emplace_back(x.shape(), std::move(m));
      names.push_back(k == 0 ? "approx" : "detail_" + std::to_string(levels + 1 - k));
      centers.push_back(static_cast<double>(k));
    }
  } else if (kind == "identity") {
    t = trim::TransformSpec::Identity(x.shape());
    for (int64_t i = 0; i < x.numel(); ++i) {
      std::vector<double> m(x.numel(), 0.0);
      m[i] = 1.0;
      masks.emplace_back(x.shape(), std::move(m));
      names.push_back(std::to_string(i));
      centers.push_back(static_cast<double>(i));
    }
  } else {
    throw InvalidArgument("trim: unknown transform '" + kind + "' (dft, dwt or identity)");
  }
  std::vector<double> scores;
  if (method == trim::AttributionMethod::kCd) {
    for (const auto& s : trim::TrimCdScores(net, *t, x, masks, cls)) scores.push_back(s.beta_logit);
  } else {
    const Tensor attr = trim::TrimIntegratedGradients(net, *t, x, cls, steps);
    for (const Tensor& m : masks) {
      double total = 0.0;
      for (int64_t k = 0; k < attr.numel(); ++k) total += m[k] * attr[k];
      scores.push_back(total);
    }
  }
  bench::Report rep;
  rep.kind = "trim";
  rep.seed = cfg.value("seed", uint64_t{0});
  rep.config = cfg;
  bench::Table table{"groups", {"group", "score"}, {}};
  bench::Series series{cfg.value("method", std::string("cd")), centers, scores};
  for (size_t g = 0; g < masks.size(); ++g) table.rows.push_back({names[g], scores[g]});
  rep.tables = {table};
  rep.line_plots.push_back({"scores", "TRIM scores (" + kind + ")", "group", "score", {series}});
  bench::EmitReport(rep, c.out);
  return 0;
}

// --- train-cdep -------------------------------------------------------------

int TrainCdep(const Common& c, const std::string& model_path, const std::string& data_path) {
  json cfg = LoadConfig(c);
  auto config = cdep::TrainConfigFromJson(cfg);
  const auto init = net::LoadModel(model_path);
  // "groups": flat input indices whose contribution is pushed toward zero.
  for (const auto& g : cfg.value("groups", json::array())) {
    std::vector<double> mask(NumElements(init.input_shape), 0.0);
    for (int64_t i : g.get<std::vector<int64_t>>()) {
      if (i < 0 || i >= static_cast<int64_t>(mask.size())) {
        throw InvalidArgument("train-cdep: group index " + std::to_string(i) + " out of range");
      }
      mask[i] = 1.0;
    }
    config.explanations.push_back({-1, Tensor(init.input_shape, std::move(mask)), 0.0});
  }
  const auto data = net::DatasetFromJson(ReadJsonFile(data_path));
  const auto result = cdep::Train(init, data, config);
  std::filesystem::create_directories(c.out);
  net::SaveModel(result.net, c.out + "/model.json");
  bench::Report rep;
  rep.kind = "train-cdep";
  rep.seed = config.seed;
  rep.config = cdep::TrainConfigToJson(config);
  bench::Table t{"history", {"epoch", "prediction", "explanation"}, {}};
  bench::Series pred{"prediction", {}, {}}, expl{"explanation", {}, {}};
  for (size_t e = 0; e < result.history.size(); ++e) {
    t.rows.push_back({int64_t(e), result.history[e].prediction, result.history[e].explanation});
    pred.x.push_back(static_cast<double>(e));
    pred.y.push_back(result.history[e].prediction);
    expl.x.push_back(static_cast<double>(e));
    expl.y.push_back(result.history[e].explanation);
  }
  rep.tables = {t};
  if (!data.labels.empty()) rep.summary["train_accuracy"] = net::Accuracy(result.net, data);
  rep.line_plots.push_back({"loss_history", "Training loss", "epoch", "loss", {pred, expl}});
  bench::EmitReport(rep, c.out);
  return 0;
}

// --- distill-awd ------------------------------------------------------------

int DistillAwd(const Common& c, const std::string& model_path, const std::string& data_path) {
  json cfg = LoadConfig(c);
  const auto config = awd::AwdConfigFromJson(cfg);
  const auto teacher = net::LoadModel(model_path);
  const auto data = net::DatasetFromJson(ReadJsonFile(data_path));
  if (data.inputs.rank() != 2) throw ShapeError("distill-awd: data inputs must be [m, L]");
  const auto result = awd::Distill(teacher, data.inputs, config);
  std::filesystem::create_directories(c.out);
  json filter = awd::FilterToJson(result.filter, config.levels);
  filter["config"] = awd::AwdConfigToJson(config);
  WriteText(c.out + "/filter.json", filter.dump(2) + "\n");
  std::string csv = "iteration,reconstruction,wavelet,interpretation,total\n";
  for (size_t i = 0; i < result.history.size(); ++i) {
    const auto& h = result.history[i];
    csv += std::to_string(i) + "," + bench::FormatDouble(h.reconstruction) + "," +
           bench::FormatDouble(h.wavelet) + "," + bench::FormatDouble(h.interpretation) + "," +
           bench::FormatDouble(h.total) + "\n";
  }
  WriteText(c.out + "/loss_history.csv", csv);
  bench::Report rep;
  rep.kind = "distill-awd";
  rep.seed = config.seed;
  rep.config = awd::AwdConfigToJson(config);
  const auto& k = result.constraints;
  const auto& last = result.history.back();
  rep.tables = {{"result",
                 {"reconstruction", "wavelet", "interpretation", "total", "constraint_total",
                  "constraint_residual"},
                 {{last.reconstruction, last.wavelet, last.interpretation, last.total, k.Total(),
                   k.max_residual}}}};
  rep.summary = {{"total", last.total}, {"constraint_residual", k.max_residual}};
  bench::EmitReport(rep, c.out);
  return 0;
}

// --- simulate ---------------------------------------------------------------

int Simulate(const Common& c, const std::string& task, bool data_only) {
  json cfg = LoadConfig(c);
  if (!data_only) {
    bench::EmitReport(bench::RunExperiment(task, cfg), c.out);
    return 0;
  }
  std::filesystem::create_directories(c.out);
  auto save = [&](const std::string& name, const net::Dataset& d) {
    WriteText(c.out + "/" + name, net::DatasetToJson(d).dump() + "\n");
  };
  if (task == "frequency") {
    const auto fc = bench::FrequencyConfigFromJson(cfg);
    const auto t = bench::SimulateFrequencyTask(fc.n_samples, fc.signal_length, fc.seed);
    save("data.json", t.data);
    WriteText(c.out + "/planted.json", json{{"planted", t.planted}, {"seed", fc.seed}}.dump() + "\n");
  } else if (task == "color") {
    const auto cc = bench::ColorBiasConfigFromJson(cfg);
    const auto d = bench::MakeColorBiasDataset(cc.n_per_class, cc.size, cc.n_classes, cc.seed);
    save("train.json", d.train);
    save("test.json", d.test);
  } else if (task == "negation") {
    const auto nc = bench::NegationConfigFromJson(cfg);
    const auto d = bench::MakeNegationSentiment(nc.n_train, bench::Vocabulary(), nc.seed);
    save("data.json", d.data);
    json sentences = json::array();
    const auto words = d.vocab.Words();
    for (const auto& s : d.sentences) {
      std::string text;
      for (int t : s.tokens) text += (text.empty() ? "" : " ") + words[t];
      sentences.push_back({{"text", text}, {"score", s.score}});
    }
    WriteText(c.out + "/sentences.json", sentences.dump(1) + "\n");
  } else if (task == "awd") {
    const auto mc = bench::MotifConfigFromJson(cfg);
    save("data.json", bench::MakeMotifTask(mc.n_train, mc.length, mc.seed));
  } else {
    throw InvalidArgument("unknown experiment '" + task + "'");
  }
  return 0;
}

void PrintError(const std::string& code, const std::string& message) {
  std::cerr << json{{"error", {{"code", code}, {"message", message}}}}.dump() << "\n";
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"cdlab: contextual decomposition toolkit"};
  app.require_subcommand(1);
  Common common;
  std::string model, input, group, data, arch, task;
  bool data_only = false;

  auto* init = app.add_subcommand("init-model", "Write a randomly initialized model");
  AddCommon(init, common);
  init->add_option("--arch", arch, "Architecture JSON file");
  init->add_option("--model", model, "Output model path")->required();

  auto* attribute = app.add_subcommand("attribute", "CD score of a feature group");
  AddCommon(attribute, common);
  attribute->add_option("--model", model)->required();
  attribute->add_option("--input", input, "Tensor JSON of one sample")->required();
  attribute->add_option("--group", group, "Tensor JSON 0/1 mask");

  auto* acd_cmd = app.add_subcommand("acd", "Agglomerative CD hierarchy");
  AddCommon(acd_cmd, common);
  acd_cmd->add_option("--model", model)->required();
  acd_cmd->add_option("--input", input)->required();

  auto* trim_cmd = app.add_subcommand("trim", "Scores in a transformed space");
  AddCommon(trim_cmd, common);
  trim_cmd->add_option("--model", model)->required();
  trim_cmd->add_option("--input", input)->required();

  auto* train = app.add_subcommand("train-cdep", "Train with the explanation penalty");
  AddCommon(train, common);
  train->add_option("--model", model, "Initial model")->required();
  train->add_option("--data", data, "Dataset JSON")->required();

  auto* distill = app.add_subcommand("distill-awd", "Distill a wavelet from a model");
  AddCommon(distill, common);
  distill->add_option("--model", model, "Teacher model")->required();
  distill->add_option("--data", data, "Dataset JSON with inputs [m, L]")->required();

  auto* simulate = app.add_subcommand("simulate", "Run a synthetic harness");
  AddCommon(simulate, common);
  simulate->add_option("task", task, "frequency, color, negation or awd")->required();
  simulate->add_flag("--data-only", data_only, "Only write the generated dataset");

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForAllHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    PrintError("usage", e.what());
    return 2;
  }

  try {
    if (*init) return InitModel(common, arch, model);
    if (*attribute) return Attribute(common, model, input, group);
    if (*acd_cmd) return Acd(common, model, input);
    if (*trim_cmd) return Trim(common, model, input);
    if (*train) return TrainCdep(common, model, data);
    if (*distill) return DistillAwd(common, model, data);
    if (*simulate) return Simulate(common, task, data_only);
  } catch (const Error& e) {
    PrintError(e.code(), e.what());
    return 1;
  } catch (const json::exception& e) {
    PrintError("invalid_argument", e.what());
    return 1;
  } catch (const std::exception& e) {
    PrintError("internal", e.what());
    return 1;
  }
  return 0;
}
