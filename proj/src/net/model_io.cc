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

#include "cdlab/net/model_io.h"

#include <bit>
#include <boost/archive/iterators/base64_from_binary.hpp>
#include <boost/archive/iterators/binary_from_base64.hpp>
#include <boost/archive/iterators/transform_width.hpp>
#include <cctype>
#include <cmath>
#include <fstream>
#include <sstream>

#include "cdlab/errors.h"
#include "cdlab/random.h"
#include "json.hpp"

namespace cdlab::net {

namespace {

using nlohmann::json;
namespace bai = boost::archive::iterators;

using Base64Encode = bai::base64_from_binary<bai::transform_width<const char*, 6, 8>>;
using Base64Decode =
    bai::transform_width<bai::binary_from_base64<std::string::const_iterator>, 8, 6>;

json TensorToJson(const Tensor& t) {
  return json{{"shape", t.shape()}, {"data", EncodeDoubles(t.ToVector())}};
}

Tensor TensorFromJson(const json& j, const std::string& where) {
  if (!j.is_object() || !j.contains("shape") || !j.contains("data") || !j["shape"].is_array() ||
      !j["data"].is_string()) {
    throw ModelFormatError(where + ": tensor needs 'shape' array and 'data' string");
  }
  Shape shape;
  for (const auto& d : j["shape"]) {
    if (!d.is_number_integer() || d.get<int64_t>() <= 0) {
      throw ModelFormatError(where + ": shape entries must be positive integers");
    }
    shape.push_back(d.get<int64_t>());
  }
  std::vector<double> data = DecodeDoubles(j["data"].get<std::string>());
  if (static_cast<int64_t>(data.size()) != NumElements(shape)) {
    throw ShapeInconsistencyError(where + ": shape " + ShapeToString(shape) + " needs " +
                                  std::to_string(NumElements(shape)) + " values, found " +
                                  std::to_string(data.size()));
  }
  return Tensor(std::move(shape), std::move(data));
}

template <class T>
T Field(const json& j, const char* key, T fallback, const std::string& where) {
  if (!j.contains(key)) return fallback;
  try {
    return j.at(key).get<T>();
  } catch (const json::exception&) {
    throw ModelFormatError(where + ": field '" + key + "' has the wrong type");
  }
}

}  // namespace

std::string EncodeDoubles(const std::vector<double>& values) {
  std::string bytes(values.size() * 8, '\0');
  for (size_t i = 0; i < values.size(); ++i) {
    const uint64_t bits = std::bit_cast<uint64_t>(values[i]);
    for (int k = 0; k < 8; ++k) bytes[8 * i + k] = static_cast<char>((bits >> (8 * k)) & 0xff);
  }
  std::string out(Base64Encode(bytes.data()), Base64Encode(bytes.data() + bytes.size()));
  out.append((3 - bytes.size() % 3) % 3, '=');
  return out;
}

std::vector<double> DecodeDoubles(const std::string& text) {
  size_t end = text.size();
  size_t pad = 0;
  while (end > 0 && text[end - 1] == '=' && pad < 2) {
    --end;
    ++pad;
  }
  for (size_t i = 0; i < end; ++i) {
    const char c = text[i];
    if (!(std::isalnum(static_cast<unsigned char>(c)) || c == '+' || c == '/')) {
      throw ModelFormatError("invalid base64 character in weight data");
    }
  }
  std::string bytes;
  try {
    bytes.assign(Base64Decode(text.begin()), Base64Decode(text.begin() + end));
  } catch (const std::exception&) {
    throw ModelFormatError("invalid base64 weight data");
  }
  // transform_width can emit one trailing partial byte; drop it.
  bytes.resize(end * 6 / 8);
  if (bytes.size() % 8 != 0) {
    throw ShapeInconsistencyError("weight data holds " + std::to_string(bytes.size()) +
                                  " bytes, not a whole number of doubles");
  }
  std::vector<double> out(bytes.size() / 8);
  for (size_t i = 0; i < out.size(); ++i) {
    uint64_t bits = 0;
    for (int k = 0; k < 8; ++k) {
      bits |= static_cast<uint64_t>(static_cast<unsigned char>(bytes[8 * i + k])) << (8 * k);
    }
    out[i] = std::bit_cast<double>(bits);
  }
  return out;
}

std::string SaveModelJson(const Network& net) {
  json layers = json::array();
  for (const Layer& l : net.layers) {
    json jl{{"kind", LayerKindName(l.kind)}};
    switch (l.kind) {
      case LayerKind::kConv2d: jl["stride"] = l.stride; break;
      case LayerKind::kMaxPool2d:
        jl["window"] = l.window;
        jl["stride"] = l.stride;
        break;
      case LayerKind::kDropout: jl["rate"] = l.rate; break;
      case LayerKind::kLstm: jl["hidden"] = l.hidden; break;
      default: break;
    }
    json params = json::array();
    for (const Tensor& p : l.params) params.push_back(TensorToJson(p));
    jl["params"] = std::move(params);
    layers.push_back(std::move(jl));
  }
  json doc{{"format", "cdlab-model"},
           {"version", kModelFormatVersion},
           {"input_shape", net.input_shape},
           {"num_classes", net.num_classes},
           {"layers", std::move(layers)}};
  return doc.dump(1);
}

Network LoadModelJson(const std::string& text) {
  json doc;
  try {
    doc = json::parse(text);
  } catch (const json::parse_error& e) {
    throw ModelFormatError(std::string("model file is not valid JSON: ") + e.what());
  }
  if (!doc.is_object() || doc.value("format", std::string()) != "cdlab-model") {
    throw ModelFormatError("missing or wrong 'format' tag");
  }
  if (!doc.contains("version") || !doc["version"].is_number_integer()) {
    throw ModelFormatError("missing integer 'version'");
  }
  if (doc["version"].get<int>() != kModelFormatVersion) {
    throw VersionMismatchError("model version " + std::to_string(doc["version"].get<int>()) +
                               " is not supported (expected " +
                               std::to_string(kModelFormatVersion) + ")");
  }
  if (!doc.contains("layers") || !doc["layers"].is_array()) {
    throw ModelFormatError("missing 'layers' array");
  }
  Network net;
  net.input_shape = Field<Shape>(doc, "input_shape", {}, "model");
  net.num_classes = Field<int64_t>(doc, "num_classes", 0, "model");
  int index = 0;
  for (const json& jl : doc["layers"]) {
    const std::string where = "layer " + std::to_string(index++);
    if (!jl.is_object() || !jl.contains("kind") || !jl["kind"].is_string()) {
      throw ModelFormatError(where + ": missing 'kind'");
    }
    Layer l;
    l.kind = LayerKindFromName(jl["kind"].get<std::string>());
    l.stride = Field<int64_t>(jl, "stride", 1, where);
    l.window = Field<int64_t>(jl, "window", 2, where);
    l.rate = Field<double>(jl, "rate", 0.0, where);
    l.hidden = Field<int64_t>(jl, "hidden", 0, where);
    if (jl.contains("params")) {
      if (!jl["params"].is_array()) throw ModelFormatError(where + ": 'params' is not an array");
      for (const json& jp : jl["params"]) l.params.push_back(TensorFromJson(jp, where));
    }
    net.layers.push_back(std::move(l));
  }
  InferShapes(net);
  return net;
}

void SaveModel(const Network& net, const std::string& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError("cannot write model file " + path);
  out << SaveModelJson(net);
  if (!out) throw IoError("failed writing model file " + path);
}

Network LoadModel(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot read model file " + path);
  std::stringstream buf;
  buf << in.rdbuf();
  return LoadModelJson(buf.str());
}

Architecture ArchitectureFromJson(const std::string& text) {
  json doc;
  try {
    doc = json::parse(text);
  } catch (const json::parse_error& e) {
    throw InvalidArgument(std::string("architecture is not valid JSON: ") + e.what());
  }
  Architecture arch;
  try {
    arch.input_shape = doc.at("input_shape").get<Shape>();
    arch.num_classes = doc.at("num_classes").get<int64_t>();
    for (const json& jl : doc.at("layers")) {
      LayerDesc d;
      d.kind = LayerKindFromName(jl.at("kind").get<std::string>());
      d.out = jl.value("out", int64_t{0});
      d.kernel = jl.value("kernel", int64_t{0});
      d.stride = jl.value("stride", int64_t{1});
      d.window = jl.value("window", int64_t{2});
      d.rate = jl.value("rate", 0.0);
      d.hidden = jl.value("hidden", int64_t{0});
      arch.layers.push_back(d);
    }
  } catch (const json::exception& e) {
    throw InvalidArgument(std::string("invalid architecture descriptor: ") + e.what());
  }
  return arch;
}

Network InitRandom(const Architecture& arch, uint64_t seed) {
  Rng rng = MakeRng(seed, 0x1417);
  Network net;
  net.input_shape = arch.input_shape;
  net.num_classes = arch.num_classes;
  if (arch.num_classes <= 0) throw InvalidArgument("num_classes must be positive");
  for (int64_t d : arch.input_shape) {
    if (d <= 0) throw InvalidArgument("input shape has a zero-width dimension");
  }
  Shape s = arch.input_shape;
  auto uniform = [&](const Shape& shape, int64_t fan_in) {
    const double bound = 1.0 / std::sqrt(static_cast<double>(fan_in));
    return UniformTensor(shape, -bound, bound, rng);
  };
  for (size_t i = 0; i < arch.layers.size(); ++i) {
    const LayerDesc& d = arch.layers[i];
    const std::string where = "layer " + std::to_string(i) + " (" + LayerKindName(d.kind) + ")";
    Layer l;
    l.kind = d.kind;
    l.stride = d.stride;
    l.window = d.window;
    l.rate = d.rate;
    l.hidden = d.hidden;
    switch (d.kind) {
      case LayerKind::kLinear: {
        if (d.out <= 0) throw InvalidArgument(where + ": zero-width layer");
        if (s.size() != 1) throw InvalidArgument(where + ": input " + ShapeToString(s) +
                                                 " is not a vector");
        l.params = {uniform({d.out, s[0]}, s[0]), uniform({d.out}, s[0])};
        s = {d.out};
        break;
      }
      case LayerKind::kConv2d: {
        if (d.out <= 0 || d.kernel <= 0) throw InvalidArgument(where + ": zero-width layer");
        if (s.size() != 3 || d.kernel > s[1] || d.kernel > s[2] || d.stride < 1) {
          throw InvalidArgument(where + ": kernel does not fit " + ShapeToString(s));
        }
        const int64_t fan_in = s[0] * d.kernel * d.kernel;
        l.params = {uniform({d.out, s[0], d.kernel, d.kernel}, fan_in), uniform({d.out}, fan_in)};
        s = {d.out, (s[1] - d.kernel) / d.stride + 1, (s[2] - d.kernel) / d.stride + 1};
        break;
      }
      case LayerKind::kLstm: {
        if (d.hidden <= 0) throw InvalidArgument(where + ": zero-width layer");
        if (s.size() != 2) throw InvalidArgument(where + ": input is not [T, V]");
        const int64_t fan_in = s[1] + d.hidden;
        for (int g = 0; g < 4; ++g) {
          l.params.push_back(uniform({d.hidden, s[1]}, fan_in));
          l.params.push_back(uniform({d.hidden, d.hidden}, fan_in));
          l.params.push_back(uniform({d.hidden}, fan_in));
        }
        s = {d.hidden};
        break;
      }
      case LayerKind::kMaxPool2d:
        if (s.size() != 3 || d.window < 1 || d.stride < 1 || d.window > s[1] || d.window > s[2]) {
          throw InvalidArgument(where + ": window does not fit " + ShapeToString(s));
        }
        s = {s[0], (s[1] - d.window) / d.stride + 1, (s[2] - d.window) / d.stride + 1};
        break;
      case LayerKind::kFlatten:
        s = {NumElements(s)};
        break;
      case LayerKind::kDropout:
        if (!(d.rate >= 0.0 && d.rate < 1.0)) throw InvalidArgument(where + ": rate outside [0, 1)");
        break;
      default:
        break;
    }
    net.layers.push_back(std::move(l));
  }
  try {
    InferShapes(net);
  } catch (const ShapeInconsistencyError& e) {
    throw InvalidArgument(std::string("invalid architecture: ") + e.what());
  }
  return net;
}

}  // namespace cdlab::net
