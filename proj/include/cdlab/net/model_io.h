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

#ifndef CDLAB_NET_MODEL_IO_H_
#define CDLAB_NET_MODEL_IO_H_

#include <cstdint>
#include <string>
#include <vector>

#include "cdlab/net/network.h"

namespace cdlab::net {

inline constexpr int kModelFormatVersion = 1;

// JSON document with layer kinds, hyperparameters and base64 encoded
// little-endian doubles. Round trips bit-exactly.
std::string SaveModelJson(const Network& net);
// Throws ModelFormatError, VersionMismatchError, ShapeInconsistencyError or
// UnsupportedLayerError.
Network LoadModelJson(const std::string& text);

void SaveModel(const Network& net, const std::string& path);
Network LoadModel(const std::string& path);

std::string EncodeDoubles(const std::vector<double>& values);
// Throws ModelFormatError on invalid base64 and ShapeInconsistencyError when
// the byte count is not a multiple of 8.
std::vector<double> DecodeDoubles(const std::string& text);

// Architecture descriptor for InitRandom.
struct LayerDesc {
  LayerKind kind = LayerKind::kRelu;
  int64_t out = 0;       // linear output width, conv2d output channels
  int64_t kernel = 0;    // conv2d square kernel size
  int64_t stride = 1;
  int64_t window = 2;
  double rate = 0.0;
  int64_t hidden = 0;    // lstm
};

struct Architecture {
  Shape input_shape;
  int64_t num_classes = 0;
  std::vector<LayerDesc> layers;
};

// {"input_shape": [...], "num_classes": n, "layers": [{"kind": "linear",
// "out": 8}, {"kind": "conv2d", "out": 4, "kernel": 3, "stride": 1}, ...]}
Architecture ArchitectureFromJson(const std::string& text);

// Weights and biases drawn from U(-1/sqrt(fan_in), 1/sqrt(fan_in)), where
// fan_in is the input width of a linear unit, C*KH*KW for conv2d and V+H for
// LSTM gates. Throws InvalidArgument on a zero-width layer or a descriptor
// whose shapes do not compose.
Network InitRandom(const Architecture& arch, uint64_t seed);

}  // namespace cdlab::net

#endif  // CDLAB_NET_MODEL_IO_H_
