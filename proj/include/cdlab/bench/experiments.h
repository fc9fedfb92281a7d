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

#ifndef CDLAB_BENCH_EXPERIMENTS_H_
#define CDLAB_BENCH_EXPERIMENTS_H_

#include <string>

#include "cdlab/bench/color.h"
#include "cdlab/bench/frequency.h"
#include "cdlab/bench/motif.h"
#include "cdlab/bench/negation.h"
#include "cdlab/bench/report.h"
#include "json.hpp"

namespace cdlab::bench {

// Config readers start from the harness defaults and override the keys
// present; unknown keys throw InvalidArgument.
FrequencyConfig FrequencyConfigFromJson(const nlohmann::json& j);
nlohmann::json FrequencyConfigToJson(const FrequencyConfig& c);
ColorBiasConfig ColorBiasConfigFromJson(const nlohmann::json& j);
nlohmann::json ColorBiasConfigToJson(const ColorBiasConfig& c);
NegationConfig NegationConfigFromJson(const nlohmann::json& j);
nlohmann::json NegationConfigToJson(const NegationConfig& c);
MotifConfig MotifConfigFromJson(const nlohmann::json& j);
nlohmann::json MotifConfigToJson(const MotifConfig& c);

Report FrequencyReport(const FrequencyConfig& c, const FrequencyResult& r);
Report ColorBiasReport(const ColorBiasConfig& c, const ColorBiasResult& r);
Report NegationReport(const NegationConfig& c, const NegationResult& r);
Report MotifReport(const MotifConfig& c, const MotifResult& r);

// Runs the named harness ("frequency", "color", "negation" or "awd") with a
// JSON config and returns its report. Throws InvalidArgument on an unknown
// name.
Report RunExperiment(const std::string& name, const nlohmann::json& config);

}  // namespace cdlab::bench

#endif  // CDLAB_BENCH_EXPERIMENTS_H_
