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

#ifndef CDLAB_BENCH_REPORT_H_
#define CDLAB_BENCH_REPORT_H_

#include <cstdint>
#include <string>
#include <variant>
#include <vector>

#include "cdlab/acd/hierarchy.h"
#include "json.hpp"

namespace cdlab::bench {

inline constexpr const char* kReportSchema = "cdlab-report";
inline constexpr int kReportVersion = 1;

using Cell = std::variant<double, int64_t, std::string>;

struct Table {
  std::string name;
  std::vector<std::string> columns;
  std::vector<std::vector<Cell>> rows;  // each row has one cell per column
};

struct Series {
  std::string label;
  std::vector<double> x;
  std::vector<double> y;
};

struct LinePlot {
  std::string name;  // file stem
  std::string title;
  std::string x_label;
  std::string y_label;
  std::vector<Series> series;
};

struct BoxPlot {
  std::string name;
  std::string svg;  // prerendered document
};

struct Report {
  std::string kind;
  uint64_t seed = 0;
  nlohmann::json config = nlohmann::json::object();
  std::vector<Table> tables;
  nlohmann::json summary = nlohmann::json::object();
  std::vector<LinePlot> line_plots;
  std::vector<BoxPlot> box_plots;
};

// Shortest form that round trips, at most 17 significant digits.
std::string FormatDouble(double v);

// 64-bit FNV-1a of the compact dump of `config`, as 16 hex digits.
std::string ConfigHash(const nlohmann::json& config);

std::string TableCsv(const std::vector<Table>& tables);
nlohmann::json ReportJson(const Report& report);
std::string LinePlotSvg(const LinePlot& plot);
// Nested boxes: one box per node spanning its units, stacked by level.
std::string HierarchySvg(const acd::Hierarchy& h, const std::vector<std::string>& unit_labels);

// Writes metrics.json, metrics.csv, config.json and one SVG per plot into
// out_dir (created when missing). Throws IoError naming the path.
void EmitReport(const Report& report, const std::string& out_dir);

}  // namespace cdlab::bench

#endif  // CDLAB_BENCH_REPORT_H_
