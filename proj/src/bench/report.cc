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

#include "cdlab/bench/report.h"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <sstream>

#include "cdlab/errors.h"

namespace cdlab::bench {

std::string FormatDouble(double v) {
  if (std::isnan(v)) return "nan";
  if (std::isinf(v)) return v > 0 ? "inf" : "-inf";
  char buf[64];
  const auto r = std::to_chars(buf, buf + sizeof(buf), v);
  return std::string(buf, r.ptr);
}

std::string ConfigHash(const nlohmann::json& config) {
  uint64_t h = 1469598103934665603ull;
  for (unsigned char c : config.dump()) {
    h ^= c;
    h *= 1099511628211ull;
  }
  char buf[17];
  std::snprintf(buf, sizeof(buf), "%016llx", static_cast<unsigned long long>(h));
  return buf;
}

namespace {

std::string CellText(const Cell& c) {
  if (const auto* d = std::get_if<double>(&c)) return FormatDouble(*d);
  if (const auto* i = std::get_if<int64_t>(&c)) return std::to_string(*i);
  return std::get<std::string>(c);
}

std::string CsvField(const std::string& s) {
  if (s.find_first_of(",\"\n") == std::string::npos) return s;
  std::string out = "\"";
  for (char c : s) {
    if (c == '"') out += '"';
    out += c;
  }
  return out + "\"";
}

nlohmann::json CellJson(const Cell& c) {
  if (const auto* d = std::get_if<double>(&c)) {
    return std::isfinite(*d) ? nlohmann::json(*d) : nlohmann::json(FormatDouble(*d));
  }
  if (const auto* i = std::get_if<int64_t>(&c)) return *i;
  return std::get<std::string>(c);
}

std::string Escape(const std::string& s) {
  std::string out;
  for (char c : s) {
    switch (c) {
      case '<': out += "&lt;"; break;
      case '>': out += "&gt;"; break;
      case '&': out += "&amp;"; break;
      case '"': out += "&quot;"; break;
      default: out += c;
    }
  }
  return out;
}

void WriteFile(const std::filesystem::path& path, const std::string& text) {
  std::ofstream f(path, std::ios::binary);
  if (!f) throw IoError("cannot open " + path.string() + " for writing");
  f << text;
  if (!f) throw IoError("failed writing " + path.string());
}

}  // namespace

std::string TableCsv(const std::vector<Table>& tables) {
  // Long format keeps tables with different columns in one file.
  std::string out = "table,row,column,value\n";
  for (const Table& t : tables) {
    for (size_t r = 0; r < t.rows.size(); ++r) {
      if (t.rows[r].size() != t.columns.size()) {
        throw InvalidArgument("table " + t.name + ": row " + std::to_string(r) +
                              " has the wrong number of cells");
      }
      for (size_t c = 0; c < t.columns.size(); ++c) {
        out += CsvField(t.name) + "," + std::to_string(r) + "," + CsvField(t.columns[c]) + "," +
               CsvField(CellText(t.rows[r][c])) + "\n";
      }
    }
  }
  return out;
}

nlohmann::json ReportJson(const Report& report) {
  nlohmann::json j;
  j["schema"] = kReportSchema;
  j["version"] = kReportVersion;
  j["kind"] = report.kind;
  j["provenance"] = {{"seed", report.seed},
                     {"config_hash", ConfigHash(report.config)},
                     {"modules", {{"cdlab", kReportVersion}}}};
  j["config"] = report.config;
  j["summary"] = report.summary;
  j["tables"] = nlohmann::json::array();
  for (const Table& t : report.tables) {
    nlohmann::json rows = nlohmann::json::array();
    for (const auto& row : t.rows) {
      nlohmann::json r = nlohmann::json::array();
      for (const Cell& c : row) r.push_back(CellJson(c));
      rows.push_back(r);
    }
    j["tables"].push_back({{"name", t.name}, {"columns", t.columns}, {"rows", rows},
                           {"seed", report.seed}});
  }
  return j;
}

std::string LinePlotSvg(const LinePlot& plot) {
  constexpr double kW = 640, kH = 400, kLeft = 60, kRight = 20, kTop = 40, kBottom = 50;
  double x0 = 0, x1 = 1, y0 = 0, y1 = 1;
  bool first = true;
  for (const Series& s : plot.series) {
    for (size_t i = 0; i < std::min(s.x.size(), s.y.size()); ++i) {
      if (!std::isfinite(s.x[i]) || !std::isfinite(s.y[i])) continue;
      if (first) {
        x0 = x1 = s.x[i];
        y0 = y1 = s.y[i];
        first = false;
      }
      x0 = std::min(x0, s.x[i]);
      x1 = std::max(x1, s.x[i]);
      y0 = std::min(y0, s.y[i]);
      y1 = std::max(y1, s.y[i]);
    }
  }
  if (x1 == x0) x1 = x0 + 1;
  if (y1 == y0) y1 = y0 + 1;
  auto px = [&](double x) { return kLeft + (x - x0) / (x1 - x0) * (kW - kLeft - kRight); };
  auto py = [&](double y) { return kH - kBottom - (y - y0) / (y1 - y0) * (kH - kTop - kBottom); };
  static const char* kColors[] = {"#1f77b4", "#d62728", "#2ca02c", "#9467bd", "#ff7f0e"};
  std::ostringstream o;
  o << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << kW << "\" height=\"" << kH
    << "\">\n<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n"
    << "<text x=\"" << kW / 2 << "\" y=\"24\" text-anchor=\"middle\">" << Escape(plot.title)
    << "</text>\n"
    << "<line x1=\"" << kLeft << "\" y1=\"" << kH - kBottom << "\" x2=\"" << kW - kRight
    << "\" y2=\"" << kH - kBottom << "\" stroke=\"black\"/>\n"
    << "<line x1=\"" << kLeft << "\" y1=\"" << kTop << "\" x2=\"" << kLeft << "\" y2=\""
    << kH - kBottom << "\" stroke=\"black\"/>\n"
    << "<text x=\"" << kW / 2 << "\" y=\"" << kH - 12 << "\" text-anchor=\"middle\">"
    << Escape(plot.x_label) << "</text>\n"
    << "<text x=\"16\" y=\"" << kH / 2 << "\" transform=\"rotate(-90 16 " << kH / 2
    << ")\" text-anchor=\"middle\">" << Escape(plot.y_label) << "</text>\n"
    << "<text x=\"" << kLeft << "\" y=\"" << kH - kBottom + 16 << "\" font-size=\"10\">"
    << FormatDouble(x0) << "</text>\n"
    << "<text x=\"" << kW - kRight << "\" y=\"" << kH - kBottom + 16
    << "\" font-size=\"10\" text-anchor=\"end\">" << FormatDouble(x1) << "</text>\n"
    << "<text x=\"" << kLeft - 4 << "\" y=\"" << kH - kBottom
    << "\" font-size=\"10\" text-anchor=\"end\">" << FormatDouble(y0) << "</text>\n"
    << "<text x=\"" << kLeft - 4 << "\" y=\"" << kTop + 10
    << "\" font-size=\"10\" text-anchor=\"end\">" << FormatDouble(y1) << "</text>\n";
  for (size_t k = 0; k < plot.series.size(); ++k) {
    const Series& s = plot.series[k];
    const char* color = kColors[k % 5];
    o << "<polyline fill=\"none\" stroke=\"" << color << "\" points=\"";
    for (size_t i = 0; i < std::min(s.x.size(), s.y.size()); ++i) {
      if (!std::isfinite(s.x[i]) || !std::isfinite(s.y[i])) continue;
      o << FormatDouble(px(s.x[i])) << "," << FormatDouble(py(s.y[i])) << " ";
    }
    o << "\"/>\n<text x=\"" << kW - kRight - 4 << "\" y=\"" << kTop + 14 * (k + 1)
      << "\" font-size=\"11\" text-anchor=\"end\" fill=\"" << color << "\">" << Escape(s.label)
      << "</text>\n";
  }
  o << "</svg>\n";
  return o.str();
}

std::string HierarchySvg(const acd::Hierarchy& h, const std::vector<std::string>& unit_labels) {
  const int n = static_cast<int>(unit_labels.size());
  constexpr double kCell = 48, kRow = 26, kPad = 10;
  int top = 0;
  for (const auto& node : h.nodes) top = std::max(top, node.level);
  double max_abs = 0.0;
  for (const auto& node : h.nodes) max_abs = std::max(max_abs, std::abs(node.score));
  if (max_abs == 0.0) max_abs = 1.0;
  const double width = 2 * kPad + kCell * std::max(n, 1);
  const double height = 2 * kPad + kRow * (top + 2);
  std::ostringstream o;
  o << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << width << "\" height=\"" << height
    << "\">\n<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n";
  for (const auto& node : h.nodes) {
    if (node.units.empty()) continue;
    const int lo = *std::min_element(node.units.begin(), node.units.end());
    const int hi = *std::max_element(node.units.begin(), node.units.end());
    const double y = height - kPad - kRow * (node.level + 1);
    const double shade = std::min(1.0, std::abs(node.score) / max_abs);
    const int other = static_cast<int>(255 * (1.0 - shade));
    const std::string fill = node.score >= 0
                                 ? "rgb(" + std::to_string(other) + "," + std::to_string(other) + ",255)"
                                 : "rgb(255," + std::to_string(other) + "," + std::to_string(other) + ")";
    o << "<rect x=\"" << kPad + kCell * lo + 1 << "\" y=\"" << y << "\" width=\""
      << kCell * (hi - lo + 1) - 2 << "\" height=\"" << kRow - 2 << "\" fill=\"" << fill
      << "\" stroke=\"black\"><title>" << FormatDouble(node.score) << "</title></rect>\n";
    if (node.level == 0 && lo < n) {
      o << "<text x=\"" << kPad + kCell * lo + kCell / 2 << "\" y=\"" << y + kRow / 2 + 4
        << "\" font-size=\"10\" text-anchor=\"middle\">" << Escape(unit_labels[lo])
        << "</text>\n";
    }
  }
  o << "</svg>\n";
  return o.str();
}

void EmitReport(const Report& report, const std::string& out_dir) {
  namespace fs = std::filesystem;
  const fs::path dir(out_dir);
  std::error_code ec;
  fs::create_directories(dir, ec);
  if (ec) throw IoError("cannot create directory " + out_dir + ": " + ec.message());
  WriteFile(dir / "metrics.json", ReportJson(report).dump(2) + "\n");
  WriteFile(dir / "metrics.csv", TableCsv(report.tables));
  WriteFile(dir / "config.json", report.config.dump(2) + "\n");
  for (const LinePlot& p : report.line_plots) WriteFile(dir / (p.name + ".svg"), LinePlotSvg(p));
  for (const BoxPlot& p : report.box_plots) WriteFile(dir / (p.name + ".svg"), p.svg);
}

}  // namespace cdlab::bench
