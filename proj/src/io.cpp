// Copyright 2026 The mprelease Authors
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
#include "mprelease/io.hpp"

#include <charconv>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <istream>
#include <ostream>

#include "mprelease/errors.hpp"

namespace mprelease {

namespace {

std::string trim(const std::string& s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string::npos) return {};
  const auto e = s.find_last_not_of(" \t\r");
  return s.substr(b, e - b + 1);
}

std::vector<std::string> split(const std::string& line) {
  std::vector<std::string> out;
  std::size_t start = 0;
  while (true) {
    const auto comma = line.find(',', start);
    out.push_back(trim(line.substr(start, comma == std::string::npos ? std::string::npos : comma - start)));
    if (comma == std::string::npos) break;
    start = comma + 1;
  }
  return out;
}

double parse_double(const std::string& field, std::size_t line) {
  if (field == "NaN") return std::nan("");
  double v = 0.0;
  const char* first = field.data();
  const char* last = first + field.size();
  if (!field.empty() && *first == '+') ++first;
  const auto [ptr, ec] = std::from_chars(first, last, v);
  if (field.empty() || ec != std::errc() || ptr != last) throw ParseError("not a number: '" + field + "'", line);
  return v;
}

std::ifstream open_input(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ParseError("cannot open '" + path + "'");
  return in;
}

void require_header(const CsvTable& t, const std::vector<std::string>& expected) {
  if (t.header != expected) {
    std::string want;
    for (const auto& h : expected) want += (want.empty() ? "" : ",") + h;
    throw ParseError("expected header '" + want + "'", 1);
  }
}

}  // namespace

std::string format_number(double v) {
  if (std::isnan(v)) return "NaN";
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.12g", v == 0.0 ? 0.0 : v);
  return buf;
}

CsvTable parse_csv(std::istream& in) {
  CsvTable t;
  std::string line;
  std::size_t line_no = 0;
  bool have_header = false;
  while (std::getline(in, line)) {
    ++line_no;
    if (line_no == 1 && line.rfind("\xEF\xBB\xBF", 0) == 0) line.erase(0, 3);
    if (trim(line).empty()) continue;
    auto fields = split(line);
    if (!have_header) {
      t.header = fields;
      have_header = true;
      continue;
    }
    if (fields.size() != t.header.size())
      throw ParseError("expected " + std::to_string(t.header.size()) + " fields, got " + std::to_string(fields.size()),
                       line_no);
    std::vector<double> row;
    row.reserve(fields.size());
    for (const auto& f : fields) row.push_back(parse_double(f, line_no));
    t.rows.push_back(std::move(row));
    t.lines.push_back(line_no);
  }
  if (!have_header) throw ParseError("empty CSV input");
  return t;
}

CsvTable read_csv_file(const std::string& path) {
  auto in = open_input(path);
  return parse_csv(in);
}

void write_csv(std::ostream& out, const std::vector<std::string>& header, const Eigen::MatrixXd& columns) {
  for (std::size_t c = 0; c < header.size(); ++c) out << (c ? "," : "") << header[c];
  out << '\n';
  for (Eigen::Index r = 0; r < columns.rows(); ++r) {
    for (Eigen::Index c = 0; c < columns.cols(); ++c) out << (c ? "," : "") << format_number(columns(r, c));
    out << '\n';
  }
}

ExperimentalDataset parse_dataset_csv(std::istream& in, const std::string& label) {
  const CsvTable t = parse_csv(in);
  require_header(t, {"time_h", "fraction"});
  ExperimentalDataset d;
  d.label = label;
  const auto n = static_cast<Eigen::Index>(t.rows.size());
  d.times.resize(n);
  d.fractions.resize(n);
  for (Eigen::Index k = 0; k < n; ++k) {
    const double time = t.rows[k][0], frac = t.rows[k][1];
    const std::size_t line = t.lines[k];
    if (!std::isfinite(time) || time < 0.0) throw ParseError("time_h must be finite and >= 0", line);
    if (k > 0 && !(time > d.times(k - 1)))
      throw ParseError("time_h must be strictly increasing (row " + std::to_string(k + 1) + ")", line);
    if (!(frac >= 0.0 && frac <= 1.0 + 1e-6)) throw ParseError("fraction must be in [0, 1]", line);
    d.times(k) = time;
    d.fractions(k) = frac;
  }
  return d;
}

ExperimentalDataset read_dataset_csv(const std::string& path) {
  auto in = open_input(path);
  return parse_dataset_csv(in, path);
}

void write_dataset_csv(std::ostream& out, const ExperimentalDataset& data) {
  Eigen::MatrixXd cols(data.size(), 2);
  cols << data.times, data.fractions;
  write_csv(out, {"time_h", "fraction"}, cols);
}

BinnedHistogram parse_histogram_csv(std::istream& in) {
  const CsvTable t = parse_csv(in);
  require_header(t, {"bin_left_um", "bin_right_um", "mass"});
  if (t.rows.empty()) throw ParseError("histogram has no bins");
  const auto n = static_cast<Eigen::Index>(t.rows.size());
  BinnedHistogram h;
  h.bin_edges.resize(n + 1);
  h.masses.resize(n);
  for (Eigen::Index k = 0; k < n; ++k) {
    const double left = t.rows[k][0], right = t.rows[k][1], mass = t.rows[k][2];
    const std::size_t line = t.lines[k];
    if (!(right > left)) throw ParseError("bin_right_um must exceed bin_left_um", line);
    if (k > 0 && std::abs(left - h.bin_edges(k)) > 1e-9 * std::max(1.0, std::abs(left)))
      throw ParseError("bins must be contiguous", line);
    if (!(mass >= 0.0) || !std::isfinite(mass)) throw ParseError("mass must be finite and >= 0", line);
    if (k == 0) h.bin_edges(0) = left;
    h.bin_edges(k + 1) = right;
    h.masses(k) = mass;
  }
  const double total = h.masses.sum();
  if (std::abs(total - 1.0) > 1e-6) throw ParseError("histogram masses must sum to 1");
  h.masses /= total;
  return h;
}

BinnedHistogram read_histogram_csv(const std::string& path) {
  auto in = open_input(path);
  return parse_histogram_csv(in);
}

void write_histogram_csv(std::ostream& out, const BinnedHistogram& h) {
  const Eigen::Index n = h.masses.size();
  Eigen::MatrixXd cols(n, 3);
  cols << h.bin_edges.head(n), h.bin_edges.tail(n), h.masses;
  write_csv(out, {"bin_left_um", "bin_right_um", "mass"}, cols);
}

nlohmann::ordered_json to_json(const FitResult& fit) {
  nlohmann::ordered_json j;
  j["model"] = fit.model;
  j["params"] = nlohmann::ordered_json::object();
  for (const auto& [name, value] : fit.params) j["params"][name] = value;
  j["parameter_count"] = fit.parameter_count();
  j["mse"] = fit.mse;
  j["grid_meta"] = nlohmann::ordered_json::array();
  for (const auto& s : fit.grid_meta) {
    j["grid_meta"].push_back({{"stage", s.stage},
                              {"parameter", s.parameter},
                              {"lo", s.lo},
                              {"hi", s.hi},
                              {"points", s.points},
                              {"spacing", s.log_spaced ? "log" : "linear"}});
  }
  j["residuals"] = std::vector<double>(fit.residuals.data(), fit.residuals.data() + fit.residuals.size());
  j["dataset"] = {{"label", fit.dataset_label}, {"samples", fit.dataset_size}};
  j["warnings"] = fit.warnings;
  return j;
}

FitResult fit_result_from_json(const nlohmann::json& j) {
  try {
    FitResult fit;
    fit.model = j.at("model").get<std::string>();
    for (const auto& [name, value] : j.at("params").items()) fit.params.emplace_back(name, value.get<double>());
    fit.mse = j.at("mse").get<double>();
    for (const auto& s : j.at("grid_meta")) {
      fit.grid_meta.push_back({s.at("stage").get<std::string>(), s.at("parameter").get<std::string>(),
                               s.at("lo").get<double>(), s.at("hi").get<double>(), s.at("points").get<int>(),
                               s.at("spacing").get<std::string>() == "log"});
    }
    const auto residuals = j.at("residuals").get<std::vector<double>>();
    fit.residuals = Eigen::Map<const Eigen::VectorXd>(residuals.data(), static_cast<Eigen::Index>(residuals.size()));
    fit.dataset_label = j.at("dataset").at("label").get<std::string>();
    fit.dataset_size = j.at("dataset").at("samples").get<Eigen::Index>();
    fit.warnings = j.at("warnings").get<std::vector<std::string>>();
    return fit;
  } catch (const nlohmann::json::exception& e) {
    throw ParseError(std::string("fit result JSON: ") + e.what());
  }
}

}  // namespace mprelease
