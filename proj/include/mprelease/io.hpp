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
#pragma once

#include <iosfwd>
#include <string>
#include <vector>

#include <json.hpp>

#include "mprelease/calibration.hpp"
#include "mprelease/monte_carlo.hpp"

namespace mprelease {

// 12 significant digits; NaN is written as the token NaN.
std::string format_number(double v);

struct CsvTable {
  std::vector<std::string> header;
  std::vector<std::vector<double>> rows;
  std::vector<std::size_t> lines;  // source line of each row
};

// Comma-separated numeric table with one header line. Blank lines are
// skipped; a UTF-8 byte order mark and CR line endings are accepted.
CsvTable parse_csv(std::istream& in);
CsvTable read_csv_file(const std::string& path);

void write_csv(std::ostream& out, const std::vector<std::string>& header, const Eigen::MatrixXd& columns);

// Header `time_h,fraction`.
ExperimentalDataset parse_dataset_csv(std::istream& in, const std::string& label);
ExperimentalDataset read_dataset_csv(const std::string& path);
void write_dataset_csv(std::ostream& out, const ExperimentalDataset& data);

// Header `bin_left_um,bin_right_um,mass`; edges stay in micrometers.
BinnedHistogram parse_histogram_csv(std::istream& in);
BinnedHistogram read_histogram_csv(const std::string& path);
void write_histogram_csv(std::ostream& out, const BinnedHistogram& h);

nlohmann::ordered_json to_json(const FitResult& fit);
FitResult fit_result_from_json(const nlohmann::json& j);

}  // namespace mprelease
