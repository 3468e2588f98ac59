#pragma once

#include <iosfwd>
#include <string>
#include <vector>

#include <json.hpp>

#include "ivqr/moments.hpp"
#include "ivqr/selection.hpp"
#include "ivqr/simulation.hpp"
#include "ivqr/statistics.hpp"

namespace ivqr {

struct ColumnMapping {
  std::string y;
  std::vector<std::string> z;
  std::vector<std::string> w;
  std::vector<std::string> d;
};

struct IngestResult {
  Sample sample;
  std::size_t dropped = 0;  // rows with a missing or non-numeric mapped cell
};

// Comma-separated with a header row. Rows with any unusable mapped cell are dropped.
IngestResult read_csv(std::istream& in, const ColumnMapping& mapping);
IngestResult ingest_csv(const std::string& path, const ColumnMapping& mapping);

// Columns in mapping order (y, z..., w..., d...), 17 significant digits.
void write_csv(std::ostream& out, const Sample& sample, const ColumnMapping& mapping);
void write_csv(const std::string& path, const Sample& sample, const ColumnMapping& mapping);

// Default names y, z1.., w1.., d1.. for a sample's columns.
ColumnMapping default_mapping(const Sample& sample);

// Non-finite values are stored as the strings "inf", "-inf", "nan".
nlohmann::json number_to_json(double v);
double number_from_json(const nlohmann::json& j);

nlohmann::json to_json(const QuantileGrid& grid);
nlohmann::json to_json(const TestResult& result);
nlohmann::json to_json(const DgpSpec& spec);
nlohmann::json to_json(const MonteCarloReport& report);
nlohmann::json to_json(const SelectionResult& selection);

TestResult test_result_from_json(const nlohmann::json& j);
// Recomputes reject from the recorded standardized and critical values.
bool decision_from_json(const nlohmann::json& j);

}  // namespace ivqr
