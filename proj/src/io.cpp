#include "ivqr/io.hpp"

#include <cerrno>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <limits>
#include <sstream>
#include <stdexcept>

namespace ivqr {

namespace {

std::vector<std::string> split_row(const std::string& line) {
  std::vector<std::string> out;
  std::string cell;
  bool quoted = false;
  for (char c : line) {
    if (c == '"') {
      quoted = !quoted;
    } else if (c == ',' && !quoted) {
      out.push_back(cell);
      cell.clear();
    } else if (c != '\r') {
      cell.push_back(c);
    }
  }
  out.push_back(cell);
  return out;
}

std::string trim(const std::string& s) {
  const auto a = s.find_first_not_of(" \t");
  if (a == std::string::npos) return "";
  const auto b = s.find_last_not_of(" \t");
  return s.substr(a, b - a + 1);
}

bool parse_number(const std::string& raw, double& out) {
  const std::string s = trim(raw);
  if (s.empty()) return false;
  errno = 0;
  char* end = nullptr;
  out = std::strtod(s.c_str(), &end);
  return end == s.c_str() + s.size() && errno != ERANGE && std::isfinite(out);
}

std::string fmt17(double v) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

}  // namespace

IngestResult read_csv(std::istream& in, const ColumnMapping& mapping) {
  if (mapping.y.empty()) throw std::invalid_argument("column mapping needs a y column");
  if (mapping.z.empty()) throw std::invalid_argument("column mapping needs at least one z column");
  if (mapping.w.empty()) throw std::invalid_argument("column mapping needs at least one w column");
  std::string line;
  if (!std::getline(in, line)) throw std::runtime_error("csv input is empty (no header row)");
  if (line.size() >= 3 && line.compare(0, 3, "\xEF\xBB\xBF") == 0) line.erase(0, 3);
  std::vector<std::string> header = split_row(line);
  for (auto& h : header) h = trim(h);
  const auto index_of = [&](const std::string& name) {
    for (std::size_t i = 0; i < header.size(); ++i)
      if (header[i] == name) return i;
    throw std::invalid_argument("column '" + name + "' not found in csv header");
  };
  std::vector<std::size_t> cols{index_of(mapping.y)};
  for (const auto* group : {&mapping.z, &mapping.w, &mapping.d})
    for (const auto& name : *group) cols.push_back(index_of(name));

  std::vector<std::vector<double>> rows;
  IngestResult result;
  while (std::getline(in, line)) {
    if (trim(line).empty() || trim(line) == "\r") continue;
    const auto cells = split_row(line);
    std::vector<double> row(cols.size());
    bool ok = true;
    for (std::size_t c = 0; c < cols.size() && ok; ++c)
      ok = cols[c] < cells.size() && parse_number(cells[cols[c]], row[c]);
    if (ok) {
      rows.push_back(std::move(row));
    } else {
      ++result.dropped;
    }
  }
  if (rows.empty()) throw std::runtime_error("csv input has no usable rows");

  const auto n = static_cast<Eigen::Index>(rows.size());
  const auto nz = static_cast<Eigen::Index>(mapping.z.size());
  const auto nw = static_cast<Eigen::Index>(mapping.w.size());
  const auto nd = static_cast<Eigen::Index>(mapping.d.size());
  Sample& s = result.sample;
  s.y.resize(n);
  s.z.resize(n, nz);
  s.w.resize(n, nw);
  s.d.resize(n, nd);
  for (Eigen::Index i = 0; i < n; ++i) {
    const auto& r = rows[static_cast<std::size_t>(i)];
    s.y[i] = r[0];
    for (Eigen::Index c = 0; c < nz; ++c) s.z(i, c) = r[1 + c];
    for (Eigen::Index c = 0; c < nw; ++c) s.w(i, c) = r[1 + nz + c];
    for (Eigen::Index c = 0; c < nd; ++c) s.d(i, c) = r[1 + nz + nw + c];
  }
  return result;
}

IngestResult ingest_csv(const std::string& path, const ColumnMapping& mapping) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open '" + path + "'");
  return read_csv(in, mapping);
}

void write_csv(std::ostream& out, const Sample& sample, const ColumnMapping& mapping) {
  if (static_cast<Eigen::Index>(mapping.z.size()) != sample.z.cols() ||
      static_cast<Eigen::Index>(mapping.w.size()) != sample.w.cols() ||
      static_cast<Eigen::Index>(mapping.d.size()) != sample.d.cols())
    throw std::invalid_argument("write_csv: mapping does not match the sample's columns");
  out << mapping.y;
  for (const auto* group : {&mapping.z, &mapping.w, &mapping.d})
    for (const auto& name : *group) out << ',' << name;
  out << '\n';
  for (Eigen::Index i = 0; i < sample.size(); ++i) {
    out << fmt17(sample.y[i]);
    for (const auto* m : {&sample.z, &sample.w, &sample.d})
      for (Eigen::Index c = 0; c < m->cols(); ++c) out << ',' << fmt17((*m)(i, c));
    out << '\n';
  }
}

void write_csv(const std::string& path, const Sample& sample, const ColumnMapping& mapping) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot write '" + path + "'");
  write_csv(out, sample, mapping);
}

ColumnMapping default_mapping(const Sample& sample) {
  ColumnMapping m;
  m.y = "y";
  for (Eigen::Index c = 0; c < sample.z.cols(); ++c) m.z.push_back("z" + std::to_string(c + 1));
  for (Eigen::Index c = 0; c < sample.w.cols(); ++c) m.w.push_back("w" + std::to_string(c + 1));
  for (Eigen::Index c = 0; c < sample.d.cols(); ++c) m.d.push_back("d" + std::to_string(c + 1));
  return m;
}

// ---------------------------------------------------------------------------

nlohmann::json number_to_json(double v) {
  if (std::isnan(v)) return "nan";
  if (std::isinf(v)) return v > 0 ? "inf" : "-inf";
  return v;
}

double number_from_json(const nlohmann::json& j) {
  if (j.is_number()) return j.get<double>();
  if (j.is_string()) {
    const auto s = j.get<std::string>();
    if (s == "inf") return std::numeric_limits<double>::infinity();
    if (s == "-inf") return -std::numeric_limits<double>::infinity();
    if (s == "nan") return std::numeric_limits<double>::quiet_NaN();
  }
  throw std::invalid_argument("expected a number in report");
}

nlohmann::json to_json(const QuantileGrid& grid) {
  return {{"points", grid.points}, {"weights", grid.weights}};
}

nlohmann::json to_json(const TestResult& r) {
  return {{"test", r.name},
          {"raw", number_to_json(r.raw)},
          {"standardized", number_to_json(r.standardized)},
          {"alpha", r.alpha},
          {"critical_value", number_to_json(r.critical_value)},
          {"critical_source", to_string(r.critical_source)},
          {"reject", r.reject},
          {"dims", {{"k_n", r.k_n}, {"l_n", r.l_n}, {"m_n", r.m_n}}},
          {"grid", to_json(r.grid)}};
}

nlohmann::json to_json(const DgpSpec& spec) {
  return {{"design", spec.name()}, {"zeta", spec.zeta}, {"theta", spec.theta}, {"n", spec.n}, {"seed", spec.seed}};
}

nlohmann::json to_json(const MonteCarloReport& r) {
  std::vector<nlohmann::json> stats;
  stats.reserve(r.standardized.size());
  for (double v : r.standardized) stats.push_back(number_to_json(v));
  const auto& c = r.plan.config;
  return {{"spec", to_json(r.spec)},
          {"test", to_string(r.plan.kind)},
          {"q", r.plan.q},
          {"dims", {{"k_n", c.k_n}, {"l_n", c.l_n}, {"m_n", c.m_n}}},
          {"grid_points", c.grid.size()},
          {"bootstrap", {{"replications", r.plan.bootstrap.replications}, {"sigma_eps", r.plan.bootstrap.sigma_eps}}},
          {"replications", r.replications},
          {"alpha", r.alpha},
          {"rejections", r.rejections},
          {"frequency", r.frequency},
          {"standard_error", r.standard_error},
          {"wall_seconds", r.wall_seconds},
          {"standardized", stats}};
}

nlohmann::json to_json(const SelectionResult& s) {
  nlohmann::json table = nlohmann::json::array();
  for (const auto& c : s.table)
    table.push_back({{"k_n", c.k_n}, {"m_n", c.m_n}, {"standardized", number_to_json(c.statistic)}});
  return {{"chosen_k", s.chosen_k},
          {"chosen_l", s.chosen_l},
          {"chosen_m", s.chosen_m},
          {"statistic_at_choice", number_to_json(s.statistic_at_choice)},
          {"table", table},
          {"decision", to_json(s.decision)}};
}

TestResult test_result_from_json(const nlohmann::json& j) {
  TestResult r;
  r.name = j.at("test").get<std::string>();
  r.raw = number_from_json(j.at("raw"));
  r.standardized = number_from_json(j.at("standardized"));
  r.alpha = j.at("alpha").get<double>();
  r.critical_value = number_from_json(j.at("critical_value"));
  r.critical_source =
      j.at("critical_source").get<std::string>() == "bootstrap" ? CriticalSource::bootstrap : CriticalSource::asymptotic_normal;
  r.reject = j.at("reject").get<bool>();
  const auto& d = j.at("dims");
  r.k_n = d.at("k_n").get<int>();
  r.l_n = d.at("l_n").get<int>();
  r.m_n = d.at("m_n").get<int>();
  r.grid.points = j.at("grid").at("points").get<std::vector<double>>();
  r.grid.weights = j.at("grid").at("weights").get<std::vector<double>>();
  return r;
}

bool decision_from_json(const nlohmann::json& j) {
  return number_from_json(j.at("standardized")) > number_from_json(j.at("critical_value"));
}

}  // namespace ivqr
