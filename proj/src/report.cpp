#include "roughflow/report.hpp"

#include <cmath>
#include <filesystem>
#include <fstream>
#include <sstream>

#include "roughflow/error.hpp"

namespace roughflow {

namespace {

std::string table_stem(const OperationResult& op, const Table& t) { return op.id + "_" + t.name; }

Json optional_number(const std::optional<double>& v) {
  if (!v) return nullptr;
  if (std::isfinite(*v)) return *v;
  return std::isnan(*v) ? Json("nan") : Json(*v > 0 ? "inf" : "-inf");
}

Json check_json(const Check& c) {
  Json j = Json::object();
  j["name"] = c.name;
  j["passed"] = c.passed;
  j["relation"] = c.relation;
  j["value"] = optional_number(c.value);
  j["tolerance"] = optional_number(c.tolerance);
  if (c.relation == "in") {
    j["expected"] = c.expected;
    j["actual"] = c.actual;
  }
  if (c.value && c.tolerance && std::isfinite(*c.value) && std::isfinite(*c.tolerance)) {
    if (c.relation == "<=") j["slack"] = *c.tolerance - *c.value;
    else if (c.relation == ">=" || c.relation == ">") j["slack"] = *c.value - *c.tolerance;
  }
  j["detail"] = c.detail;
  return j;
}

std::string cell_text(const Json& v) {
  if (v.is_null()) return "";
  if (v.is_string()) {
    const std::string s = v.get<std::string>();
    if (s.find_first_of(",\"\n") == std::string::npos) return s;
    std::string q = "\"";
    for (char ch : s) q += ch == '"' ? std::string("\"\"") : std::string(1, ch);
    return q + "\"";
  }
  if (v.is_boolean()) return v.get<bool>() ? "true" : "false";
  return v.dump();
}

void write_file(const std::filesystem::path& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary);
  if (!out) fail(ErrorCode::Io, "cannot open '" + path.string() + "' for writing");
  out << text;
  if (!out) fail(ErrorCode::Io, "failed writing '" + path.string() + "'");
}

}  // namespace

Json report_json(const ExperimentResult& result) {
  Json j = Json::object();
  j["name"] = result.name;
  j["spec_hash"] = result.spec_hash;
  j["seed"] = result.seed;
  j["tol_scale"] = result.tol_scale;
  j["summary"] = {{"operations", result.operations.size()},
                  {"checks", result.check_count()},
                  {"failed_checks", result.failed_checks()},
                  {"operational_error", result.operational_error()},
                  {"exit_code", result.exit_code()}};
  j["spec"] = result.spec;
  Json ops = Json::array();
  for (const auto& op : result.operations) {
    Json o = Json::object();
    o["id"] = op.id;
    o["op"] = op.op;
    o["status"] = !op.error.empty() ? "error" : "ok";
    if (!op.error.empty()) o["error"] = op.error;
    Json checks = Json::array();
    for (const auto& c : op.checks) checks.push_back(check_json(c));
    o["checks"] = checks;
    o["values"] = op.values;
    Json tables = Json::array();
    for (const auto& t : op.tables)
      tables.push_back({{"name", t.name}, {"file", table_stem(op, t) + ".csv"}, {"columns", t.columns},
                        {"rows", t.rows.size()}});
    o["tables"] = tables;
    ops.push_back(o);
  }
  j["operations"] = ops;
  return j;
}

std::string table_csv(const Table& table) {
  std::ostringstream os;
  for (std::size_t i = 0; i < table.columns.size(); ++i) os << (i ? "," : "") << table.columns[i];
  os << "\n";
  for (const auto& row : table.rows) {
    for (std::size_t i = 0; i < row.size(); ++i) os << (i ? "," : "") << cell_text(row[i]);
    os << "\n";
  }
  return os.str();
}

std::string table_plot_dat(const Table& table) {
  std::ostringstream os;
  os << "#";
  for (const auto& c : table.columns) os << " " << c;
  os << "\n";
  for (const auto& row : table.rows) {
    for (std::size_t i = 0; i < row.size(); ++i) {
      os << (i ? " " : "");
      if (row[i].is_number()) os << row[i].dump();
      else if (row[i].is_boolean()) os << (row[i].get<bool>() ? 1 : 0);
      else os << "nan";
    }
    os << "\n";
  }
  return os.str();
}

std::vector<std::string> emit_report(const ExperimentResult& result, const std::string& directory) {
  namespace fs = std::filesystem;
  std::error_code ec;
  fs::create_directories(directory, ec);
  if (ec) fail(ErrorCode::Io, "cannot create output directory '" + directory + "': " + ec.message());
  std::vector<std::string> files;
  const fs::path dir(directory);
  for (const auto& op : result.operations) {
    for (const auto& t : op.tables) {
      const std::string stem = table_stem(op, t);
      write_file(dir / (stem + ".csv"), table_csv(t));
      write_file(dir / (stem + ".plot.dat"), table_plot_dat(t));
      const Json meta = {{"spec_hash", result.spec_hash}, {"experiment", result.name}, {"operation", op.id},
                         {"op", op.op},                   {"table", t.name},         {"columns", t.columns},
                         {"rows", t.rows.size()}};
      write_file(dir / (stem + ".json"), meta.dump(2) + "\n");
      files.push_back(stem + ".csv");
      files.push_back(stem + ".plot.dat");
      files.push_back(stem + ".json");
    }
  }
  write_file(dir / "report.json", report_json(result).dump(2) + "\n");
  files.push_back("report.json");
  return files;
}

}  // namespace roughflow
