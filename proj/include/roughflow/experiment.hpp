#pragma once

#include <cstdint>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "json.hpp"
#include "roughflow/flow.hpp"
#include "roughflow/gallery.hpp"

namespace roughflow {

using Json = nlohmann::ordered_json;

struct FieldSpec {
  std::string example;  // gallery name; empty when grid_path is set
  ExampleParams params;
  std::string grid_path;
};

struct GaugeSpec {
  std::string family = "exponential";  // subexp, exponential, power
  int k = 1;
  double beta = 1.0;
  double p = 2.0;
  std::optional<double> s_bar;
};

struct OperationSpec {
  std::string id;
  std::string op;
  Json params = Json::object();
};

// Parsed experiment description. Everything except the output directory enters the spec hash.
struct ExperimentSpec {
  std::string name;
  std::uint64_t seed = 1;
  std::string output;
  std::optional<FieldSpec> field;
  std::optional<GaugeSpec> gauge;
  SolverConfig solver;
  std::map<std::string, double> tolerances;
  std::vector<OperationSpec> operations;

  Json canonical() const;
  // Lower-case hex SHA-256 of canonical().dump().
  std::string hash() const;
};

// Parses and validates a YAML spec. Schema violations throw ErrorCode::Schema with the offending
// path, e.g. "operations[1].params.levels: expected an integer".
ExperimentSpec parse_spec(const std::string& yaml_text);
ExperimentSpec load_spec(const std::string& path);

std::vector<std::string> preset_names();
// YAML text of a built-in preset; InvalidParam for unknown names.
std::string preset_yaml(const std::string& name);
std::vector<std::string> operation_names();

struct Check {
  std::string name;
  bool passed = false;
  std::string relation;  // "<=", ">=", ">", "==", "in" (verdict membership)
  std::optional<double> value;
  std::optional<double> tolerance;
  std::string expected;  // verdict checks
  std::string actual;
  std::string detail;
};

struct Table {
  std::string name;
  std::vector<std::string> columns;
  std::vector<std::vector<Json>> rows;
};

struct OperationResult {
  std::string id;
  std::string op;
  std::vector<Check> checks;
  std::vector<Table> tables;
  Json values = Json::object();
  std::string error;  // non-empty when the operation failed to run
};

struct ExperimentResult {
  std::string name;
  std::string spec_hash;
  std::uint64_t seed = 1;
  double tol_scale = 1.0;
  Json spec = Json::object();
  std::vector<OperationResult> operations;

  std::size_t check_count() const;
  std::size_t failed_checks() const;
  bool operational_error() const;
  // 0 when every check passed, 2 when a check failed, 1 on an operational error.
  int exit_code() const;
};

struct RunOptions {
  double tol_scale = 1.0;
  std::optional<std::uint64_t> seed;  // overrides the spec seed
};

// Runs every operation in order. An operation that throws is recorded with its error and the
// remaining operations still run.
ExperimentResult run_experiment(const ExperimentSpec& spec, const RunOptions& options = {});

}  // namespace roughflow
