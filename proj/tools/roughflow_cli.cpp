#include <cstdint>
#include <cstdio>
#include <cstdlib>
#include <iostream>
#include <string>

#include "CLI11.hpp"
#include "roughflow/roughflow.h"

namespace {

struct Options {
  int workers = 1;
  std::string out;
  double tol_scale = 1.0;
  std::uint64_t seed = 0;
  bool has_seed = false;
  bool quiet = false;
};

int report_failure(const char* what) {
  std::cerr << "roughflow: " << what << ": " << rf_last_error() << "\n";
  return 1;
}

// --out, then the spec's output entry, then $ROUGHFLOW_OUT/<name>, then roughflow-out/<name>.
std::string output_directory(const Options& o, const rf_spec* spec) {
  if (!o.out.empty()) return o.out;
  const std::string from_spec = rf_spec_output(spec);
  if (!from_spec.empty()) return from_spec;
  const char* env = std::getenv("ROUGHFLOW_OUT");
  const std::string base = env && *env ? env : "roughflow-out";
  return base + "/" + rf_spec_name(spec);
}

int execute(const Options& o, rf_spec* spec) {
  if (rf_set_workers(o.workers) != RF_OK) {
    rf_spec_free(spec);
    return report_failure("--workers");
  }
  rf_result* result = nullptr;
  if (rf_run(spec, o.tol_scale, o.has_seed ? 1 : 0, o.seed, &result) != RF_OK) {
    rf_spec_free(spec);
    return report_failure("run");
  }
  const std::string dir = output_directory(o, spec);
  const rf_status written = rf_result_write(result, dir.c_str());
  if (!o.quiet) std::cout << rf_result_summary(result);
  const int code = written == RF_OK ? rf_result_exit_code(result) : report_failure("writing the report");
  std::cout << rf_spec_name(spec) << ": " << rf_result_check_count(result) - rf_result_failed_checks(result) << "/"
            << rf_result_check_count(result) << " checks passed, spec " << rf_spec_hash(spec) << ", report in "
            << dir << "\n";
  rf_result_free(result);
  rf_spec_free(spec);
  return code;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Flows of non-Lipschitz vector fields: experiment runner"};
  app.require_subcommand(1);
  Options o;
  std::uint64_t seed = 0;
  app.add_option("--workers", o.workers, "Worker threads for parallel loops")->check(CLI::PositiveNumber);
  app.add_option("--out", o.out, "Output directory (default: spec output, then $ROUGHFLOW_OUT/<name>)");
  app.add_option("--tol-scale", o.tol_scale, "Multiplier applied to every tolerance")->check(CLI::PositiveNumber);
  auto* seed_opt = app.add_option("--seed", seed, "Sampling seed, overriding the spec");
  app.add_flag("-q,--quiet", o.quiet, "Print only the final summary line");

  std::string spec_path, preset;
  auto* run = app.add_subcommand("run", "Run an experiment spec file");
  run->add_option("spec", spec_path, "YAML experiment spec")->required();
  auto* preset_cmd = app.add_subcommand("preset", "Run a built-in preset");
  preset_cmd->add_option("name", preset, "Preset name (see list-presets)")->required();
  auto* list = app.add_subcommand("list-presets", "List the built-in presets");
  std::string validate_path;
  auto* validate = app.add_subcommand("validate", "Check a spec file against the schema");
  validate->add_option("spec", validate_path, "YAML experiment spec")->required();

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : 1;
  }
  o.has_seed = seed_opt->count() > 0;
  o.seed = seed;

  if (*list) {
    for (std::size_t i = 0; i < rf_preset_count(); ++i) std::cout << rf_preset_name(i) << "\n";
    return 0;
  }
  rf_spec* spec = nullptr;
  if (*validate) {
    if (rf_spec_load(validate_path.c_str(), &spec) != RF_OK) return report_failure(validate_path.c_str());
    std::cout << validate_path << ": valid, " << rf_spec_operation_count(spec) << " operations, spec "
              << rf_spec_hash(spec) << "\n";
    rf_spec_free(spec);
    return 0;
  }
  if (*run) {
    if (rf_spec_load(spec_path.c_str(), &spec) != RF_OK) return report_failure(spec_path.c_str());
  } else if (rf_spec_preset(preset.c_str(), &spec) != RF_OK) {
    return report_failure(preset.c_str());
  }
  return execute(o, spec);
}
