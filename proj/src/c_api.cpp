#include "roughflow/roughflow.h"

#include <exception>
#include <new>
#include <string>
#include <vector>

#include "roughflow/error.hpp"
#include "roughflow/experiment.hpp"
#include "roughflow/flow.hpp"
#include "roughflow/gallery.hpp"
#include "roughflow/parallel.hpp"
#include "roughflow/report.hpp"

struct rf_spec {
  roughflow::ExperimentSpec spec;
  std::string hash;
};

struct rf_result {
  roughflow::ExperimentResult result;
  std::string json;
  std::string summary;
};

struct rf_field {
  roughflow::VectorField field;
};

namespace {

thread_local std::string last_error;

rf_status status_of(roughflow::ErrorCode code) {
  using roughflow::ErrorCode;
  switch (code) {
    case ErrorCode::InvalidArgument: return RF_ERR_INVALID_ARGUMENT;
    case ErrorCode::OutOfDomain: return RF_ERR_OUT_OF_DOMAIN;
    case ErrorCode::NonFinite: return RF_ERR_NON_FINITE;
    case ErrorCode::StencilOutsideDomain: return RF_ERR_STENCIL_OUTSIDE_DOMAIN;
    case ErrorCode::UnknownExample: return RF_ERR_UNKNOWN_EXAMPLE;
    case ErrorCode::InvalidParam: return RF_ERR_INVALID_PARAM;
    case ErrorCode::OutOfRange: return RF_ERR_OUT_OF_RANGE;
    case ErrorCode::Overflow: return RF_ERR_OVERFLOW;
    case ErrorCode::InvalidThreshold: return RF_ERR_INVALID_THRESHOLD;
    case ErrorCode::InverseDomain: return RF_ERR_INVERSE_DOMAIN;
    case ErrorCode::QuadratureFailure: return RF_ERR_QUADRATURE_FAILURE;
    case ErrorCode::DivergentIntegral: return RF_ERR_DIVERGENT_INTEGRAL;
    case ErrorCode::NoFiniteNorm: return RF_ERR_NO_FINITE_NORM;
    case ErrorCode::DomainExit: return RF_ERR_DOMAIN_EXIT;
    case ErrorCode::TooCoarse: return RF_ERR_TOO_COARSE;
    case ErrorCode::ZeroJacobian: return RF_ERR_ZERO_JACOBIAN;
    case ErrorCode::InconsistentGrids: return RF_ERR_INCONSISTENT_GRIDS;
    case ErrorCode::SupportViolation: return RF_ERR_SUPPORT_VIOLATION;
    case ErrorCode::Schema: return RF_ERR_SCHEMA;
    case ErrorCode::Io: return RF_ERR_IO;
  }
  return RF_ERR_INTERNAL;
}

rf_status set_error(rf_status status, const std::string& message) {
  last_error = message;
  return status;
}

// Runs body, translating exceptions into status codes and the thread-local message.
template <class F>
rf_status guarded(F&& body) {
  try {
    body();
    return RF_OK;
  } catch (const roughflow::Error& e) {
    return set_error(status_of(e.code()), e.what());
  } catch (const std::bad_alloc&) {
    return set_error(RF_ERR_INTERNAL, "out of memory");
  } catch (const std::exception& e) {
    return set_error(RF_ERR_INTERNAL, e.what());
  } catch (...) {
    return set_error(RF_ERR_INTERNAL, "unknown failure");
  }
}

rf_status null_argument(const char* what) { return set_error(RF_ERR_NULL_POINTER, std::string(what) + " is NULL"); }

rf_status wrap_spec(roughflow::ExperimentSpec spec, rf_spec** out) {
  auto* handle = new rf_spec{std::move(spec), {}};
  handle->hash = handle->spec.hash();
  *out = handle;
  return RF_OK;
}

}  // namespace

extern "C" {

const char* rf_version(void) { return "0.1.0"; }

const char* rf_status_name(rf_status status) {
  switch (status) {
    case RF_OK: return "OK";
    case RF_ERR_NULL_POINTER: return "NullPointer";
    case RF_ERR_INTERNAL: return "Internal";
    default: break;
  }
  if (status > RF_OK && status <= RF_ERR_IO) return roughflow::to_string(static_cast<roughflow::ErrorCode>(status - 1));
  return "Unknown";
}

const char* rf_last_error(void) { return last_error.c_str(); }

rf_status rf_set_workers(int workers) {
  if (workers < 1) return set_error(RF_ERR_INVALID_ARGUMENT, "worker count must be at least 1");
  return guarded([&] { roughflow::set_worker_count(workers); });
}

int rf_workers(void) { return roughflow::worker_count(); }

size_t rf_preset_count(void) { return roughflow::preset_names().size(); }

const char* rf_preset_name(size_t index) {
  static const std::vector<std::string> names = roughflow::preset_names();
  return index < names.size() ? names[index].c_str() : nullptr;
}

rf_status rf_spec_parse(const char* yaml, rf_spec** out) {
  if (!yaml) return null_argument("yaml");
  if (!out) return null_argument("out");
  *out = nullptr;
  return guarded([&] { wrap_spec(roughflow::parse_spec(yaml), out); });
}

rf_status rf_spec_load(const char* path, rf_spec** out) {
  if (!path) return null_argument("path");
  if (!out) return null_argument("out");
  *out = nullptr;
  return guarded([&] { wrap_spec(roughflow::load_spec(path), out); });
}

rf_status rf_spec_preset(const char* name, rf_spec** out) {
  if (!name) return null_argument("name");
  if (!out) return null_argument("out");
  *out = nullptr;
  return guarded([&] { wrap_spec(roughflow::parse_spec(roughflow::preset_yaml(name)), out); });
}

void rf_spec_free(rf_spec* spec) { delete spec; }

const char* rf_spec_name(const rf_spec* spec) { return spec ? spec->spec.name.c_str() : ""; }

const char* rf_spec_output(const rf_spec* spec) { return spec ? spec->spec.output.c_str() : ""; }

const char* rf_spec_hash(const rf_spec* spec) { return spec ? spec->hash.c_str() : ""; }

size_t rf_spec_operation_count(const rf_spec* spec) { return spec ? spec->spec.operations.size() : 0; }

rf_status rf_run(const rf_spec* spec, double tol_scale, int has_seed, uint64_t seed, rf_result** out) {
  if (!spec) return null_argument("spec");
  if (!out) return null_argument("out");
  *out = nullptr;
  return guarded([&] {
    roughflow::RunOptions options;
    options.tol_scale = tol_scale;
    if (has_seed) options.seed = seed;
    auto* handle = new rf_result{roughflow::run_experiment(spec->spec, options), {}, {}};
    handle->json = roughflow::report_json(handle->result).dump(2) + "\n";
    for (const auto& op : handle->result.operations) {
      if (!op.error.empty()) handle->summary += op.id + "\tERROR\t" + op.error + "\n";
      for (const auto& c : op.checks) handle->summary += op.id + "\t" + (c.passed ? "PASS" : "FAIL") + "\t" + c.name + "\n";
    }
    *out = handle;
  });
}

void rf_result_free(rf_result* result) { delete result; }

int rf_result_exit_code(const rf_result* result) { return result ? result->result.exit_code() : 1; }

size_t rf_result_check_count(const rf_result* result) { return result ? result->result.check_count() : 0; }

size_t rf_result_failed_checks(const rf_result* result) { return result ? result->result.failed_checks() : 0; }

const char* rf_result_json(const rf_result* result) { return result ? result->json.c_str() : ""; }

const char* rf_result_summary(const rf_result* result) { return result ? result->summary.c_str() : ""; }

rf_status rf_result_write(const rf_result* result, const char* directory) {
  if (!result) return null_argument("result");
  if (!directory) return null_argument("directory");
  return guarded([&] { roughflow::emit_report(result->result, directory); });
}

rf_example_params rf_example_defaults(void) {
  const roughflow::ExampleParams d;
  return rf_example_params{d.alpha, d.beta, d.level, d.lambda, d.dim, nullptr};
}

rf_status rf_field_create(const char* example, const rf_example_params* params, rf_field** out) {
  if (!example) return null_argument("example");
  if (!out) return null_argument("out");
  *out = nullptr;
  return guarded([&] {
    roughflow::ExampleParams p;
    if (params) {
      p.alpha = params->alpha;
      p.beta = params->beta;
      p.level = params->level;
      p.lambda = params->lambda;
      p.dim = params->dim;
      if (params->drift) {
        if (params->dim < 1) roughflow::fail(roughflow::ErrorCode::InvalidParam, "drift needs dim >= 1");
        p.drift.assign(params->drift, params->drift + params->dim);
      }
    }
    *out = new rf_field{roughflow::make_example(example, p).base};
  });
}

void rf_field_free(rf_field* field) { delete field; }

int rf_field_dim(const rf_field* field) { return field ? field->field.dim() : 0; }

rf_status rf_field_eval(const rf_field* field, double t, const double* x, double* out) {
  if (!field) return null_argument("field");
  if (!x || !out) return null_argument("x or out");
  return guarded([&] {
    const int n = field->field.dim();
    const roughflow::Vec v = field->field.eval(t, Eigen::Map<const Eigen::VectorXd>(x, n));
    for (int i = 0; i < n; ++i) out[i] = v(i);
  });
}

rf_status rf_flow_point(const rf_field* field, double t, double s, const double* x, double* out, int* reached) {
  if (!field) return null_argument("field");
  if (!x || !out || !reached) return null_argument("x, out or reached");
  return guarded([&] {
    const int n = field->field.dim();
    const auto y = roughflow::flow_point(field->field, t, s, Eigen::Map<const Eigen::VectorXd>(x, n));
    *reached = y ? 1 : 0;
    if (y)
      for (int i = 0; i < n; ++i) out[i] = (*y)(i);
  });
}

}  // extern "C"
