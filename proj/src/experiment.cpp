#include "roughflow/experiment.hpp"

#include <openssl/evp.h>
#include <yaml-cpp/yaml.h>

#include <algorithm>
#include <charconv>
#include <cmath>
#include <fstream>
#include <functional>
#include <iomanip>
#include <limits>
#include <numbers>
#include <random>
#include <set>
#include <sstream>

#include "roughflow/error.hpp"
#include "roughflow/orlicz.hpp"
#include "roughflow/parallel.hpp"
#include "roughflow/pde.hpp"
#include "roughflow/regularity.hpp"

namespace roughflow {

namespace {

constexpr double kE = std::numbers::e;

[[noreturn]] void schema(const std::string& path, const std::string& message) {
  fail(ErrorCode::Schema, (path.empty() ? std::string("spec") : path) + ": " + message);
}

// ---------------------------------------------------------------------------------------------
// YAML to JSON

Json scalar_to_json(const YAML::Node& node) {
  const std::string& s = node.Scalar();
  if (node.Tag() == "!") return s;  // quoted
  if (s == "~" || s == "null" || s == "Null" || s == "NULL") return nullptr;
  if (s == "true" || s == "True" || s == "TRUE") return true;
  if (s == "false" || s == "False" || s == "FALSE") return false;
  const char* first = s.data();
  const char* last = s.data() + s.size();
  if (!s.empty() && (s[0] == '+')) ++first;
  long long i = 0;
  auto ri = std::from_chars(first, last, i);
  if (ri.ec == std::errc() && ri.ptr == last) return i;
  double d = 0.0;
  auto rd = std::from_chars(first, last, d);
  if (rd.ec == std::errc() && rd.ptr == last) return d;
  if (s == ".inf" || s == ".Inf") return std::numeric_limits<double>::infinity();
  if (s == "-.inf" || s == "-.Inf") return -std::numeric_limits<double>::infinity();
  return s;
}

Json yaml_to_json(const YAML::Node& node, const std::string& path) {
  switch (node.Type()) {
    case YAML::NodeType::Null:
    case YAML::NodeType::Undefined: return nullptr;
    case YAML::NodeType::Scalar: return scalar_to_json(node);
    case YAML::NodeType::Sequence: {
      Json arr = Json::array();
      std::size_t i = 0;
      for (const auto& item : node) arr.push_back(yaml_to_json(item, path + "[" + std::to_string(i++) + "]"));
      return arr;
    }
    case YAML::NodeType::Map: {
      Json obj = Json::object();
      for (const auto& kv : node) {
        if (!kv.first.IsScalar()) schema(path, "mapping keys must be plain strings");
        const std::string key = kv.first.Scalar();
        if (obj.contains(key)) schema(path.empty() ? key : path + "." + key, "duplicate key");
        obj[key] = yaml_to_json(kv.second, path.empty() ? key : path + "." + key);
      }
      return obj;
    }
  }
  return nullptr;
}

// ---------------------------------------------------------------------------------------------
// Schema

enum class PType { Number, Integer, Bool, String, Numbers, Integers, Strings, Box, Field, Cases, Tests, Initial, Expect };

struct ParamDef {
  std::string key;
  PType type;
};

std::string join(const std::string& path, const std::string& key) { return path.empty() ? key : path + "." + key; }
std::string index(const std::string& path, std::size_t i) { return path + "[" + std::to_string(i) + "]"; }

void expect_number(const Json& v, const std::string& path) {
  if (!v.is_number()) schema(path, "expected a number");
}

void expect_integer(const Json& v, const std::string& path) {
  if (v.is_number_integer()) return;
  if (v.is_number_float()) {
    const double d = v.get<double>();
    if (std::isfinite(d) && d == std::floor(d) && std::abs(d) < 9e15) return;
  }
  schema(path, "expected an integer");
}

void expect_string(const Json& v, const std::string& path) {
  if (!v.is_string()) schema(path, "expected a string");
}

void expect_array(const Json& v, const std::string& path) {
  if (!v.is_array()) schema(path, "expected a list");
}

void expect_object(const Json& v, const std::string& path) {
  if (!v.is_object()) schema(path, "expected a mapping");
}

void check_keys(const Json& obj, const std::string& path, const std::set<std::string>& allowed) {
  for (const auto& [k, v] : obj.items())
    if (!allowed.count(k)) schema(join(path, k), "unknown key");
}

void validate_example_params(const Json& p, const std::string& path) {
  expect_object(p, path);
  check_keys(p, path, {"alpha", "beta", "level", "lambda", "dim", "drift"});
  for (const char* k : {"alpha", "beta", "lambda"})
    if (p.contains(k)) expect_number(p[k], join(path, k));
  for (const char* k : {"level", "dim"})
    if (p.contains(k)) expect_integer(p[k], join(path, k));
  if (p.contains("drift")) {
    expect_array(p["drift"], join(path, "drift"));
    for (std::size_t i = 0; i < p["drift"].size(); ++i) expect_number(p["drift"][i], index(join(path, "drift"), i));
  }
}

void validate_field(const Json& f, const std::string& path) {
  if (f.is_string()) {
    const auto names = example_names();
    if (std::find(names.begin(), names.end(), f.get<std::string>()) == names.end())
      schema(path, "unknown gallery example '" + f.get<std::string>() + "'");
    return;
  }
  expect_object(f, path);
  check_keys(f, path, {"example", "params", "grid"});
  if (f.contains("example") == f.contains("grid")) schema(path, "exactly one of 'example' or 'grid' is required");
  if (f.contains("example")) {
    expect_string(f["example"], join(path, "example"));
    const auto names = example_names();
    if (std::find(names.begin(), names.end(), f["example"].get<std::string>()) == names.end())
      schema(join(path, "example"), "unknown gallery example '" + f["example"].get<std::string>() + "'");
  } else {
    expect_string(f["grid"], join(path, "grid"));
  }
  if (f.contains("params")) validate_example_params(f["params"], join(path, "params"));
}

void validate_box(const Json& b, const std::string& path) {
  expect_array(b, path);
  if (b.empty()) schema(path, "expected a non-empty box");
  if (b[0].is_number()) {
    if (b.size() != 2) schema(path, "a one-dimensional box is [lo, hi]");
    expect_number(b[1], index(path, 1));
    if (!(b[0].get<double>() < b[1].get<double>())) schema(path, "box needs lo < hi");
    return;
  }
  for (std::size_t i = 0; i < b.size(); ++i) {
    const std::string p = index(path, i);
    expect_array(b[i], p);
    if (b[i].size() != 2) schema(p, "each axis is [lo, hi]");
    expect_number(b[i][0], index(p, 0));
    expect_number(b[i][1], index(p, 1));
    if (!(b[i][0].get<double>() < b[i][1].get<double>())) schema(p, "box needs lo < hi");
  }
}

const std::set<std::string>& verdict_words() {
  static const std::set<std::string> words{"bounded", "diverging", "inconclusive", "converging", "finite", "divergent",
                                           "holds", "skipped"};
  return words;
}

void validate_expect(const Json& e, const std::string& path) {
  auto one = [&](const Json& v, const std::string& p) {
    expect_string(v, p);
    if (!verdict_words().count(v.get<std::string>())) schema(p, "unknown verdict '" + v.get<std::string>() + "'");
  };
  if (e.is_array()) {
    if (e.empty()) schema(path, "expected at least one verdict");
    for (std::size_t i = 0; i < e.size(); ++i) one(e[i], index(path, i));
  } else {
    one(e, path);
  }
}

void validate_params(const Json& obj, const std::string& path, const std::vector<ParamDef>& defs);

const std::vector<ParamDef>& study_case_defs() {
  static const std::vector<ParamDef> d{{"p", PType::Number}, {"expect", PType::Expect}};
  return d;
}

const std::vector<ParamDef>& gauge_case_defs() {
  static const std::vector<ParamDef> d{{"family", PType::String}, {"k", PType::Integer}, {"beta", PType::Number},
                                       {"p", PType::Number},      {"s_bar", PType::Number}, {"expect", PType::Expect}};
  return d;
}

const std::vector<ParamDef>& test_defs() {
  static const std::vector<ParamDef> d{{"t", PType::Numbers}, {"center", PType::Numbers}, {"halfwidth", PType::Numbers}};
  return d;
}

const std::vector<ParamDef>& initial_defs() {
  static const std::vector<ParamDef> d{{"kind", PType::String},     {"center", PType::Numbers}, {"width", PType::Numbers},
                                       {"amplitude", PType::Number}, {"box", PType::Box}};
  return d;
}

void validate_value(const Json& v, const std::string& path, PType type, const std::string& op) {
  switch (type) {
    case PType::Number: expect_number(v, path); break;
    case PType::Integer: expect_integer(v, path); break;
    case PType::Bool:
      if (!v.is_boolean()) schema(path, "expected true or false");
      break;
    case PType::String: expect_string(v, path); break;
    case PType::Numbers:
      expect_array(v, path);
      for (std::size_t i = 0; i < v.size(); ++i) expect_number(v[i], index(path, i));
      break;
    case PType::Integers:
      expect_array(v, path);
      for (std::size_t i = 0; i < v.size(); ++i) expect_integer(v[i], index(path, i));
      break;
    case PType::Strings:
      expect_array(v, path);
      for (std::size_t i = 0; i < v.size(); ++i) expect_string(v[i], index(path, i));
      break;
    case PType::Box: validate_box(v, path); break;
    case PType::Field: validate_field(v, path); break;
    case PType::Expect: validate_expect(v, path); break;
    case PType::Cases:
      expect_array(v, path);
      for (std::size_t i = 0; i < v.size(); ++i)
        validate_params(v[i], index(path, i), op == "validate_gauge" ? gauge_case_defs() : study_case_defs());
      break;
    case PType::Tests:
      expect_array(v, path);
      for (std::size_t i = 0; i < v.size(); ++i) {
        validate_params(v[i], index(path, i), test_defs());
        for (const char* k : {"t", "center", "halfwidth"})
          if (!v[i].contains(k)) schema(join(index(path, i), k), "required");
        if (v[i]["t"].size() != 2) schema(join(index(path, i), "t"), "expected [center, halfwidth]");
      }
      break;
    case PType::Initial: {
      validate_params(v, path, initial_defs());
      if (!v.contains("kind")) schema(join(path, "kind"), "required");
      const std::string kind = v["kind"].get<std::string>();
      if (kind != "gaussian" && kind != "bump" && kind != "indicator" && kind != "constant")
        schema(join(path, "kind"), "expected gaussian, bump, indicator or constant");
      if ((kind == "gaussian" || kind == "bump") && (!v.contains("center") || !v.contains("width")))
        schema(path, kind + " needs center and width");
      if (kind == "indicator" && !v.contains("box")) schema(join(path, "box"), "required for indicator");
      break;
    }
  }
}

void validate_params(const Json& obj, const std::string& path, const std::vector<ParamDef>& defs) {
  expect_object(obj, path);
  for (const auto& [k, v] : obj.items()) {
    auto it = std::find_if(defs.begin(), defs.end(), [&](const ParamDef& d) { return d.key == k; });
    if (it == defs.end()) schema(join(path, k), "unknown key");
    validate_value(v, join(path, k), it->type, "");
  }
}

struct OpSchema {
  std::vector<ParamDef> params;
  std::vector<std::string> required;
};

const std::map<std::string, OpSchema>& op_schemas() {
  using P = PType;
  static const std::map<std::string, OpSchema> s{
      {"flow_closed_form",
       {{{"field", P::Field}, {"points", P::Integer}, {"t_range", P::Numbers}, {"s_range", P::Numbers},
         {"x_range", P::Numbers}, {"tolerance", P::Number}},
        {}}},
      {"sobolev_study",
       {{{"field", P::Field}, {"t", P::Number}, {"s", P::Number}, {"box", P::Box}, {"cases", P::Cases},
         {"levels", P::Integer}, {"finest_spacing", P::Number}, {"graded", P::Bool}, {"graded_start", P::Number},
         {"cells_per_decade", P::Integer}, {"slope_threshold", P::Number}},
        {"t", "box", "cases"}}},
      {"holder_study",
       {{{"field", P::Field}, {"t", P::Number}, {"s", P::Number}, {"box", P::Box}, {"cases", P::Cases},
         {"levels", P::Integer}, {"finest_spacing", P::Number}, {"graded", P::Bool}, {"graded_start", P::Number},
         {"cells_per_decade", P::Integer}, {"slope_threshold", P::Number}},
        {"t", "box", "cases"}}},
      {"cantor_image", {{{"level", P::Integer}, {"times", P::Numbers}, {"tolerance", P::Number}}, {}}},
      {"gronwall",
       {{{"fields", P::Strings}, {"samples", P::Integer}, {"tolerance", P::Number}, {"equality_tolerance", P::Number}},
        {}}},
      {"liouville", {{{"fields", P::Strings}, {"samples", P::Integer}, {"tolerance", P::Number}}, {}}},
      {"sobolev_bound",
       {{{"field", P::Field}, {"t", P::Number}, {"box", P::Box}, {"p", P::Number}, {"tspan", P::Numbers},
         {"expect", P::Expect}, {"tolerance", P::Number}},
        {"box", "p", "tspan"}}},
      {"lambda_p",
       {{{"field", P::Field}, {"p", P::Number}, {"box", P::Box}, {"tspan", P::Numbers}, {"mode", P::String},
         {"expect", P::Expect}},
        {"p", "box", "tspan"}}},
      {"validate_gauge", {{{"cases", P::Cases}, {"alpha", P::Number}, {"dim", P::Integer}}, {"cases"}}},
      {"osgood_funnel",
       {{{"field", P::Field}, {"x0", P::Numbers}, {"s", P::Number}, {"radii", P::Numbers}, {"horizon", P::Number},
         {"perturbations", P::Integer}, {"alpha", P::Number}, {"phi_box", P::Box}},
        {"x0", "phi_box"}}},
      {"nonuniqueness", {{{"alpha", P::Number}, {"times", P::Numbers}, {"tolerance", P::Number}}, {}}},
      {"transport",
       {{{"field", P::Field}, {"initial", P::Initial}, {"window", P::Box}, {"final_time", P::Number},
         {"time_nodes", P::Integer}, {"spacing", P::Number}, {"refine", P::Bool}, {"tests", P::Tests},
         {"tolerance", P::Number}, {"halving_tolerance", P::Number}},
        {"initial", "window", "tests"}}},
      {"continuity",
       {{{"field", P::Field}, {"initial", P::Initial}, {"source", P::Box}, {"target", P::Box}, {"cells", P::Integers},
         {"t", P::Number}, {"particles_per_axis", P::Integer}, {"compare_representations", P::Bool},
         {"mass_tolerance", P::Number}, {"l1_tolerance", P::Number}, {"representation_tolerance", P::Number}},
        {"initial", "source", "target", "cells"}}},
      {"pushforward_density",
       {{{"field", P::Field}, {"t", P::Number}, {"s", P::Number}, {"source", P::Box}, {"target", P::Box},
         {"coarse_cells", P::Integer}, {"fine_cells", P::Integer}, {"source_nodes", P::Integer},
         {"min_count", P::Number}, {"factor", P::Number}, {"alpha", P::Number}, {"stability_tolerance", P::Number}},
        {"source"}}},
  };
  return s;
}

void validate_operation(const Json& params, const std::string& op, const std::string& path) {
  const OpSchema& s = op_schemas().at(op);
  for (const auto& [k, v] : params.items()) {
    auto it = std::find_if(s.params.begin(), s.params.end(), [&](const ParamDef& d) { return d.key == k; });
    if (it == s.params.end()) schema(join(path, k), "unknown parameter for operation '" + op + "'");
    validate_value(v, join(path, k), it->type, op);
  }
  for (const auto& r : s.required)
    if (!params.contains(r)) schema(join(path, r), "required by operation '" + op + "'");
}

// ---------------------------------------------------------------------------------------------
// Spec conversion

ExampleParams example_params(const Json& p) {
  ExampleParams e;
  if (p.contains("alpha")) e.alpha = p["alpha"].get<double>();
  if (p.contains("beta")) e.beta = p["beta"].get<double>();
  if (p.contains("level")) e.level = static_cast<int>(p["level"].get<double>());
  if (p.contains("lambda")) e.lambda = p["lambda"].get<double>();
  if (p.contains("dim")) e.dim = static_cast<int>(p["dim"].get<double>());
  if (p.contains("drift")) e.drift = p["drift"].get<std::vector<double>>();
  return e;
}

FieldSpec field_spec(const Json& f) {
  FieldSpec s;
  if (f.is_string()) {
    s.example = f.get<std::string>();
    return s;
  }
  if (f.contains("example")) s.example = f["example"].get<std::string>();
  if (f.contains("grid")) s.grid_path = f["grid"].get<std::string>();
  if (f.contains("params")) s.params = example_params(f["params"]);
  return s;
}

Json field_json(const FieldSpec& f) {
  Json j = Json::object();
  if (!f.grid_path.empty()) {
    j["grid"] = f.grid_path;
    return j;
  }
  j["example"] = f.example;
  j["params"] = {{"alpha", f.params.alpha},   {"beta", f.params.beta}, {"level", f.params.level},
                 {"lambda", f.params.lambda}, {"dim", f.params.dim},   {"drift", f.params.drift}};
  return j;
}

VectorField build_field(const FieldSpec& f) {
  if (!f.grid_path.empty()) return load_grid_field(f.grid_path);
  return make_example(f.example, f.params).base;
}

OrliczGauge build_gauge(const GaugeSpec& g) {
  if (g.family == "subexp") return OrliczGauge::subexp(g.k, g.beta, g.s_bar);
  if (g.family == "power") return OrliczGauge::power(g.p);
  return OrliczGauge::exponential(g.beta);
}

GaugeSpec gauge_spec(const Json& j, const std::string& path) {
  GaugeSpec g;
  if (j.contains("family")) {
    g.family = j["family"].get<std::string>();
    if (g.family != "subexp" && g.family != "exponential" && g.family != "power")
      schema(join(path, "family"), "expected subexp, exponential or power");
  }
  if (j.contains("k")) g.k = static_cast<int>(j["k"].get<double>());
  if (j.contains("beta")) g.beta = j["beta"].get<double>();
  if (j.contains("p")) g.p = j["p"].get<double>();
  if (j.contains("s_bar")) g.s_bar = j["s_bar"].get<double>();
  return g;
}

Json gauge_json(const GaugeSpec& g) {
  Json j = {{"family", g.family}, {"k", g.k}, {"beta", g.beta}, {"p", g.p}};
  if (g.s_bar) j["s_bar"] = *g.s_bar;
  return j;
}

std::string sha256_hex(const std::string& data) {
  unsigned char digest[EVP_MAX_MD_SIZE];
  unsigned int len = 0;
  if (EVP_Digest(data.data(), data.size(), digest, &len, EVP_sha256(), nullptr) != 1)
    fail(ErrorCode::Io, "SHA-256 computation failed");
  std::ostringstream os;
  for (unsigned int i = 0; i < len; ++i) os << std::hex << std::setw(2) << std::setfill('0') << int(digest[i]);
  return os.str();
}

// ---------------------------------------------------------------------------------------------
// Operation helpers

struct Context {
  const ExperimentSpec& spec;
  std::uint64_t seed;
  double tol_scale;
  SolverConfig cfg;
};

double num(const Json& p, const char* key, double fallback) { return p.contains(key) ? p[key].get<double>() : fallback; }

int integer(const Json& p, const char* key, int fallback) {
  return p.contains(key) ? static_cast<int>(p[key].get<double>()) : fallback;
}

bool flag(const Json& p, const char* key, bool fallback) { return p.contains(key) ? p[key].get<bool>() : fallback; }

std::vector<double> nums(const Json& p, const char* key, std::vector<double> fallback) {
  return p.contains(key) ? p[key].get<std::vector<double>>() : fallback;
}

Box box_of(const Json& b) {
  if (b[0].is_number()) return Box::interval(b[0].get<double>(), b[1].get<double>());
  std::vector<double> lo, hi;
  for (const auto& axis : b) {
    lo.push_back(axis[0].get<double>());
    hi.push_back(axis[1].get<double>());
  }
  return Box(lo, hi);
}

Interval interval_of(const std::vector<double>& v, const std::string& what) {
  if (v.size() != 2 || !(v[0] < v[1])) fail(ErrorCode::InvalidParam, what + " must be [lo, hi] with lo < hi");
  return {v[0], v[1]};
}

// Tolerance: operation parameter, else tolerances["<op>.<key>"], else the default; scaled by --tol-scale.
double tolerance(const Context& ctx, const OperationSpec& op, const char* key, double fallback) {
  double v = fallback;
  auto it = ctx.spec.tolerances.find(op.op + "." + key);
  if (it != ctx.spec.tolerances.end()) v = it->second;
  if (op.params.contains(key)) v = op.params[key].get<double>();
  return v * ctx.tol_scale;
}

FieldSpec op_field_spec(const Context& ctx, const OperationSpec& op) {
  if (op.params.contains("field")) return field_spec(op.params["field"]);
  if (ctx.spec.field) return *ctx.spec.field;
  fail(ErrorCode::InvalidParam, "operation '" + op.id + "' needs a field (top-level or per operation)");
}

std::vector<std::string> expectations(const Json& e) {
  std::vector<std::string> out;
  if (e.is_array())
    for (const auto& v : e) out.push_back(v.get<std::string>());
  else
    out.push_back(e.get<std::string>());
  return out;
}

std::string join_words(const std::vector<std::string>& w) {
  std::string s;
  for (std::size_t i = 0; i < w.size(); ++i) s += (i ? "|" : "") + w[i];
  return s;
}

Check verdict_check(const std::string& name, const std::vector<std::string>& expected, const std::string& actual,
                    std::optional<double> tolerance_value, const std::string& detail) {
  Check c;
  c.name = name;
  c.relation = "in";
  c.expected = join_words(expected);
  c.actual = actual;
  c.tolerance = tolerance_value;
  c.detail = detail;
  c.passed = std::find(expected.begin(), expected.end(), actual) != expected.end();
  return c;
}

Check bound_check(const std::string& name, double value, const std::string& relation, double tol,
                  const std::string& detail = {}) {
  Check c;
  c.name = name;
  c.relation = relation;
  c.value = value;
  c.tolerance = tol;
  c.detail = detail;
  if (relation == "<=") c.passed = value <= tol;
  else if (relation == ">=") c.passed = value >= tol;
  else if (relation == ">") c.passed = value > tol;
  else c.passed = value == tol;
  return c;
}

Json number_or_null(double v) { return std::isfinite(v) ? Json(v) : Json(nullptr); }

// Uniform double in [lo, hi) from 53 random bits.
double uniform(std::mt19937_64& rng, double lo, double hi) {
  return lo + (hi - lo) * static_cast<double>(rng() >> 11) * 0x1.0p-53;
}

ScalarFn initial_data(const Json& j, int dim, double& lo, double& hi) {
  const std::string kind = j["kind"].get<std::string>();
  const double amp = num(j, "amplitude", 1.0);
  lo = std::min(0.0, amp);
  hi = std::max(0.0, amp);
  if (kind == "constant") {
    lo = hi = amp;
    return [amp](const Vec&) { return amp; };
  }
  if (kind == "indicator") {
    const Box b = box_of(j["box"]);
    if (b.dim() != dim) fail(ErrorCode::InvalidParam, "indicator box does not match the field dimension");
    return [b, amp](const Vec& x) { return b.contains(x) ? amp : 0.0; };
  }
  const std::vector<double> c = j["center"].get<std::vector<double>>();
  std::vector<double> w = j["width"].get<std::vector<double>>();
  if (static_cast<int>(c.size()) != dim) fail(ErrorCode::InvalidParam, "initial center does not match the dimension");
  if (w.size() == 1) w.assign(dim, w[0]);
  if (static_cast<int>(w.size()) != dim) fail(ErrorCode::InvalidParam, "initial width does not match the dimension");
  for (double v : w)
    if (!(v > 0.0)) fail(ErrorCode::InvalidParam, "initial widths must be positive");
  auto r2 = [c, w](const Vec& x) {
    double s = 0.0;
    for (std::size_t i = 0; i < c.size(); ++i) s += std::pow((x(static_cast<int>(i)) - c[i]) / w[i], 2);
    return s;
  };
  if (kind == "gaussian") return [r2, amp](const Vec& x) { return amp * std::exp(-r2(x)); };
  return [r2, amp](const Vec& x) {
    const double r = r2(x);
    return r < 1.0 ? amp * std::pow(1.0 - r, 3) : 0.0;
  };
}

// ---------------------------------------------------------------------------------------------
// Operations

void op_flow_closed_form(const Context& ctx, const OperationSpec& op, OperationResult& res) {
  const FieldSpec fs = op_field_spec(ctx, op);
  if (fs.example.empty()) fail(ErrorCode::InvalidParam, "closed-form check needs a gallery example");
  const ExampleField ex = make_example(fs.example, fs.params);
  if (!ex.closed_flow) fail(ErrorCode::InvalidParam, "example '" + fs.example + "' has no closed-form flow");
  if (ex.base.dim() != 1) fail(ErrorCode::InvalidParam, "closed-form lattice check is one-dimensional");
  const int m = integer(op.params, "points", 20);
  if (m < 2) fail(ErrorCode::InvalidParam, "points must be at least 2");
  const Interval tr = interval_of(nums(op.params, "t_range", {0.0, 1.0}), "t_range");
  const Interval sr = interval_of(nums(op.params, "s_range", {0.0, 1.0}), "s_range");
  const Interval xr = interval_of(nums(op.params, "x_range", {0.05, kE - 0.05}), "x_range");
  const double tol = tolerance(ctx, op, "tolerance", 1e-6);
  auto at = [m](const Interval& r, int i) { return r.lo + (r.hi - r.lo) * i / (m - 1); };
  const std::size_t total = static_cast<std::size_t>(m) * m * m;
  std::vector<double> err(total, std::numeric_limits<double>::infinity());
  parallel_for(total, [&](std::size_t j) {
    const int it = static_cast<int>(j / (m * m)), is = static_cast<int>((j / m) % m), ix = static_cast<int>(j % m);
    const double t = at(tr, it), s = at(sr, is);
    const Vec x = make_vec({at(xr, ix)});
    if (const auto y = flow_point(ex.base, t, s, x, ctx.cfg)) err[j] = std::abs((*y)(0) - ex.closed_flow(t, s, x)(0));
  });
  const double worst = *std::max_element(err.begin(), err.end());
  res.values["lattice_points"] = total;
  res.values["max_abs_error"] = number_or_null(worst);
  res.checks.push_back(bound_check("max_abs_error", worst, "<=", tol, fs.example + " against its closed form"));
  Table t{"errors", {"t", "max_abs_error"}, {}};
  for (int it = 0; it < m; ++it) {
    double w = 0.0;
    for (std::size_t j = static_cast<std::size_t>(it) * m * m; j < static_cast<std::size_t>(it + 1) * m * m; ++j)
      w = std::max(w, err[j]);
    t.rows.push_back({at(tr, it), number_or_null(w)});
  }
  res.tables.push_back(std::move(t));
}

MeshOptions mesh_options(const Json& p) {
  MeshOptions m;
  m.levels = integer(p, "levels", 4);
  m.finest_spacing = num(p, "finest_spacing", 0.0);
  m.graded = flag(p, "graded", false);
  m.graded_start = num(p, "graded_start", 1e-20);
  m.cells_per_decade = integer(p, "cells_per_decade", 40);
  m.verdict.slope_threshold = num(p, "slope_threshold", 0.1);
  return m;
}

void op_study(const Context& ctx, const OperationSpec& op, OperationResult& res, bool holder) {
  const FieldSpec fs = op_field_spec(ctx, op);
  const VectorField field = build_field(fs);
  const double t = op.params["t"].get<double>();
  const double s = num(op.params, "s", 0.0);
  const Box box = box_of(op.params["box"]);
  const MeshOptions mesh = mesh_options(op.params);
  std::optional<double> sharp;
  if (!holder && !fs.example.empty()) {
    const ExampleField ex = make_example(fs.example, fs.params);
    if (ex.metadata.sharp_sobolev_exponent) sharp = ex.metadata.sharp_sobolev_exponent(t, s);
  }
  if (sharp) res.values["sharp_exponent"] = number_or_null(*sharp);
  const char* exponent = holder ? "gamma" : "p";
  Table levels{"levels", {exponent, "level", "h", "value", "coverage", "nodes"}, {}};
  Table verdicts{sharp ? "sharp_exponent" : "verdicts", {exponent, "expected", "verdict", "fitted_slope", "sharp_exponent"}, {}};
  for (const auto& c : op.params["cases"]) {
    if (!c.contains("p")) fail(ErrorCode::InvalidParam, "each study case needs p");
    const double p = c["p"].get<double>();
    const RefinementStudy st = holder ? holder_study(field, t, s, box, p, mesh, ctx.cfg)
                                      : sobolev_study(field, t, s, box, p, mesh, ctx.cfg);
    for (std::size_t l = 0; l < st.levels.size(); ++l) {
      const auto& lv = st.levels[l];
      levels.rows.push_back({p, l, lv.h, number_or_null(lv.value), lv.coverage, lv.nodes});
    }
    const std::vector<std::string> expected =
        c.contains("expect") ? expectations(c["expect"]) : std::vector<std::string>{"bounded", "diverging", "inconclusive"};
    std::ostringstream name;
    name << exponent << "=" << p;
    res.checks.push_back(verdict_check(name.str(), expected, to_string(st.verdict), mesh.verdict.slope_threshold,
                                       st.details));
    verdicts.rows.push_back({p, join_words(expected), to_string(st.verdict), number_or_null(st.fitted_slope),
                             sharp ? number_or_null(*sharp) : Json(nullptr)});
  }
  res.tables.push_back(std::move(verdicts));
  res.tables.push_back(std::move(levels));
}

void op_cantor_image(const Context& ctx, const OperationSpec& op, OperationResult& res) {
  const int level = integer(op.params, "level", 10);
  const double tol = tolerance(ctx, op, "tolerance", 0.05);
  Table t{"measures", {"t", "estimate", "target", "rel_error"}, {}};
  for (double time : nums(op.params, "times", {0.5, 1.0, 2.0})) {
    const CantorImageReport r = cantor_image_measure(level, time);
    t.rows.push_back({time, r.measure_estimate, r.target, number_or_null(r.rel_error)});
    std::ostringstream name;
    name << "rel_error(t=" << time << ")";
    res.checks.push_back(bound_check(name.str(), r.rel_error, "<=", tol, "level " + std::to_string(level)));
  }
  res.tables.push_back(std::move(t));
}

struct Sample {
  std::string field;
  VectorField vf;
  double s, t, lambda;
  Vec x;
};

// Random (field, s, t, x) draws; linear samples take sign(lambda) = sign(t - s).
std::vector<Sample> draw_samples(const std::vector<std::string>& fields, std::size_t count, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::vector<Sample> out;
  const VectorField loglinear = make_example("loglinear").base;
  const VectorField sublog = make_example("sublog").base;
  const VectorField rotation = make_example("rotation").base;
  const VectorField cantor = make_example("cantor").base;
  for (std::size_t i = 0; i < count; ++i) {
    const std::string& name = fields[i % fields.size()];
    const double s = uniform(rng, 0.0, 1.0), t = uniform(rng, 0.0, 1.0);
    if (name == "loglinear") {
      out.push_back({name, loglinear, s, t, 0.0, make_vec({uniform(rng, 0.05, kE - 0.05)})});
    } else if (name == "sublog") {
      out.push_back({name, sublog, s, t, 0.0, make_vec({std::exp(uniform(rng, std::log(1e-6), std::log(0.06)))})});
    } else if (name == "rotation") {
      out.push_back({name, rotation, s, t, 0.0, make_vec({uniform(rng, -1.0, 1.0), uniform(rng, -1.0, 1.0)})});
    } else if (name == "cantor") {
      out.push_back({name, cantor, s, t, 0.0, make_vec({uniform(rng, 0.0, 1.0)})});
    } else if (name == "linear") {
      double lambda = uniform(rng, 0.1, 1.5);
      if (t < s) lambda = -lambda;
      ExampleParams p;
      p.lambda = lambda;
      out.push_back({name, make_example("linear", p).base, s, t, lambda, make_vec({uniform(rng, -2.0, 2.0)})});
    } else {
      fail(ErrorCode::InvalidParam, "sampling supports loglinear, sublog, rotation, cantor and linear, not '" + name + "'");
    }
  }
  return out;
}

std::vector<std::string> string_list(const Json& p, const char* key, std::vector<std::string> fallback) {
  return p.contains(key) ? p[key].get<std::vector<std::string>>() : fallback;
}

void op_gronwall(const Context& ctx, const OperationSpec& op, OperationResult& res) {
  const auto fields = string_list(op.params, "fields", {"loglinear", "sublog", "rotation", "linear"});
  const std::size_t n = static_cast<std::size_t>(integer(op.params, "samples", 1000));
  const double tol = tolerance(ctx, op, "tolerance", 1e-3);
  const double eq_tol = tolerance(ctx, op, "equality_tolerance", 1e-6);
  const auto samples = draw_samples(fields, n, ctx.seed);
  std::vector<GronwallReport> reports(samples.size());
  std::vector<std::uint8_t> ok(samples.size(), 0);
  parallel_for(samples.size(), [&](std::size_t i) {
    const Sample& sm = samples[i];
    try {
      const Trajectory tr = integrate_trajectory(sm.vf, sm.s, sm.x, sm.t, ctx.cfg);
      if (!tr.reached()) return;
      reports[i] = gronwall_check(sm.vf, tr, variational_solve(sm.vf, tr, ctx.cfg), tol);
      ok[i] = 1;
    } catch (const Error&) {
    }
  });
  double worst_ratio = 0.0, worst_eq = 0.0;
  std::size_t violations = 0, failures = 0, linear = 0;
  Table t{"samples", {"field", "s", "t", "x0", "lhs", "rhs", "ratio"}, {}};
  for (std::size_t i = 0; i < samples.size(); ++i) {
    if (!ok[i]) {
      ++failures;
      continue;
    }
    const double ratio = reports[i].lhs / reports[i].rhs;
    worst_ratio = std::max(worst_ratio, ratio);
    if (!(reports[i].lhs <= reports[i].rhs * (1.0 + tol))) ++violations;
    if (samples[i].field == "linear") {
      ++linear;
      worst_eq = std::max(worst_eq, std::abs(reports[i].lhs - reports[i].rhs) / reports[i].rhs);
    }
    t.rows.push_back({samples[i].field, samples[i].s, samples[i].t, samples[i].x(0), reports[i].lhs, reports[i].rhs, ratio});
  }
  res.values["samples"] = n;
  res.values["failed_samples"] = failures;
  res.values["violations"] = violations;
  res.values["linear_samples"] = linear;
  res.checks.push_back(bound_check("max lhs/rhs", worst_ratio, "<=", 1.0 + tol, std::to_string(violations) + " violations"));
  res.checks.push_back(bound_check("failed samples", static_cast<double>(failures), "==", 0.0));
  if (linear) res.checks.push_back(bound_check("linear equality rel error", worst_eq, "<=", eq_tol));
  res.tables.push_back(std::move(t));
}

void op_liouville(const Context& ctx, const OperationSpec& op, OperationResult& res) {
  const auto fields = string_list(op.params, "fields", {"loglinear", "sublog", "rotation", "linear", "cantor"});
  const std::size_t n = static_cast<std::size_t>(integer(op.params, "samples", 500));
  const double tol = tolerance(ctx, op, "tolerance", 1e-5);
  const auto samples = draw_samples(fields, n, ctx.seed ^ 0x9e3779b97f4a7c15ULL);
  std::vector<FlowSensitivity> fs(samples.size());
  parallel_for(samples.size(), [&](std::size_t i) {
    try {
      fs[i] = flow_with_sensitivity(samples[i].vf, samples[i].t, samples[i].s, samples[i].x, ctx.cfg);
    } catch (const Error&) {
      fs[i].exit = ExitStatus::StepUnderflow;
    }
  });
  double worst = 0.0, min_j = std::numeric_limits<double>::infinity();
  std::size_t failures = 0;
  Table t{"samples", {"field", "s", "t", "x0", "det", "liouville", "rel_diff"}, {}};
  for (std::size_t i = 0; i < samples.size(); ++i) {
    if (fs[i].exit != ExitStatus::ReachedTarget) {
      ++failures;
      continue;
    }
    const double d = std::abs(fs[i].jac_det - fs[i].jac_liouville) / std::abs(fs[i].jac_liouville);
    worst = std::max(worst, d);
    min_j = std::min(min_j, fs[i].jac_det);
    t.rows.push_back({samples[i].field, samples[i].s, samples[i].t, samples[i].x(0), fs[i].jac_det, fs[i].jac_liouville, d});
  }
  res.values["samples"] = n;
  res.values["failed_samples"] = failures;
  res.checks.push_back(bound_check("max relative difference", worst, "<=", tol));
  res.checks.push_back(bound_check("min Jacobian", min_j, ">", 0.0));
  res.checks.push_back(bound_check("failed samples", static_cast<double>(failures), "==", 0.0));
  res.tables.push_back(std::move(t));
}

void op_sobolev_bound(const Context& ctx, const OperationSpec& op, OperationResult& res) {
  const VectorField field = build_field(op_field_spec(ctx, op));
  const Interval span = interval_of(op.params["tspan"].get<std::vector<double>>(), "tspan");
  const double t = num(op.params, "t", 0.5 * (span.lo + span.hi));
  const double tol = tolerance(ctx, op, "tolerance", 1e-6);
  const SobolevBoundReport r = sobolev_bound_check(field, t, box_of(op.params["box"]), op.params["p"].get<double>(),
                                                   span, ctx.cfg, {1e-12, 1e-7, 2'000'000, 48, 0.98, 100}, tol);
  res.values["lhs"] = number_or_null(r.lhs);
  res.values["lhs_error"] = number_or_null(r.lhs_error);
  res.values["rhs"] = number_or_null(r.rhs);
  res.values["lambda"] = number_or_null(r.lambda);
  res.values["slack"] = number_or_null(r.slack);
  res.values["evaluated"] = r.evaluated;
  const std::string actual = r.evaluated ? (r.holds ? "holds" : "violated") : "skipped";
  const auto expected = op.params.contains("expect") ? expectations(op.params["expect"]) : std::vector<std::string>{"holds"};
  res.checks.push_back(verdict_check("bound", expected, actual, tol, r.details));
  if (r.evaluated) {
    res.checks.push_back(bound_check("slack", r.slack, ">", 0.0, "rhs - lhs"));
  }
}

void op_lambda_p(const Context& ctx, const OperationSpec& op, OperationResult& res) {
  const VectorField field = build_field(op_field_spec(ctx, op));
  const Interval span = interval_of(op.params["tspan"].get<std::vector<double>>(), "tspan");
  const std::string mode = op.params.contains("mode") ? op.params["mode"].get<std::string>() : "geometric";
  if (mode != "geometric" && mode != "maximal_interval")
    fail(ErrorCode::InvalidParam, "mode must be geometric or maximal_interval");
  const LambdaResult r = lambda_p(field, op.params["p"].get<double>(), box_of(op.params["box"]), span,
                                  mode == "geometric" ? LambdaMode::Geometric : LambdaMode::MaximalInterval);
  res.values["value"] = number_or_null(r.value);
  res.values["error"] = number_or_null(r.error);
  res.values["sup_b"] = r.sup_b;
  res.values["ell"] = r.ell;
  const std::string actual = r.divergent() ? "divergent" : (r.status == QuadStatus::Converged ? "finite" : "inconclusive");
  const auto expected = op.params.contains("expect") ? expectations(op.params["expect"]) : std::vector<std::string>{"finite"};
  res.checks.push_back(verdict_check("lambda_p", expected, actual, std::nullopt, mode));
}

void op_validate_gauge(const Context& ctx, const OperationSpec& op, OperationResult& res) {
  const double alpha = num(op.params, "alpha", 2.0);
  const int dim = integer(op.params, "dim", 1);
  Table t{"gauges", {"gauge", "expected", "verdict", "convexity", "submultiplicative", "fitted_rate"}, {}};
  for (const auto& c : op.params["cases"]) {
    const GaugeSpec g = gauge_spec(c, "cases");
    const OrliczGauge gauge = build_gauge(g);
    const GaugeVerdict v = validate_gauge(gauge, alpha, default_ladder(), dim);
    const auto expected = c.contains("expect") ? expectations(c["expect"]) : std::vector<std::string>{"diverging", "converging"};
    res.checks.push_back(verdict_check(gauge.describe(), expected, to_string(v.osgood.verdict), std::nullopt, v.details));
    t.rows.push_back({gauge.describe(), join_words(expected), to_string(v.osgood.verdict), v.convexity_power_ok,
                      v.submultiplicative_ok, number_or_null(v.osgood.fitted_rate)});
  }
  (void)ctx;
  res.tables.push_back(std::move(t));
}

void op_osgood_funnel(const Context& ctx, const OperationSpec& op, OperationResult& res) {
  const VectorField field = build_field(op_field_spec(ctx, op));
  const OrliczGauge gauge = build_gauge(ctx.spec.gauge.value_or(GaugeSpec{}));
  const double alpha = num(op.params, "alpha", 2.0);
  const double s = num(op.params, "s", 0.0);
  const double horizon = num(op.params, "horizon", 1.0);
  const std::vector<double> x0v = op.params["x0"].get<std::vector<double>>();
  Vec x0(static_cast<int>(x0v.size()));
  for (std::size_t i = 0; i < x0v.size(); ++i) x0(static_cast<int>(i)) = x0v[i];
  const Box phi_box = box_of(op.params["phi_box"]);
  const Modulus omega = [&](double d) { return modulus_omega(gauge, alpha, d); };
  double phi_integral = 0.0;
  if (field.traits().autonomous) {
    phi_integral = estimate_phi(field, omega, phi_box, s) * horizon;
  } else {
    // Trapezoid over five time samples.
    for (int k = 0; k <= 4; ++k)
      phi_integral += (k == 0 || k == 4 ? 0.5 : 1.0) * estimate_phi(field, omega, phi_box, s + horizon * k / 4.0);
    phi_integral *= horizon / 4.0;
  }
  const auto rows = uniqueness_funnel(field, s, x0, nums(op.params, "radii", {1e-4, 1e-6, 1e-8}), horizon, omega,
                                      phi_integral, ctx.cfg,
                                      static_cast<std::size_t>(integer(op.params, "perturbations", 64)));
  res.values["phi_integral"] = phi_integral;
  res.values["gauge"] = gauge.describe();
  Table t{"funnel", {"delta", "max_spread", "envelope", "failed_trajectories"}, {}};
  for (const auto& r : rows) {
    std::ostringstream name;
    name << "spread(delta=" << r.delta << ")";
    Check c = bound_check(name.str(), r.max_spread, "<=", r.envelope, "tolerance is the comparison envelope");
    c.passed = r.holds;
    res.checks.push_back(c);
    t.rows.push_back({r.delta, r.max_spread, number_or_null(r.envelope), r.failed_trajectories});
  }
  res.tables.push_back(std::move(t));
}

void op_nonuniqueness(const Context& ctx, const OperationSpec& op, OperationResult& res) {
  const double alpha = num(op.params, "alpha", 1.5);
  const double tol = tolerance(ctx, op, "tolerance", 1e-5);
  ExampleParams p;
  p.alpha = alpha;
  const VectorField field = make_example("sublog", p).base;
  const auto [g1, g2] = nonuniqueness_pair(alpha);
  double r1 = 0.0, r2 = 0.0, gap = 0.0;
  Table t{"curves", {"t", "gamma1", "gamma2", "residual1", "residual2"}, {}};
  for (double time : nums(op.params, "times", {0.25, 0.5, 1.0, 2.0})) {
    const double a = ode_residual(field, g1, time), b = ode_residual(field, g2, time);
    r1 = std::max(r1, a);
    r2 = std::max(r2, b);
    gap = std::max(gap, std::abs(g2(time) - g1(time)));
    t.rows.push_back({time, g1(time), g2(time), a, b});
  }
  res.checks.push_back(bound_check("residual gamma1", r1, "<=", tol));
  res.checks.push_back(bound_check("residual gamma2", r2, "<=", tol));
  res.checks.push_back(bound_check("separation", gap, ">", 0.0, "largest gap between the two curves"));
  res.tables.push_back(std::move(t));
}

std::vector<BumpTest> bump_tests(const Json& tests) {
  std::vector<BumpTest> out;
  for (const auto& j : tests) {
    BumpTest b;
    const auto tt = j["t"].get<std::vector<double>>();
    b.t_center = tt[0];
    b.t_halfwidth = tt[1];
    const auto c = j["center"].get<std::vector<double>>();
    const auto w = j["halfwidth"].get<std::vector<double>>();
    if (c.size() != w.size()) fail(ErrorCode::InvalidParam, "test center and halfwidth differ in dimension");
    b.center.resize(static_cast<int>(c.size()));
    b.halfwidth.resize(static_cast<int>(w.size()));
    for (std::size_t i = 0; i < c.size(); ++i) {
      b.center(static_cast<int>(i)) = c[i];
      b.halfwidth(static_cast<int>(i)) = w[i];
    }
    out.push_back(b);
  }
  return out;
}

Lattice spaced_lattice(const Box& box, double h) {
  std::vector<int> nodes;
  for (int i = 0; i < box.dim(); ++i)
    nodes.push_back(static_cast<int>(std::lround((box.hi(i) - box.lo(i)) / h)) + 1);
  return Lattice::uniform(box, nodes);
}

void op_transport(const Context& ctx, const OperationSpec& op, OperationResult& res) {
  const VectorField field = build_field(op_field_spec(ctx, op));
  double lo = 0.0, hi = 0.0;
  const ScalarFn u0 = initial_data(op.params["initial"], field.dim(), lo, hi);
  const Box window = box_of(op.params["window"]);
  const double T = num(op.params, "final_time", 0.5);
  const int nt = integer(op.params, "time_nodes", 161);
  const double h = num(op.params, "spacing", 0.002);
  const bool refine = flag(op.params, "refine", true);
  const double tol = tolerance(ctx, op, "tolerance", 1e-4);
  const double halving = tolerance(ctx, op, "halving_tolerance", 0.25);
  const std::vector<BumpTest> tests = bump_tests(op.params["tests"]);
  if (!(h > 0.0) || nt < 3) fail(ErrorCode::InvalidParam, "spacing must be positive and time_nodes >= 3");
  std::vector<double> times(nt);
  for (int k = 0; k < nt; ++k) times[k] = T * k / (nt - 1);

  double violation = 0.0;
  std::size_t masked = 0;
  auto run = [&](double spacing, std::vector<double>& resid, bool keep) {
    const TransportSolution sol = solve_transport(field, u0, times, spaced_lattice(window, spacing), ctx.cfg);
    masked += sol.masked;
    for (const auto& slice : sol.values)
      for (double v : slice)
        if (std::isfinite(v)) violation = std::max({violation, lo - v, v - hi});
    for (const auto& r : weak_residual(field, sol, tests)) resid.push_back(r.residual);
    if (keep && field.dim() == 1) {
      Table t{"solution", {"x", "u_initial", "u_final"}, {}};
      for (std::size_t i = 0; i < sol.grid.size(); ++i)
        t.rows.push_back({sol.grid.node(i)(0), number_or_null(sol.values.front()[i]), number_or_null(sol.values.back()[i])});
      res.tables.push_back(std::move(t));
    }
  };
  std::vector<double> coarse, fine;
  run(h, coarse, true);
  if (refine) run(h / 2, fine, false);
  const double max_coarse = *std::max_element(coarse.begin(), coarse.end());
  Table t{"residuals", {"test", "residual", "residual_refined", "ratio"}, {}};
  for (std::size_t j = 0; j < coarse.size(); ++j)
    t.rows.push_back({j, number_or_null(coarse[j]), refine ? number_or_null(fine[j]) : Json(nullptr),
                      refine ? number_or_null(fine[j] / coarse[j]) : Json(nullptr)});
  res.tables.push_back(std::move(t));
  res.values["spacing"] = h;
  res.values["time_nodes"] = nt;
  res.values["masked_nodes"] = masked;
  res.values["max_residual"] = number_or_null(max_coarse);
  res.checks.push_back(bound_check("max residual", std::isnan(max_coarse) ? std::numeric_limits<double>::infinity() : max_coarse, "<=", tol));
  if (refine) {
    const double max_fine = *std::max_element(fine.begin(), fine.end());
    const double ratio = max_fine / max_coarse;
    res.values["max_residual_refined"] = number_or_null(max_fine);
    res.values["halving_ratio"] = number_or_null(ratio);
    const double deviation = std::abs(ratio / 0.5 - 1.0);
    std::ostringstream detail;
    detail << "refined/coarse max residual ratio " << ratio << ", judged as |ratio/0.5 - 1|";
    Check c = bound_check("halving deviation", std::isfinite(deviation) ? deviation : std::numeric_limits<double>::infinity(),
                          "<=", halving, detail.str());
    res.checks.push_back(c);
  }
  res.checks.push_back(bound_check("maximum principle violation", violation, "<=", 0.0));
}

double l1_relative(const DensityGrid& a, const DensityGrid& b) {
  std::vector<double> d(a.size()), s(a.size());
  for (std::size_t c = 0; c < a.size(); ++c) {
    d[c] = std::abs(a.density[c] - b.density[c]);
    s[c] = std::abs(b.density[c]);
  }
  return tree_sum(d) / tree_sum(s);
}

void op_continuity(const Context& ctx, const OperationSpec& op, OperationResult& res) {
  const VectorField field = build_field(op_field_spec(ctx, op));
  const int n = field.dim();
  double lo = 0.0, hi = 0.0;
  const ScalarFn rho0 = initial_data(op.params["initial"], n, lo, hi);
  const Box source = box_of(op.params["source"]), target = box_of(op.params["target"]);
  std::vector<int> cells;
  for (const auto& c : op.params["cells"]) cells.push_back(static_cast<int>(c.get<double>()));
  if (cells.size() == 1 && n > 1) cells.assign(n, cells[0]);
  const double t = num(op.params, "t", 0.5);
  const int per_axis = integer(op.params, "particles_per_axis", n == 1 ? 100000 : 600);
  const double mass_tol = tolerance(ctx, op, "mass_tolerance", 1e-4);
  const double l1_tol = tolerance(ctx, op, "l1_tolerance", 0.05);
  const double repr_tol = tolerance(ctx, op, "representation_tolerance", 0.01);

  const Lattice lat = midpoint_lattice(source, std::vector<int>(n, per_axis));
  const std::vector<double> w = node_weights(lat);
  std::vector<Particle> particles(lat.size());
  for (std::size_t i = 0; i < lat.size(); ++i) {
    particles[i].position = lat.node(i);
    particles[i].weight = rho0(particles[i].position) * w[i];
  }
  MeasureSolution start;
  start.particles = particles;
  const double m0 = start.total_weight();
  const MeasureSolution moved = solve_continuity(field, particles, t, ctx.cfg);
  const double m1 = moved.total_weight();
  res.checks.push_back(bound_check("particle mass change", std::abs(m1 - m0), "==", 0.0));

  const DensityGrid dens = solve_continuity(field, rho0, source, t, target, cells, ctx.cfg);
  const QuadResult mass = continuity_mass(field, rho0, source, t, target, ctx.cfg);
  const double mass_err = std::abs(mass.value - dens.source_mass) / std::abs(dens.source_mass);
  res.values["initial_mass"] = dens.source_mass;
  res.values["density_mass"] = mass.value;
  res.values["density_mass_error_estimate"] = mass.error;
  res.values["particle_mass"] = m1;
  res.checks.push_back(bound_check("density mass relative error", mass_err, "<=", mass_tol));

  const DensityGrid hist = bin_particles(moved, target, cells);
  const double l1 = l1_relative(hist, dens);
  res.values["particle_vs_density_l1"] = l1;
  res.checks.push_back(bound_check("particle vs density L1", l1, "<=", l1_tol));

  std::optional<DensityGrid> push;
  if (flag(op.params, "compare_representations", false)) {
    ContinuityDensityOptions o;
    o.representation = DensityRepresentation::Pushforward;
    push = solve_continuity(field, rho0, source, t, target, cells, ctx.cfg, o);
    const double d = l1_relative(*push, dens);
    res.values["pushforward_vs_jacobian_l1"] = d;
    res.checks.push_back(bound_check("pushforward vs jacobian L1", d, "<=", repr_tol));
  }
  std::vector<std::string> cols;
  for (int i = 0; i < n; ++i) cols.push_back("x" + std::to_string(i + 1));
  for (const char* c : {"jacobian", "particles"}) cols.push_back(c);
  if (push) cols.push_back("pushforward");
  Table tab{"density", cols, {}};
  for (std::size_t c = 0; c < dens.size(); ++c) {
    std::vector<Json> row;
    const Vec y = dens.center(c);
    for (int i = 0; i < n; ++i) row.push_back(y(i));
    row.push_back(dens.density[c]);
    row.push_back(hist.density[c]);
    if (push) row.push_back(push->density[c]);
    tab.rows.push_back(std::move(row));
  }
  res.tables.push_back(std::move(tab));
}

void op_pushforward_density(const Context& ctx, const OperationSpec& op, OperationResult& res) {
  const VectorField field = build_field(op_field_spec(ctx, op));
  const int n = field.dim();
  const double t = num(op.params, "t", 0.5), s = num(op.params, "s", 0.0);
  const Box source = box_of(op.params["source"]);
  const Box target = op.params.contains("target") ? box_of(op.params["target"]) : source;
  const int coarse_cells = integer(op.params, "coarse_cells", 64), fine_cells = integer(op.params, "fine_cells", 128);
  const int nodes = integer(op.params, "source_nodes", 1 << 17);
  const double min_count = num(op.params, "min_count", 100.0);
  const double factor = tolerance(ctx, op, "factor", 10.0);
  const double alpha = num(op.params, "alpha", 0.5);
  const double stab = tolerance(ctx, op, "stability_tolerance", 0.05);

  const FlowMapGrid fm = flow_map(field, t, s, midpoint_lattice(source, std::vector<int>(n, nodes)), ctx.cfg, false);
  std::vector<DensityGrid> hists;
  for (int cells : {coarse_cells, fine_cells}) {
    const std::vector<int> shape(n, cells);
    const DensityGrid hist = histogram_density(fm, target, shape, min_count);
    const DensityGrid jac = jacobian_density(field, t, s, source, target, shape, ctx.cfg);
    double worst = 0.0;
    std::size_t undersampled = 0;
    Table tab{"cells_" + std::to_string(cells), {"center", "histogram", "jacobian", "count", "flag"}, {}};
    for (std::size_t c = 0; c < hist.size(); ++c) {
      if (hist.flags[c] == CellFlag::Undersampled) ++undersampled;
      if (hist.flags[c] == CellFlag::Ok && jac.flags[c] == CellFlag::Ok && jac.density[c] > 0.0)
        worst = std::max(worst, hist.density[c] / jac.density[c]);
      tab.rows.push_back({hist.center(c)(0), hist.density[c], jac.density[c], hist.counts[c],
                          to_string(hist.flags[c] == CellFlag::Ok ? jac.flags[c] : hist.flags[c])});
    }
    res.values["worst_ratio_" + std::to_string(cells)] = worst;
    res.values["undersampled_" + std::to_string(cells)] = undersampled;
    res.checks.push_back(bound_check("max histogram/jacobian ratio (" + std::to_string(cells) + " cells)", worst, "<=",
                                     factor));
    res.tables.push_back(std::move(tab));
    hists.push_back(hist);
  }
  const OrliczDensityReport o = orlicz_density_check(hists[0], hists[1], alpha, stab);
  res.values["orlicz_coarse"] = number_or_null(o.coarse);
  res.values["orlicz_fine"] = number_or_null(o.fine);
  Check c = bound_check("orlicz relative change", o.relative_change, "<=", stab, o.finite ? "finite" : "not finite");
  c.passed = o.finite && o.stable;
  res.checks.push_back(c);
}

using OpFn = std::function<void(const Context&, const OperationSpec&, OperationResult&)>;

const std::map<std::string, OpFn>& operations() {
  static const std::map<std::string, OpFn> ops{
      {"flow_closed_form", op_flow_closed_form},
      {"sobolev_study", [](const Context& c, const OperationSpec& o, OperationResult& r) { op_study(c, o, r, false); }},
      {"holder_study", [](const Context& c, const OperationSpec& o, OperationResult& r) { op_study(c, o, r, true); }},
      {"cantor_image", op_cantor_image},
      {"gronwall", op_gronwall},
      {"liouville", op_liouville},
      {"sobolev_bound", op_sobolev_bound},
      {"lambda_p", op_lambda_p},
      {"validate_gauge", op_validate_gauge},
      {"osgood_funnel", op_osgood_funnel},
      {"nonuniqueness", op_nonuniqueness},
      {"transport", op_transport},
      {"continuity", op_continuity},
      {"pushforward_density", op_pushforward_density},
  };
  return ops;
}

SolverConfig solver_config(const Json& j, const std::string& path) {
  SolverConfig c;
  check_keys(j, path, {"rel_tol", "abs_tol", "max_step", "min_step", "domain_margin", "singular_slowdown", "max_steps",
                       "scale_abs_tol"});
  for (const char* k : {"rel_tol", "abs_tol", "max_step", "min_step", "domain_margin"})
    if (j.contains(k)) expect_number(j[k], join(path, k));
  if (j.contains("rel_tol")) c.rel_tol = j["rel_tol"].get<double>();
  if (j.contains("abs_tol")) c.abs_tol = j["abs_tol"].get<double>();
  if (j.contains("max_step")) c.max_step = j["max_step"].get<double>();
  if (j.contains("min_step")) c.min_step = j["min_step"].get<double>();
  if (j.contains("domain_margin")) c.domain_margin = j["domain_margin"].get<double>();
  if (j.contains("singular_slowdown")) {
    if (!j["singular_slowdown"].is_boolean()) schema(join(path, "singular_slowdown"), "expected true or false");
    c.singular_slowdown = j["singular_slowdown"].get<bool>();
  }
  if (j.contains("scale_abs_tol")) {
    if (!j["scale_abs_tol"].is_boolean()) schema(join(path, "scale_abs_tol"), "expected true or false");
    c.scale_abs_tol = j["scale_abs_tol"].get<bool>();
  }
  if (j.contains("max_steps")) {
    expect_integer(j["max_steps"], join(path, "max_steps"));
    c.max_steps = static_cast<std::size_t>(j["max_steps"].get<double>());
  }
  try {
    c.validate();
  } catch (const Error& e) {
    schema(path, e.what());
  }
  return c;
}

Json solver_json(const SolverConfig& c) {
  return {{"rel_tol", c.rel_tol},         {"abs_tol", c.abs_tol},
          {"max_step", c.max_step},       {"min_step", c.min_step},
          {"domain_margin", c.domain_margin}, {"singular_slowdown", c.singular_slowdown},
          {"max_steps", c.max_steps},     {"scale_abs_tol", c.scale_abs_tol}};
}

}  // namespace

// -----------------------------------------------------------------------------------------------

Json ExperimentSpec::canonical() const {
  Json j = Json::object();
  j["name"] = name;
  j["seed"] = seed;
  j["field"] = field ? field_json(*field) : Json(nullptr);
  j["gauge"] = gauge ? gauge_json(*gauge) : Json(nullptr);
  j["solver"] = solver_json(solver);
  Json tol = Json::object();
  for (const auto& [k, v] : tolerances) tol[k] = v;
  j["tolerances"] = tol;
  Json ops = Json::array();
  for (const auto& o : operations) ops.push_back({{"id", o.id}, {"op", o.op}, {"params", o.params}});
  j["operations"] = ops;
  return j;
}

std::string ExperimentSpec::hash() const { return sha256_hex(canonical().dump()); }

ExperimentSpec parse_spec(const std::string& yaml_text) {
  YAML::Node root;
  try {
    root = YAML::Load(yaml_text);
  } catch (const YAML::Exception& e) {
    schema("", std::string("invalid YAML: ") + e.what());
  }
  const Json j = yaml_to_json(root, "");
  expect_object(j, "");
  check_keys(j, "", {"name", "seed", "output", "field", "gauge", "solver", "tolerances", "operations"});
  ExperimentSpec spec;
  if (!j.contains("name")) schema("name", "required");
  expect_string(j["name"], "name");
  spec.name = j["name"].get<std::string>();
  if (spec.name.empty()) schema("name", "must not be empty");
  if (j.contains("seed")) {
    expect_integer(j["seed"], "seed");
    if (j["seed"].get<double>() < 0) schema("seed", "must be non-negative");
    spec.seed = j["seed"].is_number_unsigned() ? j["seed"].get<std::uint64_t>()
                                               : static_cast<std::uint64_t>(j["seed"].get<double>());
  }
  if (j.contains("output")) {
    expect_string(j["output"], "output");
    spec.output = j["output"].get<std::string>();
  }
  if (j.contains("field")) {
    validate_field(j["field"], "field");
    spec.field = field_spec(j["field"]);
  }
  if (j.contains("gauge")) {
    validate_params(j["gauge"], "gauge",
                    {{"family", PType::String}, {"k", PType::Integer}, {"beta", PType::Number}, {"p", PType::Number},
                     {"s_bar", PType::Number}});
    spec.gauge = gauge_spec(j["gauge"], "gauge");
  }
  if (j.contains("solver")) {
    expect_object(j["solver"], "solver");
    spec.solver = solver_config(j["solver"], "solver");
  }
  if (j.contains("tolerances")) {
    expect_object(j["tolerances"], "tolerances");
    for (const auto& [k, v] : j["tolerances"].items()) {
      expect_number(v, join("tolerances", k));
      spec.tolerances[k] = v.get<double>();
    }
  }
  if (j.contains("operations")) {
    if (!j["operations"].is_null()) expect_array(j["operations"], "operations");
    std::set<std::string> ids;
    std::size_t i = 0;
    for (const auto& o : j["operations"].is_null() ? Json::array() : j["operations"]) {
      const std::string path = index("operations", i);
      expect_object(o, path);
      if (!o.contains("op")) schema(join(path, "op"), "required");
      expect_string(o["op"], join(path, "op"));
      OperationSpec spec_op;
      spec_op.op = o["op"].get<std::string>();
      if (!op_schemas().count(spec_op.op)) schema(join(path, "op"), "unknown operation '" + spec_op.op + "'");
      spec_op.id = spec_op.op + "_" + std::to_string(i);
      if (o.contains("id")) {
        expect_string(o["id"], join(path, "id"));
        spec_op.id = o["id"].get<std::string>();
        if (spec_op.id.empty() || spec_op.id.find_first_of("/\\ .") != std::string::npos)
          schema(join(path, "id"), "ids must be non-empty and free of spaces, dots and slashes");
      }
      if (!ids.insert(spec_op.id).second) schema(join(path, "id"), "duplicate id '" + spec_op.id + "'");
      for (const auto& [k, v] : o.items())
        if (k != "op" && k != "id") spec_op.params[k] = v;
      validate_operation(spec_op.params, spec_op.op, path);
      spec.operations.push_back(std::move(spec_op));
      ++i;
    }
  }
  return spec;
}

ExperimentSpec load_spec(const std::string& path) {
  std::ifstream in(path);
  if (!in) fail(ErrorCode::Io, "cannot read spec file '" + path + "'");
  std::ostringstream os;
  os << in.rdbuf();
  return parse_spec(os.str());
}

std::vector<std::string> operation_names() {
  std::vector<std::string> names;
  for (const auto& [k, v] : op_schemas()) names.push_back(k);
  return names;
}

std::size_t ExperimentResult::check_count() const {
  std::size_t n = 0;
  for (const auto& o : operations) n += o.checks.size();
  return n;
}

std::size_t ExperimentResult::failed_checks() const {
  std::size_t n = 0;
  for (const auto& o : operations)
    for (const auto& c : o.checks) n += c.passed ? 0 : 1;
  return n;
}

bool ExperimentResult::operational_error() const {
  for (const auto& o : operations)
    if (!o.error.empty()) return true;
  return false;
}

int ExperimentResult::exit_code() const {
  if (operational_error()) return 1;
  return failed_checks() ? 2 : 0;
}

ExperimentResult run_experiment(const ExperimentSpec& spec, const RunOptions& options) {
  if (!(options.tol_scale > 0.0) || !std::isfinite(options.tol_scale))
    fail(ErrorCode::InvalidParam, "tolerance scale must be positive");
  ExperimentResult result;
  result.name = spec.name;
  result.spec_hash = spec.hash();
  result.seed = options.seed.value_or(spec.seed);
  result.tol_scale = options.tol_scale;
  result.spec = spec.canonical();
  Context ctx{spec, result.seed, options.tol_scale, spec.solver};
  std::uint64_t k = 0;
  for (const auto& op : spec.operations) {
    OperationResult r;
    r.id = op.id;
    r.op = op.op;
    Context c = ctx;
    c.seed = ctx.seed + 0x9e3779b97f4a7c15ULL * k++;
    try {
      operations().at(op.op)(c, op, r);
    } catch (const std::exception& e) {
      r.error = e.what();
    }
    result.operations.push_back(std::move(r));
  }
  return result;
}

}  // namespace roughflow

namespace roughflow {

namespace {

struct Preset {
  const char* name;
  const char* yaml;
};

const std::vector<Preset>& presets() {
  static const std::vector<Preset> p{
      {"verify-loglinear", R"(name: verify-loglinear
seed: 1
field:
  example: loglinear
operations:
  - id: closed_form
    op: flow_closed_form
    points: 20
    t_range: [0, 1]
    s_range: [0, 1]
    x_range: [0.05, 2.6682818284590453]
    tolerance: 1.0e-6
  - id: sobolev
    op: sobolev_study
    t: 1
    s: 0
    box: [0, 2.718281828459045]
    levels: 4
    finest_spacing: 1.0e-4
    cases:
      - {p: 1.75, expect: diverging}
      - {p: 1.40, expect: bounded}
      - {p: 1.30, expect: bounded}
)"},
      {"verify-sublog", R"(name: verify-sublog
seed: 1
field:
  example: sublog
  params: {alpha: 1, beta: 1}
operations:
  - id: sobolev
    op: sobolev_study
    t: 0.5
    s: 0
    box: [0, 0.06598803584531254]
    graded: true
    cases:
      - {p: 1.5, expect: diverging}
      - {p: 1.0, expect: bounded}
  - id: holder
    op: holder_study
    t: 0.5
    s: 0
    box: [0, 0.06598803584531254]
    graded: true
    cases:
      - {p: 0.5, expect: diverging}
  - id: pushforward
    op: pushforward_density
    t: 0.5
    s: 0
    source: [0, 0.06598803584531254]
    target: [0, 0.06598803584531254]
    coarse_cells: 64
    fine_cells: 128
    source_nodes: 131072
    min_count: 100
    factor: 10
    alpha: 0.5
    stability_tolerance: 0.05
)"},
      {"verify-cantor", R"(name: verify-cantor
seed: 1
operations:
  - id: image
    op: cantor_image
    level: 10
    times: [0.5, 1, 2]
    tolerance: 0.05
)"},
      {"verify-gronwall", R"(name: verify-gronwall
seed: 1
solver:
  abs_tol: 1.0e-100
operations:
  - id: gronwall
    op: gronwall
    fields: [loglinear, sublog, rotation, linear]
    samples: 1000
    tolerance: 1.0e-3
    equality_tolerance: 1.0e-6
  - id: liouville
    op: liouville
    fields: [loglinear, sublog, rotation, linear, cantor]
    samples: 500
    tolerance: 1.0e-5
)"},
      {"verify-lambda-p", R"(name: verify-lambda-p
seed: 1
field:
  example: loglinear
operations:
  - id: short_window_lambda
    op: lambda_p
    p: 3
    box: [-1, 3]
    tspan: [-0.025, 0.025]
    mode: geometric
    expect: finite
  - id: short_window_bound
    op: sobolev_bound
    p: 3
    t: 0.025
    box: [-1, 3]
    tspan: [-0.025, 0.025]
    expect: holds
  - id: long_window_lambda
    op: lambda_p
    p: 3
    box: [-1, 3]
    tspan: [-0.15, 0.15]
    mode: geometric
    expect: divergent
  - id: long_window_sobolev
    op: sobolev_study
    t: 0.3
    s: 0
    box: [0, 2.718281828459045]
    cases:
      - {p: 2, expect: bounded}
      - {p: 3, expect: bounded}
)"},
      {"verify-transport", R"(name: verify-transport
seed: 1
operations:
  - id: constant_drift
    op: transport
    field: {example: constant, params: {drift: [1]}}
    initial: {kind: gaussian, center: [0.5], width: [0.15]}
    window: [-0.5, 1.5]
    final_time: 0.5
    time_nodes: 161
    spacing: 0.002
    tests:
      - {t: [0, 0.3], center: [0.5], halfwidth: [0.3]}
      - {t: [0.25, 0.2], center: [0.75], halfwidth: [0.35]}
      - {t: [0.1, 0.3], center: [0.6], halfwidth: [0.25]}
      - {t: [0.3, 0.2], center: [0.9], halfwidth: [0.4]}
      - {t: [0.2, 0.25], center: [0.4], halfwidth: [0.5]}
  - id: loglinear
    op: transport
    field: loglinear
    initial: {kind: gaussian, center: [1.5], width: [0.3]}
    window: [0.1, 2.7]
    final_time: 0.5
    time_nodes: 161
    spacing: 0.002
    tests:
      - {t: [0, 0.3], center: [1.5], halfwidth: [0.5]}
      - {t: [0.25, 0.2], center: [1.6], halfwidth: [0.6]}
      - {t: [0.1, 0.3], center: [1.2], halfwidth: [0.5]}
      - {t: [0.3, 0.2], center: [2.0], halfwidth: [0.5]}
      - {t: [0.2, 0.25], center: [1.4], halfwidth: [0.8]}
  - id: rotation
    op: transport
    field: rotation
    initial: {kind: gaussian, center: [0.5, 0], width: [0.15]}
    window: [[0, 0.9], [-0.3, 0.6]]
    final_time: 0.5
    time_nodes: 161
    spacing: 0.002
    tests:
      - {t: [0, 0.3], center: [0.5, 0], halfwidth: [0.3, 0.3]}
      - {t: [0.25, 0.2], center: [0.45, 0.15], halfwidth: [0.3, 0.3]}
      - {t: [0.1, 0.3], center: [0.5, 0.05], halfwidth: [0.25, 0.25]}
      - {t: [0.3, 0.2], center: [0.42, 0.25], halfwidth: [0.3, 0.3]}
      - {t: [0.2, 0.25], center: [0.48, 0.1], halfwidth: [0.35, 0.35]}
)"},
      {"verify-continuity", R"(name: verify-continuity
seed: 1
operations:
  - id: loglinear
    op: continuity
    field: loglinear
    initial: {kind: indicator, box: [0.5, 2]}
    source: [0.5, 2]
    target: [0, 2.7]
    cells: [270]
    t: 0.5
    particles_per_axis: 100000
    compare_representations: true
  - id: rotation
    op: continuity
    field: rotation
    initial: {kind: bump, center: [0.5, 0], width: [0.3]}
    source: [[0.2, 0.8], [-0.3, 0.3]]
    target: [[-0.2, 1.0], [-0.5, 0.7]]
    cells: [96, 96]
    t: 0.5
    particles_per_axis: 600
)"},
      {"verify-gauges", R"(name: verify-gauges
seed: 1
gauge: {family: exponential, beta: 1}
operations:
  - id: dichotomy
    op: validate_gauge
    alpha: 2
    dim: 1
    cases:
      - {family: subexp, k: 1, beta: 0, expect: diverging}
      - {family: subexp, k: 1, beta: 0.5, expect: diverging}
      - {family: subexp, k: 1, beta: 1, expect: diverging}
      - {family: subexp, k: 2, beta: 0, expect: diverging}
      - {family: subexp, k: 2, beta: 0.5, expect: diverging}
      - {family: subexp, k: 2, beta: 1, expect: diverging}
      - {family: subexp, k: 1, beta: 1.5, expect: converging}
      - {family: subexp, k: 2, beta: 1.5, expect: converging}
      - {family: power, p: 2, expect: converging}
  - id: funnel
    op: osgood_funnel
    field: loglinear
    x0: [0.5]
    s: 0
    horizon: 1
    radii: [1.0e-4, 1.0e-6, 1.0e-8]
    perturbations: 64
    alpha: 2
    phi_box: [-1, 3]
  - id: nonuniqueness
    op: nonuniqueness
    alpha: 1.5
    times: [0.25, 0.5, 1, 2]
    tolerance: 1.0e-5
)"},
  };
  return p;
}

}  // namespace

std::vector<std::string> preset_names() {
  std::vector<std::string> names;
  for (const auto& p : presets()) names.emplace_back(p.name);
  return names;
}

std::string preset_yaml(const std::string& name) {
  for (const auto& p : presets())
    if (name == p.name) return p.yaml;
  fail(ErrorCode::InvalidParam, "unknown preset '" + name + "'");
}

}  // namespace roughflow
