#pragma once

#include <functional>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "roughflow/field.hpp"

namespace roughflow {

using ClosedFlow = std::function<Vec(double t, double s, const Vec& x)>;
using ClosedFlowDerivative = std::function<Mat(double t, double s, const Vec& x)>;

struct ExampleMetadata {
  // Supremum of exponents q with X(t,s,.) in W^{1,q}_loc; +inf when every q works.
  std::function<std::optional<double>(double t, double s)> sharp_sobolev_exponent;
  bool wellposed = true;
  std::string notes;
};

struct ExampleField {
  std::string name;
  VectorField base;
  ClosedFlow closed_flow;                       // empty when no closed form exists
  ClosedFlowDerivative closed_flow_derivative;  // empty when no closed form exists
  ExampleMetadata metadata;
};

struct ExampleParams {
  double alpha = 1.0;           // sublog exponent
  double beta = 1.0;            // sublog amplitude
  int level = 12;               // cantor approximation depth
  double lambda = 1.0;          // linear rate
  int dim = 1;                  // linear dimension
  std::vector<double> drift{};  // constant field value; empty means 0 in 1D
};

// Names: loglinear, sublog, cantor, rotation, linear, constant.
ExampleField make_example(const std::string& name, const ExampleParams& params = {});
std::vector<std::string> example_names();

// Level-N approximation of the Cantor staircase on [0,1].
double cantor_staircase(double s, int level);
// Slope of the level-N approximation (0 on plateaus, (3/2)^N elsewhere).
double cantor_staircase_slope(double s, int level);

using ScalarPath = std::function<double(double t)>;

// The two solutions from x=0 of the sublog(alpha) field, alpha > 1 (amplitude 1).
std::pair<ScalarPath, ScalarPath> nonuniqueness_pair(double alpha);

// |gamma'(t) - b(gamma(t))| with gamma' from central differences of step 1e-6*max(1,|t|).
double ode_residual(const VectorField& field, const ScalarPath& gamma, double t);

}  // namespace roughflow
