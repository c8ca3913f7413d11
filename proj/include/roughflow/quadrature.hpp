#pragma once

#include <cstddef>
#include <functional>
#include <vector>

#include "roughflow/field.hpp"

namespace roughflow {

enum class QuadStatus { Converged, Divergent, Unresolved };

const char* to_string(QuadStatus status);

struct QuadOptions {
  double abs_tol = 1e-10;
  double rel_tol = 1e-8;
  std::size_t max_evaluations = 1'000'000;
  int max_depth = 48;
  // Consecutive layer ratio at or above this marks an endpoint singularity as non-integrable.
  double divergence_ratio = 0.98;
  int max_layers = 100;
};

struct QuadResult {
  double value = 0.0;
  double error = 0.0;
  QuadStatus status = QuadStatus::Converged;
  std::size_t evaluations = 0;
};

using Integrand1D = std::function<double(double)>;
using IntegrandND = std::function<double(const Vec&)>;

// Adaptive Simpson with Richardson correction; tol is absolute.
QuadResult adaptive_simpson(const Integrand1D& f, double a, double b, double tol, std::size_t budget,
                            int max_depth = 48);

// Integral over [a,b]. Singular points are never evaluated: the neighbourhood of each is cut into
// layers at relative distances 10^{-3j} and integrated in logarithmic variables, which also
// decides integrability from the layer ratios.
QuadResult integrate_1d(const Integrand1D& f, double a, double b, const std::vector<double>& singular_points,
                        const QuadOptions& options = {});

// Nested tensor-product integral over a bounded box, axis 0 outermost.
QuadResult integrate_box(const IntegrandND& f, const Box& box,
                         const std::vector<std::vector<double>>& singular_coords, const QuadOptions& options = {});

struct GaussRule {
  std::vector<double> nodes;    // on [-1, 1]
  std::vector<double> weights;  // sum to 2
};

// Gauss-Legendre rule with n in [1, 10] points.
GaussRule gauss_legendre(int n);

}  // namespace roughflow
