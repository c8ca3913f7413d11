#pragma once

#include <functional>
#include <limits>
#include <memory>
#include <string>
#include <vector>

#include "roughflow/linalg.hpp"

namespace roughflow {

struct Interval {
  double lo = -std::numeric_limits<double>::infinity();
  double hi = std::numeric_limits<double>::infinity();

  bool contains(double t) const { return t >= lo && t <= hi; }
  double length() const { return hi - lo; }
};

// Axis-aligned box, closed for membership purposes. Infinite bounds allowed per axis.
class Box {
 public:
  Box() = default;
  Box(std::vector<double> lo, std::vector<double> hi);
  static Box unbounded(int dim);
  static Box interval(double lo, double hi);

  int dim() const { return static_cast<int>(lo_.size()); }
  double lo(int i) const { return lo_[i]; }
  double hi(int i) const { return hi_[i]; }
  const std::vector<double>& lower() const { return lo_; }
  const std::vector<double>& upper() const { return hi_; }

  bool contains(const Vec& x) const;
  bool bounded() const;
  double volume() const;
  // Euclidean distance from an interior point to the boundary (infinite if unbounded everywhere).
  double distance_to_boundary(const Vec& x) const;
  bool subset_of(const Box& other) const;

 private:
  std::vector<double> lo_;
  std::vector<double> hi_;
};

struct MatrixSample {
  Mat entries;
  double op_norm = 0.0;
  double trace = 0.0;

  static MatrixSample from(const Mat& m);
};

struct JacobianMode {
  enum class Kind { Analytic, CentralDifference };
  Kind kind = Kind::Analytic;
  // Zero selects cbrt(eps)·max(1,|x_i|) per axis.
  double step = 0.0;

  static JacobianMode analytic() { return {Kind::Analytic, 0.0}; }
  static JacobianMode central_difference(double h = 0.0) { return {Kind::CentralDifference, h}; }
};

using Evaluator = std::function<Vec(double t, const Vec& x)>;
using JacobianFn = std::function<Mat(double t, const Vec& x)>;
using Membership = std::function<bool(const Vec& x)>;

struct FieldTraits {
  std::string label;
  // Coordinates per axis where the Jacobian blows up (e.g. 0 for x log(1/x)).
  std::vector<std::vector<double>> singular_coords;
  // Coordinates per axis where the Jacobian jumps; quadrature cuts there.
  std::vector<std::vector<double>> jacobian_jumps;
  // Times across which b may jump; integration restarts there.
  std::vector<double> time_breakpoints;
  bool autonomous = false;
  // Optional refinement of the box domain.
  Membership membership;
};

enum class EvalStatus { Ok, OutOfDomain, NonFinite };

class VectorField {
 public:
  VectorField(int dim, Interval time, Box domain, Evaluator evaluator,
              JacobianFn analytic_jacobian, JacobianMode mode, FieldTraits traits = {});

  int dim() const;
  const Interval& time_interval() const;
  const Box& domain() const;
  const FieldTraits& traits() const;
  const JacobianMode& jacobian_mode() const;
  bool has_analytic_jacobian() const;

  bool in_domain(double t, const Vec& x) const;

  Vec eval(double t, const Vec& x) const;
  // Non-throwing variant for integrators.
  EvalStatus try_eval(double t, const Vec& x, Vec& out) const;

  MatrixSample jacobian(double t, const Vec& x) const;
  Mat jacobian_matrix(double t, const Vec& x) const;
  double divergence(double t, const Vec& x) const;

  // Distance from x to the nearest declared singular coordinate (infinite if none).
  double distance_to_singular(const Vec& x) const;
  // Per-axis union of singular coordinates and Jacobian jumps, for quadrature.
  std::vector<std::vector<double>> quadrature_breaks() const;

  VectorField with_jacobian_mode(JacobianMode mode) const;
  VectorField restricted(const Box& box) const;
  VectorField with_traits(FieldTraits traits) const;

 private:
  struct Impl;
  explicit VectorField(std::shared_ptr<const Impl> impl);
  Mat difference_jacobian(double t, const Vec& x) const;
  std::shared_ptr<const Impl> impl_;
};

// (n+m)-dimensional field h(t,(x,y)) = (b(t,x), 0).
VectorField extend_dim(const VectorField& field, int m);

// Grid-sampled field from CSV. Layout:
//   line 1: n, nt                       (spatial dim, number of time slices)
//   line 2: t_0, ..., t_{nt-1}          (slice start times; piecewise constant in t)
//   line 3: lo_1, hi_1, ..., lo_n, hi_n (box bounds)
//   line 4: N_1, ..., N_n               (nodes per axis, each >= 2)
//   then nt * prod(N_i) rows of n components, row-major over nodes (last axis fastest),
//   slices in order. Spatial interpolation is multilinear.
VectorField load_grid_field(const std::string& path);

}  // namespace roughflow
