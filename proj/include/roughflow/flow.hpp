#pragma once

#include <cstddef>
#include <functional>
#include <optional>
#include <string>
#include <vector>

#include "roughflow/field.hpp"
#include "roughflow/ode.hpp"

namespace roughflow {

struct SolverConfig {
  double rel_tol = 1e-10;
  double abs_tol = 1e-12;
  double max_step = 1e300;
  double min_step = 1e-12;
  int method_order = 5;
  double domain_margin = 0.0;
  bool singular_slowdown = true;
  std::size_t max_steps = 1'000'000;
  // Use min(abs_tol, rel_tol * |x0|) per trajectory, for start points far below abs_tol.
  bool scale_abs_tol = false;

  void validate() const;
  // Stable textual form, used for hashing into output sidecars.
  std::string canonical() const;
};

enum class ExitStatus { ReachedTarget, HitTimeBoundary, HitSpaceBoundary, StepUnderflow };

const char* to_string(ExitStatus status);

struct Trajectory {
  double s = 0.0;
  Vec x0;
  double t_target = 0.0;
  std::vector<double> times;
  std::vector<Vec> states;
  std::vector<DenseSegment> segments;  // segments[i] spans times[i]..times[i+1]
  ExitStatus exit = ExitStatus::ReachedTarget;
  double ell = 0.0;

  bool reached() const { return exit == ExitStatus::ReachedTarget; }
  double t_end() const { return times.back(); }
  const Vec& final_state() const { return states.back(); }
  // Dense-output state at any time between s and t_end.
  Vec at(double t) const;
};

Trajectory integrate_trajectory(const VectorField& field, double s, const Vec& x0, double t_target,
                                const SolverConfig& cfg = {});

// X(t,s,x) if the maximal curve reaches t, otherwise nothing.
std::optional<Vec> flow_point(const VectorField& field, double t, double s, const Vec& x, const SolverConfig& cfg = {});

// Length of the maximal interval of the curve through (s,x), intersected with the window.
double maximal_interval(const VectorField& field, double s, const Vec& x, const Interval& window,
                        const SolverConfig& cfg = {});

struct VariationalResult {
  std::vector<double> times;
  std::vector<Mat> dxX;
  std::vector<double> jac_det;
  std::vector<double> jac_liouville;
};

// Integrates Y' = D_xb(t, X(t)) Y and J' = div b J along the stored trajectory,
// using the trajectory's dense output between its mesh nodes.
VariationalResult variational_solve(const VectorField& field, const Trajectory& traj, const SolverConfig& cfg = {});

// Joint integration of the state, D_xX and the Liouville integral from (s,x) to t.
struct FlowSensitivity {
  ExitStatus exit = ExitStatus::ReachedTarget;
  double t_end = 0.0;
  Vec image;
  Mat dxX;
  double jac_det = 0.0;
  double jac_liouville = 0.0;
};

FlowSensitivity flow_with_sensitivity(const VectorField& field, double t, double s, const Vec& x,
                                      const SolverConfig& cfg = {});

struct GronwallReport {
  double lhs = 0.0;
  double rhs = 0.0;
  double slack = 0.0;  // rhs - lhs
  double tolerance = 1e-3;
  bool holds = false;
};

GronwallReport gronwall_check(const VectorField& field, const Trajectory& traj, const VariationalResult& var,
                              double tolerance = 1e-3);

// |X(t3,t2,X(t2,t1,x)) - X(t3,t1,x)|.
double semigroup_residual(const VectorField& field, double t1, double t2, double t3, const Vec& x,
                          const SolverConfig& cfg = {});

struct Lattice {
  std::vector<std::vector<double>> axes;

  static Lattice uniform(const Box& box, const std::vector<int>& nodes_per_axis);
  int dim() const { return static_cast<int>(axes.size()); }
  std::vector<int> shape() const;
  std::size_t size() const;
  Vec node(std::size_t index) const;
  std::vector<int> unflatten(std::size_t index) const;
  std::size_t flatten(const std::vector<int>& multi) const;
};

struct FlowMapGrid {
  double t = 0.0;
  double s = 0.0;
  Lattice grid;
  std::vector<Vec> images;
  std::vector<ExitStatus> exits;
  bool has_variational = false;
  std::vector<Mat> dx_matrices;
  std::vector<double> jac;
  std::vector<double> liouville_jac;

  bool inside(std::size_t i) const { return exits[i] == ExitStatus::ReachedTarget; }
};

FlowMapGrid flow_map(const VectorField& field, double t, double s, const Lattice& grid, const SolverConfig& cfg = {},
                     bool with_variational = false);

using Modulus = std::function<double(double)>;

struct FunnelRow {
  double delta = 0.0;
  double max_spread = 0.0;
  double envelope = 0.0;
  bool holds = false;
  std::size_t failed_trajectories = 0;
};

// Bundles of perturbations around x0 (64 by default) flowed to s + horizon; the spread is measured
// against the central trajectory and compared with the solution of D' = omega(D) over a
// reparametrized time of length phi_integral.
std::vector<FunnelRow> uniqueness_funnel(const VectorField& field, double s, const Vec& x0,
                                         const std::vector<double>& radii, double horizon, const Modulus& omega,
                                         double phi_integral, const SolverConfig& cfg = {},
                                         std::size_t perturbations = 64);

// Sampled sup of |b(t,x) - b(t,y)| / omega(|x-y|) over pairs in a box, for time t.
double estimate_phi(const VectorField& field, const Modulus& omega, const Box& box, double t, std::size_t points = 400);

// Upper solution of D' = omega(D), D(0) = delta, at reparametrized time tau.
double comparison_envelope(const Modulus& omega, double delta, double tau);

}  // namespace roughflow
