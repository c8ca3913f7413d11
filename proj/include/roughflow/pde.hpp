#pragma once

#include <cstddef>
#include <cstdint>
#include <functional>
#include <vector>

#include "roughflow/field.hpp"
#include "roughflow/flow.hpp"
#include "roughflow/quadrature.hpp"
#include "roughflow/regularity.hpp"

namespace roughflow {

using ScalarFn = std::function<double(const Vec& x)>;

// Solution of the transport equation on a lattice: u(t_k, x) = u0(X(0, t_k, x)).
struct TransportSolution {
  std::vector<double> times;
  Lattice grid;
  std::vector<std::vector<double>> values;  // [time][node]; NaN where masked
  std::vector<std::vector<std::uint8_t>> valid;
  ScalarFn initial;
  std::size_t masked = 0;
};

// Backward characteristics from every node and time. Autonomous fields reuse one curve per node,
// restarted at each output time; other fields solve one curve per (node, time).
TransportSolution solve_transport(const VectorField& field, const ScalarFn& u0, const std::vector<double>& times,
                                  const Lattice& grid, const SolverConfig& cfg = {});

struct Particle {
  Vec position;
  double weight = 0.0;
};

struct MeasureSolution {
  double t = 0.0;
  std::vector<Particle> particles;
  std::vector<std::uint8_t> valid;
  double total_weight() const;
};

// Pushforward X(t,0,.)_# of a weighted particle measure; weights never change.
MeasureSolution solve_continuity(const VectorField& field, const std::vector<Particle>& initial, double t,
                                 const SolverConfig& cfg = {});

// Particle positions at every output time along the same forward curves.
struct ParticleSeries {
  std::vector<double> times;
  std::vector<double> weights;
  std::vector<std::vector<Vec>> positions;  // [time][particle]
  std::vector<std::uint8_t> valid;          // per particle, over all times
};

ParticleSeries particle_series(const VectorField& field, const std::vector<Particle>& initial,
                               const std::vector<double>& times, const SolverConfig& cfg = {});

// Weight-carrying histogram of a particle measure (cell mass / cell volume).
DensityGrid bin_particles(const MeasureSolution& m, const Box& target, const std::vector<int>& cells);

enum class DensityRepresentation {
  Jacobian,     // rho0 / J_{X(t,0,.)} o X(0,t,.), J from the variational determinant
  Liouville,    // same, J from exp(int div b)
  Pushforward,  // (rho0 J_{X,t}) o X(0,t,.), J_{X,t} the histogram density of X(t,0,.)_# L^n
};

const char* to_string(DensityRepresentation representation);

struct ContinuityDensityOptions {
  DensityRepresentation representation = DensityRepresentation::Jacobian;
  // Source nodes per target cell along each axis for the pushforward representation; zero selects
  // 256^{1/n}.
  int source_refinement = 0;
};

// Density of X(t,0,.)_# (rho0 L^n) at the target cell centres. rho0 vanishes outside source_box.
// Cells whose backward curve does not return to source_box carry density 0.
DensityGrid solve_continuity(const VectorField& field, const ScalarFn& rho0, const Box& source_box, double t,
                             const Box& target, const std::vector<int>& cells, const SolverConfig& cfg = {},
                             const ContinuityDensityOptions& options = {});

struct DensitySeries {
  std::vector<double> times;
  std::vector<DensityGrid> grids;
};

DensitySeries continuity_series(const VectorField& field, const ScalarFn& rho0, const Box& source_box,
                                const std::vector<double>& times, const Box& target, const std::vector<int>& cells,
                                const SolverConfig& cfg = {}, const ContinuityDensityOptions& options = {});

// Adaptive integral of the density-mode solution over the target box.
QuadResult continuity_mass(const VectorField& field, const ScalarFn& rho0, const Box& source_box, double t,
                           const Box& target, const SolverConfig& cfg = {},
                           const QuadOptions& quad = {1e-10, 1e-7, 200'000, 48, 0.98, 100});

// phi(t,x) = B((t - tc)/tw) prod_i B((x_i - c_i)/w_i) with B(r) = (1 - r^2)^3 on |r| < 1.
struct BumpTest {
  double t_center = 0.0;
  double t_halfwidth = 1.0;
  Vec center;
  Vec halfwidth;

  double value(double t, const Vec& x) const;
  double dt(double t, const Vec& x) const;
  Vec grad(double t, const Vec& x) const;
  double time_factor(double t) const;
  double time_factor_dt(double t) const;
  double space_factor(const Vec& x) const;
  Vec space_grad(const Vec& x) const;
};

struct WeakResidual {
  double residual = 0.0;  // |lhs - rhs|
  double lhs = 0.0;
  double rhs = 0.0;
  std::size_t masked_cells = 0;  // masked solution cells inside the support (residual is then NaN)
};

// Transport weak form int int u (phi_t + div(b phi)) dx dt = -int u(0,.) phi(0,.) dx with u piecewise
// constant on lattice cells (value of the lower corner), Gauss-Legendre in space and composite
// Simpson on the stored (uniform, odd-count) time mesh, which must start at 0.
std::vector<WeakResidual> weak_residual(const VectorField& field, const TransportSolution& u,
                                        const std::vector<BumpTest>& tests);

// Continuity weak form int int (phi_t + <b, D phi>) d rho_t dt = -int phi(0,.) d rho_0 for particles.
std::vector<WeakResidual> weak_residual(const VectorField& field, const ParticleSeries& rho,
                                        const std::vector<BumpTest>& tests);

// The same weak form for cell densities, constant on each cell, Gauss-Legendre in space.
std::vector<WeakResidual> weak_residual(const VectorField& field, const DensitySeries& rho,
                                        const std::vector<BumpTest>& tests);

// Exponent pq(p-n)/(q(p-n)+p^2) to which W^{1,q} initial data propagate.
double propagated_sobolev_exponent(double p, double q, int n);

// Midpoint values of int_box |D u(t,.)|^q dx with u = u0 o X(0,t,.) and D u = D_xX(0,t,x)^T grad u0,
// on uniform meshes halved per level, with the refinement verdict.
RefinementStudy transport_sobolev_study(const VectorField& field, const ScalarFn& u0,
                                        const std::function<Vec(const Vec&)>& grad_u0, double t, const Box& box,
                                        double q, const MeshOptions& mesh = {}, const SolverConfig& cfg = {});

}  // namespace roughflow
