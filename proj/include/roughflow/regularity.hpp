#pragma once

#include <cstddef>
#include <cstdint>
#include <string>
#include <vector>

#include "roughflow/field.hpp"
#include "roughflow/flow.hpp"
#include "roughflow/quadrature.hpp"

namespace roughflow {

// Lattice of cell centres for `cells[i]` equal cells along axis i.
Lattice midpoint_lattice(const Box& box, const std::vector<int>& cells);

// Per-node volume of the cell centred on each node: half the span to both neighbours in the
// interior, the full span to the single neighbour at an edge.
std::vector<double> node_weights(const Lattice& grid);

struct GridGradient {
  std::vector<Mat> matrices;  // NaN where invalid
  std::vector<std::uint8_t> valid;
  std::size_t valid_count = 0;
};

// Central differences of the images in the interior, one-sided at lattice edges. A node is
// invalid when it or a neighbour used by its stencil did not reach the target time.
GridGradient grid_gradient(const FlowMapGrid& fm);

enum class RefinementVerdict { Bounded, Diverging, Inconclusive };
const char* to_string(RefinementVerdict verdict);

struct RefinementLevel {
  double h = 0.0;
  double value = 0.0;
  double coverage = 1.0;  // fraction of nodes whose flow computation succeeded
  std::size_t nodes = 0;
};

struct RefinementStudy {
  double p = 0.0;  // integrability exponent, or the Hoelder exponent for seminorm studies
  std::vector<RefinementLevel> levels;
  double fitted_slope = 0.0;  // least-squares slope of log value against log h
  RefinementVerdict verdict = RefinementVerdict::Inconclusive;
  std::string details;
};

struct RefinementOptions {
  double slope_threshold = 0.1;  // diverging needs a slope below -slope_threshold
  double growth_ratio = 0.99;    // ratio of consecutive increments treated as non-contracting
  double stall_tolerance = 1e-3;  // relative increments below this count as converged
  double min_coverage = 0.95;
};

// Verdict for values computed on halving spacings. Diverging: every increment positive, slope
// below -threshold and no contracting increment ratio. Bounded: relative increments all below the
// stall tolerance, or slope at or above -threshold with every increment ratio contracting.
RefinementVerdict refinement_verdict(const std::vector<RefinementLevel>& levels, double& slope,
                                     const RefinementOptions& options = {});

struct MeshOptions {
  int levels = 4;
  // Uniform meshes: spacing of the finest level per axis; zero selects about 4096 base cells.
  double finest_spacing = 0.0;
  // Graded meshes (one dimension only): an innermost cell [lo, lo + h] with h = graded_start / 2^level,
  // then geometric cells at cells_per_decade per decade of distance from lo.
  bool graded = false;
  double graded_start = 1e-20;
  int cells_per_decade = 40;
  RefinementOptions verdict;
};

// Midpoint-rule values of int_box ||D_xX(t,s,x)||^p dx on successively halved meshes, with D_xX from
// the variational equation. Nodes whose curve leaves the domain before t lie outside the flow's
// domain and contribute nothing; solver failures reduce the coverage.
RefinementStudy sobolev_study(const VectorField& field, double t, double s, const Box& box, double p,
                              const MeshOptions& mesh = {}, const SolverConfig& cfg = {});

// Largest quotient |X(x) - X(y)| / |x - y|^gamma over node pairs at dyadic strides along each axis,
// on the same meshes.
RefinementStudy holder_study(const VectorField& field, double t, double s, const Box& box, double gamma,
                             const MeshOptions& mesh = {}, const SolverConfig& cfg = {});

struct SobolevBoundReport {
  double lhs = 0.0;
  double lhs_error = 0.0;
  double rhs = 0.0;
  double lambda = 0.0;
  double slack = 0.0;  // rhs - lhs
  double tolerance = 1e-6;
  bool evaluated = false;  // false when Lambda_p diverges and the check is skipped
  bool holds = false;
  std::size_t failed_nodes = 0;
  std::string details;
};

// int_tspan int ||D_xX(t,s,x)||^p dx ds against ell^{n/(p-n)} Lambda_p over box x tspan.
SobolevBoundReport sobolev_bound_check(const VectorField& field, double t, const Box& box, double p,
                                       const Interval& tspan, const SolverConfig& cfg = {},
                                       const QuadOptions& quad = {1e-12, 1e-7, 2'000'000, 48, 0.98, 100},
                                       double tolerance = 1e-6);

enum class CellFlag : std::uint8_t { Ok, Undersampled, ZeroJacobian, Unreached };
const char* to_string(CellFlag flag);

struct DensityGrid {
  std::string mode;  // "histogram" or "jacobian_inverse"
  Box box;
  std::vector<int> cells;
  std::vector<double> density;
  std::vector<double> mass;
  std::vector<std::size_t> counts;  // samples per cell (histogram mode)
  std::vector<CellFlag> flags;
  double total_mass = 0.0;
  double source_mass = 0.0;   // mass of the source points that reached the target time
  double escaped_mass = 0.0;  // source mass whose image fell outside the target box
  std::size_t samples = 0;
  double min_count = 0.0;

  std::size_t size() const { return density.size(); }
  double cell_volume() const;
  Vec center(std::size_t index) const;
};

// Bins the images of the source nodes, each carrying the volume of its source cell. Cells with
// fewer than min_count samples are flagged undersampled. Counting is exact: total + escaped = source.
DensityGrid histogram_density(const FlowMapGrid& fm, const Box& target, const std::vector<int>& cells,
                              double min_count = 100.0);

// Density 1/J_X(t,s,X(s,t,y)) at each target cell centre y, from the backward curve and its
// variational Jacobian. Cells whose backward curve fails to return to source_box are unreached.
DensityGrid jacobian_density(const VectorField& field, double t, double s, const Box& source_box, const Box& target,
                             const std::vector<int>& cells, const SolverConfig& cfg = {});

// Phi_alpha(w) = w exp((log+ w)^alpha).
double phi_alpha(double w, double alpha);

// Sum of Phi_alpha(density) times cell volume over unflagged cells.
double orlicz_integral(const DensityGrid& d, double alpha);

struct OrliczDensityReport {
  double alpha = 0.0;
  double coarse = 0.0;
  double fine = 0.0;
  double relative_change = 0.0;
  double tolerance = 0.05;
  bool finite = false;
  bool stable = false;
};

OrliczDensityReport orlicz_density_check(const DensityGrid& coarse, const DensityGrid& fine, double alpha,
                                         double tolerance = 0.05);

struct DistortionReport {
  double q = 0.0;
  double p = 0.0;
  double r = 0.0;  // (q/p + n/(p-n))^{-1}
  std::vector<double> forward_kq;   // NaN at nodes without data
  std::vector<double> backward_kq;
  double forward_lr = 0.0;
  double backward_lr = 0.0;
};

// K_q = ||DPsi||^q / J_Psi per node (1 where J = 0) for both maps, and their L^r norms over the
// node cells. The grids must carry variational data and have swapped (s,t).
DistortionReport distortion_profile(const FlowMapGrid& forward, const FlowMapGrid& backward, double q, double p);

struct CantorImageReport {
  int level = 0;
  double t = 0.0;
  double measure_estimate = 0.0;
  double target = 0.0;  // t^2 / 2
  double rel_error = 0.0;
};

// Pushes the endpoints of the 2^N level-N Cantor intervals along the leaves x = a_N(s) t^2 + s of the
// level-N Cantor field from time 0 to t and sums the image lengths. The leaf form is used because
// curves started at interval endpoints ride a kink of the field, where adaptive steps lose accuracy.
CantorImageReport cantor_image_measure(int level, double t);

}  // namespace roughflow
