#pragma once

#include <cstddef>
#include <functional>
#include <vector>

namespace roughflow {

// Dormand-Prince 5(4) with PI step control and the 4th-order continuous extension.

struct DenseSegment {
  double t0 = 0.0;
  double h = 0.0;
  std::vector<double> coeffs;  // 5 blocks of n values

  int dim() const { return static_cast<int>(coeffs.size() / 5); }
  void eval(double t, double* out) const;
};

struct OdeOptions {
  double rel_tol = 1e-10;
  double abs_tol = 1e-12;
  double max_step = 1e300;
  double min_step = 1e-14;
  std::size_t max_steps = 1'000'000;
  double initial_step = 0.0;
  // Error norm covers only the first error_dim components (all when 0).
  int error_dim = 0;
  std::function<double(double t, const double* y)> step_cap;
};

enum class OdeStatus { Reached, Blocked, StepUnderflow, MaxSteps };

struct OdeResult {
  OdeStatus status = OdeStatus::Reached;
  double t = 0.0;
  std::vector<double> y;
  std::size_t accepted = 0;
  std::size_t rejected = 0;
};

enum class RhsStatus { Ok, Outside, NonFinite };

// Outside marks (t, y) as inadmissible; the step is then halved, and a step blocked below min_step
// ends the integration with status Blocked at the last admissible state. NonFinite at a trial stage
// counts as a failed step; at the initial point it is an error.
using OdeRhs = std::function<RhsStatus(double t, const double* y, double* dy)>;
using OdeObserver = std::function<void(double t, const double* y, const DenseSegment* segment)>;

OdeResult dopri5(const OdeRhs& rhs, int n, double t0, const double* y0, double t1, const OdeOptions& options,
                 const OdeObserver& observer = {}, bool want_dense = false);

}  // namespace roughflow
