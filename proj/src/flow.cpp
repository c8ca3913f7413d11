#include "roughflow/flow.hpp"

#include <algorithm>
#include <cmath>
#include <random>
#include <sstream>

#include "roughflow/error.hpp"
#include "roughflow/parallel.hpp"
#include "roughflow/quadrature.hpp"

namespace roughflow {

void SolverConfig::validate() const {
  if (!(rel_tol > 0.0 && rel_tol <= 1e-2)) fail(ErrorCode::InvalidParam, "rel_tol must lie in (0, 1e-2]");
  if (!(abs_tol > 0.0 && abs_tol <= 1e-2)) fail(ErrorCode::InvalidParam, "abs_tol must lie in (0, 1e-2]");
  if (!(min_step > 0.0) || !(min_step < max_step)) fail(ErrorCode::InvalidParam, "need 0 < min_step < max_step");
  if (method_order != 5) fail(ErrorCode::InvalidParam, "only the embedded 5(4) pair is available");
  if (!(domain_margin >= 0.0)) fail(ErrorCode::InvalidParam, "domain_margin must be nonnegative");
  if (max_steps == 0) fail(ErrorCode::InvalidParam, "max_steps must be positive");
}

std::string SolverConfig::canonical() const {
  std::ostringstream os;
  os.precision(17);
  os << "rel_tol=" << rel_tol << ";abs_tol=" << abs_tol << ";max_step=" << max_step << ";min_step=" << min_step
     << ";method_order=" << method_order << ";domain_margin=" << domain_margin
     << ";singular_slowdown=" << (singular_slowdown ? 1 : 0) << ";max_steps=" << max_steps
     << ";scale_abs_tol=" << (scale_abs_tol ? 1 : 0);
  return os.str();
}

const char* to_string(ExitStatus status) {
  switch (status) {
    case ExitStatus::ReachedTarget: return "reached_target";
    case ExitStatus::HitTimeBoundary: return "hit_time_boundary";
    case ExitStatus::HitSpaceBoundary: return "hit_space_boundary";
    case ExitStatus::StepUnderflow: return "step_underflow";
  }
  return "unknown";
}

namespace {

Vec to_vec(const double* y, int n) {
  Vec x(n);
  for (int i = 0; i < n; ++i) x(i) = y[i];
  return x;
}

RhsStatus eval_into(const VectorField& field, const SolverConfig& cfg, double t, const Vec& x, Vec& out) {
  for (int i = 0; i < x.size(); ++i)
    if (!std::isfinite(x(i))) return RhsStatus::NonFinite;
  if (cfg.domain_margin > 0.0 && field.domain().distance_to_boundary(x) < cfg.domain_margin)
    return RhsStatus::Outside;
  switch (field.try_eval(t, x, out)) {
    case EvalStatus::Ok: return RhsStatus::Ok;
    case EvalStatus::OutOfDomain: return RhsStatus::Outside;
    case EvalStatus::NonFinite: return RhsStatus::NonFinite;
  }
  return RhsStatus::NonFinite;
}

bool has_singularities(const VectorField& field) {
  for (const auto& axis : field.traits().singular_coords)
    if (!axis.empty()) return true;
  return false;
}

// Caps the step near declared singular coordinates so that a step cannot jump across them.
std::function<double(double, const double*)> slowdown_cap(const VectorField& field, const SolverConfig& cfg) {
  if (!cfg.singular_slowdown || !has_singularities(field)) return {};
  const int n = field.dim();
  return [&field, &cfg, n](double t, const double* y) {
    const Vec x = to_vec(y, n);
    const double d = field.distance_to_singular(x);
    Vec b;
    if (!std::isfinite(d) || eval_into(field, cfg, t, x, b) != RhsStatus::Ok) return 1e300;
    const double speed = b.norm();
    if (speed == 0.0) return 1e300;
    return 0.5 * d / speed;
  };
}

OdeOptions ode_options(const SolverConfig& cfg) {
  OdeOptions opt;
  opt.rel_tol = cfg.rel_tol;
  opt.abs_tol = cfg.abs_tol;
  opt.max_step = cfg.max_step;
  opt.min_step = cfg.min_step;
  opt.max_steps = cfg.max_steps;
  return opt;
}

// Integration windows between time breakpoints, in the direction of travel.
std::vector<double> legs(const VectorField& field, double s, double t) {
  std::vector<double> pts{s};
  const auto& bp = field.traits().time_breakpoints;
  if (t >= s) {
    for (double b : bp)
      if (b > s && b < t) pts.push_back(b);
  } else {
    for (auto it = bp.rbegin(); it != bp.rend(); ++it)
      if (*it < s && *it > t) pts.push_back(*it);
  }
  pts.push_back(t);
  return pts;
}

struct RunResult {
  ExitStatus exit = ExitStatus::ReachedTarget;
  double t_end = 0.0;
  std::vector<double> state;
};

ExitStatus exit_from(OdeStatus status) {
  switch (status) {
    case OdeStatus::Reached: return ExitStatus::ReachedTarget;
    case OdeStatus::Blocked: return ExitStatus::HitSpaceBoundary;
    case OdeStatus::StepUnderflow:
    case OdeStatus::MaxSteps: return ExitStatus::StepUnderflow;
  }
  return ExitStatus::StepUnderflow;
}

double clamp_time(const VectorField& field, double t, bool& clamped) {
  const Interval& I = field.time_interval();
  clamped = false;
  if (t > I.hi) {
    clamped = true;
    return I.hi;
  }
  if (t < I.lo) {
    clamped = true;
    return I.lo;
  }
  return t;
}

void check_start(const VectorField& field, double s, const Vec& x0) {
  if (x0.size() != field.dim()) fail(ErrorCode::InvalidParam, "start point has wrong dimension");
  if (!field.in_domain(s, x0)) fail(ErrorCode::OutOfDomain, "start point outside the field's domain");
}

// Integrates an augmented system whose first n components are the state.
RunResult run(const VectorField& field, double s, const std::vector<double>& z0, double t_target,
              const SolverConfig& cfg, const OdeRhs& rhs, const OdeObserver& observer, bool dense) {
  bool clamped = false;
  const double t_goal = clamp_time(field, t_target, clamped);
  OdeOptions opt = ode_options(cfg);
  opt.step_cap = slowdown_cap(field, cfg);
  const int dim = static_cast<int>(z0.size());
  if (cfg.scale_abs_tol) {
    double size = 0.0;
    for (int i = 0; i < field.dim(); ++i) size = std::max(size, std::abs(z0[i]));
    if (size > 0.0) opt.abs_tol = std::min(opt.abs_tol, cfg.rel_tol * size);
  }
  RunResult out;
  out.state = z0;
  out.t_end = s;
  const std::vector<double> pts = legs(field, s, t_goal);
  bool first = true;
  for (std::size_t i = 0; i + 1 < pts.size(); ++i) {
    OdeObserver obs;
    if (observer) {
      obs = [&](double t, const double* y, const DenseSegment* seg) {
        if (!seg && !first) return;
        first = false;
        observer(t, y, seg);
      };
    }
    OdeResult r = dopri5(rhs, dim, pts[i], out.state.data(), pts[i + 1], opt, obs, dense);
    out.state = r.y;
    out.t_end = r.t;
    if (r.status != OdeStatus::Reached) {
      out.exit = exit_from(r.status);
      return out;
    }
  }
  out.exit = clamped ? ExitStatus::HitTimeBoundary : ExitStatus::ReachedTarget;
  return out;
}

OdeRhs state_rhs(const VectorField& field, const SolverConfig& cfg) {
  const int n = field.dim();
  return [&field, &cfg, n](double t, const double* y, double* dy) {
    const Vec x = to_vec(y, n);
    Vec b;
    const RhsStatus st = eval_into(field, cfg, t, x, b);
    if (st != RhsStatus::Ok) return st;
    for (int i = 0; i < n; ++i) dy[i] = b(i);
    return RhsStatus::Ok;
  };
}

}  // namespace

Vec Trajectory::at(double t) const {
  if (times.size() == 1 || t == times.front()) return states.front();
  const bool forward = times.back() >= times.front();
  const double lo = forward ? times.front() : times.back();
  const double hi = forward ? times.back() : times.front();
  if (t < lo || t > hi) fail(ErrorCode::OutOfRange, "time outside the computed trajectory");
  std::size_t k;
  if (forward) {
    k = static_cast<std::size_t>(std::upper_bound(times.begin(), times.end(), t) - times.begin());
  } else {
    k = static_cast<std::size_t>(
        std::upper_bound(times.begin(), times.end(), t, [](double a, double b) { return a > b; }) - times.begin());
  }
  if (k == 0) k = 1;
  if (k >= times.size()) return states.back();
  const DenseSegment& seg = segments[k - 1];
  Vec out(seg.dim());
  seg.eval(t, out.data());
  return out;
}

Trajectory integrate_trajectory(const VectorField& field, double s, const Vec& x0, double t_target,
                                const SolverConfig& cfg) {
  cfg.validate();
  check_start(field, s, x0);
  const int n = field.dim();
  Trajectory traj;
  traj.s = s;
  traj.x0 = x0;
  traj.t_target = t_target;
  traj.times.push_back(s);
  traj.states.push_back(x0);
  auto observer = [&](double t, const double* y, const DenseSegment* seg) {
    if (!seg) return;
    traj.times.push_back(t);
    traj.states.push_back(to_vec(y, n));
    traj.segments.push_back(*seg);
  };
  std::vector<double> z0(x0.data(), x0.data() + n);
  RunResult r = run(field, s, z0, t_target, cfg, state_rhs(field, cfg), observer, true);
  traj.exit = r.exit;
  traj.ell = std::abs(traj.times.back() - s);
  return traj;
}

std::optional<Vec> flow_point(const VectorField& field, double t, double s, const Vec& x, const SolverConfig& cfg) {
  cfg.validate();
  check_start(field, s, x);
  std::vector<double> z0(x.data(), x.data() + x.size());
  RunResult r = run(field, s, z0, t, cfg, state_rhs(field, cfg), {}, false);
  if (r.exit != ExitStatus::ReachedTarget) return std::nullopt;
  return to_vec(r.state.data(), field.dim());
}

double maximal_interval(const VectorField& field, double s, const Vec& x, const Interval& window,
                        const SolverConfig& cfg) {
  if (!window.contains(s)) fail(ErrorCode::InvalidParam, "start time outside the window");
  if (!std::isfinite(window.lo) || !std::isfinite(window.hi)) fail(ErrorCode::InvalidParam, "window must be bounded");
  cfg.validate();
  check_start(field, s, x);
  std::vector<double> z0(x.data(), x.data() + x.size());
  const OdeRhs rhs = state_rhs(field, cfg);
  RunResult fwd = run(field, s, z0, window.hi, cfg, rhs, {}, false);
  RunResult bwd = run(field, s, z0, window.lo, cfg, rhs, {}, false);
  return fwd.t_end - bwd.t_end;
}

namespace {

OdeRhs sensitivity_rhs(const VectorField& field, const SolverConfig& cfg) {
  const int n = field.dim();
  return [&field, &cfg, n](double t, const double* z, double* dz) {
    const Vec x = to_vec(z, n);
    Vec b;
    const RhsStatus st = eval_into(field, cfg, t, x, b);
    if (st != RhsStatus::Ok) return st;
    const Mat B = field.jacobian_matrix(t, x);
    if (!B.allFinite()) return RhsStatus::NonFinite;
    Eigen::Map<const Eigen::MatrixXd> Y(z + n, n, n);
    Eigen::Map<Eigen::MatrixXd> dY(dz + n, n, n);
    for (int i = 0; i < n; ++i) dz[i] = b(i);
    dY.noalias() = B * Y;
    dz[n + n * n] = B.trace();
    return RhsStatus::Ok;
  };
}

std::vector<double> sensitivity_start(const Vec& x) {
  const int n = static_cast<int>(x.size());
  std::vector<double> z(static_cast<std::size_t>(n + n * n + 1), 0.0);
  for (int i = 0; i < n; ++i) {
    z[i] = x(i);
    z[n + i * n + i] = 1.0;
  }
  return z;
}

}  // namespace

FlowSensitivity flow_with_sensitivity(const VectorField& field, double t, double s, const Vec& x,
                                      const SolverConfig& cfg) {
  cfg.validate();
  check_start(field, s, x);
  const int n = field.dim();
  RunResult r = run(field, s, sensitivity_start(x), t, cfg, sensitivity_rhs(field, cfg), {}, false);
  FlowSensitivity out;
  out.exit = r.exit;
  out.t_end = r.t_end;
  out.image = to_vec(r.state.data(), n);
  out.dxX = Eigen::Map<const Eigen::MatrixXd>(r.state.data() + n, n, n);
  out.jac_det = out.dxX.determinant();
  out.jac_liouville = std::exp(r.state[n + n * n]);
  return out;
}

VariationalResult variational_solve(const VectorField& field, const Trajectory& traj, const SolverConfig& cfg) {
  cfg.validate();
  const int n = field.dim();
  if (traj.x0.size() != n) fail(ErrorCode::InvalidParam, "trajectory dimension does not match the field");
  VariationalResult out;
  std::vector<double> z(static_cast<std::size_t>(n * n + 1), 0.0);
  for (int i = 0; i < n; ++i) z[i * n + i] = 1.0;
  auto record = [&](double t) {
    Mat Y = Eigen::Map<const Eigen::MatrixXd>(z.data(), n, n);
    out.times.push_back(t);
    out.jac_det.push_back(Y.determinant());
    out.jac_liouville.push_back(std::exp(z[n * n]));
    out.dxX.push_back(std::move(Y));
  };
  record(traj.times.front());
  OdeOptions opt = ode_options(cfg);
  for (std::size_t i = 0; i < traj.segments.size(); ++i) {
    const DenseSegment& seg = traj.segments[i];
    auto rhs = [&](double t, const double* y, double* dy) {
      Vec x(n);
      seg.eval(t, x.data());
      if (!field.in_domain(t, x)) return RhsStatus::Outside;
      const Mat B = field.jacobian_matrix(t, x);
      Eigen::Map<const Eigen::MatrixXd> Y(y, n, n);
      Eigen::Map<Eigen::MatrixXd> dY(dy, n, n);
      dY.noalias() = B * Y;
      dy[n * n] = B.trace();
      return RhsStatus::Ok;
    };
    OdeResult r = dopri5(rhs, n * n + 1, traj.times[i], z.data(), traj.times[i + 1], opt);
    if (r.status != OdeStatus::Reached) fail(ErrorCode::DomainExit, "variational equation left the trajectory's domain");
    z = r.y;
    record(traj.times[i + 1]);
  }
  return out;
}

GronwallReport gronwall_check(const VectorField& field, const Trajectory& traj, const VariationalResult& var,
                              double tolerance) {
  if (var.dxX.empty()) fail(ErrorCode::InvalidParam, "no variational data");
  const int n = field.dim();
  std::vector<double> pieces;
  for (std::size_t i = 0; i < traj.segments.size(); ++i) {
    const double a = traj.times[i], b = traj.times[i + 1];
    auto norm_at = [&](double t) {
      Vec x(n);
      traj.segments[i].eval(t, x.data());
      return op_norm(field.jacobian_matrix(t, x));
    };
    pieces.push_back(adaptive_simpson(norm_at, a, b, 1e-13 * std::max(1.0, std::abs(b - a)), 100000).value);
  }
  GronwallReport rep;
  rep.tolerance = tolerance;
  rep.lhs = op_norm(var.dxX.back());
  rep.rhs = std::exp(std::abs(tree_sum(pieces)));
  rep.slack = rep.rhs - rep.lhs;
  rep.holds = rep.lhs <= rep.rhs * (1.0 + tolerance);
  return rep;
}

double semigroup_residual(const VectorField& field, double t1, double t2, double t3, const Vec& x,
                          const SolverConfig& cfg) {
  if (t1 == t2 && t2 == t3) return 0.0;
  auto leg = [&](double t, double s, const Vec& y) {
    auto r = flow_point(field, t, s, y, cfg);
    if (!r) fail(ErrorCode::DomainExit, "composition leaves the domain");
    return *r;
  };
  const Vec direct = leg(t3, t1, x);
  const Vec composed = leg(t3, t2, leg(t2, t1, x));
  return (composed - direct).norm();
}

Lattice Lattice::uniform(const Box& box, const std::vector<int>& nodes) {
  if (static_cast<int>(nodes.size()) != box.dim()) fail(ErrorCode::InvalidParam, "lattice shape does not match box");
  if (!box.bounded()) fail(ErrorCode::InvalidParam, "lattice box must be bounded");
  Lattice lat;
  for (int i = 0; i < box.dim(); ++i) {
    if (nodes[i] < 1) fail(ErrorCode::InvalidParam, "lattice axes need at least one node");
    std::vector<double> axis(nodes[i]);
    if (nodes[i] == 1) {
      axis[0] = 0.5 * (box.lo(i) + box.hi(i));
    } else {
      const double h = (box.hi(i) - box.lo(i)) / (nodes[i] - 1);
      for (int k = 0; k < nodes[i]; ++k) axis[k] = box.lo(i) + k * h;
      axis.back() = box.hi(i);
    }
    lat.axes.push_back(std::move(axis));
  }
  return lat;
}

std::vector<int> Lattice::shape() const {
  std::vector<int> s;
  for (const auto& a : axes) s.push_back(static_cast<int>(a.size()));
  return s;
}

std::size_t Lattice::size() const {
  std::size_t total = axes.empty() ? 0 : 1;
  for (const auto& a : axes) total *= a.size();
  return total;
}

std::vector<int> Lattice::unflatten(std::size_t index) const {
  std::vector<int> multi(axes.size());
  for (int i = dim() - 1; i >= 0; --i) {
    multi[i] = static_cast<int>(index % axes[i].size());
    index /= axes[i].size();
  }
  return multi;
}

std::size_t Lattice::flatten(const std::vector<int>& multi) const {
  std::size_t index = 0;
  for (int i = 0; i < dim(); ++i) index = index * axes[i].size() + static_cast<std::size_t>(multi[i]);
  return index;
}

Vec Lattice::node(std::size_t index) const {
  const std::vector<int> multi = unflatten(index);
  Vec x(dim());
  for (int i = 0; i < dim(); ++i) x(i) = axes[i][multi[i]];
  return x;
}

FlowMapGrid flow_map(const VectorField& field, double t, double s, const Lattice& grid, const SolverConfig& cfg,
                     bool with_variational) {
  cfg.validate();
  if (grid.dim() != field.dim()) fail(ErrorCode::InvalidParam, "grid dimension does not match the field");
  const std::size_t N = grid.size();
  const int n = field.dim();
  FlowMapGrid fm;
  fm.t = t;
  fm.s = s;
  fm.grid = grid;
  fm.images.assign(N, Vec::Constant(n, std::numeric_limits<double>::quiet_NaN()));
  fm.exits.assign(N, ExitStatus::StepUnderflow);
  fm.has_variational = with_variational;
  if (with_variational) {
    fm.dx_matrices.assign(N, Mat::Constant(n, n, std::numeric_limits<double>::quiet_NaN()));
    fm.jac.assign(N, std::numeric_limits<double>::quiet_NaN());
    fm.liouville_jac.assign(N, std::numeric_limits<double>::quiet_NaN());
  }
  const OdeRhs rhs = state_rhs(field, cfg);
  parallel_for(N, [&](std::size_t i) {
    const Vec x = grid.node(i);
    if (!field.in_domain(s, x)) {
      fm.exits[i] = ExitStatus::HitSpaceBoundary;
      return;
    }
    try {
      if (with_variational) {
        FlowSensitivity fs = flow_with_sensitivity(field, t, s, x, cfg);
        fm.exits[i] = fs.exit;
        if (fs.exit == ExitStatus::ReachedTarget) {
          fm.images[i] = fs.image;
          fm.dx_matrices[i] = fs.dxX;
          fm.jac[i] = fs.jac_det;
          fm.liouville_jac[i] = fs.jac_liouville;
        }
      } else {
        std::vector<double> z0(x.data(), x.data() + n);
        RunResult r = run(field, s, z0, t, cfg, rhs, {}, false);
        fm.exits[i] = r.exit;
        if (r.exit == ExitStatus::ReachedTarget) fm.images[i] = to_vec(r.state.data(), n);
      }
    } catch (const Error&) {
      fm.exits[i] = ExitStatus::StepUnderflow;
    }
  });
  return fm;
}

double comparison_envelope(const Modulus& omega, double delta, double tau) {
  if (!(delta > 0.0)) return 0.0;
  if (tau == 0.0) return delta;
  auto rhs = [&](double, const double* y, double* dy) {
    if (!(y[0] > 0.0)) return RhsStatus::Outside;
    dy[0] = omega(y[0]);
    return std::isfinite(dy[0]) ? RhsStatus::Ok : RhsStatus::NonFinite;
  };
  OdeOptions opt;
  opt.rel_tol = 1e-11;
  opt.abs_tol = delta * 1e-12;
  OdeResult r = dopri5(rhs, 1, 0.0, &delta, tau, opt);
  if (r.status != OdeStatus::Reached) fail(ErrorCode::QuadratureFailure, "comparison equation did not reach the horizon");
  return r.y[0];
}

double estimate_phi(const VectorField& field, const Modulus& omega, const Box& box, double t, std::size_t points) {
  if (!box.bounded()) fail(ErrorCode::InvalidParam, "phi estimation needs a bounded box");
  const int n = field.dim();
  std::vector<Vec> bases;
  std::mt19937_64 rng(0x5eedULL);
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  for (std::size_t k = 0; k < points; ++k) {
    Vec x(n);
    for (int i = 0; i < n; ++i) x(i) = box.lo(i) + unit(rng) * (box.hi(i) - box.lo(i));
    bases.push_back(x);
  }
  const auto& sing = field.traits().singular_coords;
  for (std::size_t axis = 0; axis < sing.size(); ++axis)
    for (double c : sing[axis]) {
      Vec x = Vec::Zero(n);
      for (int i = 0; i < n; ++i) x(i) = 0.5 * (box.lo(i) + box.hi(i));
      x(static_cast<int>(axis)) = c;
      if (box.contains(x)) bases.push_back(x);
    }
  double width = 0.0;
  for (int i = 0; i < n; ++i) width = std::max(width, box.hi(i) - box.lo(i));
  double best = 0.0;
  for (const Vec& x : bases) {
    const Vec bx = field.eval(t, x);
    for (int dir = 0; dir < 2 * n; ++dir) {
      Vec e = Vec::Zero(n);
      e(dir / 2) = dir % 2 == 0 ? 1.0 : -1.0;
      for (int k = 0; k <= 48; ++k) {
        const double d = width * std::pow(10.0, -k / 4.0);
        const Vec y = x + d * e;
        if (!box.contains(y)) continue;
        const double w = omega(d);
        if (!(w > 0.0)) continue;
        best = std::max(best, (field.eval(t, y) - bx).norm() / w);
      }
    }
  }
  return best;
}

std::vector<FunnelRow> uniqueness_funnel(const VectorField& field, double s, const Vec& x0,
                                         const std::vector<double>& radii, double horizon, const Modulus& omega,
                                         double phi_integral, const SolverConfig& cfg, std::size_t perturbations) {
  cfg.validate();
  check_start(field, s, x0);
  if (perturbations < 2) fail(ErrorCode::InvalidParam, "need at least two perturbations");
  const int n = field.dim();
  const double T = s + horizon;
  auto center = flow_point(field, T, s, x0, cfg);
  if (!center) fail(ErrorCode::DomainExit, "central trajectory does not reach the horizon");

  std::vector<Vec> directions;
  if (n == 1) {
    for (std::size_t j = 0; j < perturbations; ++j)
      directions.push_back(make_vec({-1.0 + 2.0 * static_cast<double>(j) / static_cast<double>(perturbations - 1)}));
  } else if (n == 2) {
    for (std::size_t j = 0; j < perturbations; ++j) {
      const double a = 2.0 * M_PI * static_cast<double>(j) / static_cast<double>(perturbations);
      directions.push_back(make_vec({std::cos(a), std::sin(a)}));
    }
  } else {
    std::mt19937_64 rng(0xfa11ULL);
    std::normal_distribution<double> gauss;
    for (std::size_t j = 0; j < perturbations; ++j) {
      Vec v(n);
      for (int i = 0; i < n; ++i) v(i) = gauss(rng);
      directions.push_back(v / v.norm());
    }
  }

  std::vector<FunnelRow> rows;
  for (double delta : radii) {
    if (!(delta >= 0.0)) fail(ErrorCode::InvalidParam, "funnel radii must be nonnegative");
    FunnelRow row;
    row.delta = delta;
    if (delta == 0.0) {
      row.holds = true;
      rows.push_back(row);
      continue;
    }
    std::vector<double> spread(directions.size(), 0.0);
    std::vector<int> failed(directions.size(), 0);
    parallel_for(directions.size(), [&](std::size_t j) {
      const Vec y = x0 + delta * directions[j];
      std::optional<Vec> img;
      if (field.in_domain(s, y)) img = flow_point(field, T, s, y, cfg);
      if (img)
        spread[j] = (*img - *center).norm();
      else
        failed[j] = 1;
    });
    for (std::size_t j = 0; j < spread.size(); ++j) {
      row.max_spread = std::max(row.max_spread, spread[j]);
      row.failed_trajectories += static_cast<std::size_t>(failed[j]);
    }
    row.envelope = comparison_envelope(omega, delta, phi_integral);
    row.holds = row.failed_trajectories == 0 && row.max_spread <= row.envelope;
    rows.push_back(row);
  }
  return rows;
}

}  // namespace roughflow
