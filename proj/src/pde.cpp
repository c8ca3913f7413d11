#include "roughflow/pde.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <sstream>

#include "roughflow/error.hpp"
#include "roughflow/parallel.hpp"

namespace roughflow {

namespace {

constexpr double kNaN = std::numeric_limits<double>::quiet_NaN();

double bump(double r) {
  if (std::abs(r) >= 1.0) return 0.0;
  const double a = 1.0 - r * r;
  return a * a * a;
}

double bump_d(double r) {
  if (std::abs(r) >= 1.0) return 0.0;
  const double a = 1.0 - r * r;
  return -6.0 * r * a * a;
}

void check_test(const BumpTest& f, int dim) {
  if (f.center.size() != dim || f.halfwidth.size() != dim)
    fail(ErrorCode::InvalidParam, "test function dimension does not match the field");
  if (!(f.t_halfwidth > 0.0) || !std::isfinite(f.t_center)) fail(ErrorCode::InvalidParam, "bad test time support");
  for (int i = 0; i < dim; ++i)
    if (!(f.halfwidth(i) > 0.0) || !std::isfinite(f.center(i)))
      fail(ErrorCode::InvalidParam, "bad test space support");
}

// Composite Simpson weights on a uniform mesh starting at 0 with an odd node count.
std::vector<double> simpson_weights(const std::vector<double>& times) {
  const std::size_t m = times.size();
  if (m < 3 || m % 2 == 0) fail(ErrorCode::InvalidParam, "weak residuals need an odd number (>= 3) of times");
  if (times.front() != 0.0) fail(ErrorCode::InvalidParam, "weak residuals need the time mesh to start at 0");
  const double dt = (times.back() - times.front()) / static_cast<double>(m - 1);
  if (!(dt > 0.0)) fail(ErrorCode::InvalidParam, "time mesh must be increasing");
  for (std::size_t k = 0; k < m; ++k)
    if (std::abs(times[k] - k * dt) > 1e-9 * times.back()) fail(ErrorCode::InvalidParam, "time mesh must be uniform");
  std::vector<double> w(m);
  for (std::size_t k = 0; k < m; ++k) w[k] = dt / 3.0 * (k == 0 || k + 1 == m ? 1.0 : (k % 2 ? 4.0 : 2.0));
  return w;
}

void check_time_support(const BumpTest& f, double t_end) {
  if (f.t_center + f.t_halfwidth > t_end * (1.0 + 1e-12))
    fail(ErrorCode::SupportViolation, "test function support extends past the final time");
}

// Tensor-product Gauss-Legendre integration over the cell [lo, hi] of a function of x.
template <class F>
double cell_integral(const GaussRule& g, const Vec& lo, const Vec& hi, F&& f) {
  const int n = static_cast<int>(lo.size());
  const int q = static_cast<int>(g.nodes.size());
  int total = 1;
  for (int i = 0; i < n; ++i) total *= q;
  double sum = 0.0;
  Vec x(n);
  for (int idx = 0; idx < total; ++idx) {
    double w = 1.0;
    int r = idx;
    for (int i = n - 1; i >= 0; --i) {
      const int k = r % q;
      r /= q;
      const double half = 0.5 * (hi(i) - lo(i));
      x(i) = lo(i) + half * (1.0 + g.nodes[k]);
      w *= half * g.weights[k];
    }
    sum += w * f(x);
  }
  return sum;
}

struct FieldSample {
  Vec b;
  double div = 0.0;
};

FieldSample sample_field(const VectorField& field, double t, const Vec& x) {
  FieldSample s;
  s.b.resize(field.dim());
  if (field.try_eval(t, x, s.b) != EvalStatus::Ok)
    fail(ErrorCode::OutOfDomain, "test function support leaves the field's domain");
  s.div = field.divergence(t, x);
  return s;
}

// Cells (lower-corner multi-indices) of a lattice or cell grid whose closure meets the open support.
struct CellRange {
  std::vector<int> first, count;
  std::size_t total = 1;

  std::vector<int> multi(std::size_t index) const {
    std::vector<int> m(first.size());
    for (int i = static_cast<int>(first.size()) - 1; i >= 0; --i) {
      m[i] = first[i] + static_cast<int>(index % static_cast<std::size_t>(count[i]));
      index /= static_cast<std::size_t>(count[i]);
    }
    return m;
  }
};

CellRange lattice_cells(const Lattice& grid, const BumpTest& f) {
  CellRange r;
  for (int i = 0; i < grid.dim(); ++i) {
    const auto& a = grid.axes[i];
    const double lo = f.center(i) - f.halfwidth(i), hi = f.center(i) + f.halfwidth(i);
    const double slack = 1e-12 * std::max(1.0, std::abs(a.back() - a.front()));
    if (lo < a.front() - slack || hi > a.back() + slack)
      fail(ErrorCode::SupportViolation, "test function support leaves the solution grid");
    int first = -1, last = -1;
    for (int j = 0; j + 1 < static_cast<int>(a.size()); ++j) {
      if (a[j] < hi && a[j + 1] > lo) {
        if (first < 0) first = j;
        last = j;
      }
    }
    if (first < 0) fail(ErrorCode::SupportViolation, "test function support misses the solution grid");
    r.first.push_back(first);
    r.count.push_back(last - first + 1);
    r.total *= static_cast<std::size_t>(last - first + 1);
  }
  return r;
}

CellRange density_cells(const DensityGrid& d, const BumpTest& f) {
  CellRange r;
  for (int i = 0; i < d.box.dim(); ++i) {
    const double lo = d.box.lo(i), hi = d.box.hi(i);
    const double h = (hi - lo) / d.cells[i];
    const double slo = f.center(i) - f.halfwidth(i), shi = f.center(i) + f.halfwidth(i);
    const double slack = 1e-12 * std::max(1.0, hi - lo);
    if (slo < lo - slack || shi > hi + slack)
      fail(ErrorCode::SupportViolation, "test function support leaves the density grid");
    const int first = std::clamp(static_cast<int>(std::floor((slo - lo) / h)), 0, d.cells[i] - 1);
    const int last = std::clamp(static_cast<int>(std::ceil((shi - lo) / h)) - 1, first, d.cells[i] - 1);
    r.first.push_back(first);
    r.count.push_back(last - first + 1);
    r.total *= static_cast<std::size_t>(last - first + 1);
  }
  return r;
}

void check_times(const std::vector<double>& times) {
  if (times.empty()) fail(ErrorCode::InvalidParam, "no output times");
  for (std::size_t k = 0; k < times.size(); ++k) {
    if (!std::isfinite(times[k])) fail(ErrorCode::InvalidParam, "output times must be finite");
    if (k > 0 && !(times[k] > times[k - 1])) fail(ErrorCode::InvalidParam, "output times must be increasing");
  }
}

std::size_t cell_of(const Box& box, const std::vector<int>& cells, const Vec& y) {
  std::size_t index = 0;
  for (int i = 0; i < box.dim(); ++i) {
    const double u = (y(i) - box.lo(i)) / (box.hi(i) - box.lo(i));
    const int k = std::clamp(static_cast<int>(std::floor(u * cells[i])), 0, cells[i] - 1);
    index = index * cells[i] + static_cast<std::size_t>(k);
  }
  return index;
}

DensityGrid blank_density(const std::string& mode, const Box& target, const std::vector<int>& cells) {
  if (!target.bounded()) fail(ErrorCode::InvalidParam, "density target box must be bounded");
  if (static_cast<int>(cells.size()) != target.dim()) fail(ErrorCode::InvalidParam, "cell shape does not match the box");
  std::size_t total = 1;
  for (int c : cells) {
    if (c < 1) fail(ErrorCode::InvalidParam, "density grids need at least one cell per axis");
    total *= static_cast<std::size_t>(c);
  }
  DensityGrid d;
  d.mode = mode;
  d.box = target;
  d.cells = cells;
  d.density.assign(total, 0.0);
  d.mass.assign(total, 0.0);
  d.counts.assign(total, 0);
  d.flags.assign(total, CellFlag::Ok);
  return d;
}

double initial_mass(const ScalarFn& rho0, const Box& source_box) {
  const QuadResult q = integrate_box([&](const Vec& x) { return rho0(x); }, source_box, {}, {1e-12, 1e-10});
  return q.value;
}

}  // namespace

TransportSolution solve_transport(const VectorField& field, const ScalarFn& u0, const std::vector<double>& times,
                                  const Lattice& grid, const SolverConfig& cfg) {
  check_times(times);
  if (grid.dim() != field.dim()) fail(ErrorCode::InvalidParam, "grid dimension does not match the field");
  if (!u0) fail(ErrorCode::InvalidParam, "initial data missing");
  cfg.validate();
  TransportSolution sol;
  sol.times = times;
  sol.grid = grid;
  sol.initial = u0;
  const std::size_t N = grid.size(), nt = times.size();
  sol.values.assign(nt, std::vector<double>(N, kNaN));
  sol.valid.assign(nt, std::vector<std::uint8_t>(N, 0));
  auto store = [&](std::size_t k, std::size_t i, const Vec& x0) {
    const double v = u0(x0);
    if (!std::isfinite(v)) return;
    sol.values[k][i] = v;
    sol.valid[k][i] = 1;
  };
  if (field.traits().autonomous) {
    // X(0,t,x) is the curve through (0,x) read at time -t.
    const double lo = -times.back(), hi = -times.front();
    parallel_for(N, [&](std::size_t i) {
      const Vec x = grid.node(i);
      if (!field.in_domain(0.0, x)) return;
      try {
        Trajectory down, up;
        if (lo < 0.0) down = integrate_trajectory(field, 0.0, x, lo, cfg);
        if (hi > 0.0) up = integrate_trajectory(field, 0.0, x, hi, cfg);
        for (std::size_t k = 0; k < nt; ++k) {
          const double tau = -times[k];
          if (tau == 0.0) {
            store(k, i, x);
          } else if (tau < 0.0) {
            if (down.reached() || tau >= down.t_end()) store(k, i, down.at(tau));
          } else if (up.reached() || tau <= up.t_end()) {
            store(k, i, up.at(tau));
          }
        }
      } catch (const Error&) {
      }
    });
  } else {
    parallel_for(N * nt, [&](std::size_t j) {
      const std::size_t i = j / nt, k = j % nt;
      const Vec x = grid.node(i);
      try {
        if (!field.in_domain(times[k], x)) return;
        if (const auto x0 = flow_point(field, 0.0, times[k], x, cfg)) store(k, i, *x0);
      } catch (const Error&) {
      }
    });
  }
  for (std::size_t k = 0; k < nt; ++k)
    for (std::size_t i = 0; i < N; ++i) sol.masked += sol.valid[k][i] ? 0 : 1;
  return sol;
}

double MeasureSolution::total_weight() const {
  std::vector<double> w;
  w.reserve(particles.size());
  for (const auto& p : particles) w.push_back(p.weight);
  return tree_sum(w);
}

MeasureSolution solve_continuity(const VectorField& field, const std::vector<Particle>& initial, double t,
                                 const SolverConfig& cfg) {
  if (!std::isfinite(t)) fail(ErrorCode::InvalidParam, "time must be finite");
  cfg.validate();
  MeasureSolution m;
  m.t = t;
  m.particles = initial;
  m.valid.assign(initial.size(), 0);
  for (const auto& p : initial) {
    if (p.position.size() != field.dim()) fail(ErrorCode::InvalidParam, "particle dimension does not match the field");
    if (!std::isfinite(p.weight)) fail(ErrorCode::InvalidParam, "particle weights must be finite");
  }
  parallel_for(initial.size(), [&](std::size_t i) {
    m.particles[i].position = Vec::Constant(field.dim(), kNaN);
    try {
      if (!field.in_domain(0.0, initial[i].position)) return;
      if (const auto y = flow_point(field, t, 0.0, initial[i].position, cfg)) {
        m.particles[i].position = *y;
        m.valid[i] = 1;
      }
    } catch (const Error&) {
    }
  });
  return m;
}

ParticleSeries particle_series(const VectorField& field, const std::vector<Particle>& initial,
                               const std::vector<double>& times, const SolverConfig& cfg) {
  check_times(times);
  if (times.front() < 0.0) fail(ErrorCode::InvalidParam, "particle series run forward from time 0");
  cfg.validate();
  ParticleSeries s;
  s.times = times;
  const std::size_t P = initial.size(), nt = times.size();
  s.weights.resize(P);
  s.positions.assign(nt, std::vector<Vec>(P, Vec::Constant(field.dim(), kNaN)));
  s.valid.assign(P, 0);
  for (std::size_t i = 0; i < P; ++i) {
    if (initial[i].position.size() != field.dim())
      fail(ErrorCode::InvalidParam, "particle dimension does not match the field");
    s.weights[i] = initial[i].weight;
  }
  parallel_for(P, [&](std::size_t i) {
    const Vec& x = initial[i].position;
    try {
      if (!field.in_domain(0.0, x)) return;
      Trajectory tr;
      if (times.back() > 0.0) {
        tr = integrate_trajectory(field, 0.0, x, times.back(), cfg);
        if (!tr.reached()) return;
      }
      for (std::size_t k = 0; k < nt; ++k) s.positions[k][i] = times[k] == 0.0 ? x : tr.at(times[k]);
      s.valid[i] = 1;
    } catch (const Error&) {
    }
  });
  return s;
}

DensityGrid bin_particles(const MeasureSolution& m, const Box& target, const std::vector<int>& cells) {
  DensityGrid d = blank_density("particles", target, cells);
  std::vector<double> reached, escaped;
  for (std::size_t i = 0; i < m.particles.size(); ++i) {
    if (!m.valid[i]) continue;
    const Particle& p = m.particles[i];
    if (p.position.size() != target.dim()) fail(ErrorCode::InvalidParam, "target box does not match the particles");
    reached.push_back(p.weight);
    ++d.samples;
    if (!target.contains(p.position)) {
      escaped.push_back(p.weight);
      continue;
    }
    const std::size_t c = cell_of(target, cells, p.position);
    d.mass[c] += p.weight;
    ++d.counts[c];
  }
  const double vol = d.cell_volume();
  for (std::size_t c = 0; c < d.size(); ++c) d.density[c] = d.mass[c] / vol;
  d.total_mass = tree_sum(d.mass);
  d.source_mass = tree_sum(reached);
  d.escaped_mass = tree_sum(escaped);
  return d;
}

const char* to_string(DensityRepresentation representation) {
  switch (representation) {
    case DensityRepresentation::Jacobian: return "jacobian";
    case DensityRepresentation::Liouville: return "liouville";
    case DensityRepresentation::Pushforward: return "pushforward";
  }
  return "unknown";
}

DensityGrid solve_continuity(const VectorField& field, const ScalarFn& rho0, const Box& source_box, double t,
                             const Box& target, const std::vector<int>& cells, const SolverConfig& cfg,
                             const ContinuityDensityOptions& options) {
  if (!rho0) fail(ErrorCode::InvalidParam, "initial density missing");
  if (!std::isfinite(t)) fail(ErrorCode::InvalidParam, "time must be finite");
  if (target.dim() != field.dim() || source_box.dim() != field.dim())
    fail(ErrorCode::InvalidParam, "boxes do not match the field dimension");
  if (!source_box.bounded()) fail(ErrorCode::InvalidParam, "source box must be bounded");
  cfg.validate();
  DensityGrid d = blank_density(to_string(options.representation), target, cells);
  const int n = field.dim();
  const double vol = d.cell_volume();

  std::vector<double> pushed;  // histogram density of X(t,0,.)_# (L^n on source_box)
  if (options.representation == DensityRepresentation::Pushforward) {
    int refine = options.source_refinement;
    if (refine == 0) refine = std::max(1, static_cast<int>(std::lround(std::pow(256.0, 1.0 / n))));
    if (refine < 1) fail(ErrorCode::InvalidParam, "source refinement must be positive");
    std::vector<int> src(n);
    for (int i = 0; i < n; ++i) {
      const double ratio = (source_box.hi(i) - source_box.lo(i)) / (target.hi(i) - target.lo(i));
      src[i] = std::max(1, static_cast<int>(std::ceil(ratio * cells[i] * refine)));
    }
    const Lattice lat = midpoint_lattice(source_box, src);
    const std::vector<double> w = node_weights(lat);
    const std::size_t N = lat.size();
    std::vector<std::size_t> slot(N, d.size());
    parallel_for(N, [&](std::size_t i) {
      const Vec x = lat.node(i);
      try {
        if (!field.in_domain(0.0, x)) return;
        if (const auto y = flow_point(field, t, 0.0, x, cfg))
          if (target.contains(*y)) slot[i] = cell_of(target, cells, *y);
      } catch (const Error&) {
      }
    });
    std::vector<double> mass(d.size(), 0.0);
    for (std::size_t i = 0; i < N; ++i) {
      if (slot[i] == d.size()) continue;
      mass[slot[i]] += w[i];
      ++d.counts[slot[i]];
    }
    pushed.resize(d.size());
    for (std::size_t c = 0; c < d.size(); ++c) pushed[c] = mass[c] / vol;
    d.samples = N;
  }

  parallel_for(d.size(), [&](std::size_t c) {
    const Vec y = d.center(c);
    d.flags[c] = CellFlag::Unreached;
    try {
      if (!field.in_domain(t, y)) return;
      const FlowSensitivity fs = flow_with_sensitivity(field, 0.0, t, y, cfg);
      if (fs.exit != ExitStatus::ReachedTarget) return;
      d.flags[c] = CellFlag::Ok;
      if (!source_box.contains(fs.image)) return;
      double factor = 0.0;
      switch (options.representation) {
        case DensityRepresentation::Jacobian: factor = fs.jac_det; break;
        case DensityRepresentation::Liouville: factor = fs.jac_liouville; break;
        case DensityRepresentation::Pushforward: factor = pushed[c]; break;
      }
      if (options.representation != DensityRepresentation::Pushforward && !(factor > 0.0 && std::isfinite(factor))) {
        d.flags[c] = CellFlag::ZeroJacobian;
        return;
      }
      d.density[c] = rho0(fs.image) * factor;
      d.mass[c] = d.density[c] * vol;
    } catch (const Error&) {
    }
  });
  if (options.representation != DensityRepresentation::Pushforward) d.samples = d.size();
  d.total_mass = tree_sum(d.mass);
  d.source_mass = initial_mass(rho0, source_box);
  return d;
}

DensitySeries continuity_series(const VectorField& field, const ScalarFn& rho0, const Box& source_box,
                                const std::vector<double>& times, const Box& target, const std::vector<int>& cells,
                                const SolverConfig& cfg, const ContinuityDensityOptions& options) {
  check_times(times);
  DensitySeries s;
  s.times = times;
  for (double t : times) s.grids.push_back(solve_continuity(field, rho0, source_box, t, target, cells, cfg, options));
  return s;
}

QuadResult continuity_mass(const VectorField& field, const ScalarFn& rho0, const Box& source_box, double t,
                           const Box& target, const SolverConfig& cfg, const QuadOptions& quad) {
  if (!rho0) fail(ErrorCode::InvalidParam, "initial density missing");
  if (target.dim() != field.dim() || source_box.dim() != field.dim())
    fail(ErrorCode::InvalidParam, "boxes do not match the field dimension");
  if (!target.bounded() || !source_box.bounded()) fail(ErrorCode::InvalidParam, "mass boxes must be bounded");
  cfg.validate();
  auto breaks = field.quadrature_breaks();
  if (field.dim() == 1) {
    // The images of the source ends are where the density jumps.
    for (double e : {source_box.lo(0), source_box.hi(0)}) {
      const Vec x = make_vec({e});
      if (!field.in_domain(0.0, x)) continue;
      if (const auto y = flow_point(field, t, 0.0, x, cfg))
        if ((*y)(0) > target.lo(0) && (*y)(0) < target.hi(0)) breaks[0].push_back((*y)(0));
    }
  }
  auto density = [&](const Vec& y) {
    if (!field.in_domain(t, y)) return 0.0;
    const FlowSensitivity fs = flow_with_sensitivity(field, 0.0, t, y, cfg);
    if (fs.exit != ExitStatus::ReachedTarget || !source_box.contains(fs.image)) return 0.0;
    return rho0(fs.image) * fs.jac_det;
  };
  return integrate_box(density, target, breaks, quad);
}

double BumpTest::time_factor(double t) const { return bump((t - t_center) / t_halfwidth); }

double BumpTest::time_factor_dt(double t) const { return bump_d((t - t_center) / t_halfwidth) / t_halfwidth; }

double BumpTest::space_factor(const Vec& x) const {
  double v = 1.0;
  for (int i = 0; i < x.size(); ++i) v *= bump((x(i) - center(i)) / halfwidth(i));
  return v;
}

Vec BumpTest::space_grad(const Vec& x) const {
  const int n = static_cast<int>(x.size());
  Vec g(n);
  for (int i = 0; i < n; ++i) {
    double v = bump_d((x(i) - center(i)) / halfwidth(i)) / halfwidth(i);
    for (int j = 0; j < n; ++j)
      if (j != i) v *= bump((x(j) - center(j)) / halfwidth(j));
    g(i) = v;
  }
  return g;
}

double BumpTest::value(double t, const Vec& x) const { return time_factor(t) * space_factor(x); }

double BumpTest::dt(double t, const Vec& x) const { return time_factor_dt(t) * space_factor(x); }

Vec BumpTest::grad(double t, const Vec& x) const { return time_factor(t) * space_grad(x); }

std::vector<WeakResidual> weak_residual(const VectorField& field, const TransportSolution& u,
                                        const std::vector<BumpTest>& tests) {
  const std::vector<double> wt = simpson_weights(u.times);
  const Lattice& g = u.grid;
  if (g.dim() != field.dim()) fail(ErrorCode::InvalidParam, "solution grid does not match the field");
  for (const auto& a : g.axes)
    if (a.size() < 2) fail(ErrorCode::InvalidParam, "solution grid needs two nodes per axis");
  for (const auto& f : tests) {
    check_test(f, field.dim());
    check_time_support(f, u.times.back());
  }
  const bool autonomous = field.traits().autonomous;
  const GaussRule gl = gauss_legendre(4);
  const int n = g.dim();
  std::vector<WeakResidual> out(tests.size());
  parallel_for(tests.size(), [&](std::size_t j) {
    const BumpTest& f = tests[j];
    const CellRange cr = lattice_cells(g, f);
    std::vector<std::size_t> corner(cr.total);
    std::vector<double> A(cr.total);
    std::vector<Vec> lo(cr.total), hi(cr.total);
    for (std::size_t c = 0; c < cr.total; ++c) {
      const auto m = cr.multi(c);
      corner[c] = g.flatten(m);
      lo[c].resize(n);
      hi[c].resize(n);
      for (int i = 0; i < n; ++i) {
        lo[c](i) = g.axes[i][m[i]];
        hi[c](i) = g.axes[i][m[i] + 1];
      }
      A[c] = cell_integral(gl, lo[c], hi[c], [&](const Vec& x) { return f.space_factor(x); });
    }
    // B_c(t) = int_cell (S div b + <b, grad S>) dx.
    auto cell_b = [&](double t, std::vector<double>& B) {
      B.resize(cr.total);
      for (std::size_t c = 0; c < cr.total; ++c) {
        B[c] = cell_integral(gl, lo[c], hi[c], [&](const Vec& x) {
          const FieldSample s = sample_field(field, t, x);
          return f.space_factor(x) * s.div + s.b.dot(f.space_grad(x));
        });
      }
    };
    std::vector<double> B;
    if (autonomous) cell_b(0.0, B);
    WeakResidual r;
    std::vector<double> slices;
    for (std::size_t k = 0; k < u.times.size(); ++k) {
      const double t = u.times[k];
      const double T = f.time_factor(t), Tp = f.time_factor_dt(t);
      if (T == 0.0 && Tp == 0.0) continue;
      if (!autonomous) cell_b(t, B);
      std::vector<double> terms(cr.total);
      for (std::size_t c = 0; c < cr.total; ++c) {
        if (!u.valid[k][corner[c]]) {
          ++r.masked_cells;
          terms[c] = 0.0;
          continue;
        }
        terms[c] = u.values[k][corner[c]] * (Tp * A[c] + T * B[c]);
      }
      slices.push_back(wt[k] * tree_sum(terms));
    }
    r.lhs = tree_sum(slices);
    std::vector<double> init(cr.total);
    for (std::size_t c = 0; c < cr.total; ++c) {
      if (!u.valid[0][corner[c]]) {
        ++r.masked_cells;
        init[c] = 0.0;
        continue;
      }
      init[c] = u.values[0][corner[c]] * A[c];
    }
    r.rhs = -f.time_factor(0.0) * tree_sum(init);
    r.residual = r.masked_cells ? kNaN : std::abs(r.lhs - r.rhs);
    out[j] = r;
  });
  return out;
}

std::vector<WeakResidual> weak_residual(const VectorField& field, const ParticleSeries& rho,
                                        const std::vector<BumpTest>& tests) {
  const std::vector<double> wt = simpson_weights(rho.times);
  for (const auto& f : tests) {
    check_test(f, field.dim());
    check_time_support(f, rho.times.back());
  }
  const std::size_t P = rho.weights.size();
  std::vector<WeakResidual> out(tests.size());
  parallel_for(tests.size(), [&](std::size_t j) {
    const BumpTest& f = tests[j];
    WeakResidual r;
    for (std::size_t i = 0; i < P; ++i) r.masked_cells += rho.valid[i] ? 0 : 1;
    std::vector<double> slices;
    for (std::size_t k = 0; k < rho.times.size(); ++k) {
      const double t = rho.times[k];
      if (f.time_factor(t) == 0.0 && f.time_factor_dt(t) == 0.0) continue;
      std::vector<double> terms(P, 0.0);
      for (std::size_t i = 0; i < P; ++i) {
        if (!rho.valid[i]) continue;
        const Vec& x = rho.positions[k][i];
        if (f.space_factor(x) == 0.0 && f.space_grad(x).isZero(0.0)) continue;
        const FieldSample s = sample_field(field, t, x);
        terms[i] = rho.weights[i] * (f.dt(t, x) + s.b.dot(f.grad(t, x)));
      }
      slices.push_back(wt[k] * tree_sum(terms));
    }
    r.lhs = tree_sum(slices);
    std::vector<double> init(P, 0.0);
    for (std::size_t i = 0; i < P; ++i)
      if (rho.valid[i]) init[i] = rho.weights[i] * f.value(0.0, rho.positions[0][i]);
    r.rhs = -tree_sum(init);
    r.residual = r.masked_cells ? kNaN : std::abs(r.lhs - r.rhs);
    out[j] = r;
  });
  return out;
}

std::vector<WeakResidual> weak_residual(const VectorField& field, const DensitySeries& rho,
                                        const std::vector<BumpTest>& tests) {
  const std::vector<double> wt = simpson_weights(rho.times);
  if (rho.grids.size() != rho.times.size()) fail(ErrorCode::InconsistentGrids, "one density grid per time needed");
  for (const auto& d : rho.grids)
    if (d.cells != rho.grids.front().cells || d.box.lower() != rho.grids.front().box.lower() ||
        d.box.upper() != rho.grids.front().box.upper())
      fail(ErrorCode::InconsistentGrids, "density grids differ between times");
  if (rho.grids.front().box.dim() != field.dim()) fail(ErrorCode::InvalidParam, "density grid does not match the field");
  for (const auto& f : tests) {
    check_test(f, field.dim());
    check_time_support(f, rho.times.back());
  }
  const DensityGrid& d0 = rho.grids.front();
  const int n = field.dim();
  const GaussRule gl = gauss_legendre(4);
  std::vector<WeakResidual> out(tests.size());
  parallel_for(tests.size(), [&](std::size_t j) {
    const BumpTest& f = tests[j];
    const CellRange cr = density_cells(d0, f);
    std::vector<std::size_t> flat(cr.total);
    std::vector<Vec> lo(cr.total), hi(cr.total);
    std::vector<double> A(cr.total);
    for (std::size_t c = 0; c < cr.total; ++c) {
      const auto m = cr.multi(c);
      std::size_t idx = 0;
      lo[c].resize(n);
      hi[c].resize(n);
      for (int i = 0; i < n; ++i) {
        idx = idx * d0.cells[i] + static_cast<std::size_t>(m[i]);
        const double h = (d0.box.hi(i) - d0.box.lo(i)) / d0.cells[i];
        lo[c](i) = d0.box.lo(i) + m[i] * h;
        hi[c](i) = lo[c](i) + h;
      }
      flat[c] = idx;
      A[c] = cell_integral(gl, lo[c], hi[c], [&](const Vec& x) { return f.space_factor(x); });
    }
    WeakResidual r;
    std::vector<double> slices;
    for (std::size_t k = 0; k < rho.times.size(); ++k) {
      const double t = rho.times[k];
      const double T = f.time_factor(t), Tp = f.time_factor_dt(t);
      if (T == 0.0 && Tp == 0.0) continue;
      const DensityGrid& d = rho.grids[k];
      std::vector<double> terms(cr.total, 0.0);
      for (std::size_t c = 0; c < cr.total; ++c) {
        if (d.flags[flat[c]] == CellFlag::ZeroJacobian) {
          ++r.masked_cells;
          continue;
        }
        if (d.density[flat[c]] == 0.0) continue;
        const double Bc = cell_integral(gl, lo[c], hi[c], [&](const Vec& x) {
          return sample_field(field, t, x).b.dot(f.space_grad(x));
        });
        terms[c] = d.density[flat[c]] * (Tp * A[c] + T * Bc);
      }
      slices.push_back(wt[k] * tree_sum(terms));
    }
    r.lhs = tree_sum(slices);
    std::vector<double> init(cr.total);
    for (std::size_t c = 0; c < cr.total; ++c) init[c] = d0.density[flat[c]] * A[c];
    r.rhs = -f.time_factor(0.0) * tree_sum(init);
    r.residual = r.masked_cells ? kNaN : std::abs(r.lhs - r.rhs);
    out[j] = r;
  });
  return out;
}

double propagated_sobolev_exponent(double p, double q, int n) {
  if (n < 1) fail(ErrorCode::InvalidParam, "dimension must be positive");
  if (!(p > n) || !(q >= 1.0) || !std::isfinite(p) || !std::isfinite(q))
    fail(ErrorCode::InvalidParam, "need p > n and finite q >= 1");
  return p * q * (p - n) / (q * (p - n) + p * p);
}

RefinementStudy transport_sobolev_study(const VectorField& field, const ScalarFn& u0,
                                        const std::function<Vec(const Vec&)>& grad_u0, double t, const Box& box,
                                        double q, const MeshOptions& mesh, const SolverConfig& cfg) {
  if (!u0 || !grad_u0) fail(ErrorCode::InvalidParam, "initial data and its gradient are required");
  if (!(q >= 1.0) || !std::isfinite(q)) fail(ErrorCode::InvalidParam, "sobolev exponent must be finite and >= 1");
  if (box.dim() != field.dim() || !box.bounded()) fail(ErrorCode::InvalidParam, "box must be bounded and match the field");
  if (mesh.graded) fail(ErrorCode::InvalidParam, "transport studies use uniform meshes");
  if (mesh.levels < 3 || mesh.levels > 20) fail(ErrorCode::InvalidParam, "refinement studies need 3 to 20 levels");
  cfg.validate();
  const int n = box.dim();
  RefinementStudy study;
  study.p = q;
  for (int level = 0; level < mesh.levels; ++level) {
    std::vector<int> cells(n);
    double h = 0.0;
    for (int i = 0; i < n; ++i) {
      const double len = box.hi(i) - box.lo(i);
      int base;
      if (mesh.finest_spacing > 0.0)
        base = static_cast<int>(std::ceil(len / (mesh.finest_spacing * std::ldexp(1.0, mesh.levels - 1)) - 1e-9));
      else
        base = std::max(2, static_cast<int>(std::lround(std::pow(4096.0, 1.0 / n))));
      cells[i] = base << level;
      h = std::max(h, len / cells[i]);
    }
    const Lattice grid = midpoint_lattice(box, cells);
    const std::vector<double> w = node_weights(grid);
    const std::size_t N = grid.size();
    std::vector<double> terms(N, 0.0);
    std::vector<std::uint8_t> failed(N, 0);
    parallel_for(N, [&](std::size_t i) {
      const Vec x = grid.node(i);
      try {
        if (!field.in_domain(t, x)) return;
        const FlowSensitivity fs = flow_with_sensitivity(field, 0.0, t, x, cfg);
        if (fs.exit == ExitStatus::StepUnderflow) {
          failed[i] = 1;
          return;
        }
        if (fs.exit != ExitStatus::ReachedTarget) return;
        const Vec g = fs.dxX.transpose() * grad_u0(fs.image);
        const double norm = g.norm();
        if (!std::isfinite(norm)) {
          failed[i] = 1;
          return;
        }
        terms[i] = std::pow(norm, q) * w[i];
      } catch (const Error&) {
        failed[i] = 1;
      }
    });
    std::size_t bad = 0;
    for (auto f : failed) bad += f;
    study.levels.push_back({h, tree_sum(terms), 1.0 - static_cast<double>(bad) / N, N});
  }
  double min_cov = 1.0;
  for (const auto& l : study.levels) min_cov = std::min(min_cov, l.coverage);
  study.verdict = refinement_verdict(study.levels, study.fitted_slope, mesh.verdict);
  std::ostringstream os;
  os << "slope=" << study.fitted_slope << " min_coverage=" << min_cov;
  if (min_cov < mesh.verdict.min_coverage) {
    study.verdict = RefinementVerdict::Inconclusive;
    os << " (coverage below " << mesh.verdict.min_coverage << ")";
  }
  study.details = os.str();
  return study;
}

}  // namespace roughflow
