#include <cmath>
#include <random>

#include "catch_amalgamated.hpp"
#include "oracles.hpp"
#include "roughflow/error.hpp"
#include "roughflow/flow.hpp"
#include "roughflow/gallery.hpp"

using namespace roughflow;
using Catch::Approx;

namespace {
Vec v1(double x) { return make_vec({x}); }
ExampleParams linear_params(double lambda, int dim = 1) {
  ExampleParams p;
  p.lambda = lambda;
  p.dim = dim;
  return p;
}
}  // namespace

TEST_CASE("integrate_trajectory examples") {
  SolverConfig cfg;
  const auto lin = make_example("linear", linear_params(1.0)).base;
  const Trajectory a = integrate_trajectory(lin, 0.0, v1(1.0), 1.0, cfg);
  CHECK(a.reached());
  CHECK(a.final_state()(0) == Approx(std::exp(1.0)).epsilon(10 * cfg.rel_tol));
  CHECK(a.times.front() == 0.0);
  CHECK(a.states.front()(0) == 1.0);
  CHECK(a.ell == Approx(1.0));

  const auto ll = make_example("loglinear").base;
  const Trajectory b = integrate_trajectory(ll, 0.0, v1(1.0), std::log(2.0), cfg);
  CHECK(std::abs(b.final_state()(0) - 1.6487212707001282) <= 1e-6);

  const auto zero = make_example("constant").base;
  const Trajectory c = integrate_trajectory(zero, 0.0, v1(0.4), 3.0, cfg);
  CHECK(c.exit == ExitStatus::ReachedTarget);
  for (const Vec& x : c.states) CHECK(x(0) == 0.4);

  // backward in time
  const Trajectory d = integrate_trajectory(ll, 1.0, v1(0.5), -0.5, cfg);
  CHECK(d.final_state()(0) == Approx(oracle::loglinear_flow(-0.5, 1.0, 0.5)).epsilon(1e-9));
  // dense output between mesh nodes
  for (double t : {0.9, 0.3, -0.2})
    CHECK(d.at(t)(0) == Approx(oracle::loglinear_flow(t, 1.0, 0.5)).epsilon(1e-7));
}

TEST_CASE("domain exit and maximal interval") {
  ExampleParams p;
  p.drift = {1.0};
  const auto field = make_example("constant", p).base.restricted(Box::interval(0.0, 1.0));
  const Trajectory tr = integrate_trajectory(field, 0.0, v1(0.25), 2.0);
  CHECK(tr.exit == ExitStatus::HitSpaceBoundary);
  CHECK(tr.final_state()(0) == Approx(1.0).margin(1e-9));
  CHECK(tr.ell == Approx(0.75).margin(1e-9));
  CHECK(maximal_interval(field, 0.0, v1(0.25), Interval{-1.0, 1.0}) == Approx(1.0).margin(1e-9));
  CHECK_FALSE(flow_point(field, 2.0, 0.0, v1(0.25)).has_value());

  SolverConfig margin;
  margin.domain_margin = 0.1;
  const Trajectory tm = integrate_trajectory(field, 0.0, v1(0.25), 2.0, margin);
  CHECK(tm.final_state()(0) == Approx(0.9).margin(1e-9));
}

TEST_CASE("time boundary and step underflow") {
  VectorField limited(1, Interval{0.0, 0.5}, Box::unbounded(1), [](double, const Vec&) { return make_vec({1.0}); },
                      [](double, const Vec&) { return Mat::Zero(1, 1).eval(); }, JacobianMode::analytic());
  const Trajectory tr = integrate_trajectory(limited, 0.0, v1(0.0), 1.0);
  CHECK(tr.exit == ExitStatus::HitTimeBoundary);
  CHECK(tr.final_state()(0) == Approx(0.5));

  VectorField blowup(1, {}, Box::unbounded(1), [](double, const Vec& x) { return make_vec({x(0) * x(0)}); },
                     [](double, const Vec& x) { return make_vec({2 * x(0)}).asDiagonal().toDenseMatrix().eval(); },
                     JacobianMode::analytic());
  SolverConfig cfg;
  cfg.max_steps = 20000;
  const Trajectory bu = integrate_trajectory(blowup, 0.0, v1(1.0), 2.0, cfg);
  CHECK(bu.exit == ExitStatus::StepUnderflow);
  CHECK(bu.times.size() > 10);
  CHECK(bu.t_end() < 1.0);
}

TEST_CASE("non-uniqueness regime follows the zero solution") {
  const auto field = make_example("sublog", ExampleParams{1.5}).base;
  const Trajectory tr = integrate_trajectory(field, 0.0, v1(0.0), 3.0);
  for (const Vec& x : tr.states) CHECK(x(0) == 0.0);
}

TEST_CASE("flow_map examples") {
  const auto ll = make_example("loglinear");
  const Lattice identity_grid = Lattice::uniform(Box::interval(-0.5, 3.0), {41});
  const FlowMapGrid id = flow_map(ll.base, 0.7, 0.7, identity_grid);
  for (std::size_t i = 0; i < identity_grid.size(); ++i) CHECK(id.images[i](0) == identity_grid.node(i)(0));

  const Lattice grid = Lattice::uniform(Box::interval(0.01, oracle::e), {200});
  const FlowMapGrid fm = flow_map(ll.base, 1.0, 0.0, grid, {}, true);
  for (std::size_t i = 0; i < grid.size(); ++i) {
    const double x = grid.node(i)(0);
    REQUIRE(fm.inside(i));
    CHECK(std::abs(fm.images[i](0) - oracle::e * std::pow(x / oracle::e, std::exp(-1.0))) <= 1e-6);
    CHECK(fm.jac[i] > 0.0);
    if (x < oracle::e - 1e-9)
      CHECK(oracle::rel_err(fm.dx_matrices[i](0, 0), oracle::loglinear_dflow(1.0, 0.0, x)) <= 1e-5);
  }

  const auto rot = make_example("rotation").base;
  const Lattice g2 = Lattice::uniform(Box({-1.0, -1.0}, {1.0, 1.0}), {9, 9});
  const FlowMapGrid full = flow_map(rot, 2.0 * M_PI, 0.0, g2);
  for (std::size_t i = 0; i < g2.size(); ++i) CHECK((full.images[i] - g2.node(i)).norm() <= 1e-8);
}

TEST_CASE("inverse flow identity") {
  SolverConfig cfg;
  for (const std::string name : {"loglinear", "sublog", "rotation"}) {
    const auto ex = make_example(name);
    const Box box = ex.base.dim() == 1 ? (name == "sublog" ? Box::interval(1e-4, 0.06) : Box::interval(0.05, 2.6))
                                       : Box({-1.0, -1.0}, {1.0, 1.0});
    const Lattice grid = Lattice::uniform(box, std::vector<int>(ex.base.dim(), ex.base.dim() == 1 ? 50 : 8));
    const FlowMapGrid fwd = flow_map(ex.base, 0.8, 0.0, grid, cfg);
    for (std::size_t i = 0; i < grid.size(); ++i) {
      const Vec back = *flow_point(ex.base, 0.0, 0.8, fwd.images[i], cfg);
      CHECK((back - grid.node(i)).norm() <= 10 * cfg.rel_tol * std::max(1.0, grid.node(i).norm()) + 1e-12);
    }
  }
}

TEST_CASE("variational_solve") {
  SolverConfig cfg;
  const auto rot = make_example("rotation").base;
  const Trajectory tr = integrate_trajectory(rot, 0.0, make_vec({0.3, -1.2}), 2.5, cfg);
  const VariationalResult vr = variational_solve(rot, tr, cfg);
  REQUIRE(vr.times.size() == tr.times.size());
  for (std::size_t i = 0; i < vr.times.size(); ++i) {
    CHECK(std::abs(vr.jac_det[i] - 1.0) <= 1e-8);
    CHECK(std::abs(vr.jac_liouville[i] - 1.0) <= 1e-8);
  }

  const auto lin = make_example("linear", linear_params(0.7)).base;
  const Trajectory tl = integrate_trajectory(lin, 0.2, v1(1.5), 1.4, cfg);
  const VariationalResult vl = variational_solve(lin, tl, cfg);
  const double expected = std::exp(0.7 * 1.2);
  CHECK(vl.dxX.back()(0, 0) == Approx(expected).epsilon(1e-9));
  CHECK(vl.jac_det.back() == Approx(expected).epsilon(1e-9));
  CHECK(vl.jac_liouville.back() == Approx(expected).epsilon(1e-9));

  const auto ll = make_example("loglinear").base;
  for (double x : {0.05, 0.5, 1.0, 2.0}) {
    for (double t : {0.3, 1.0}) {
      const Trajectory tt = integrate_trajectory(ll, 0.0, v1(x), t, cfg);
      const VariationalResult v = variational_solve(ll, tt, cfg);
      CHECK(oracle::rel_err(v.dxX.back()(0, 0), oracle::loglinear_dflow(t, 0.0, x)) <= 1e-5);
      CHECK(oracle::rel_err(v.jac_det.back(), v.jac_liouville.back()) <= 1e-5);
    }
  }
}

TEST_CASE("gronwall_check") {
  SolverConfig cfg;
  const auto lin = make_example("linear", linear_params(0.9)).base;
  const Trajectory tl = integrate_trajectory(lin, 0.0, v1(1.0), 1.3, cfg);
  const GronwallReport gl = gronwall_check(lin, tl, variational_solve(lin, tl, cfg));
  CHECK(gl.holds);
  CHECK(gl.lhs == Approx(std::exp(0.9 * 1.3)).epsilon(1e-8));
  CHECK(gl.rhs == Approx(std::exp(0.9 * 1.3)).epsilon(1e-8));

  const auto rot = make_example("rotation").base;
  const Trajectory tr = integrate_trajectory(rot, 0.0, make_vec({1.0, 0.0}), 1.5, cfg);
  const GronwallReport gr = gronwall_check(rot, tr, variational_solve(rot, tr, cfg));
  CHECK(gr.lhs == Approx(1.0).epsilon(1e-9));
  CHECK(gr.rhs == Approx(std::exp(1.5)).epsilon(1e-9));
  CHECK(gr.holds);

  const auto ll = make_example("loglinear").base;
  const Trajectory t3 = integrate_trajectory(ll, 0.0, v1(0.5), 1.0, cfg);
  const GronwallReport g3 = gronwall_check(ll, t3, variational_solve(ll, t3, cfg));
  CHECK(g3.holds);
  CHECK(g3.slack > 0.0);
  // both sides from closed forms: lhs = k (x/e)^{k-1}; rhs = exp(int_0^1 |log X(v)| dv)
  const double lhs = oracle::loglinear_dflow(1.0, 0.0, 0.5);
  const double rhs = std::exp(oracle::simpson(
      [](double v) { return std::abs(std::log(oracle::loglinear_flow(v, 0.0, 0.5))); }, 0.0, 1.0, 2000));
  CHECK(g3.lhs == Approx(lhs).epsilon(1e-6));
  CHECK(g3.rhs == Approx(rhs).epsilon(1e-6));
}

TEST_CASE("semigroup_residual") {
  SolverConfig cfg;
  const auto ll = make_example("loglinear").base;
  CHECK(semigroup_residual(ll, 0.4, 0.4, 0.4, v1(1.0), cfg) == 0.0);
  CHECK(semigroup_residual(ll, 0.0, 0.5, 1.0, v1(1.0), cfg) <= 10 * cfg.rel_tol);
  // closed-form composition: exponents multiply exactly
  const auto ex = make_example("loglinear");
  const double composed = ex.closed_flow(1.0, 0.5, ex.closed_flow(0.5, 0.0, v1(1.0)))(0);
  CHECK(composed == Approx(ex.closed_flow(1.0, 0.0, v1(1.0))(0)).epsilon(1e-15));

  ExampleParams p;
  p.drift = {1.0};
  const auto boxed = make_example("constant", p).base.restricted(Box::interval(0.0, 1.0));
  try {
    semigroup_residual(boxed, 0.0, 2.0, 3.0, v1(0.5), cfg);
    FAIL("expected DomainExit");
  } catch (const Error& e) {
    CHECK(e.code() == ErrorCode::DomainExit);
  }
}

TEST_CASE("Liouville identity and positivity on flow grids") {
  SolverConfig cfg;
  for (const std::string name : {"loglinear", "sublog", "rotation", "linear"}) {
    const auto ex = make_example(name);
    const Box box = ex.base.dim() == 1 ? (name == "sublog" ? Box::interval(1e-6, 0.06) : Box::interval(0.02, 2.7))
                                       : Box({-1.0, -1.0}, {1.0, 1.0});
    const Lattice grid = Lattice::uniform(box, std::vector<int>(ex.base.dim(), ex.base.dim() == 1 ? 60 : 7));
    const FlowMapGrid fm = flow_map(ex.base, 0.6, -0.2, grid, cfg, true);
    for (std::size_t i = 0; i < grid.size(); ++i) {
      REQUIRE(fm.inside(i));
      CHECK(fm.jac[i] > 0.0);
      CHECK(oracle::rel_err(fm.jac[i], fm.liouville_jac[i]) <= 1e-5);
    }
  }
}

TEST_CASE("error decreases with tolerance at the method's rate") {
  const auto ll = make_example("loglinear").base;
  std::vector<double> tols{1e-5, 1e-6, 1e-7, 1e-8}, errs;
  for (double tol : tols) {
    SolverConfig cfg;
    cfg.rel_tol = tol;
    cfg.abs_tol = tol;
    double err = 0.0;
    for (double x : {0.05, 0.3, 1.0, 2.0})
      err = std::max(err, std::abs((*flow_point(ll, 2.0, 0.0, v1(x), cfg))(0) - oracle::loglinear_flow(2.0, 0.0, x)));
    errs.push_back(err);
  }
  // log error against log tolerance has slope near 1 for error-per-step control
  const double slope = (std::log(errs.back()) - std::log(errs.front())) / (std::log(tols.back()) - std::log(tols.front()));
  CHECK(slope > 0.6);
  CHECK(slope < 1.5);
  for (std::size_t i = 1; i < errs.size(); ++i) CHECK(errs[i] < errs[i - 1]);
}

TEST_CASE("maximal interval lower bound") {
  std::mt19937_64 rng(77);
  SolverConfig cfg;
  struct Case {
    std::string name;
    Box box;
    double sup_b;
  };
  ExampleParams lp = linear_params(1.0, 1);
  const Interval window{0.0, 2.0};
  for (const Case& c : {Case{"loglinear", Box::interval(-1.0, 3.0), 1.0},
                        Case{"linear", Box::interval(-2.0, 2.0), 2.0},
                        Case{"rotation", Box({-1.5, -1.5}, {1.5, 1.5}), 1.5 * std::sqrt(2.0)},
                        Case{"sublog", Box::interval(-0.1, 0.1), 0.0}}) {
    const auto ex = make_example(c.name, lp);
    const VectorField f = ex.base.restricted(c.box);
    double sup_b = c.sup_b;
    if (c.name == "sublog") {
      for (int k = 1; k < 20000; ++k) sup_b = std::max(sup_b, f.eval(0.0, v1(0.1 * k / 20000.0))(0));
    }
    std::uniform_real_distribution<double> us(window.lo, window.hi);
    for (int k = 0; k < 500; ++k) {
      Vec x(f.dim());
      for (int i = 0; i < f.dim(); ++i) {
        std::uniform_real_distribution<double> ux(c.box.lo(i) * 0.999, c.box.hi(i) * 0.999);
        x(i) = ux(rng);
      }
      const double s = us(rng);
      const double ell = maximal_interval(f, s, x, window, cfg);
      const double bound = std::min(window.length(), c.box.distance_to_boundary(x) / sup_b);
      CHECK(ell >= 0.9 * bound);
    }
  }
}

TEST_CASE("uniqueness funnel") {
  SolverConfig cfg;
  const auto lin = make_example("linear", linear_params(0.8)).base;
  const auto rows = uniqueness_funnel(lin, 0.0, v1(1.0), {0.0, 1e-3}, 1.0, [](double u) { return u; }, 0.8, cfg);
  CHECK(rows[0].max_spread == 0.0);
  CHECK(rows[1].max_spread == Approx(1e-3 * std::exp(0.8)).epsilon(1e-7));
  CHECK(rows[1].envelope == Approx(1e-3 * std::exp(0.8)).epsilon(1e-7));

  const auto ll = make_example("loglinear").base;
  auto omega = [](double u) { return u * std::max(2.0, 2.0 * std::log(1.0 / u)); };
  const double phi = estimate_phi(ll, omega, Box::interval(-1.0, 3.0), 0.0);
  CHECK(phi > 0.4);
  CHECK(phi < 1.0);
  const auto lr = uniqueness_funnel(ll, 0.0, v1(0.5), {1e-6}, 1.0, omega, phi, cfg);
  CHECK(lr[0].holds);
  CHECK(lr[0].max_spread <= lr[0].envelope);
  // the comparison solution has the closed form D = delta^{exp(-2 tau)} while 2 log(1/D) >= 2
  CHECK(comparison_envelope(omega, 1e-6, 0.3) == Approx(std::pow(1e-6, std::exp(-0.6))).epsilon(1e-8));
}
