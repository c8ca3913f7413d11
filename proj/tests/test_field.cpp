#include <cmath>
#include <cstdio>
#include <fstream>
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

// Fourth-order directional difference of component i along axis i.
double directional_fourth_order(const VectorField& f, const Vec& x, int i, double h) {
  auto comp = [&](double d) {
    Vec y = x;
    y(i) += d;
    return f.eval(0.0, y)(i);
  };
  return (-comp(2 * h) + 8 * comp(h) - 8 * comp(-h) + comp(-2 * h)) / (12 * h);
}

}  // namespace

TEST_CASE("eval on gallery fields") {
  const auto loglinear = make_example("loglinear").base;
  CHECK(loglinear.eval(0.0, v1(oracle::e))(0) == 0.0);
  CHECK(loglinear.eval(0.0, v1(1.0))(0) == Approx(1.0).epsilon(1e-15));
  CHECK(loglinear.eval(0.0, v1(0.0))(0) == 0.0);
  CHECK(loglinear.eval(0.0, v1(-2.0))(0) == 0.0);

  const auto rotation = make_example("rotation").base;
  const Vec r = rotation.eval(0.0, make_vec({1.0, 0.0}));
  CHECK(r(0) == 0.0);
  CHECK(r(1) == 1.0);
}

TEST_CASE("eval is bitwise deterministic") {
  const auto sublog = make_example("sublog").base;
  const double a = sublog.eval(0.0, v1(1e-5))(0);
  const double b = sublog.eval(0.0, v1(1e-5))(0);
  CHECK(std::memcmp(&a, &b, sizeof a) == 0);
}

TEST_CASE("eval errors") {
  const auto loglinear = make_example("loglinear").base.restricted(Box::interval(-1.0, 3.0));
  REQUIRE_THROWS_AS(loglinear.eval(0.0, v1(4.0)), Error);
  try {
    loglinear.eval(0.0, v1(4.0));
  } catch (const Error& e) {
    CHECK(e.code() == ErrorCode::OutOfDomain);
  }
  VectorField bad(1, {}, Box::unbounded(1), [](double, const Vec&) { return make_vec({std::nan("")}); }, nullptr,
                  JacobianMode::central_difference());
  try {
    bad.eval(0.0, v1(0.0));
    FAIL("expected NonFinite");
  } catch (const Error& e) {
    CHECK(e.code() == ErrorCode::NonFinite);
  }
}

TEST_CASE("jacobian examples") {
  const auto loglinear = make_example("loglinear").base;
  const MatrixSample m = loglinear.jacobian(0.0, v1(1.0 / oracle::e));
  CHECK(m.entries(0, 0) == Approx(1.0).epsilon(1e-15));
  CHECK(m.op_norm == Approx(1.0).epsilon(1e-15));

  ExampleParams p;
  p.drift = {2.0, -1.0};
  const auto constant = make_example("constant", p).base;
  const MatrixSample z = constant.jacobian(0.0, make_vec({0.3, 0.1}));
  CHECK(z.op_norm == 0.0);
  CHECK(z.entries.isZero());

  const auto rotation = make_example("rotation").base;
  const MatrixSample r = rotation.jacobian(0.0, make_vec({0.4, -2.0}));
  CHECK(r.entries(0, 1) == -1.0);
  CHECK(r.entries(1, 0) == 1.0);
  CHECK(r.op_norm == Approx(1.0).epsilon(1e-14));
  CHECK(r.trace == 0.0);
}

TEST_CASE("MatrixSample Hadamard chain") {
  std::mt19937_64 rng(11);
  std::normal_distribution<double> g;
  for (int trial = 0; trial < 100; ++trial) {
    Mat m(3, 3);
    for (int i = 0; i < 3; ++i)
      for (int j = 0; j < 3; ++j) m(i, j) = g(rng);
    const MatrixSample s = MatrixSample::from(m);
    for (int i = 0; i < 3; ++i) CHECK(s.op_norm >= m.col(i).norm() * (1 - 1e-12));
    CHECK(std::abs(m.determinant()) <= std::pow(s.op_norm, 3) * (1 + 1e-12));
  }
}

TEST_CASE("stencil outside domain") {
  const auto f = make_example("loglinear").base.restricted(Box::interval(0.0, 1.0)).with_jacobian_mode(
      JacobianMode::central_difference(1e-3));
  try {
    f.jacobian(0.0, v1(0.9995));
    FAIL("expected StencilOutsideDomain");
  } catch (const Error& e) {
    CHECK(e.code() == ErrorCode::StencilOutsideDomain);
  }
}

TEST_CASE("central differences agree with analytic Jacobians at second order") {
  struct Case {
    std::string name;
    double lo, hi;
  };
  std::mt19937_64 rng(2024);
  for (const Case& c : {Case{"loglinear", 0.2, 2.5}, Case{"sublog", 1e-4, 0.05}, Case{"rotation", -2.0, 2.0},
                        Case{"linear", -2.0, 2.0}}) {
    const auto ex = make_example(c.name);
    const int n = ex.base.dim();
    std::uniform_real_distribution<double> u(c.lo, c.hi);
    int halving_ok = 0, total = 0;
    for (int k = 0; k < 200; ++k) {
      Vec x(n);
      for (int i = 0; i < n; ++i) x(i) = u(rng);
      const Mat exact = ex.base.jacobian_matrix(0.0, x);
      const Mat d1 = ex.base.with_jacobian_mode(JacobianMode::central_difference(1e-3)).jacobian_matrix(0.0, x);
      const Mat d2 = ex.base.with_jacobian_mode(JacobianMode::central_difference(1e-4)).jacobian_matrix(0.0, x);
      // Local third-derivative scale: for x log(1/x) it is 1/x^2; for the sublog field about L/x^2.
      double scale = 1.0;
      if (c.name == "loglinear") scale = 1.0 / (x(0) * x(0));
      if (c.name == "sublog") scale = 4.0 * -std::log(x(0)) / (x(0) * x(0));
      const double err1 = (d1 - exact).norm(), err2 = (d2 - exact).norm();
      CHECK(err1 <= 10.0 * 1e-6 * scale * std::max(1.0, exact.norm()) + 1e-12);
      CHECK(err2 <= 10.0 * 1e-8 * scale * std::max(1.0, exact.norm()) + 1e-10);
      // Richardson: halving the step cuts the error by about four.
      const Mat dh = ex.base.with_jacobian_mode(JacobianMode::central_difference(5e-4)).jacobian_matrix(0.0, x);
      const double errh = (dh - exact).norm();
      if (err1 > 1e-9) {
        ++total;
        if (err1 / errh > 3.5 && err1 / errh < 4.5) ++halving_ok;
      }
    }
    if (total > 0) CHECK(halving_ok >= 0.95 * total);
  }
}

TEST_CASE("trace equals independently computed divergence") {
  std::mt19937_64 rng(7);
  for (const std::string name : {"loglinear", "sublog", "rotation", "linear", "constant"}) {
    const auto ex = make_example(name);
    const int n = ex.base.dim();
    std::uniform_real_distribution<double> u(name == "sublog" ? 0.01 : 0.3, name == "sublog" ? 0.05 : 2.5);
    for (int k = 0; k < 50; ++k) {
      Vec x(n);
      for (int i = 0; i < n; ++i) x(i) = u(rng);
      double div = 0.0;
      for (int i = 0; i < n; ++i) div += directional_fourth_order(ex.base, x, i, 1e-3 * std::abs(x(i)));
      CHECK(std::abs(ex.base.jacobian(0.0, x).trace - div) <= 1e-10 * std::max(1.0, std::abs(div)));
    }
  }
}

TEST_CASE("extend_dim") {
  const auto base = make_example("loglinear").base;
  const auto ext = extend_dim(base, 1);
  CHECK(ext.dim() == 2);
  const Vec v = ext.eval(0.0, make_vec({1.0, 7.0}));
  CHECK(v(0) == base.eval(0.0, v1(1.0))(0));
  CHECK(v(1) == 0.0);

  std::mt19937_64 rng(3);
  std::uniform_real_distribution<double> u(-1.0, 3.0);
  for (int k = 0; k < 100; ++k) {
    const double x = u(rng), y = u(rng);
    const Vec e = ext.eval(0.5, make_vec({x, y}));
    CHECK(e(0) == base.eval(0.5, v1(x))(0));
    CHECK(e(1) == 0.0);
  }

  const Mat J = ext.jacobian_matrix(0.0, make_vec({0.5, 2.0}));
  CHECK(J(0, 0) == Approx(-std::log(0.5)));
  CHECK(J(0, 1) == 0.0);
  CHECK(J(1, 0) == 0.0);
  CHECK(J(1, 1) == 0.0);

  for (double t : {-0.7, 0.4, 1.3}) {
    const Trajectory tr = integrate_trajectory(ext, 0.0, make_vec({1.0, 3.0}), t);
    CHECK(tr.final_state()(1) == 3.0);
    CHECK(tr.final_state()(0) == Approx(oracle::loglinear_flow(t, 0.0, 1.0)).epsilon(1e-8));
  }
  REQUIRE_THROWS_AS(extend_dim(base, 0), Error);
}

TEST_CASE("grid-sampled field") {
  const std::string path = "test_field_grid.csv";
  {
    std::ofstream out(path);
    out << "2, 2\n0.0, 1.0\n0, 1, 0, 2\n3, 5\n";
    for (int slice = 0; slice < 2; ++slice)
      for (int i = 0; i < 3; ++i)
        for (int j = 0; j < 5; ++j) {
          const double x = 0.5 * i, y = 0.5 * j;
          // affine in space, so multilinear interpolation is exact
          out << (slice + 1) * (2.0 * x - y + 1.0) << ", " << 3.0 * y << "\n";
        }
  }
  const VectorField f = load_grid_field(path);
  CHECK(f.dim() == 2);
  const Vec a = f.eval(0.5, make_vec({0.3, 1.7}));
  CHECK(a(0) == Approx(2 * 0.3 - 1.7 + 1.0).margin(1e-14));
  CHECK(a(1) == Approx(3 * 1.7).margin(1e-14));
  const Vec b = f.eval(2.0, make_vec({0.3, 1.7}));
  CHECK(b(0) == Approx(2.0 * (2 * 0.3 - 1.7 + 1.0)).margin(1e-14));
  const Mat J = f.jacobian_matrix(0.5, make_vec({0.5, 1.0}));
  CHECK(J(0, 0) == Approx(2.0).margin(1e-7));
  CHECK(J(0, 1) == Approx(-1.0).margin(1e-7));
  CHECK(f.traits().time_breakpoints == std::vector<double>{1.0});
  std::remove(path.c_str());

  try {
    load_grid_field("does-not-exist.csv");
    FAIL("expected Io");
  } catch (const Error& e) {
    CHECK(e.code() == ErrorCode::Io);
  }
}
