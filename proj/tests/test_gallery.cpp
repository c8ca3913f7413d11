#include <cmath>
#include <random>

#include "catch_amalgamated.hpp"
#include "oracles.hpp"
#include "roughflow/error.hpp"
#include "roughflow/gallery.hpp"

using namespace roughflow;
using Catch::Approx;

namespace {
Vec v1(double x) { return make_vec({x}); }
}  // namespace

TEST_CASE("loglinear closed flow") {
  const auto ex = make_example("loglinear");
  // e * (1/e)^{1/2} = e^{1/2}
  CHECK(ex.closed_flow(std::log(2.0), 0.0, v1(1.0))(0) == Approx(1.6487212707001282).epsilon(1e-14));
  CHECK(ex.closed_flow(0.3, 0.3, v1(0.5))(0) == Approx(0.5).epsilon(1e-15));
  std::mt19937_64 rng(5);
  std::uniform_real_distribution<double> ut(-2.0, 2.0), ux(-0.5, 3.5);
  for (int k = 0; k < 500; ++k) {
    const double t = ut(rng), s = ut(rng), x = ux(rng);
    CHECK(ex.closed_flow(t, s, v1(x))(0) == Approx(oracle::loglinear_flow(t, s, x)).epsilon(1e-12));
    CHECK(ex.closed_flow_derivative(t, s, v1(x))(0, 0) ==
          Approx(oracle::loglinear_dflow(t, s, x)).epsilon(1e-11));
  }
  CHECK(*ex.metadata.sharp_sobolev_exponent(1.0, 0.0) == Approx(1.0 / (1.0 - std::exp(-1.0))));
  CHECK(std::isinf(*ex.metadata.sharp_sobolev_exponent(0.0, 1.0)));
  CHECK(ex.metadata.wellposed);
}

TEST_CASE("closed flows: identity, semigroup, derivative quotient") {
  std::mt19937_64 rng(9);
  std::uniform_real_distribution<double> ut(-1.0, 1.0);
  for (const std::string name : {"loglinear", "sublog", "cantor", "rotation", "linear", "constant"}) {
    ExampleParams params;
    if (name == "constant") params.drift = {0.7};
    const auto ex = make_example(name, params);
    const int n = ex.base.dim();
    std::uniform_real_distribution<double> ux(name == "sublog" ? 1e-6 : 0.05, name == "sublog" ? 0.06 : 2.6);
    for (int k = 0; k < 100; ++k) {
      Vec x(n);
      for (int i = 0; i < n; ++i) x(i) = ux(rng);
      const double t1 = ut(rng), t2 = ut(rng), t3 = ut(rng);
      CHECK((ex.closed_flow(t1, t1, x) - x).norm() <= 1e-14 * std::max(1.0, x.norm()));
      const Vec composed = ex.closed_flow(t3, t2, ex.closed_flow(t2, t1, x));
      const Vec direct = ex.closed_flow(t3, t1, x);
      CHECK((composed - direct).norm() <= 1e-12 * std::max(1.0, direct.norm()));
      if (n == 1 && name != "cantor") {
        const double h = 1e-7 * std::max(x(0), 1e-3);
        const double dq = (ex.closed_flow(t2, t1, v1(x(0) + h))(0) - ex.closed_flow(t2, t1, v1(x(0) - h))(0)) / (2 * h);
        const double d = ex.closed_flow_derivative(t2, t1, x)(0, 0);
        CHECK(std::abs(dq - d) <= 1e-5 * std::max(1.0, std::abs(d)));
      }
    }
  }
}

TEST_CASE("sublog example") {
  const auto ex = make_example("sublog");
  CHECK(ex.closed_flow(1.0, 0.0, v1(-0.3))(0) == -0.3);
  CHECK(ex.closed_flow(1.0, 0.0, v1(0.0))(0) == 0.0);
  CHECK(ex.closed_flow(1.0, 0.0, v1(0.5))(0) == 0.5);
  CHECK(ex.base.eval(0.0, v1(std::exp(-oracle::e)))(0) == 0.0);
  CHECK(ex.base.eval(0.0, v1(0.1))(0) == 0.0);
  for (double x : {1e-20, 1e-8, 1e-3, 0.05})
    for (double t : {-0.5, 0.5, 1.0})
      CHECK(ex.closed_flow(t, 0.0, v1(x))(0) == Approx(oracle::sublog_flow(t, 0.0, x)).epsilon(1e-10));
  CHECK(*ex.metadata.sharp_sobolev_exponent(0.5, 0.0) == 1.0);
  REQUIRE_THROWS_AS(make_example("sublog", ExampleParams{0.5}), Error);
  CHECK_FALSE(make_example("sublog", ExampleParams{1.5}).metadata.wellposed);
  CHECK_FALSE(make_example("sublog", ExampleParams{1.5}).closed_flow);
}

TEST_CASE("make_example errors") {
  try {
    make_example("no-such-field");
    FAIL("expected UnknownExample");
  } catch (const Error& e) {
    CHECK(e.code() == ErrorCode::UnknownExample);
  }
  ExampleParams p;
  p.level = 0;
  try {
    make_example("cantor", p);
    FAIL("expected InvalidParam");
  } catch (const Error& e) {
    CHECK(e.code() == ErrorCode::InvalidParam);
  }
}

TEST_CASE("cantor staircase") {
  for (int level : {1, 2, 5, 12}) {
    CHECK(cantor_staircase(0.5, level) == 0.5);
    CHECK(cantor_staircase(0.0, level) == 0.0);
    CHECK(cantor_staircase(1.0, level) == 1.0);
  }
  // a(1/4) = a(3/4)/2 = (1/2 + a(1/4)/2)/2, so a(1/4) = 1/3 in the limit.
  CHECK(cantor_staircase(0.25, 30) == Approx(1.0 / 3.0).epsilon(1e-8));
  std::mt19937_64 rng(1);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  for (int level : {1, 3, 6, 10, 12}) {
    double prev = -1.0;
    for (int k = 0; k <= 2000; ++k) {
      const double s = k / 2000.0;
      const double a = cantor_staircase(s, level);
      CHECK(a >= prev);
      prev = a;
    }
    for (int k = 0; k < 300; ++k) {
      const double s = u(rng);
      CHECK(cantor_staircase(s, level) == Approx(oracle::cantor(s, level)).margin(1e-12));
    }
  }
  try {
    cantor_staircase(1.5, 4);
    FAIL("expected OutOfRange");
  } catch (const Error& e) {
    CHECK(e.code() == ErrorCode::OutOfRange);
  }
}

TEST_CASE("cantor field follows the parabola foliation") {
  const auto ex = make_example("cantor", ExampleParams{1.0, 1.0, 8});
  for (double s : {0.0, 1.0 / 3.0, 0.5, 2.0 / 3.0, 0.1, 0.9, 1.0}) {
    const double a = cantor_staircase(s, 8);
    for (double t : {0.5, 1.0, 2.0}) CHECK(ex.closed_flow(t, 0.0, v1(s))(0) == Approx(a * t * t + s).epsilon(1e-12));
    // b at the parabola point equals the parabola's slope 2 a t.
    CHECK(ex.base.eval(0.7, v1(a * 0.49 + s))(0) == Approx(2.0 * a * 0.7).epsilon(1e-9));
  }
}

TEST_CASE("non-uniqueness pair") {
  const double alpha = 1.5;
  const auto [g1, g2] = nonuniqueness_pair(alpha);
  const auto field = make_example("sublog", ExampleParams{alpha}).base;
  CHECK(g1(5.0) == 0.0);
  CHECK(g2(0.0) == 0.0);
  CHECK(g2(-1.0) == 0.0);
  for (double t : {0.1, 0.5, 1.0, 2.0, 5.0}) {
    CHECK(ode_residual(field, g1, t) <= 1e-5);
    CHECK(ode_residual(field, g2, t) <= 1e-5);
  }
  CHECK(g2(5.0) > 0.0);
  REQUIRE_THROWS_AS(nonuniqueness_pair(1.0), Error);

  // The printed closed form exp(-exp(-(1 + 1/((alpha-1)t))^{1/(alpha-1)})) is not a solution.
  ScalarPath printed = [alpha](double t) {
    if (t <= 0.0) return 0.0;
    return std::exp(-std::exp(-std::pow(1.0 + 1.0 / ((alpha - 1.0) * t), 1.0 / (alpha - 1.0))));
  };
  CHECK(ode_residual(field, printed, 1.0) > 1e-3);
}
