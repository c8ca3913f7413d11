#include <cmath>
#include <numbers>

#include "catch_amalgamated.hpp"
#include "oracles.hpp"
#include "roughflow/error.hpp"
#include "roughflow/gallery.hpp"
#include "roughflow/orlicz.hpp"

using namespace roughflow;
using Catch::Approx;

namespace {

constexpr double e = std::numbers::e;

ExampleParams drift(std::vector<double> d) {
  ExampleParams p;
  p.drift = std::move(d);
  return p;
}

// Composite Gauss rule over [a, b] after x = a + (b - a) u^m, which flattens an endpoint singularity at a.
double graded(const std::function<double(double)>& f, double a, double b, double m, int panels) {
  auto g = [&](double u) { return f(a + (b - a) * std::pow(u, m)) * (b - a) * m * std::pow(u, m - 1.0); };
  return oracle::gauss3(g, 0.0, 1.0, panels);
}

// Same, singular at b.
double graded_right(const std::function<double(double)>& f, double a, double b, double m, int panels) {
  return graded([&](double x) { return f(b - (x - a)); }, a, b, m, panels);
}

}  // namespace

TEST_CASE("iterated exponentials and logarithms") {
  CHECK(iterated_exp(1, 0.0) == 1.0);
  CHECK(iterated_exp(2, 0.0) == Approx(e).epsilon(1e-15));
  CHECK(iterated_exp(2, 1.0) == Approx(15.154262241479262).epsilon(1e-14));
  CHECK(iterated_log(1, e) == Approx(1.0).epsilon(1e-15));
  CHECK(iterated_log(2, std::pow(e, e)) == Approx(1.0).epsilon(1e-14));
  CHECK(iterated_log_product(2, std::pow(e, e)) == Approx(e).epsilon(1e-14));
  CHECK(iterated_log_product(0, 5.0) == 1.0);
  CHECK(iterated_log_threshold(1) == 0.0);
  CHECK(iterated_log_threshold(3) == Approx(e).epsilon(1e-15));
  CHECK_THROWS_MATCHES(iterated_exp(3, 2.0), Error, Catch::Matchers::Predicate<Error>([](const Error& err) {
                         return err.code() == ErrorCode::Overflow;
                       }));
  CHECK_THROWS_MATCHES(iterated_log(2, 1.0), Error, Catch::Matchers::Predicate<Error>([](const Error& err) {
                         return err.code() == ErrorCode::OutOfDomain;
                       }));
  CHECK_THROWS_AS(iterated_log(1, 0.0), Error);
  CHECK_THROWS_AS(iterated_exp(0, 1.0), Error);
}

TEST_CASE("subexponential gauge values") {
  const OrliczGauge exp_like = OrliczGauge::subexp(1, 0.0, 3.0);
  for (double s : {3.0, 5.0, 40.0}) CHECK(exp_like.eval(s) == Approx(std::exp(s)).epsilon(1e-14));

  const OrliczGauge g = OrliczGauge::subexp(1, 1.0, 3.0);
  const double s = iterated_exp(2, 1.0);
  CHECK(g.log_eval(s) == Approx(s / e).epsilon(1e-14));
  CHECK(g.log_eval(s) == Approx(5.574941).epsilon(1e-6));

  // Plateau below s_bar.
  CHECK(g.eval(0.5) == g.eval(3.0));
  CHECK(g.eval(0.0) == g.eval(3.0));
  CHECK(g.deriv(2.0) == 0.0);

  CHECK_THROWS_MATCHES(OrliczGauge::subexp(2, 1.0, 10.0), Error,
                       Catch::Matchers::Predicate<Error>([](const Error& err) {
                         return err.code() == ErrorCode::InvalidThreshold;
                       }));
  const OrliczGauge automatic = OrliczGauge::subexp(2, 0.5);
  CHECK(iterated_log(2, automatic.s_bar()) > 1.0);
  CHECK(automatic.c_theta_found());
  CHECK(automatic.c_theta() >= automatic.s_bar());
  CHECK_THROWS_AS(g.eval(-1.0), Error);
  CHECK_THROWS_MATCHES(OrliczGauge::subexp(1, 1.0).eval(1e4), Error,
                       Catch::Matchers::Predicate<Error>([](const Error& err) {
                         return err.code() == ErrorCode::Overflow;
                       }));
}

TEST_CASE("gauge derivative identity") {
  for (int k : {1, 2})
    for (double beta : {0.0, 0.5, 1.0}) {
      const OrliczGauge g = OrliczGauge::subexp(k, beta);
      for (int i = 0; i <= 40; ++i) {
        const double s = g.s_bar() * 1.001 * std::pow(10.0, 8.0 * i / 40.0);
        const double h = 1e-5 * s;
        // Central difference of log Theta, compared with Theta'/Theta.
        const double fd = (g.log_eval(s + h) - g.log_eval(s - h)) / (2.0 * h);
        INFO("k=" << k << " beta=" << beta << " s=" << s);
        CHECK(oracle::rel_err(fd, g.log_derivative(s)) <= 1e-6);
      }
    }
  const OrliczGauge g = OrliczGauge::subexp(1, 1.0, 3.0);
  for (double s : {4.0, 10.0, 50.0}) {
    const double h = 1e-6 * s;
    const double fd = (g.eval(s + h) - g.eval(s - h)) / (2.0 * h);
    CHECK(oracle::rel_err(fd, g.deriv(s)) <= 1e-6);
  }
}

TEST_CASE("gauge inverse round trip") {
  std::vector<OrliczGauge> gauges{OrliczGauge::exponential(), OrliczGauge::exponential(2.5), OrliczGauge::power(2.0)};
  for (int k : {1, 2})
    for (double beta : {0.0, 0.5, 1.0, 1.5}) gauges.push_back(OrliczGauge::subexp(k, beta));
  for (const auto& g : gauges) {
    REQUIRE(g.c_theta_found());
    const double base = g.log_eval(g.c_theta());
    for (int i = 0; i <= 48; ++i) {
      const double log_u = base + std::log(10.0) * 12.0 * i / 48.0;
      const double s = g.inverse_log(log_u);
      INFO(g.describe() << " log u = " << log_u);
      // |Theta(Theta^{-1}(u)) - u| / u, through logarithms.
      CHECK(std::abs(std::expm1(g.log_eval(s) - log_u)) <= 1e-10);
    }
    CHECK(g.inverse_log(base) == g.c_theta());
    CHECK_THROWS_MATCHES(g.inverse_log(base - 1.0), Error, Catch::Matchers::Predicate<Error>([](const Error& err) {
                           return err.code() == ErrorCode::InverseDomain;
                         }));
  }
  const OrliczGauge ex = OrliczGauge::exponential();
  CHECK(ex.inverse(std::exp(7.5)) == Approx(7.5).epsilon(1e-13));
}

TEST_CASE("C_Theta search") {
  // exp(s1) exp(s2) <= exp(C s1 s2) on [C, inf)^2 first holds at C = 2 among powers of two.
  CHECK(OrliczGauge::exponential().c_theta() == 2.0);
  CHECK(OrliczGauge::power(2.0).c_theta() == 1.0);
  for (int k : {1, 2})
    for (double beta : {0.0, 0.5, 1.0}) {
      const OrliczGauge g = OrliczGauge::subexp(k, beta);
      INFO(g.describe());
      CHECK(g.c_theta_found());
      CHECK(submultiplicative_on_grid(g, g.c_theta()));
    }
  // An oscillating gauge is not increasing, so no C qualifies.
  const OrliczGauge bad = OrliczGauge::custom([](double s) { return 2.0 + std::sin(s); },
                                              [](double s) { return std::cos(s); }, "oscillating");
  CHECK_FALSE(bad.c_theta_found());
  CHECK(std::isnan(bad.c_theta()));
  CHECK_THROWS_AS(bad.inverse(10.0), Error);
}

TEST_CASE("validate_gauge verdicts") {
  const GaugeVerdict ex = validate_gauge(OrliczGauge::subexp(1, 0.0), 2.0);
  CHECK(ex.convexity_power_ok);
  CHECK(ex.submultiplicative_ok);
  CHECK(ex.osgood.verdict == OsgoodVerdict::Diverging);
  // Integrand 1/s in y = log s is the constant 1: partial sums grow like log S.
  const double y0 = std::log(OrliczGauge::subexp(1, 0.0).s_bar());
  for (const auto& [Y, I] : ex.osgood.partial_sums) CHECK(I == Approx(Y - y0).epsilon(1e-9));

  const GaugeVerdict sq = validate_gauge(OrliczGauge::power(2.0), 2.0);
  CHECK(sq.convexity_power_ok);
  CHECK(sq.submultiplicative_ok);
  CHECK(sq.osgood.verdict == OsgoodVerdict::Converging);
  // int_1^S 2/s^2 ds = 2 (1 - 1/S).
  for (const auto& [S, I] : sq.osgood.partial_sums) CHECK(I == Approx(2.0 * (1.0 - 1.0 / S)).epsilon(1e-9));

  for (double beta : {0.5, 1.0, 1.5}) {
    const GaugeVerdict v = validate_gauge(OrliczGauge::subexp(1, beta), 2.0);
    INFO("beta=" << beta << ": " << v.details);
    CHECK(v.osgood.verdict == (beta <= 1.0 ? OsgoodVerdict::Diverging : OsgoodVerdict::Converging));
    CHECK(v.convexity_power_ok);
    CHECK(v.submultiplicative_ok);
  }
  for (int k : {1, 2})
    for (double beta : {0.0, 0.5, 1.0, 1.5}) {
      const GaugeVerdict v = validate_gauge(OrliczGauge::subexp(k, beta), 2.0);
      INFO("k=" << k << " beta=" << beta << ": " << v.details);
      CHECK(v.osgood.verdict == (beta <= 1.0 ? OsgoodVerdict::Diverging : OsgoodVerdict::Converging));
    }

  // For n = 2 and alpha = 1.5, s^2 raised to 1/3 is concave.
  const GaugeVerdict sq2 = validate_gauge(OrliczGauge::power(2.0), 1.5, default_ladder(), 2);
  CHECK_FALSE(sq2.convexity_power_ok);
  const GaugeVerdict ex2 = validate_gauge(OrliczGauge::exponential(), 1.5, default_ladder(), 2);
  CHECK(ex2.convexity_power_ok);
  CHECK_THROWS_AS(validate_gauge(OrliczGauge::exponential(), 2.5, default_ladder(), 2), Error);
  CHECK_THROWS_AS(validate_gauge(OrliczGauge::exponential(), 2.0, {1e3, 1e6, 1e9}), Error);
}

TEST_CASE("osgood_study protocol") {
  // Constant zero integrand: flat partial sums converge.
  const OsgoodStudy flat = osgood_study([](double) { return 0.0; }, 1.0, default_ladder(), 0);
  CHECK(flat.verdict == OsgoodVerdict::Converging);
  // Sign changes are not monotone growth.
  const OsgoodStudy wobble = osgood_study([](double y) { return y < 2e6 ? 1.0 / y : -1.0 / y; }, 1.0,
                                          default_ladder(), 0);
  CHECK(wobble.verdict == OsgoodVerdict::Inconclusive);
  // y^{-1.1} converges, but its tail beyond 1e12 is still about 0.63.
  const OsgoodStudy slow = osgood_study([](double y) { return std::pow(y, -1.1); }, 1.0, default_ladder(), 0);
  CHECK(slow.verdict == OsgoodVerdict::Inconclusive);
}

TEST_CASE("modulus_omega") {
  const OrliczGauge g = OrliczGauge::exponential();
  for (double d : {1e-1, 1e-3, 1e-8, 1.0, 3.0}) {
    const double expected = d * std::max(2.0, 2.0 * std::log(1.0 / d));
    CHECK(modulus_omega(g, 2.0, d) == Approx(expected).epsilon(1e-12));
  }
  CHECK(modulus_omega(g, 2.0, 1.0) == g.c_theta());
  for (int i = 0; i <= 30; ++i) {
    const double d = std::pow(10.0, -8.0 + 6.0 * i / 30.0);
    const double ratio = modulus_omega(g, 2.0, d) / (d * std::log(1.0 / d));
    CHECK(ratio >= 0.25);
    CHECK(ratio <= 4.0);
  }
  // Monotone for small delta.
  double prev = 0.0;
  for (int i = 0; i <= 40; ++i) {
    const double d = std::pow(10.0, -12.0 + 11.0 * i / 40.0);
    const double w = modulus_omega(g, 2.0, d);
    CHECK(w > prev);
    prev = w;
  }
  CHECK_THROWS_AS(modulus_omega(g, 1.0, 0.1), Error);
  CHECK_THROWS_AS(modulus_omega(g, 2.0, 0.0), Error);

  // int d delta / (2 delta log(1/delta)) from e^{-Y} to 0.1 equals (1/2) log(Y / log 10).
  const OsgoodStudy os = modulus_osgood_study(g, 2.0, 0.1);
  CHECK(os.verdict == OsgoodVerdict::Diverging);
  for (const auto& [Y, I] : os.partial_sums) CHECK(I == Approx(0.5 * std::log(Y / std::log(10.0))).epsilon(1e-8));
  // A power gauge gives omega(delta) of order delta^{1/2}, whose reciprocal is integrable.
  const OsgoodStudy pw = modulus_osgood_study(OrliczGauge::power(2.0), 2.0, 0.1);
  CHECK(pw.verdict == OsgoodVerdict::Converging);
}

TEST_CASE("summability_integral") {
  const OrliczGauge ex = OrliczGauge::exponential();
  const auto c = make_example("constant", drift({0.7})).base;
  const SummabilityResult u = summability_integral(c, ex, 1.0, Box::interval(0.0, 2.0), {0.0, 3.0});
  CHECK(u.status == QuadStatus::Converged);
  CHECK(u.value == Approx(6.0).epsilon(1e-12));

  // Same integral through the space-time path.
  FieldTraits traits = c.traits();
  traits.autonomous = false;
  const SummabilityResult u2 = summability_integral(c.with_traits(traits), ex, 1.0, Box::interval(0.0, 2.0), {0.0, 3.0});
  CHECK(u2.value == Approx(6.0).epsilon(1e-12));

  // dist(x, {0, 2})^{-1/2} integrates to 4 over (0, 2).
  const SummabilityResult d =
      summability_integral(c, ex, 1.0, Box::interval(0.0, 2.0), {0.0, 1.0}, SummabilityWeight::distance_power(-0.5));
  CHECK(d.value == Approx(4.0).epsilon(1e-7));

  // Unit drift on [0,1] over the window [0,1]: l(s,x) = 1 - |s - x|, and the double integral of l is 2/3.
  const auto unit = make_example("constant", drift({1.0})).base;
  const SummabilityResult m = summability_integral(unit, ex, 1.0, Box::interval(0.0, 1.0), {0.0, 1.0},
                                                   SummabilityWeight::maximal_interval_power(1.0));
  CHECK(m.value == Approx(2.0 / 3.0).epsilon(1e-6));

  // Loglinear with Theta = exp: exp(c |log x|) is x^{-c} on (0,1) and x^{c} on (1,e).
  const auto ll = make_example("loglinear").base;
  for (double cc : {0.3, 0.5, 0.9}) {
    const SummabilityResult r = summability_integral(ll, ex, cc, Box::interval(0.0, e), {0.0, 1.0});
    const double expected = 1.0 / (1.0 - cc) + (std::exp(1.0 + cc) - 1.0) / (1.0 + cc);
    INFO("c=" << cc);
    CHECK(r.status == QuadStatus::Converged);
    CHECK(oracle::rel_err(r.value, expected) <= 1e-6);
  }
  for (double cc : {1.0, 1.5}) {
    const SummabilityResult r = summability_integral(ll, ex, cc, Box::interval(0.0, e), {0.0, 1.0});
    INFO("c=" << cc);
    CHECK(r.divergent());
    CHECK_THROWS_MATCHES(r.value_or_throw(), Error, Catch::Matchers::Predicate<Error>([](const Error& err) {
                           return err.code() == ErrorCode::DivergentIntegral;
                         }));
  }
  const SummabilityResult psi = summability_profile(ll, ex, 0.5, Box::interval(0.0, e), 0.25);
  CHECK(oracle::rel_err(psi.value, 2.0 + (std::exp(1.5) - 1.0) / 1.5) <= 1e-6);

  CHECK_THROWS_AS(summability_integral(ll, ex, 0.0, Box::interval(0.0, e), {0.0, 1.0}), Error);
  CHECK_THROWS_AS(summability_integral(ll, ex, 0.5, Box::interval(0.0, 1e300 * 1e300), {0.0, 1.0}), Error);
}

TEST_CASE("lambda_p") {
  // b = 0 on a box of measure 2 with ell = 0.5: V ell ell^{n/(n-p)}.
  const auto zero = make_example("constant").base;
  const LambdaResult z = lambda_p(zero, 3.0, Box::interval(0.0, 2.0), {0.0, 0.5}, LambdaMode::Geometric);
  CHECK(z.sup_b == 0.0);
  CHECK(z.value == Approx(2.0 * 0.5 * std::pow(0.5, -0.5)).epsilon(1e-12));

  const auto ll = make_example("loglinear").base;
  const Box omega = Box::interval(-1.0, 3.0);
  const double ell = 0.05;
  const LambdaResult r = lambda_p(ll, 3.0, omega, {-ell / 2, ell / 2}, LambdaMode::Geometric);
  CHECK(r.status == QuadStatus::Converged);
  CHECK(r.sup_b == Approx(1.0).epsilon(1e-9));
  // Oracle: graded composite Simpson of ell max(ell^{-1/2}, dist^{-1/2}) exp(4.5 ell |log x| 1_{(0,e)}).
  auto integrand = [&](double x) {
    const double dist = std::min(x + 1.0, 3.0 - x);
    const double db = (x > 0.0 && x < e) ? std::abs(std::log(x)) : 0.0;
    return ell * std::max(std::pow(ell, -0.5), std::pow(dist, -0.5)) * std::exp(4.5 * ell * db);
  };
  auto oracle_value = [&](int panels) {
    return graded(integrand, -1.0, -0.95, 2.0, panels) + oracle::gauss3(integrand, -0.95, 0.0, panels) +
           graded(integrand, 0.0, 1.0, 4.0, panels) + oracle::gauss3(integrand, 1.0, e, panels) +
           oracle::gauss3(integrand, e, 2.95, panels) + graded_right(integrand, 2.95, 3.0, 2.0, panels);
  };
  const double o1 = oracle_value(20000), o2 = oracle_value(40000);
  REQUIRE(oracle::rel_err(o1, o2) <= 1e-7);
  CHECK(oracle::rel_err(r.value, o2) <= 1e-6);

  // No curve leaves (-1, 3), so l(s,x) = ell and Lambda'_p is the unweighted integral, below Lambda_p.
  const LambdaResult rp = lambda_p(ll, 3.0, omega, {-ell / 2, ell / 2}, LambdaMode::MaximalInterval);
  auto plain = [&](double x) {
    const double db = (x > 0.0 && x < e) ? std::abs(std::log(x)) : 0.0;
    return ell * std::exp(4.5 * ell * db);
  };
  const double po = oracle::gauss3(plain, -1.0, 0.0, 2000) + graded(plain, 0.0, 1.0, 4.0, 40000) +
                    oracle::gauss3(plain, 1.0, e, 2000) + oracle::gauss3(plain, e, 3.0, 2000);
  CHECK(oracle::rel_err(rp.value, po) <= 1e-6);
  CHECK(rp.value <= r.value);

  // ell p^2/(p-1) >= 9/8 > 1 once ell >= 1/4: the weight is not integrable at 0.
  for (double big : {0.25, 0.3}) {
    const LambdaResult d = lambda_p(ll, 3.0, omega, {-big / 2, big / 2}, LambdaMode::Geometric);
    INFO("ell=" << big);
    CHECK(d.divergent());
  }

  CHECK_THROWS_AS(lambda_p(ll, 2.0, omega, {0.0, 0.1}, LambdaMode::Geometric), Error);
  CHECK_NOTHROW(lambda_p(zero, 1.5, Box::interval(0.0, 1.0), {0.0, 0.1}, LambdaMode::MaximalInterval));
  CHECK_THROWS_AS(lambda_p(ll, 1.0, omega, {0.0, 0.1}, LambdaMode::MaximalInterval), Error);
}

TEST_CASE("luxemburg_norm") {
  std::vector<WeightedSample> samples;
  for (int i = 0; i < 100; ++i) samples.push_back({std::abs(std::sin(0.3 * i)) * 2.0, 0.01});
  for (double p : {1.0, 2.0, 3.5}) {
    double acc = 0.0;
    for (const auto& s : samples) acc += s.weight * std::pow(s.value, p);
    const double lp = std::pow(acc, 1.0 / p);
    CHECK(luxemburg_norm(samples, [p](double t) { return std::pow(t, p); }) == Approx(lp).epsilon(1e-10));
  }
  const auto expm1 = [](double t) { return std::expm1(t); };
  CHECK(luxemburg_norm({{1.0, 1.0}}, expm1) == Approx(1.0 / std::log(2.0)).epsilon(1e-10));
  CHECK(luxemburg_norm({{1.0, 1.0}}, expm1) == Approx(1.442695).epsilon(1e-6));
  CHECK(luxemburg_norm({{0.0, 1.0}, {0.0, 2.0}}, expm1) == 0.0);

  const double base = luxemburg_norm(samples, expm1);
  for (double c : {0.1, 3.0, 250.0}) {
    std::vector<WeightedSample> scaled = samples;
    for (auto& s : scaled) s.value *= c;
    CHECK(luxemburg_norm(scaled, expm1) == Approx(c * base).epsilon(1e-10));
  }
  CHECK_THROWS_MATCHES(luxemburg_norm({{1.0, 1.0}}, expm1, 1e-3), Error,
                       Catch::Matchers::Predicate<Error>([](const Error& err) {
                         return err.code() == ErrorCode::NoFiniteNorm;
                       }));
  CHECK_THROWS_AS(luxemburg_norm({{-1.0, 1.0}}, expm1), Error);
}
