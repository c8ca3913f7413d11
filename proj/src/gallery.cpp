#include "roughflow/gallery.hpp"

#include <cmath>
#include <limits>
#include <numbers>

#include "roughflow/error.hpp"

namespace roughflow {

namespace {

constexpr double kE = std::numbers::e;
const double kInf = std::numeric_limits<double>::infinity();

Mat scalar_mat(double v) {
  Mat m(1, 1);
  m(0, 0) = v;
  return m;
}

Vec scalar_vec(double v) {
  Vec x(1);
  x(0) = v;
  return x;
}

FieldTraits autonomous_traits(std::string label, std::vector<std::vector<double>> singular = {},
                              std::vector<std::vector<double>> jumps = {}) {
  FieldTraits traits;
  traits.label = std::move(label);
  traits.singular_coords = std::move(singular);
  traits.jacobian_jumps = std::move(jumps);
  traits.autonomous = true;
  return traits;
}

ExampleField make_loglinear() {
  auto b = [](double, const Vec& x) {
    const double v = x(0);
    return scalar_vec(v > 0.0 && v < kE ? v * (1.0 - std::log(v)) : 0.0);
  };
  auto db = [](double, const Vec& x) {
    const double v = x(0);
    if (v == 0.0) return scalar_mat(kInf);
    return scalar_mat(v > 0.0 && v < kE ? -std::log(v) : 0.0);
  };
  ExampleField ex{"loglinear",
                  VectorField(1, {}, Box::unbounded(1), b, db, JacobianMode::analytic(),
                              autonomous_traits("loglinear", {{0.0}}, {{kE}})),
                  {}, {}, {}};
  ex.closed_flow = [](double t, double s, const Vec& x) {
    const double v = x(0);
    if (v <= 0.0 || v >= kE || t == s) return x;
    const double k = std::exp(s - t);
    return scalar_vec(kE * std::pow(v / kE, k));
  };
  ex.closed_flow_derivative = [](double t, double s, const Vec& x) {
    const double v = x(0);
    if (v <= 0.0 || v >= kE) return scalar_mat(1.0);
    const double k = std::exp(s - t);
    return scalar_mat(k * std::pow(v / kE, k - 1.0));
  };
  ex.metadata.sharp_sobolev_exponent = [](double t, double s) -> std::optional<double> {
    if (s < t) return 1.0 / (1.0 - std::exp(s - t));
    return kInf;
  };
  ex.metadata.notes = "b(x) = x log(e/x) on (0,e); flow e(x/e)^k with k = exp(s-t)";
  return ex;
}

ExampleField make_sublog(double alpha, double beta) {
  if (!(alpha >= 1.0) || !std::isfinite(alpha)) fail(ErrorCode::InvalidParam, "sublog requires alpha >= 1");
  if (!(beta > 0.0) || !std::isfinite(beta)) fail(ErrorCode::InvalidParam, "sublog requires beta > 0");
  const double edge = std::exp(-kE);
  auto b = [alpha, beta, edge](double, const Vec& x) {
    const double v = x(0);
    if (!(v > 0.0 && v < edge)) return scalar_vec(0.0);
    const double L = -std::log(v);
    return scalar_vec(beta * v * L * std::pow(std::log(L) - 1.0, alpha));
  };
  auto db = [alpha, beta, edge](double, const Vec& x) {
    const double v = x(0);
    if (v == 0.0) return scalar_mat(kInf);
    if (!(v > 0.0 && v < edge)) return scalar_mat(0.0);
    // b = beta x g(L) with L = log(1/x) and g(L) = L (log L - 1)^alpha, so b' = beta (g - g').
    const double L = -std::log(v);
    const double u = std::log(L) - 1.0;
    const double g = L * std::pow(u, alpha);
    const double dg = std::pow(u, alpha) + alpha * std::pow(u, alpha - 1.0);
    return scalar_mat(beta * (g - dg));
  };
  ExampleField ex{"sublog",
                  VectorField(1, {}, Box::unbounded(1), b, db, JacobianMode::analytic(),
                              autonomous_traits("sublog", {{0.0}}, {{edge}})),
                  {}, {}, {}};
  ex.metadata.wellposed = alpha == 1.0;
  if (alpha == 1.0) {
    ex.closed_flow = [beta, edge](double t, double s, const Vec& x) {
      const double v = x(0);
      if (v <= 0.0 || v >= edge || t == s) return x;
      const double k = std::exp(beta * (s - t));
      const double L = -std::log(v);
      return scalar_vec(std::exp(-kE * std::pow(L / kE, k)));
    };
    ex.closed_flow_derivative = [beta, edge](double t, double s, const Vec& x) {
      const double v = x(0);
      if (v <= 0.0 || v >= edge) return scalar_mat(1.0);
      const double k = std::exp(beta * (s - t));
      const double L = -std::log(v);
      const double X = std::exp(-kE * std::pow(L / kE, k));
      return scalar_mat(X * k * std::pow(L / kE, k - 1.0) / v);
    };
    ex.metadata.sharp_sobolev_exponent = [](double t, double s) -> std::optional<double> {
      if (s < t) return 1.0;
      return kInf;
    };
    ex.metadata.notes = "flow in W^{1,1} only for t > s; not Hoelder continuous at 0";
  } else {
    ex.metadata.sharp_sobolev_exponent = [](double, double) -> std::optional<double> { return std::nullopt; };
    ex.metadata.notes = "not well-posed: 0 and gamma2 both solve the ODE from x = 0";
  }
  return ex;
}

// Leaf parameter sigma of the parabola a(sigma) t^2 + sigma through x.
double cantor_leaf(double t, double x, int level) {
  const double t2 = t * t;
  if (x <= 0.0) return x;
  if (x >= 1.0 + t2) return x - t2;
  double lo = 0.0, hi = 1.0;
  for (int i = 0; i < 80 && hi - lo > 0.0; ++i) {
    const double mid = 0.5 * (lo + hi);
    if (mid == lo || mid == hi) break;
    if (cantor_staircase(mid, level) * t2 + mid < x)
      lo = mid;
    else
      hi = mid;
  }
  return 0.5 * (lo + hi);
}

double cantor_a(double s, int level) {
  if (s <= 0.0) return 0.0;
  if (s >= 1.0) return 1.0;
  return cantor_staircase(s, level);
}

double cantor_a_slope(double s, int level) {
  if (s <= 0.0 || s >= 1.0) return 0.0;
  return cantor_staircase_slope(s, level);
}

ExampleField make_cantor(int level) {
  if (level < 1 || level > 40) fail(ErrorCode::InvalidParam, "cantor level must lie in [1, 40]");
  auto b = [level](double t, const Vec& x) {
    const double sigma = cantor_leaf(t, x(0), level);
    return scalar_vec(2.0 * t * cantor_a(sigma, level));
  };
  auto db = [level](double t, const Vec& x) {
    const double sigma = cantor_leaf(t, x(0), level);
    const double slope = cantor_a_slope(sigma, level);
    return scalar_mat(2.0 * t * slope / (1.0 + slope * t * t));
  };
  FieldTraits traits;
  traits.label = "cantor";
  ExampleField ex{"cantor", VectorField(1, {}, Box::unbounded(1), b, db, JacobianMode::analytic(), traits),
                  {}, {}, {}};
  ex.closed_flow = [level](double t, double s, const Vec& x) {
    if (t == s) return x;
    const double sigma = cantor_leaf(s, x(0), level);
    return scalar_vec(cantor_a(sigma, level) * t * t + sigma);
  };
  ex.closed_flow_derivative = [level](double t, double s, const Vec& x) {
    const double sigma = cantor_leaf(s, x(0), level);
    const double slope = cantor_a_slope(sigma, level);
    return scalar_mat((1.0 + slope * t * t) / (1.0 + slope * s * s));
  };
  ex.metadata.sharp_sobolev_exponent = [](double, double) -> std::optional<double> { return std::nullopt; };
  ex.metadata.notes =
      "integral curves x = a_N(s) t^2 + s; planar form (1, b(t,x)); exposed as the 1D non-autonomous b(t,x)";
  return ex;
}

ExampleField make_rotation() {
  auto b = [](double, const Vec& x) { return make_vec({-x(1), x(0)}); };
  auto db = [](double, const Vec&) {
    Mat m(2, 2);
    m << 0.0, -1.0, 1.0, 0.0;
    return m;
  };
  ExampleField ex{"rotation",
                  VectorField(2, {}, Box::unbounded(2), b, db, JacobianMode::analytic(), autonomous_traits("rotation")),
                  {}, {}, {}};
  auto rot = [](double angle) {
    Mat m(2, 2);
    m << std::cos(angle), -std::sin(angle), std::sin(angle), std::cos(angle);
    return m;
  };
  ex.closed_flow = [rot](double t, double s, const Vec& x) -> Vec { return t == s ? x : Vec(rot(t - s) * x); };
  ex.closed_flow_derivative = [rot](double t, double s, const Vec&) -> Mat { return rot(t - s); };
  ex.metadata.sharp_sobolev_exponent = [](double, double) -> std::optional<double> { return kInf; };
  ex.metadata.notes = "rigid rotation, divergence free";
  return ex;
}

ExampleField make_linear(double lambda, int dim) {
  if (!std::isfinite(lambda)) fail(ErrorCode::InvalidParam, "linear rate must be finite");
  if (dim < 1 || dim > kMaxDim) fail(ErrorCode::InvalidParam, "linear dimension out of range");
  auto b = [lambda](double, const Vec& x) -> Vec { return lambda * x; };
  auto db = [lambda, dim](double, const Vec&) -> Mat { return lambda * Mat::Identity(dim, dim); };
  ExampleField ex{"linear",
                  VectorField(dim, {}, Box::unbounded(dim), b, db, JacobianMode::analytic(), autonomous_traits("linear")),
                  {}, {}, {}};
  ex.closed_flow = [lambda](double t, double s, const Vec& x) -> Vec { return std::exp(lambda * (t - s)) * x; };
  ex.closed_flow_derivative = [lambda, dim](double t, double s, const Vec&) -> Mat {
    return std::exp(lambda * (t - s)) * Mat::Identity(dim, dim);
  };
  ex.metadata.sharp_sobolev_exponent = [](double, double) -> std::optional<double> { return kInf; };
  ex.metadata.notes = "b(x) = lambda x";
  return ex;
}

ExampleField make_constant(const std::vector<double>& drift) {
  std::vector<double> c = drift.empty() ? std::vector<double>{0.0} : drift;
  const int dim = static_cast<int>(c.size());
  if (dim > kMaxDim) fail(ErrorCode::InvalidParam, "constant field dimension out of range");
  Vec cv(dim);
  for (int i = 0; i < dim; ++i) {
    if (!std::isfinite(c[i])) fail(ErrorCode::InvalidParam, "drift must be finite");
    cv(i) = c[i];
  }
  auto b = [cv](double, const Vec&) { return cv; };
  auto db = [dim](double, const Vec&) -> Mat { return Mat::Zero(dim, dim); };
  ExampleField ex{"constant",
                  VectorField(dim, {}, Box::unbounded(dim), b, db, JacobianMode::analytic(), autonomous_traits("constant")),
                  {}, {}, {}};
  ex.closed_flow = [cv](double t, double s, const Vec& x) -> Vec { return x + (t - s) * cv; };
  ex.closed_flow_derivative = [dim](double, double, const Vec&) -> Mat { return Mat::Identity(dim, dim); };
  ex.metadata.sharp_sobolev_exponent = [](double, double) -> std::optional<double> { return kInf; };
  ex.metadata.notes = "constant drift";
  return ex;
}

}  // namespace

std::vector<std::string> example_names() {
  return {"loglinear", "sublog", "cantor", "rotation", "linear", "constant"};
}

ExampleField make_example(const std::string& name, const ExampleParams& params) {
  if (name == "loglinear") return make_loglinear();
  if (name == "sublog") return make_sublog(params.alpha, params.beta);
  if (name == "cantor") return make_cantor(params.level);
  if (name == "rotation") return make_rotation();
  if (name == "linear") return make_linear(params.lambda, params.dim);
  if (name == "constant") return make_constant(params.drift);
  fail(ErrorCode::UnknownExample, "unknown example '" + name + "'");
}

double cantor_staircase(double s, int level) {
  if (level < 1) fail(ErrorCode::InvalidParam, "cantor level must be >= 1");
  if (!(s >= 0.0 && s <= 1.0)) fail(ErrorCode::OutOfRange, "cantor_staircase argument outside [0,1]");
  double value = 0.0;
  double scale = 1.0;
  for (int depth = 0; depth < level; ++depth) {
    if (s <= 1.0 / 3.0) {
      s = 3.0 * s;
    } else if (s < 2.0 / 3.0) {
      return value + 0.5 * scale;
    } else {
      value += 0.5 * scale;
      s = 3.0 * s - 2.0;
    }
    scale *= 0.5;
  }
  return value + scale * s;
}

double cantor_staircase_slope(double s, int level) {
  if (level < 1) fail(ErrorCode::InvalidParam, "cantor level must be >= 1");
  if (!(s >= 0.0 && s <= 1.0)) fail(ErrorCode::OutOfRange, "cantor_staircase argument outside [0,1]");
  for (int depth = 0; depth < level; ++depth) {
    if (s <= 1.0 / 3.0)
      s = 3.0 * s;
    else if (s < 2.0 / 3.0)
      return 0.0;
    else
      s = 3.0 * s - 2.0;
  }
  return std::pow(1.5, level);
}

std::pair<ScalarPath, ScalarPath> nonuniqueness_pair(double alpha) {
  if (!(alpha > 1.0) || !std::isfinite(alpha)) fail(ErrorCode::InvalidParam, "non-uniqueness needs alpha > 1");
  ScalarPath gamma1 = [](double) { return 0.0; };
  ScalarPath gamma2 = [alpha](double t) {
    if (t <= 0.0) return 0.0;
    // log log(1/gamma) - 1 = u solves u' = -u^alpha with u(0+) = +inf.
    const double u = std::pow((alpha - 1.0) * t, -1.0 / (alpha - 1.0));
    return std::exp(-std::exp(1.0 + u));
  };
  return {gamma1, gamma2};
}

double ode_residual(const VectorField& field, const ScalarPath& gamma, double t) {
  if (field.dim() != 1) fail(ErrorCode::InvalidParam, "ode_residual expects a scalar field");
  const double h = 1e-6 * std::max(1.0, std::abs(t));
  const double derivative = (gamma(t + h) - gamma(t - h)) / (2.0 * h);
  return std::abs(derivative - field.eval(t, scalar_vec(gamma(t)))(0));
}

}  // namespace roughflow
