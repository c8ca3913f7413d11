#include "roughflow/orlicz.hpp"

#include <algorithm>
#include <boost/math/tools/roots.hpp>
#include <cmath>
#include <limits>
#include <numbers>
#include <sstream>

#include "roughflow/error.hpp"
#include "roughflow/flow.hpp"
#include "roughflow/parallel.hpp"

namespace roughflow {

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();
const double kMaxLog = std::log(std::numeric_limits<double>::max());

void require_k(int k) {
  if (k < 1) fail(ErrorCode::InvalidParam, "iterated functions need k >= 1");
}

std::vector<double> log_grid(double lo, double hi, int points) {
  std::vector<double> g(points);
  const double a = std::log(lo), b = std::log(hi);
  for (int i = 0; i < points; ++i) g[i] = std::exp(a + (b - a) * i / (points - 1));
  return g;
}

// Midpoint convexity of Theta^gamma at s with step 1e-3 s, evaluated in log space.
bool convex_at(const OrliczGauge& g, double gamma, double s) {
  const double h = 1e-3 * s;
  const double mid = g.log_eval(s);
  const double a = gamma * (g.log_eval(s - h) - mid);
  const double b = gamma * (g.log_eval(s + h) - mid);
  const double ea = std::exp(a), eb = std::exp(b);
  return ea + eb - 2.0 >= -1e-9 * (ea + eb);
}

bool increasing_convex(const OrliczGauge& g, double lo, double hi) {
  for (double s : log_grid(lo, hi, 60)) {
    if (!(g.log_derivative(s) > 0.0)) return false;
    if (!convex_at(g, 1.0, s)) return false;
  }
  return true;
}

}  // namespace

double iterated_exp(int k, double s) {
  require_k(k);
  double v = s;
  for (int j = 0; j < k; ++j) {
    if (v > kMaxLog) fail(ErrorCode::Overflow, "E_" + std::to_string(k) + " exceeds the double range");
    v = std::exp(v);
  }
  return v;
}

double iterated_log_threshold(int k) {
  require_k(k);
  return k == 1 ? 0.0 : iterated_exp(k - 1, 0.0);
}

double iterated_log(int k, double s) {
  if (!(s > iterated_log_threshold(k)))
    fail(ErrorCode::OutOfDomain, "L_" + std::to_string(k) + " needs s > E_" + std::to_string(k - 1) + "(0)");
  double v = s;
  for (int j = 0; j < k; ++j) v = std::log(v);
  return v;
}

double iterated_log_product(int k, double s) {
  if (k == 0) return 1.0;
  if (!(s > iterated_log_threshold(k))) fail(ErrorCode::OutOfDomain, "P_" + std::to_string(k) + " outside domain");
  double v = s, prod = 1.0;
  for (int j = 0; j < k; ++j) {
    v = std::log(v);
    prod *= v;
  }
  return prod;
}

const char* to_string(GaugeFamily family) {
  switch (family) {
    case GaugeFamily::Subexp: return "subexp";
    case GaugeFamily::Exponential: return "exponential";
    case GaugeFamily::Power: return "power";
    case GaugeFamily::Custom: return "custom";
  }
  return "unknown";
}

const char* to_string(OsgoodVerdict verdict) {
  switch (verdict) {
    case OsgoodVerdict::Diverging: return "diverging";
    case OsgoodVerdict::Converging: return "converging";
    case OsgoodVerdict::Inconclusive: return "inconclusive";
  }
  return "unknown";
}

OrliczGauge OrliczGauge::subexp(int k, double beta, std::optional<double> s_bar) {
  require_k(k);
  if (!(beta >= 0.0) || !std::isfinite(beta)) fail(ErrorCode::InvalidParam, "subexp gauge needs beta >= 0");
  OrliczGauge g;
  g.family_ = GaugeFamily::Subexp;
  g.k_ = k;
  g.beta_ = beta;
  std::ostringstream label;
  label << "subexp(k=" << k << ", beta=" << beta << ")";
  g.label_ = label.str();
  const double anchor = iterated_exp(k, 1.0);
  if (s_bar) {
    if (!std::isfinite(*s_bar) || !(*s_bar > anchor))
      fail(ErrorCode::InvalidThreshold, "s_bar must satisfy L_k(s_bar) > 1, i.e. s_bar > E_k(1)");
    g.s_bar_ = *s_bar;
  } else {
    g.s_bar_ = kInf;
    for (int j = 1; j <= 60; ++j) {
      const double cand = std::ldexp(anchor, j);
      g.s_bar_ = cand;
      if (increasing_convex(g, cand, cand * 1e9)) break;
      g.s_bar_ = kInf;
    }
    if (!std::isfinite(g.s_bar_)) fail(ErrorCode::InvalidThreshold, "no admissible s_bar found for " + g.label_);
  }
  g.find_c_theta(60);
  return g;
}

OrliczGauge OrliczGauge::exponential(double beta) {
  if (!(beta > 0.0) || !std::isfinite(beta)) fail(ErrorCode::InvalidParam, "exponential gauge needs beta > 0");
  OrliczGauge g;
  g.family_ = GaugeFamily::Exponential;
  g.beta_ = beta;
  std::ostringstream label;
  label << "exponential(beta=" << beta << ")";
  g.label_ = label.str();
  g.find_c_theta(10);
  return g;
}

OrliczGauge OrliczGauge::power(double p) {
  if (!(p > 0.0) || !std::isfinite(p)) fail(ErrorCode::InvalidParam, "power gauge needs p > 0");
  OrliczGauge g;
  g.family_ = GaugeFamily::Power;
  g.p_ = p;
  std::ostringstream label;
  label << "power(p=" << p << ")";
  g.label_ = label.str();
  g.find_c_theta(10);
  return g;
}

OrliczGauge OrliczGauge::custom(std::function<double(double)> eval, std::function<double(double)> deriv,
                                std::string label) {
  if (!eval || !deriv) fail(ErrorCode::InvalidParam, "custom gauge needs both Theta and Theta'");
  OrliczGauge g;
  g.family_ = GaugeFamily::Custom;
  g.custom_eval_ = std::move(eval);
  g.custom_deriv_ = std::move(deriv);
  g.label_ = std::move(label);
  g.find_c_theta(10);
  return g;
}

void OrliczGauge::find_c_theta(int max_power) {
  for (int j = 0; j <= max_power; ++j) {
    const double c = std::ldexp(1.0, j);
    if (c < s_bar_) continue;
    if (submultiplicative_on_grid(*this, c)) {
      c_theta_ = c;
      c_theta_found_ = true;
      return;
    }
  }
  c_theta_ = std::numeric_limits<double>::quiet_NaN();
  c_theta_found_ = false;
}

double OrliczGauge::log_eval(double s) const {
  if (!(s >= 0.0)) fail(ErrorCode::InvalidArgument, "gauges are defined on [0, inf)");
  switch (family_) {
    case GaugeFamily::Subexp: {
      if (s == kInf) return kInf;
      const double x = std::max(s, s_bar_);
      double L = x, prod = 1.0;
      for (int j = 1; j < k_; ++j) {
        L = std::log(L);
        prod *= L;
      }
      L = std::log(L);
      return x / (prod * std::pow(L, beta_));
    }
    case GaugeFamily::Exponential: return beta_ * s;
    case GaugeFamily::Power: return p_ * std::log(s);
    case GaugeFamily::Custom: return std::log(custom_eval_(s));
  }
  return 0.0;
}

double OrliczGauge::eval(double s) const {
  const double l = log_eval(s);
  if (l > kMaxLog) fail(ErrorCode::Overflow, label_ + " exceeds the double range");
  return std::exp(l);
}

double OrliczGauge::log_derivative(double s) const {
  if (!(s >= 0.0)) fail(ErrorCode::InvalidArgument, "gauges are defined on [0, inf)");
  switch (family_) {
    case GaugeFamily::Subexp: {
      if (s < s_bar_) return 0.0;
      double L = s, P = 1.0, inv_sum = 0.0;
      for (int j = 1; j < k_; ++j) {
        L = std::log(L);
        P *= L;
        inv_sum += 1.0 / P;
      }
      const double Pkm1 = P;
      L = std::log(L);
      P *= L;
      return (1.0 - inv_sum - beta_ / P) / (Pkm1 * std::pow(L, beta_));
    }
    case GaugeFamily::Exponential: return beta_;
    case GaugeFamily::Power: return p_ / s;
    case GaugeFamily::Custom: return custom_deriv_(s) / custom_eval_(s);
  }
  return 0.0;
}

double OrliczGauge::deriv(double s) const {
  if (family_ == GaugeFamily::Custom) return custom_deriv_(s);
  const double h = log_derivative(s);
  if (h == 0.0) return 0.0;
  return eval(s) * h;
}

double OrliczGauge::inverse(double u) const {
  if (!(u > 0.0)) fail(ErrorCode::InverseDomain, "Theta^{-1} needs u > 0");
  return inverse_log(std::log(u));
}

double OrliczGauge::inverse_log(double log_u) const {
  if (c_theta_found_ && log_u == log_eval(c_theta_)) return c_theta_;
  const double s = std::exp(log_inverse(log_u));
  if (!std::isfinite(s)) fail(ErrorCode::InverseDomain, "Theta^{-1}(u) beyond the double range");
  return s;
}

double OrliczGauge::log_inverse(double log_u) const {
  if (!c_theta_found_) fail(ErrorCode::InverseDomain, "C_Theta unknown for " + label_);
  if (std::isnan(log_u)) fail(ErrorCode::InverseDomain, "Theta^{-1} of NaN");
  const double floor = log_eval(c_theta_);
  if (log_u < floor - 1e-12 * std::max(1.0, std::abs(floor)))
    fail(ErrorCode::InverseDomain, "Theta^{-1}(u) needs u >= Theta(C_Theta)");
  if (log_u <= floor) return std::log(c_theta_);
  if (!std::isfinite(log_u)) fail(ErrorCode::InverseDomain, "Theta^{-1} of an infinite value");
  if (family_ == GaugeFamily::Exponential) return std::log(log_u / beta_);
  if (family_ == GaugeFamily::Power) return log_u / p_;
  double lo = c_theta_, hi = 2.0 * c_theta_;
  while (log_eval(hi) < log_u) {
    lo = hi;
    hi *= 2.0;
    if (!std::isfinite(hi)) fail(ErrorCode::InverseDomain, "Theta^{-1}(u) beyond the double range");
  }
  auto f = [&](double s) { return log_eval(s) - log_u; };
  boost::math::tools::eps_tolerance<double> tol(std::numeric_limits<double>::digits - 2);
  std::uintmax_t iterations = 200;
  const auto r = boost::math::tools::bisect(f, lo, hi, tol, iterations);
  return std::log(0.5 * (r.first + r.second));
}

int OrliczGauge::osgood_depth() const { return family_ == GaugeFamily::Subexp ? k_ : 0; }

double OrliczGauge::osgood_start() const {
  return family_ == GaugeFamily::Subexp ? iterated_log(k_, s_bar_) : 1.0;
}

double OrliczGauge::osgood_density(double y) const {
  switch (family_) {
    case GaugeFamily::Subexp: {
      if (y < osgood_start()) return 0.0;
      // L_k = y, L_{k-1} = e^y, ...; overflowing logs make the corresponding 1/P_j vanish.
      std::vector<double> L(k_ + 1);
      L[k_] = y;
      for (int j = k_ - 1; j >= 1; --j) L[j] = L[j + 1] > kMaxLog ? kInf : std::exp(L[j + 1]);
      double P = 1.0, inv_sum = 0.0;
      for (int j = 1; j < k_; ++j) {
        P *= L[j];
        inv_sum += 1.0 / P;
      }
      P *= L[k_];
      return (1.0 - inv_sum - beta_ / P) / std::pow(y, beta_);
    }
    case GaugeFamily::Exponential: return beta_ / y;
    case GaugeFamily::Power: return p_ / (y * y);
    case GaugeFamily::Custom: return log_derivative(y) / y;
  }
  return 0.0;
}

std::string OrliczGauge::describe() const {
  std::ostringstream os;
  os << label_ << ", s_bar=" << s_bar_ << ", C_Theta=" << c_theta_;
  return os.str();
}

bool submultiplicative_on_grid(const OrliczGauge& g, double c) {
  const std::vector<double> grid = log_grid(c, c * 1e6, 25);
  double prev = -kInf;
  for (double s : grid) {
    const double l = g.log_eval(s);
    if (!(l > prev) || !(g.log_derivative(s) > 0.0)) return false;
    prev = l;
  }
  for (std::size_t i = 0; i < grid.size(); ++i)
    for (std::size_t j = i; j < grid.size(); ++j) {
      const double lhs = g.log_eval(grid[i]) + g.log_eval(grid[j]);
      const double rhs = g.log_eval(c * grid[i] * grid[j]);
      if (lhs > rhs + 1e-12 * std::max(1.0, std::abs(rhs))) return false;
    }
  return true;
}

std::vector<double> default_ladder() { return {1e3, 1e6, 1e9, 1e12}; }

OsgoodStudy osgood_study(const std::function<double(double)>& density, double y0, const std::vector<double>& ladder,
                         int depth, const OsgoodOptions& opt) {
  if (ladder.size() < 4) fail(ErrorCode::InvalidParam, "the Osgood ladder needs at least 4 points");
  for (std::size_t i = 0; i < ladder.size(); ++i) {
    if (!(ladder[i] > 0.0) || !std::isfinite(ladder[i])) fail(ErrorCode::InvalidParam, "ladder points must be positive");
    if (i > 0 && !(ladder[i] > ladder[i - 1])) fail(ErrorCode::InvalidParam, "ladder must be increasing");
  }
  if (!(y0 > 0.0)) fail(ErrorCode::InvalidParam, "Osgood integrals start at a positive coordinate");

  OsgoodStudy out;
  out.depth = depth;
  // Integral over [a, b] in u = log y, one adaptive Simpson run per decade.
  auto piece = [&](double a, double b, double& err) {
    double total = 0.0;
    if (!(b > a)) return total;
    const double ua = std::log(a), ub = std::log(b);
    const int chunks = std::max(1, static_cast<int>(std::ceil((ub - ua) / std::log(10.0))));
    auto g = [&](double u) {
      const double y = std::exp(u);
      return density(y) * y;
    };
    for (int c = 0; c < chunks; ++c) {
      const double lo = ua + (ub - ua) * c / chunks, hi = ua + (ub - ua) * (c + 1) / chunks;
      const double crude = (hi - lo) / 6.0 * (g(lo) + 4.0 * g(0.5 * (lo + hi)) + g(hi));
      const double tol = std::max(opt.rel_tol * std::abs(crude), 1e-300);
      const QuadResult r = adaptive_simpson(g, lo, hi, tol, 200000);
      total += r.value;
      err += r.error + 1e-15 * std::abs(r.value);
    }
    return total;
  };

  std::vector<double> increments, errors;
  double running = 0.0, err0 = 0.0;
  running = piece(y0, ladder[0], err0);
  out.quadrature_error = err0;
  out.partial_sums.emplace_back(ladder[0], running);
  for (std::size_t i = 0; i + 1 < ladder.size(); ++i) {
    double err = 0.0;
    const double inc = piece(std::max(y0, ladder[i]), ladder[i + 1], err);
    increments.push_back(inc);
    errors.push_back(err);
    out.quadrature_error += err;
    running += inc;
    out.partial_sums.emplace_back(ladder[i + 1], running);
  }

  const std::size_t m = increments.size();
  bool negative = false, all_zero = true, all_significant = true;
  for (std::size_t i = 0; i < m; ++i) {
    const double floor = 10.0 * errors[i] + 1e-300;
    if (increments[i] < -floor) negative = true;
    if (increments[i] > floor)
      all_zero = false;
    else
      all_significant = false;
  }
  if (negative) return out;
  if (all_zero) {
    out.verdict = OsgoodVerdict::Converging;
    out.fitted_rate = -kInf;
    return out;
  }
  // Least-squares exponent of the increment density per unit log Y.
  std::vector<double> xs, ys;
  for (std::size_t i = 0; i < m; ++i) {
    if (!(increments[i] > 0.0)) continue;
    const double span = std::log(ladder[i + 1]) - std::log(ladder[i]);
    xs.push_back(0.5 * (std::log(ladder[i]) + std::log(ladder[i + 1])));
    ys.push_back(std::log(increments[i] / span));
  }
  if (xs.size() < 2) {
    out.verdict = all_significant ? OsgoodVerdict::Inconclusive : OsgoodVerdict::Converging;
    return out;
  }
  double mx = 0.0, my = 0.0;
  for (std::size_t i = 0; i < xs.size(); ++i) {
    mx += xs[i];
    my += ys[i];
  }
  mx /= xs.size();
  my /= xs.size();
  double sxy = 0.0, sxx = 0.0;
  for (std::size_t i = 0; i < xs.size(); ++i) {
    sxy += (xs[i] - mx) * (ys[i] - my);
    sxx += (xs[i] - mx) * (xs[i] - mx);
  }
  const double sigma = sxy / sxx;
  out.fitted_rate = sigma;
  if (sigma >= opt.divergence_rate) {
    out.tail_estimate = kInf;
    if (all_significant) out.verdict = OsgoodVerdict::Diverging;
    return out;
  }
  const double end_density = std::exp(ys.back() + sigma * (std::log(ladder.back()) - xs.back()));
  out.tail_estimate = end_density / (-sigma);
  if (out.tail_estimate <= opt.tail_tolerance * std::max(1.0, std::abs(running)))
    out.verdict = OsgoodVerdict::Converging;
  return out;
}

GaugeVerdict validate_gauge(const OrliczGauge& g, double alpha, const std::vector<double>& ladder, int dim,
                            const OsgoodOptions& options) {
  if (dim < 1) fail(ErrorCode::InvalidParam, "dimension must be positive");
  if (dim > 1 && !(alpha > 1.0 && alpha < static_cast<double>(dim) / (dim - 1)))
    fail(ErrorCode::InvalidParam, "alpha must lie in (1, n/(n-1))");
  GaugeVerdict v;
  std::ostringstream details;
  details << g.describe() << "; ";

  const double gamma = dim == 1 ? 1.0 : (alpha - 1.0) / alpha;
  const double lo = std::max({g.s_bar(), 1.0, g.c_theta_found() ? g.c_theta() : 1.0});
  v.convexity_power_ok = true;
  double worst = 0.0;
  for (double s : log_grid(lo, lo * 1e9, 200)) {
    if (!convex_at(g, gamma, s)) {
      v.convexity_power_ok = false;
      worst = s;
      break;
    }
  }
  details << "(I) convexity of Theta^" << gamma << (v.convexity_power_ok ? " holds" : " fails") << " on [" << lo
          << ", " << lo * 1e9 << "]";
  if (!v.convexity_power_ok) details << " (first failure at s=" << worst << ")";
  details << "; ";

  v.submultiplicative_ok = g.c_theta_found() && submultiplicative_on_grid(g, g.c_theta());
  details << "(II) " << (v.submultiplicative_ok ? "holds" : "fails") << " with C_Theta=" << g.c_theta() << "; ";

  v.osgood = osgood_study([&](double y) { return g.osgood_density(y); }, g.osgood_start(), ladder, g.osgood_depth(),
                          options);
  details << "(III) " << to_string(v.osgood.verdict) << ", rate " << v.osgood.fitted_rate << " in y = ";
  if (g.osgood_depth() == 0)
    details << "s";
  else
    details << "L_" << g.osgood_depth() << "(s)";
  v.details = details.str();
  return v;
}

double modulus_omega(const OrliczGauge& g, double alpha, double delta) {
  if (!(delta > 0.0) || !std::isfinite(delta)) fail(ErrorCode::InvalidParam, "modulus needs delta > 0");
  if (!(alpha > 1.0)) fail(ErrorCode::InvalidParam, "modulus needs alpha > 1");
  if (!g.c_theta_found()) fail(ErrorCode::InverseDomain, "C_Theta unknown for " + g.label());
  const double expo = alpha / (alpha - 1.0);
  const double log_u = std::max(g.log_eval(g.c_theta()), -expo * std::log(delta));
  return delta * g.inverse_log(log_u);
}

OsgoodStudy modulus_osgood_study(const OrliczGauge& g, double alpha, double upper, const std::vector<double>& ladder,
                                 const OsgoodOptions& options) {
  if (!(alpha > 1.0)) fail(ErrorCode::InvalidParam, "modulus needs alpha > 1");
  if (!(upper > 0.0 && upper < 1.0)) fail(ErrorCode::InvalidParam, "upper limit must lie in (0, 1)");
  if (!g.c_theta_found()) fail(ErrorCode::InverseDomain, "C_Theta unknown for " + g.label());
  const double expo = alpha / (alpha - 1.0);
  const double floor = g.log_eval(g.c_theta());
  // With delta = e^{-y}, d delta / omega(delta) = dy / Theta^{-1}(max(Theta(C), e^{expo y})).
  auto density = [&](double y) { return std::exp(-g.log_inverse(std::max(floor, expo * y))); };
  return osgood_study(density, -std::log(upper), ladder, 0, options);
}

double SummabilityResult::value_or_throw() const {
  std::ostringstream os;
  os << "partial value " << value << " with error bound " << error;
  if (details.size()) os << " (" << details << ")";
  if (status == QuadStatus::Divergent) fail(ErrorCode::DivergentIntegral, os.str());
  if (status == QuadStatus::Unresolved) fail(ErrorCode::QuadratureFailure, os.str());
  return value;
}

namespace {

std::vector<std::vector<double>> singular_with_bounds(const VectorField& field, const Box& box, bool include_bounds) {
  std::vector<std::vector<double>> out(box.dim());
  const auto traits = field.quadrature_breaks();
  for (int i = 0; i < box.dim(); ++i) {
    out[i] = traits[i];
    if (include_bounds) {
      out[i].push_back(box.lo(i));
      out[i].push_back(box.hi(i));
    }
  }
  return out;
}

void check_box(const VectorField& field, const Box& box) {
  if (box.dim() != field.dim()) fail(ErrorCode::InvalidParam, "box dimension does not match the field");
  if (!box.bounded()) fail(ErrorCode::InvalidParam, "integration box must be bounded");
  if (!box.subset_of(field.domain())) fail(ErrorCode::OutOfDomain, "integration box must lie inside the domain");
}

void check_region(const VectorField& field, const Box& box, const Interval& tspan) {
  check_box(field, box);
  if (!std::isfinite(tspan.lo) || !std::isfinite(tspan.hi) || !(tspan.hi > tspan.lo))
    fail(ErrorCode::InvalidParam, "time span must be a bounded non-empty interval");
  if (tspan.lo < field.time_interval().lo || tspan.hi > field.time_interval().hi)
    fail(ErrorCode::OutOfDomain, "time span must lie inside the field's time interval");
}

// Space (or space-time) integral where the integrand may overflow; overflow is reported as divergence.
template <class Run>
SummabilityResult guarded(Run&& run) {
  SummabilityResult out;
  try {
    const QuadResult r = run();
    out.value = r.value;
    out.error = r.error;
    out.status = r.status;
    out.evaluations = r.evaluations;
  } catch (const Error& e) {
    if (e.code() != ErrorCode::QuadratureFailure && e.code() != ErrorCode::Overflow) throw;
    out.value = kInf;
    out.status = QuadStatus::Divergent;
    out.details = std::string("integrand overflow: ") + e.what();
  }
  if (out.status == QuadStatus::Divergent) out.value = kInf;
  return out;
}

// Forward and backward existence times of the autonomous curve through x, capped at the window length.
std::pair<double, double> existence_times(const VectorField& field, const Vec& x, const Interval& window) {
  SolverConfig cfg;
  cfg.rel_tol = 1e-8;
  cfg.abs_tol = 1e-10;
  const Trajectory fwd = integrate_trajectory(field, window.lo, x, window.hi, cfg);
  const Trajectory bwd = integrate_trajectory(field, window.hi, x, window.lo, cfg);
  return {fwd.t_end() - window.lo, window.hi - bwd.t_end()};
}

// int_a^b l(s)^gamma ds with l(s) = min(b, s + tp) - max(a, s - tm), exactly (l is piecewise linear).
double window_power_integral(double a, double b, double tp, double tm, double gamma) {
  std::vector<double> cuts{a, b, b - tp, a + tm};
  std::sort(cuts.begin(), cuts.end());
  auto ell = [&](double s) { return std::min(b, s + tp) - std::max(a, s - tm); };
  double total = 0.0;
  for (std::size_t i = 0; i + 1 < cuts.size(); ++i) {
    const double lo = std::max(a, cuts[i]), hi = std::min(b, cuts[i + 1]);
    if (!(hi > lo)) continue;
    const double l0 = ell(lo), l1 = ell(hi);
    const double slope = (l1 - l0) / (hi - lo);
    if (std::abs(slope) < 1e-12) {
      total += std::pow(0.5 * (l0 + l1), gamma) * (hi - lo);
    } else if (gamma == -1.0) {
      total += (std::log(l1) - std::log(l0)) / slope;
    } else {
      total += (std::pow(l1, gamma + 1.0) - std::pow(l0, gamma + 1.0)) / ((gamma + 1.0) * slope);
    }
  }
  return total;
}

}  // namespace

SummabilityResult summability_profile(const VectorField& field, const OrliczGauge& g, double c, const Box& box,
                                      double t, const QuadOptions& options) {
  if (!(c > 0.0)) fail(ErrorCode::InvalidParam, "summability constant c must be positive");
  check_box(field, box);
  if (!field.time_interval().contains(t)) fail(ErrorCode::OutOfDomain, "time outside the field's interval");
  auto f = [&](const Vec& x) { return std::exp(g.log_eval(c * field.jacobian(t, x).op_norm)); };
  return guarded([&] { return integrate_box(f, box, singular_with_bounds(field, box, false), options); });
}

SummabilityResult summability_integral(const VectorField& field, const OrliczGauge& g, double c, const Box& box,
                                       const Interval& tspan, const SummabilityWeight& weight,
                                       const QuadOptions& options) {
  if (!(c > 0.0)) fail(ErrorCode::InvalidParam, "summability constant c must be positive");
  check_region(field, box, tspan);
  const int n = field.dim();
  const double len = tspan.length();
  auto theta_at = [&](double t, const Vec& x) { return std::exp(g.log_eval(c * field.jacobian(t, x).op_norm)); };
  const bool bounds_singular = weight.kind != SummabilityWeight::Kind::Uniform && weight.gamma < 0.0;
  const auto singular = singular_with_bounds(field, box, bounds_singular);
  const VectorField inside = field.restricted(box);

  if (field.traits().autonomous) {
    const double t0 = tspan.lo;
    auto f = [&](const Vec& x) {
      const double theta = theta_at(t0, x);
      switch (weight.kind) {
        case SummabilityWeight::Kind::Uniform: return theta * len;
        case SummabilityWeight::Kind::DistancePower:
          return theta * len * std::pow(box.distance_to_boundary(x), weight.gamma);
        case SummabilityWeight::Kind::MaximalIntervalPower: {
          const auto [tp, tm] = existence_times(inside, x, tspan);
          return theta * window_power_integral(tspan.lo, tspan.hi, tp, tm, weight.gamma);
        }
      }
      return 0.0;
    };
    return guarded([&] { return integrate_box(f, box, singular, options); });
  }

  std::vector<double> lo{tspan.lo}, hi{tspan.hi};
  for (int i = 0; i < n; ++i) {
    lo.push_back(box.lo(i));
    hi.push_back(box.hi(i));
  }
  std::vector<std::vector<double>> st_singular{field.traits().time_breakpoints};
  st_singular.insert(st_singular.end(), singular.begin(), singular.end());
  auto f = [&](const Vec& tx) {
    const double t = tx(0);
    const Vec x = tx.tail(n);
    const double theta = theta_at(t, x);
    switch (weight.kind) {
      case SummabilityWeight::Kind::Uniform: return theta;
      case SummabilityWeight::Kind::DistancePower: return theta * std::pow(box.distance_to_boundary(x), weight.gamma);
      case SummabilityWeight::Kind::MaximalIntervalPower:
        return theta * std::pow(maximal_interval(inside, t, x, tspan), weight.gamma);
    }
    return 0.0;
  };
  return guarded([&] { return integrate_box(f, Box(lo, hi), st_singular, options); });
}

LambdaResult lambda_p(const VectorField& field, double p, const Box& box, const Interval& tspan, LambdaMode mode,
                      const QuadOptions& options) {
  check_region(field, box, tspan);
  const int n = field.dim();
  if (mode == LambdaMode::Geometric && !(p > 2.0 * n)) fail(ErrorCode::InvalidParam, "geometric Lambda_p needs p > 2n");
  if (mode == LambdaMode::MaximalInterval && !(p > n))
    fail(ErrorCode::InvalidParam, "maximal-interval Lambda_p needs p > n");
  LambdaResult out;
  const double ell = tspan.length();
  out.ell = ell;
  const double rate = ell * p * p / (p - n);
  const double e_geo = n / (n - p);

  // Sampled sup |b| over a uniform space-time lattice.
  const bool autonomous = field.traits().autonomous;
  const int per_axis = std::clamp(static_cast<int>(std::floor(std::pow(1e5, 1.0 / n))), 9, 2001);
  const Lattice lattice = Lattice::uniform(box, std::vector<int>(n, per_axis));
  const int nt = autonomous ? 1 : 17;
  std::vector<double> sup_parts = parallel_map<double>(lattice.size(), [&](std::size_t i) {
    const Vec x = lattice.node(i);
    double m = 0.0;
    for (int j = 0; j < nt; ++j) {
      const double t = nt == 1 ? tspan.lo : tspan.lo + ell * j / (nt - 1);
      Vec b;
      if (field.try_eval(t, x, b) == EvalStatus::Ok) m = std::max(m, b.norm());
    }
    return m;
  });
  for (double v : sup_parts) out.sup_b = std::max(out.sup_b, v);

  const bool bounds_singular = mode == LambdaMode::MaximalInterval || out.sup_b > 0.0;
  const auto singular = singular_with_bounds(field, box, bounds_singular);
  const VectorField inside = field.restricted(box);
  auto growth = [&](double t, const Vec& x) { return std::exp(rate * field.jacobian(t, x).op_norm); };
  auto geometric_weight = [&](const Vec& x) {
    const double first = std::pow(ell, e_geo);
    if (out.sup_b == 0.0) return first;
    return std::max(first, std::pow(box.distance_to_boundary(x) / out.sup_b, e_geo));
  };
  const double q = n / (p - n);

  SummabilityResult r;
  if (autonomous) {
    auto f = [&](const Vec& x) {
      const double w = growth(tspan.lo, x);
      if (mode == LambdaMode::Geometric) return geometric_weight(x) * w * ell;
      const auto [tp, tm] = existence_times(inside, x, tspan);
      return std::pow(ell, q) * window_power_integral(tspan.lo, tspan.hi, tp, tm, -q) * w;
    };
    r = guarded([&] { return integrate_box(f, box, singular, options); });
  } else {
    std::vector<double> lo{tspan.lo}, hi{tspan.hi};
    for (int i = 0; i < n; ++i) {
      lo.push_back(box.lo(i));
      hi.push_back(box.hi(i));
    }
    std::vector<std::vector<double>> st_singular{field.traits().time_breakpoints};
    st_singular.insert(st_singular.end(), singular.begin(), singular.end());
    auto f = [&](const Vec& tx) {
      const double t = tx(0);
      const Vec x = tx.tail(n);
      const double w = growth(t, x);
      if (mode == LambdaMode::Geometric) return geometric_weight(x) * w;
      return std::pow(ell / maximal_interval(inside, t, x, tspan), q) * w;
    };
    r = guarded([&] { return integrate_box(f, Box(lo, hi), st_singular, options); });
  }
  out.value = r.value;
  out.error = r.error;
  out.status = r.status;
  return out;
}

double luxemburg_norm(const std::vector<WeightedSample>& samples, const std::function<double(double)>& phi,
                      double cap) {
  if (!phi) fail(ErrorCode::InvalidParam, "Luxemburg norm needs a gauge function");
  double vmax = 0.0;
  for (const auto& s : samples) {
    if (!(s.value >= 0.0) || !(s.weight >= 0.0) || !std::isfinite(s.value) || !std::isfinite(s.weight))
      fail(ErrorCode::InvalidArgument, "Luxemburg samples must be finite and nonnegative");
    if (s.weight > 0.0) vmax = std::max(vmax, s.value);
  }
  if (vmax == 0.0) return 0.0;
  auto modular = [&](double lambda) {
    std::vector<double> terms;
    terms.reserve(samples.size());
    for (const auto& s : samples) terms.push_back(s.weight > 0.0 ? s.weight * phi(s.value / lambda) : 0.0);
    return tree_sum(terms);
  };
  if (modular(cap) > 1.0) fail(ErrorCode::NoFiniteNorm, "modular exceeds 1 for every lambda up to the cap");
  double hi = std::min(vmax, cap);
  while (modular(hi) > 1.0) hi = std::min(2.0 * hi, cap);
  double lo = hi;
  while (modular(lo) <= 1.0) {
    lo *= 0.5;
    if (lo < 1e-300) return 0.0;
  }
  for (int i = 0; i < 200 && hi / lo - 1.0 > 1e-14; ++i) {
    const double mid = std::sqrt(lo * hi);
    if (modular(mid) > 1.0)
      lo = mid;
    else
      hi = mid;
  }
  return hi;
}

}  // namespace roughflow
