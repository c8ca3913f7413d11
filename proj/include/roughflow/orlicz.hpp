#pragma once

#include <functional>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "roughflow/field.hpp"
#include "roughflow/quadrature.hpp"

namespace roughflow {

// E_1(s) = exp(s), E_{k+1}(s) = exp(E_k(s)). Overflow is an error.
double iterated_exp(int k, double s);
// L_k = E_k^{-1}, defined for s > E_{k-1}(0) (with E_0(0) = 0).
double iterated_log(int k, double s);
// P_k(s) = L_1(s) ... L_k(s); P_0 = 1.
double iterated_log_product(int k, double s);
// Domain threshold E_{k-1}(0) of L_k.
double iterated_log_threshold(int k);

enum class GaugeFamily { Subexp, Exponential, Power, Custom };
const char* to_string(GaugeFamily family);

// A gauge Theta on [0, inf). Values are handled through log Theta so that subexponential
// gauges remain usable far beyond the double range of Theta itself.
class OrliczGauge {
 public:
  // Theta(s) = exp(s / (P_{k-1}(s) L_k(s)^beta)) for s >= s_bar, Theta(s_bar) below.
  // Without s_bar the smallest e^{...}-anchored threshold E_k(1) 2^j (j >= 1) is chosen on which
  // Theta is increasing and convex over nine decades.
  static OrliczGauge subexp(int k, double beta, std::optional<double> s_bar = std::nullopt);
  // Theta(s) = exp(beta s).
  static OrliczGauge exponential(double beta = 1.0);
  // Theta(s) = s^p.
  static OrliczGauge power(double p);
  // User-supplied Theta and Theta'. C_Theta is searched over {1, 2, ..., 2^10}.
  static OrliczGauge custom(std::function<double(double)> eval, std::function<double(double)> deriv,
                            std::string label = "custom");

  GaugeFamily family() const { return family_; }
  int k() const { return k_; }
  double beta() const { return beta_; }
  double p() const { return p_; }
  const std::string& label() const { return label_; }

  double log_eval(double s) const;
  // Theta(s); Overflow when it exceeds the double range.
  double eval(double s) const;
  // Theta'(s) / Theta(s).
  double log_derivative(double s) const;
  double deriv(double s) const;
  // Theta^{-1}(u) for u >= Theta(C_Theta); closed form for exponential and power gauges,
  // bisection in log space otherwise.
  double inverse(double u) const;
  double inverse_log(double log_u) const;
  // log Theta^{-1}(e^{log_u}); finite even where Theta^{-1} itself overflows.
  double log_inverse(double log_u) const;

  double c_theta() const { return c_theta_; }
  // False when the C_Theta search found no admissible value; c_theta() is then NaN.
  bool c_theta_found() const { return c_theta_found_; }
  double s_bar() const { return s_bar_; }

  // Iterated-log depth d of the coordinate y = L_d(s) in which Osgood partial sums are taken
  // (0 means y = s), and the integrand of int Theta'/(s Theta) ds expressed in y.
  int osgood_depth() const;
  double osgood_density(double y) const;
  double osgood_start() const;

  std::string describe() const;

 private:
  OrliczGauge() = default;
  void find_c_theta(int max_power);

  GaugeFamily family_ = GaugeFamily::Exponential;
  int k_ = 1;
  double beta_ = 1.0;
  double p_ = 2.0;
  double s_bar_ = 0.0;
  double c_theta_ = 1.0;
  bool c_theta_found_ = true;
  std::string label_;
  std::function<double(double)> custom_eval_;
  std::function<double(double)> custom_deriv_;
};

// Checks that log Theta(s1) + log Theta(s2) <= log Theta(C s1 s2) and that Theta increases strictly,
// on a grid of pairs spanning six decades above C.
bool submultiplicative_on_grid(const OrliczGauge& g, double c);

enum class OsgoodVerdict { Diverging, Converging, Inconclusive };
const char* to_string(OsgoodVerdict verdict);

struct OsgoodStudy {
  int depth = 0;                                      // coordinate y = L_depth(s); 0 means y = s
  std::vector<std::pair<double, double>> partial_sums;  // (ladder point Y, partial integral)
  double quadrature_error = 0.0;
  double fitted_rate = 0.0;  // exponent of the increment density per unit log Y
  double tail_estimate = 0.0;
  OsgoodVerdict verdict = OsgoodVerdict::Inconclusive;
};

struct OsgoodOptions {
  double divergence_rate = -0.02;  // fitted rates at or above this count as growth
  double tail_tolerance = 1e-3;    // relative to max(1, last partial sum)
  double rel_tol = 1e-12;
};

// Decides growth of partial sums of int_{y0}^{Y} f(y) dy along an increasing ladder (length >= 4).
OsgoodStudy osgood_study(const std::function<double(double)>& density, double y0, const std::vector<double>& ladder,
                         int depth, const OsgoodOptions& options = {});

struct GaugeVerdict {
  bool convexity_power_ok = false;
  bool submultiplicative_ok = false;
  OsgoodStudy osgood;
  std::string details;
};

std::vector<double> default_ladder();

// (I) convexity of Theta^{(alpha-1)/alpha} (plain convexity when dim = 1), (II) the submultiplicative
// bound with the gauge's C_Theta, (III) the Osgood-type integral int Theta'/(s Theta).
GaugeVerdict validate_gauge(const OrliczGauge& g, double alpha, const std::vector<double>& ladder = default_ladder(),
                            int dim = 1, const OsgoodOptions& options = {});

// omega(delta) = delta * Theta^{-1}(max(Theta(C_Theta), delta^{-alpha/(alpha-1)})).
double modulus_omega(const OrliczGauge& g, double alpha, double delta);

// Partial sums of int_{e^{-Y}}^{upper} d delta / omega(delta) along Y = log(1/delta) in the ladder.
OsgoodStudy modulus_osgood_study(const OrliczGauge& g, double alpha, double upper = 0.1,
                                 const std::vector<double>& ladder = default_ladder(),
                                 const OsgoodOptions& options = {});

struct SummabilityWeight {
  enum class Kind { Uniform, DistancePower, MaximalIntervalPower };
  Kind kind = Kind::Uniform;
  double gamma = 0.0;
  static SummabilityWeight uniform() { return {}; }
  static SummabilityWeight distance_power(double g) { return {Kind::DistancePower, g}; }
  static SummabilityWeight maximal_interval_power(double g) { return {Kind::MaximalIntervalPower, g}; }
};

struct SummabilityResult {
  double value = 0.0;
  double error = 0.0;
  QuadStatus status = QuadStatus::Converged;
  std::size_t evaluations = 0;
  std::string details;
  bool divergent() const { return status == QuadStatus::Divergent; }
  // Throws DivergentIntegral or QuadratureFailure (with the partial value) unless converged.
  double value_or_throw() const;
};

// int_tspan int_box w(t,x) Theta(c ||D_x b(t,x)||) dx dt.
SummabilityResult summability_integral(const VectorField& field, const OrliczGauge& g, double c, const Box& box,
                                       const Interval& tspan, const SummabilityWeight& weight = {},
                                       const QuadOptions& options = {});
// Time slice psi(t) = int_box Theta(c ||D_x b(t,x)||) dx.
SummabilityResult summability_profile(const VectorField& field, const OrliczGauge& g, double c, const Box& box,
                                      double t, const QuadOptions& options = {});

enum class LambdaMode { Geometric, MaximalInterval };

struct LambdaResult {
  double value = 0.0;
  double error = 0.0;
  QuadStatus status = QuadStatus::Converged;
  double sup_b = 0.0;  // sampled sup |b| over tspan x box
  double ell = 0.0;    // length of tspan
  bool divergent() const { return status == QuadStatus::Divergent; }
};

// Lambda_p (geometric) or Lambda'_p (maximal_interval) with weight exp(ell p^2/(p-n) ||D_x b||).
// Geometric mode needs p > 2n, maximal-interval mode p > n.
LambdaResult lambda_p(const VectorField& field, double p, const Box& box, const Interval& tspan, LambdaMode mode,
                      const QuadOptions& options = {});

struct WeightedSample {
  double value = 0.0;
  double weight = 0.0;
};

// inf{lambda > 0 : sum w Phi(v / lambda) <= 1}, by bisection in log lambda.
double luxemburg_norm(const std::vector<WeightedSample>& samples, const std::function<double(double)>& phi,
                      double cap = 1e12);

}  // namespace roughflow
