#include "roughflow/quadrature.hpp"

#include <algorithm>
#include <boost/math/quadrature/gauss.hpp>
#include <cmath>
#include <limits>

#include "roughflow/error.hpp"

namespace roughflow {

const char* to_string(QuadStatus status) {
  switch (status) {
    case QuadStatus::Converged: return "converged";
    case QuadStatus::Divergent: return "divergent";
    case QuadStatus::Unresolved: return "unresolved";
  }
  return "unknown";
}

namespace {

struct SimpsonRun {
  const Integrand1D& f;
  std::size_t budget;
  std::size_t evaluations = 0;
  double error = 0.0;
  bool unresolved = false;

  double eval(double x) {
    ++evaluations;
    const double v = f(x);
    if (!std::isfinite(v)) fail(ErrorCode::QuadratureFailure, "integrand is not finite at x = " + std::to_string(x));
    return v;
  }

  double refine(double a, double fa, double m, double fm, double b, double fb, double whole, double tol, int depth) {
    const double lm = 0.5 * (a + m), rm = 0.5 * (m + b);
    const double flm = eval(lm), frm = eval(rm);
    const double left = (m - a) / 6.0 * (fa + 4.0 * flm + fm);
    const double right = (b - m) / 6.0 * (fm + 4.0 * frm + fb);
    const double delta = left + right - whole;
    if (std::abs(delta) <= 15.0 * tol || depth <= 0 || evaluations >= budget || lm <= a || rm >= b) {
      if (std::abs(delta) > 15.0 * tol) unresolved = true;
      error += std::abs(delta) / 15.0;
      return left + right + delta / 15.0;
    }
    return refine(a, fa, lm, flm, m, fm, left, 0.5 * tol, depth - 1) +
           refine(m, fm, rm, frm, b, fb, right, 0.5 * tol, depth - 1);
  }
};

QuadResult simpson(const Integrand1D& f, double a, double b, double abs_tol, double rel_tol, std::size_t budget,
                   int max_depth) {
  QuadResult out;
  if (a == b) return out;
  SimpsonRun run{f, budget};
  const double m = 0.5 * (a + b);
  const double fa = run.eval(a), fm = run.eval(m), fb = run.eval(b);
  // Split once up front so that a symmetric integrand with a zero midpoint is not accepted by accident.
  const double l1 = 0.5 * (a + m), r1 = 0.5 * (m + b);
  const double fl = run.eval(l1), fr = run.eval(r1);
  const double left = (m - a) / 6.0 * (fa + 4.0 * fl + fm);
  const double right = (b - m) / 6.0 * (fm + 4.0 * fr + fb);
  const double tol = std::max(abs_tol, rel_tol * std::abs(left + right));
  out.value = run.refine(a, fa, l1, fl, m, fm, left, 0.5 * tol, max_depth) +
              run.refine(m, fm, r1, fr, b, fb, right, 0.5 * tol, max_depth);
  out.error = run.error;
  out.evaluations = run.evaluations;
  out.status = run.unresolved ? QuadStatus::Unresolved : QuadStatus::Converged;
  return out;
}

// Integral of f(c + dir*d) for d in (0, H], cut into layers [H 10^{-3(j+1)}, H 10^{-3j}].
QuadResult singular_side(const Integrand1D& f, double c, double H, double dir, const QuadOptions& opt,
                         std::size_t budget) {
  QuadResult out;
  const double d_min = std::max(std::abs(c), 1.0) * 8.0 * std::numeric_limits<double>::epsilon();
  const double c_floor = c == 0.0 ? 1e-300 : d_min;
  double prev = std::numeric_limits<double>::quiet_NaN();
  int growing = 0;
  double upper = H;
  for (int j = 0; j < opt.max_layers; ++j) {
    double lower = upper * 1e-3;
    const bool last = lower <= c_floor;
    if (last) lower = c_floor;
    if (!(lower < upper)) break;
    auto g = [&](double u) {
      const double d = std::exp(u);
      return f(c + dir * d) * d;
    };
    const double lu = std::log(lower), uu = std::log(upper);
    const double coarse = (uu - lu) / 6.0 * (g(lu) + 4.0 * g(0.5 * (lu + uu)) + g(uu));
    const double tol = std::max(opt.abs_tol, opt.rel_tol * std::max(std::abs(coarse), std::abs(out.value))) * 0.25;
    if (out.evaluations >= budget) {
      out.status = QuadStatus::Unresolved;
      return out;
    }
    QuadResult layer = simpson(g, lu, uu, tol, 0.0, budget - out.evaluations, opt.max_depth);
    out.evaluations += layer.evaluations + 3;
    out.value += layer.value;
    out.error += layer.error;
    if (layer.status == QuadStatus::Unresolved) out.status = QuadStatus::Unresolved;

    const double L = layer.value;
    if (j >= 1 && std::isfinite(prev)) {
      const double scale = std::max(opt.abs_tol, opt.rel_tol * std::abs(out.value));
      if (prev != 0.0 && L / prev >= opt.divergence_ratio && std::abs(L) > 10.0 * scale)
        ++growing;
      else
        growing = 0;
      if (growing >= 3) {
        out.status = QuadStatus::Divergent;
        return out;
      }
      const double rho = prev != 0.0 ? std::abs(L / prev) : (L == 0.0 ? 0.0 : 1.0);
      const double tail = rho < 1.0 ? std::abs(L) * rho / (1.0 - rho) : std::abs(L);
      if (rho < opt.divergence_ratio && tail <= 0.1 * scale) {
        out.error += tail;
        return out;
      }
    }
    if (last) {
      // Cannot resolve closer to the singular point; extrapolate geometrically when the layers shrink.
      const double rho = prev != 0.0 && std::isfinite(prev) ? std::abs(L / prev) : 1.0;
      if (rho < opt.divergence_ratio) {
        out.error += std::abs(L) * rho / (1.0 - rho);
      } else if (out.status == QuadStatus::Converged) {
        out.status = L == 0.0 ? QuadStatus::Converged : QuadStatus::Unresolved;
      }
      return out;
    }
    prev = L;
    upper = lower;
  }
  if (out.status == QuadStatus::Converged) out.status = QuadStatus::Unresolved;
  return out;
}

void merge(QuadResult& into, const QuadResult& part) {
  into.value += part.value;
  into.error += part.error;
  into.evaluations += part.evaluations;
  if (part.status == QuadStatus::Divergent)
    into.status = QuadStatus::Divergent;
  else if (part.status == QuadStatus::Unresolved && into.status == QuadStatus::Converged)
    into.status = QuadStatus::Unresolved;
}

}  // namespace

QuadResult adaptive_simpson(const Integrand1D& f, double a, double b, double tol, std::size_t budget, int max_depth) {
  if (!std::isfinite(a) || !std::isfinite(b)) fail(ErrorCode::InvalidParam, "integration limits must be finite");
  if (!(tol > 0.0)) fail(ErrorCode::InvalidParam, "quadrature tolerance must be positive");
  if (b < a) {
    QuadResult r = simpson(f, b, a, tol, 0.0, budget, max_depth);
    r.value = -r.value;
    return r;
  }
  return simpson(f, a, b, tol, 0.0, budget, max_depth);
}

QuadResult integrate_1d(const Integrand1D& f, double a, double b, const std::vector<double>& singular_points,
                        const QuadOptions& opt) {
  if (!std::isfinite(a) || !std::isfinite(b)) fail(ErrorCode::InvalidParam, "integration limits must be finite");
  if (b < a) {
    QuadResult r = integrate_1d(f, b, a, singular_points, opt);
    r.value = -r.value;
    return r;
  }
  QuadResult total;
  if (a == b) return total;
  std::vector<double> cuts{a, b};
  std::vector<double> sing;
  for (double p : singular_points)
    if (p >= a && p <= b) {
      cuts.push_back(p);
      sing.push_back(p);
    }
  std::sort(cuts.begin(), cuts.end());
  cuts.erase(std::unique(cuts.begin(), cuts.end()), cuts.end());
  auto is_singular = [&](double x) { return std::find(sing.begin(), sing.end(), x) != sing.end(); };

  const double piece_tol_scale = 1.0 / static_cast<double>(cuts.size() - 1);
  QuadOptions local = opt;
  local.abs_tol = opt.abs_tol * piece_tol_scale;
  for (std::size_t i = 0; i + 1 < cuts.size(); ++i) {
    const double p = cuts[i], q = cuts[i + 1];
    const bool sl = is_singular(p), sr = is_singular(q);
    const std::size_t remaining = opt.max_evaluations > total.evaluations ? opt.max_evaluations - total.evaluations : 0;
    if (remaining == 0) {
      total.status = QuadStatus::Unresolved;
      break;
    }
    if (!sl && !sr) {
      merge(total, simpson(f, p, q, local.abs_tol, opt.rel_tol, remaining, opt.max_depth));
      continue;
    }
    if (sl && sr) {
      const double m = 0.5 * (p + q);
      merge(total, singular_side(f, p, m - p, 1.0, local, remaining / 2));
      merge(total, singular_side(f, q, q - m, -1.0, local, remaining / 2));
    } else if (sl) {
      merge(total, singular_side(f, p, q - p, 1.0, local, remaining));
    } else {
      merge(total, singular_side(f, q, q - p, -1.0, local, remaining));
    }
    if (total.status == QuadStatus::Divergent) return total;
  }
  if (total.evaluations >= opt.max_evaluations && total.status == QuadStatus::Converged)
    total.status = QuadStatus::Unresolved;
  return total;
}

namespace {

struct DivergentSignal {};

QuadResult nested(const IntegrandND& f, const Box& box, const std::vector<std::vector<double>>& singular, int axis,
                  Vec& point, const QuadOptions& opt, std::size_t& evaluations, QuadStatus& status) {
  const int n = box.dim();
  const std::vector<double> none;
  const std::vector<double>& sp = singular.size() > static_cast<std::size_t>(axis) ? singular[axis] : none;
  auto g = [&](double x) {
    point(axis) = x;
    if (axis + 1 == n) {
      ++evaluations;
      if (evaluations > opt.max_evaluations) status = QuadStatus::Unresolved;
      return f(point);
    }
    // Tighter inner tolerances keep the outer integrand smooth enough for adaptivity.
    QuadOptions inner = opt;
    inner.abs_tol = opt.abs_tol / std::max(1.0, box.hi(axis) - box.lo(axis)) * 0.1;
    QuadResult r = nested(f, box, singular, axis + 1, point, inner, evaluations, status);
    if (r.status == QuadStatus::Divergent) throw DivergentSignal{};
    if (r.status == QuadStatus::Unresolved) status = QuadStatus::Unresolved;
    point(axis) = x;
    return r.value;
  };
  return integrate_1d(g, box.lo(axis), box.hi(axis), sp, opt);
}

}  // namespace

QuadResult integrate_box(const IntegrandND& f, const Box& box, const std::vector<std::vector<double>>& singular_coords,
                         const QuadOptions& opt) {
  if (!box.bounded()) fail(ErrorCode::InvalidParam, "integration box must be bounded");
  Vec point = Vec::Zero(box.dim());
  std::size_t evaluations = 0;
  QuadStatus status = QuadStatus::Converged;
  QuadResult out;
  try {
    out = nested(f, box, singular_coords, 0, point, opt, evaluations, status);
  } catch (const DivergentSignal&) {
    out.status = QuadStatus::Divergent;
    out.value = std::numeric_limits<double>::infinity();
  }
  out.evaluations = evaluations;
  if (out.status == QuadStatus::Converged && status != QuadStatus::Converged) out.status = status;
  return out;
}

namespace {

template <int N>
GaussRule make_rule() {
  using G = boost::math::quadrature::gauss<double, N>;
  GaussRule rule;
  const auto& x = G::abscissa();
  const auto& w = G::weights();
  for (std::size_t i = 0; i < x.size(); ++i) {
    if (x[i] == 0.0) {
      rule.nodes.push_back(0.0);
      rule.weights.push_back(w[i]);
    } else {
      rule.nodes.push_back(-x[i]);
      rule.weights.push_back(w[i]);
      rule.nodes.push_back(x[i]);
      rule.weights.push_back(w[i]);
    }
  }
  std::vector<std::size_t> order(rule.nodes.size());
  for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
  std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return rule.nodes[a] < rule.nodes[b]; });
  GaussRule sorted;
  for (std::size_t i : order) {
    sorted.nodes.push_back(rule.nodes[i]);
    sorted.weights.push_back(rule.weights[i]);
  }
  return sorted;
}

}  // namespace

GaussRule gauss_legendre(int n) {
  switch (n) {
    case 1: return {{0.0}, {2.0}};
    case 2: return make_rule<2>();
    case 3: return make_rule<3>();
    case 4: return make_rule<4>();
    case 5: return make_rule<5>();
    case 6: return make_rule<6>();
    case 7: return make_rule<7>();
    case 8: return make_rule<8>();
    case 9: return make_rule<9>();
    case 10: return make_rule<10>();
    default: fail(ErrorCode::InvalidParam, "Gauss-Legendre rule supports 1 to 10 points");
  }
}

}  // namespace roughflow
