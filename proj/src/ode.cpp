#include "roughflow/ode.hpp"

#include <algorithm>
#include <cmath>

#include "roughflow/error.hpp"

namespace roughflow {

namespace {

// Butcher tableau.
constexpr double c2 = 1.0 / 5.0, c3 = 3.0 / 10.0, c4 = 4.0 / 5.0, c5 = 8.0 / 9.0;
constexpr double a21 = 1.0 / 5.0;
constexpr double a31 = 3.0 / 40.0, a32 = 9.0 / 40.0;
constexpr double a41 = 44.0 / 45.0, a42 = -56.0 / 15.0, a43 = 32.0 / 9.0;
constexpr double a51 = 19372.0 / 6561.0, a52 = -25360.0 / 2187.0, a53 = 64448.0 / 6561.0, a54 = -212.0 / 729.0;
constexpr double a61 = 9017.0 / 3168.0, a62 = -355.0 / 33.0, a63 = 46732.0 / 5247.0, a64 = 49.0 / 176.0,
                 a65 = -5103.0 / 18656.0;
constexpr double a71 = 35.0 / 384.0, a73 = 500.0 / 1113.0, a74 = 125.0 / 192.0, a75 = -2187.0 / 6784.0,
                 a76 = 11.0 / 84.0;
constexpr double e1 = 71.0 / 57600.0, e3 = -71.0 / 16695.0, e4 = 71.0 / 1920.0, e5 = -17253.0 / 339200.0,
                 e6 = 22.0 / 525.0, e7 = -1.0 / 40.0;
// Dense output.
constexpr double d1 = -12715105075.0 / 11282082432.0, d3 = 87487479700.0 / 32700410799.0,
                 d4 = -10690763975.0 / 1880347072.0, d5 = 701980252875.0 / 199316789632.0,
                 d6 = -1453857185.0 / 822651844.0, d7 = 69997945.0 / 29380423.0;

constexpr double kSafety = 0.9;
constexpr double kBeta = 0.04;
constexpr double kFacMin = 0.2;   // largest step growth 1/0.2
constexpr double kFacMax = 10.0;  // largest step shrink

}  // namespace

void DenseSegment::eval(double t, double* out) const {
  const int n = dim();
  const double theta = h != 0.0 ? (t - t0) / h : 0.0;
  const double theta1 = 1.0 - theta;
  for (int i = 0; i < n; ++i) {
    const double r1 = coeffs[i], r2 = coeffs[n + i], r3 = coeffs[2 * n + i], r4 = coeffs[3 * n + i],
                 r5 = coeffs[4 * n + i];
    out[i] = r1 + theta * (r2 + theta1 * (r3 + theta * (r4 + theta1 * r5)));
  }
}

OdeResult dopri5(const OdeRhs& rhs, int n, double t0, const double* y0, double t1, const OdeOptions& opt,
                 const OdeObserver& observer, bool want_dense) {
  if (n < 1) fail(ErrorCode::InvalidParam, "ODE dimension must be positive");
  if (!(opt.rel_tol > 0.0) || !(opt.abs_tol >= 0.0)) fail(ErrorCode::InvalidParam, "invalid ODE tolerances");
  const int en = opt.error_dim > 0 ? std::min(opt.error_dim, n) : n;
  const double dir = t1 >= t0 ? 1.0 : -1.0;

  OdeResult res;
  res.t = t0;
  res.y.assign(y0, y0 + n);
  std::vector<double> y(y0, y0 + n), y1(n), ys(n), k1(n), k2(n), k3(n), k4(n), k5(n), k6(n), k7(n), err(n);

  switch (rhs(t0, y.data(), k1.data())) {
    case RhsStatus::Ok: break;
    case RhsStatus::Outside: res.status = OdeStatus::Blocked; return res;
    case RhsStatus::NonFinite: fail(ErrorCode::NonFinite, "right-hand side is not finite at the initial point");
  }
  if (observer) observer(t0, y.data(), nullptr);
  if (t0 == t1) return res;

  auto norm = [&](const std::vector<double>& a, const std::vector<double>& b, const std::vector<double>& e) {
    double s = 0.0;
    for (int i = 0; i < en; ++i) {
      const double sk = opt.abs_tol + opt.rel_tol * std::max(std::abs(a[i]), std::abs(b[i]));
      const double r = sk > 0.0 ? e[i] / sk : (e[i] == 0.0 ? 0.0 : 1e300);
      s += r * r;
    }
    return std::sqrt(s / en);
  };

  auto cap_of = [&](double t, const double* state) {
    double cap = opt.max_step;
    if (opt.step_cap) cap = std::min(cap, opt.step_cap(t, state));
    return std::max(cap, opt.min_step);
  };

  // Initial step guess following Hairer-Norsett-Wanner.
  double h = opt.initial_step;
  if (!(h > 0.0)) {
    double dnf = 0.0, dny = 0.0;
    for (int i = 0; i < en; ++i) {
      const double sk = opt.abs_tol + opt.rel_tol * std::abs(y[i]);
      if (sk > 0.0) {
        dnf += (k1[i] / sk) * (k1[i] / sk);
        dny += (y[i] / sk) * (y[i] / sk);
      }
    }
    h = (dnf <= 1e-10 || dny <= 1e-10) ? 1e-6 : std::sqrt(dny / dnf) * 0.01;
    h = std::min(h, std::abs(t1 - t0));
  }
  h = std::min(h, cap_of(t0, y.data()));

  double t = t0;
  double facold = 1e-4;
  bool last_rejected = false;
  std::size_t steps = 0;
  DenseSegment seg;

  while (dir * (t1 - t) > 0.0) {
    if (steps++ >= opt.max_steps) {
      res.status = OdeStatus::MaxSteps;
      break;
    }
    h = std::min(h, cap_of(t, y.data()));
    bool final_step = false;
    if (h >= std::abs(t1 - t)) {
      h = std::abs(t1 - t);
      final_step = true;
    }
    const double hs = dir * h;

    RhsStatus status = RhsStatus::Ok;
    auto stage = [&](double tc, std::vector<double>& out, auto&& combine) {
      for (int i = 0; i < n; ++i) ys[i] = y[i] + hs * combine(i);
      status = rhs(tc, ys.data(), out.data());
      return status == RhsStatus::Ok;
    };
    bool ok = stage(t + c2 * hs, k2, [&](int i) { return a21 * k1[i]; }) &&
              stage(t + c3 * hs, k3, [&](int i) { return a31 * k1[i] + a32 * k2[i]; }) &&
              stage(t + c4 * hs, k4, [&](int i) { return a41 * k1[i] + a42 * k2[i] + a43 * k3[i]; }) &&
              stage(t + c5 * hs, k5, [&](int i) { return a51 * k1[i] + a52 * k2[i] + a53 * k3[i] + a54 * k4[i]; }) &&
              stage(t + hs, k6, [&](int i) {
                return a61 * k1[i] + a62 * k2[i] + a63 * k3[i] + a64 * k4[i] + a65 * k5[i];
              });
    if (ok) {
      for (int i = 0; i < n; ++i)
        y1[i] = y[i] + hs * (a71 * k1[i] + a73 * k3[i] + a74 * k4[i] + a75 * k5[i] + a76 * k6[i]);
      const double tn = final_step ? t1 : t + hs;
      status = rhs(tn, y1.data(), k7.data());
      ok = status == RhsStatus::Ok;
    }
    if (!ok) {
      ++res.rejected;
      if (h <= opt.min_step) {
        res.status = status == RhsStatus::Outside ? OdeStatus::Blocked : OdeStatus::StepUnderflow;
        break;
      }
      h = std::max(status == RhsStatus::Outside ? 0.5 * h : 0.1 * h, opt.min_step);
      last_rejected = true;
      continue;
    }

    for (int i = 0; i < n; ++i)
      err[i] = hs * (e1 * k1[i] + e3 * k3[i] + e4 * k4[i] + e5 * k5[i] + e6 * k6[i] + e7 * k7[i]);
    double e = norm(y, y1, err);
    if (!std::isfinite(e)) e = 1e10;

    const double fac11 = std::pow(std::max(e, 1e-300), 0.2 - kBeta * 0.75);
    if (e <= 1.0) {
      if (want_dense || observer) {
        seg.t0 = t;
        seg.h = hs;
        seg.coeffs.resize(5 * static_cast<std::size_t>(n));
        for (int i = 0; i < n; ++i) {
          const double ydiff = y1[i] - y[i];
          const double bspl = hs * k1[i] - ydiff;
          seg.coeffs[i] = y[i];
          seg.coeffs[n + i] = ydiff;
          seg.coeffs[2 * n + i] = bspl;
          seg.coeffs[3 * n + i] = ydiff - hs * k7[i] - bspl;
          seg.coeffs[4 * n + i] =
              hs * (d1 * k1[i] + d3 * k3[i] + d4 * k4[i] + d5 * k5[i] + d6 * k6[i] + d7 * k7[i]);
        }
      }
      double fac = fac11 / std::pow(facold, kBeta);
      fac = std::clamp(fac / kSafety, kFacMin, kFacMax);
      double hnew = h / fac;
      facold = std::max(e, 1e-4);
      t = final_step ? t1 : t + hs;
      y.swap(y1);
      k1.swap(k7);
      ++res.accepted;
      if (observer) observer(t, y.data(), &seg);
      if (last_rejected) hnew = std::min(hnew, h);
      last_rejected = false;
      h = hnew;
    } else {
      ++res.rejected;
      if (h <= opt.min_step) {
        res.status = OdeStatus::StepUnderflow;
        break;
      }
      h = std::max(h / std::min(1.0 / kFacMin, fac11 / kSafety), opt.min_step);
      last_rejected = true;
    }
  }
  res.t = t;
  res.y = y;
  return res;
}

}  // namespace roughflow
