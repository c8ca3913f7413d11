#include "roughflow/field.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <sstream>

#include "roughflow/error.hpp"

namespace roughflow {

Box::Box(std::vector<double> lo, std::vector<double> hi) : lo_(std::move(lo)), hi_(std::move(hi)) {
  if (lo_.size() != hi_.size() || lo_.empty()) fail(ErrorCode::InvalidParam, "box bounds mismatch");
  for (std::size_t i = 0; i < lo_.size(); ++i) {
    if (std::isnan(lo_[i]) || std::isnan(hi_[i]) || !(lo_[i] < hi_[i]))
      fail(ErrorCode::InvalidParam, "box axis " + std::to_string(i) + " is empty");
  }
}

Box Box::unbounded(int dim) {
  const double inf = std::numeric_limits<double>::infinity();
  return Box(std::vector<double>(dim, -inf), std::vector<double>(dim, inf));
}

Box Box::interval(double lo, double hi) { return Box({lo}, {hi}); }

bool Box::contains(const Vec& x) const {
  if (x.size() != dim()) return false;
  for (int i = 0; i < dim(); ++i)
    if (!(x(i) >= lo_[i] && x(i) <= hi_[i])) return false;
  return true;
}

bool Box::bounded() const {
  for (int i = 0; i < dim(); ++i)
    if (!std::isfinite(lo_[i]) || !std::isfinite(hi_[i])) return false;
  return true;
}

double Box::volume() const {
  double v = 1.0;
  for (int i = 0; i < dim(); ++i) v *= hi_[i] - lo_[i];
  return v;
}

double Box::distance_to_boundary(const Vec& x) const {
  double d = std::numeric_limits<double>::infinity();
  for (int i = 0; i < dim(); ++i) d = std::min({d, x(i) - lo_[i], hi_[i] - x(i)});
  return std::max(d, 0.0);
}

bool Box::subset_of(const Box& other) const {
  if (other.dim() != dim()) return false;
  for (int i = 0; i < dim(); ++i)
    if (lo_[i] < other.lo_[i] || hi_[i] > other.hi_[i]) return false;
  return true;
}

MatrixSample MatrixSample::from(const Mat& m) { return {m, roughflow::op_norm(m), m.trace()}; }

struct VectorField::Impl {
  int dim;
  Interval time;
  Box domain;
  Evaluator evaluator;
  JacobianFn jacobian;
  JacobianMode mode;
  FieldTraits traits;
};

VectorField::VectorField(int dim, Interval time, Box domain, Evaluator evaluator,
                         JacobianFn analytic_jacobian, JacobianMode mode, FieldTraits traits) {
  if (dim < 1 || dim > kMaxDim)
    fail(ErrorCode::InvalidParam, "field dimension must lie in [1, " + std::to_string(kMaxDim) + "]");
  if (domain.dim() != dim) fail(ErrorCode::InvalidParam, "domain dimension does not match field");
  if (!evaluator) fail(ErrorCode::InvalidParam, "field needs an evaluator");
  if (mode.kind == JacobianMode::Kind::Analytic && !analytic_jacobian)
    fail(ErrorCode::InvalidParam, "analytic Jacobian mode requires an analytic Jacobian");
  if (mode.kind == JacobianMode::Kind::CentralDifference && mode.step < 0.0)
    fail(ErrorCode::InvalidParam, "difference step must be nonnegative");
  if (!traits.singular_coords.empty() && static_cast<int>(traits.singular_coords.size()) != dim)
    fail(ErrorCode::InvalidParam, "singular coordinate list must have one entry per axis");
  if (!traits.jacobian_jumps.empty() && static_cast<int>(traits.jacobian_jumps.size()) != dim)
    fail(ErrorCode::InvalidParam, "Jacobian jump list must have one entry per axis");
  std::sort(traits.time_breakpoints.begin(), traits.time_breakpoints.end());
  impl_ = std::make_shared<const Impl>(Impl{dim, time, std::move(domain), std::move(evaluator),
                                            std::move(analytic_jacobian), mode, std::move(traits)});
}

VectorField::VectorField(std::shared_ptr<const Impl> impl) : impl_(std::move(impl)) {}

int VectorField::dim() const { return impl_->dim; }
const Interval& VectorField::time_interval() const { return impl_->time; }
const Box& VectorField::domain() const { return impl_->domain; }
const FieldTraits& VectorField::traits() const { return impl_->traits; }
const JacobianMode& VectorField::jacobian_mode() const { return impl_->mode; }
bool VectorField::has_analytic_jacobian() const { return static_cast<bool>(impl_->jacobian); }

bool VectorField::in_domain(double t, const Vec& x) const {
  if (!impl_->time.contains(t)) return false;
  if (!impl_->domain.contains(x)) return false;
  if (impl_->traits.membership && !impl_->traits.membership(x)) return false;
  return true;
}

EvalStatus VectorField::try_eval(double t, const Vec& x, Vec& out) const {
  if (!in_domain(t, x)) return EvalStatus::OutOfDomain;
  out = impl_->evaluator(t, x);
  if (out.size() != impl_->dim) return EvalStatus::NonFinite;
  for (int i = 0; i < impl_->dim; ++i)
    if (!std::isfinite(out(i))) return EvalStatus::NonFinite;
  return EvalStatus::Ok;
}

Vec VectorField::eval(double t, const Vec& x) const {
  Vec out;
  switch (try_eval(t, x, out)) {
    case EvalStatus::Ok: return out;
    case EvalStatus::OutOfDomain: fail(ErrorCode::OutOfDomain, "point outside the field's domain");
    case EvalStatus::NonFinite: fail(ErrorCode::NonFinite, "field evaluator returned a non-finite value");
  }
  return out;
}

Mat VectorField::difference_jacobian(double t, const Vec& x) const {
  const int n = dim();
  Mat jac(n, n);
  const double base_step = std::cbrt(std::numeric_limits<double>::epsilon());
  for (int i = 0; i < n; ++i) {
    const double h = impl_->mode.step > 0.0 ? impl_->mode.step : base_step * std::max(1.0, std::abs(x(i)));
    Vec xp = x, xm = x;
    xp(i) += h;
    xm(i) -= h;
    if (!in_domain(t, xp) || !in_domain(t, xm))
      fail(ErrorCode::StencilOutsideDomain, "difference stencil leaves the domain");
    jac.col(i) = (eval(t, xp) - eval(t, xm)) / (xp(i) - xm(i));
  }
  return jac;
}

Mat VectorField::jacobian_matrix(double t, const Vec& x) const {
  if (!in_domain(t, x)) fail(ErrorCode::OutOfDomain, "point outside the field's domain");
  if (impl_->mode.kind == JacobianMode::Kind::CentralDifference) return difference_jacobian(t, x);
  Mat jac = impl_->jacobian(t, x);
  if (jac.rows() != dim() || jac.cols() != dim())
    fail(ErrorCode::InvalidParam, "analytic Jacobian has wrong shape");
  if (!jac.allFinite()) fail(ErrorCode::NonFinite, "analytic Jacobian is not finite");
  return jac;
}

MatrixSample VectorField::jacobian(double t, const Vec& x) const {
  return MatrixSample::from(jacobian_matrix(t, x));
}

double VectorField::divergence(double t, const Vec& x) const { return jacobian_matrix(t, x).trace(); }

std::vector<std::vector<double>> VectorField::quadrature_breaks() const {
  std::vector<std::vector<double>> out(dim());
  for (int i = 0; i < dim(); ++i) {
    if (static_cast<std::size_t>(i) < impl_->traits.singular_coords.size())
      out[i] = impl_->traits.singular_coords[i];
    if (static_cast<std::size_t>(i) < impl_->traits.jacobian_jumps.size())
      out[i].insert(out[i].end(), impl_->traits.jacobian_jumps[i].begin(), impl_->traits.jacobian_jumps[i].end());
  }
  return out;
}

double VectorField::distance_to_singular(const Vec& x) const {
  double d = std::numeric_limits<double>::infinity();
  const auto& coords = impl_->traits.singular_coords;
  for (std::size_t i = 0; i < coords.size(); ++i)
    for (double c : coords[i]) d = std::min(d, std::abs(x(static_cast<int>(i)) - c));
  return d;
}

VectorField VectorField::with_jacobian_mode(JacobianMode mode) const {
  if (mode.kind == JacobianMode::Kind::Analytic && !impl_->jacobian)
    fail(ErrorCode::InvalidParam, "field has no analytic Jacobian");
  auto copy = std::make_shared<Impl>(*impl_);
  copy->mode = mode;
  return VectorField(std::shared_ptr<const Impl>(std::move(copy)));
}

VectorField VectorField::restricted(const Box& box) const {
  if (box.dim() != dim()) fail(ErrorCode::InvalidParam, "restriction box has wrong dimension");
  std::vector<double> lo(dim()), hi(dim());
  for (int i = 0; i < dim(); ++i) {
    lo[i] = std::max(box.lo(i), impl_->domain.lo(i));
    hi[i] = std::min(box.hi(i), impl_->domain.hi(i));
  }
  auto copy = std::make_shared<Impl>(*impl_);
  copy->domain = Box(lo, hi);
  return VectorField(std::shared_ptr<const Impl>(std::move(copy)));
}

VectorField VectorField::with_traits(FieldTraits traits) const {
  auto copy = std::make_shared<Impl>(*impl_);
  copy->traits = std::move(traits);
  return VectorField(std::shared_ptr<const Impl>(std::move(copy)));
}

VectorField extend_dim(const VectorField& field, int m) {
  if (m < 1) fail(ErrorCode::InvalidParam, "extension size must be at least 1");
  const int n = field.dim();
  const int total = n + m;
  if (total > kMaxDim) fail(ErrorCode::InvalidParam, "extended dimension exceeds the supported maximum");

  std::vector<double> lo = field.domain().lower(), hi = field.domain().upper();
  lo.resize(total, -std::numeric_limits<double>::infinity());
  hi.resize(total, std::numeric_limits<double>::infinity());

  auto evaluator = [field, n, total](double t, const Vec& z) {
    Vec out = Vec::Zero(total);
    out.head(n) = field.eval(t, z.head(n));
    return out;
  };
  auto jacobian = [field, n, total](double t, const Vec& z) {
    Mat out = Mat::Zero(total, total);
    out.topLeftCorner(n, n) = field.jacobian_matrix(t, z.head(n));
    return out;
  };

  FieldTraits traits = field.traits();
  traits.label = traits.label + "+zero" + std::to_string(m);
  if (!traits.singular_coords.empty()) traits.singular_coords.resize(total);
  if (!traits.jacobian_jumps.empty()) traits.jacobian_jumps.resize(total);
  if (traits.membership) {
    auto inner = traits.membership;
    traits.membership = [inner, n](const Vec& z) { return inner(z.head(n)); };
  }
  return VectorField(total, field.time_interval(), Box(lo, hi), evaluator, jacobian,
                     JacobianMode::analytic(), std::move(traits));
}

namespace {

std::vector<double> parse_csv_line(const std::string& line, const std::string& path, int lineno) {
  std::vector<double> values;
  std::stringstream ss(line);
  std::string cell;
  while (std::getline(ss, cell, ',')) {
    try {
      std::size_t used = 0;
      values.push_back(std::stod(cell, &used));
    } catch (const std::exception&) {
      fail(ErrorCode::Io, path + ":" + std::to_string(lineno) + ": not a number: '" + cell + "'");
    }
  }
  return values;
}

struct GridData {
  int n = 0;
  std::vector<double> slice_times;
  std::vector<double> lo, hi;
  std::vector<int> nodes;
  std::vector<double> samples;  // slice-major, then node-major, then component
  std::size_t nodes_per_slice = 0;

  std::size_t slice_of(double t) const {
    auto it = std::upper_bound(slice_times.begin(), slice_times.end(), t);
    if (it == slice_times.begin()) return 0;
    return static_cast<std::size_t>(it - slice_times.begin()) - 1;
  }

  Vec interpolate(double t, const Vec& x) const {
    const std::size_t slice = slice_of(t);
    std::vector<int> base(n);
    std::vector<double> frac(n);
    for (int i = 0; i < n; ++i) {
      const double h = (hi[i] - lo[i]) / (nodes[i] - 1);
      double u = (x(i) - lo[i]) / h;
      int k = static_cast<int>(std::floor(u));
      k = std::clamp(k, 0, nodes[i] - 2);
      base[i] = k;
      frac[i] = std::clamp(u - k, 0.0, 1.0);
    }
    Vec out = Vec::Zero(n);
    for (int corner = 0; corner < (1 << n); ++corner) {
      double w = 1.0;
      std::size_t idx = 0;
      for (int i = 0; i < n; ++i) {
        const int bit = (corner >> i) & 1;
        w *= bit ? frac[i] : 1.0 - frac[i];
        idx = idx * nodes[i] + static_cast<std::size_t>(base[i] + bit);
      }
      if (w == 0.0) continue;
      const double* row = &samples[(slice * nodes_per_slice + idx) * n];
      for (int c = 0; c < n; ++c) out(c) += w * row[c];
    }
    return out;
  }
};

}  // namespace

VectorField load_grid_field(const std::string& path) {
  std::ifstream in(path);
  if (!in) fail(ErrorCode::Io, "cannot open field grid '" + path + "'");
  std::vector<std::vector<double>> rows;
  std::string line;
  int lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.empty() || line[0] == '#') continue;
    rows.push_back(parse_csv_line(line, path, lineno));
  }
  if (rows.size() < 4) fail(ErrorCode::Io, path + ": truncated header");

  auto grid = std::make_shared<GridData>();
  if (rows[0].size() != 2) fail(ErrorCode::Io, path + ": first row must be 'n, nt'");
  grid->n = static_cast<int>(rows[0][0]);
  const int nt = static_cast<int>(rows[0][1]);
  const int n = grid->n;
  if (n < 1 || n > kMaxDim || nt < 1) fail(ErrorCode::Io, path + ": bad dimension or slice count");
  grid->slice_times = rows[1];
  if (static_cast<int>(grid->slice_times.size()) != nt ||
      !std::is_sorted(grid->slice_times.begin(), grid->slice_times.end()))
    fail(ErrorCode::Io, path + ": slice times must list nt increasing values");
  if (static_cast<int>(rows[2].size()) != 2 * n) fail(ErrorCode::Io, path + ": box row needs 2n values");
  if (static_cast<int>(rows[3].size()) != n) fail(ErrorCode::Io, path + ": shape row needs n values");
  grid->nodes_per_slice = 1;
  for (int i = 0; i < n; ++i) {
    grid->lo.push_back(rows[2][2 * i]);
    grid->hi.push_back(rows[2][2 * i + 1]);
    grid->nodes.push_back(static_cast<int>(rows[3][i]));
    if (grid->nodes.back() < 2) fail(ErrorCode::Io, path + ": each axis needs at least 2 nodes");
    grid->nodes_per_slice *= static_cast<std::size_t>(grid->nodes.back());
  }
  const std::size_t expected = grid->nodes_per_slice * static_cast<std::size_t>(nt);
  if (rows.size() - 4 != expected)
    fail(ErrorCode::Io, path + ": expected " + std::to_string(expected) + " sample rows, found " +
                            std::to_string(rows.size() - 4));
  grid->samples.reserve(expected * n);
  for (std::size_t r = 4; r < rows.size(); ++r) {
    if (static_cast<int>(rows[r].size()) != n) fail(ErrorCode::Io, path + ": sample row with wrong width");
    for (double v : rows[r]) {
      if (!std::isfinite(v)) fail(ErrorCode::NonFinite, path + ": non-finite sample");
      grid->samples.push_back(v);
    }
  }

  FieldTraits traits;
  traits.label = "grid:" + path;
  traits.autonomous = nt == 1;
  traits.time_breakpoints.assign(grid->slice_times.begin() + 1, grid->slice_times.end());
  Interval time{grid->slice_times.front(), std::numeric_limits<double>::infinity()};
  if (nt == 1) time.lo = -std::numeric_limits<double>::infinity();
  auto evaluator = [grid](double t, const Vec& x) { return grid->interpolate(t, x); };
  return VectorField(n, time, Box(grid->lo, grid->hi), evaluator, nullptr,
                     JacobianMode::central_difference(), std::move(traits));
}

}  // namespace roughflow
