#include "tcrisis/problem.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <memory>
#include <random>

#include <Eigen/SVD>

namespace tcrisis {
namespace {

constexpr int kMaxPolyVars = 64;

const Vec& empty_vec() {
  static const Vec kEmpty(0);
  return kEmpty;
}

}  // namespace

SmoothMap::SmoothMap(int nx, int nu, int out_dim, int order, ValueFn value,
                     JacobianFn jacobian, HessianFn hessian)
    : nx_(nx),
      nu_(nu),
      out_dim_(out_dim),
      order_(order),
      value_(std::move(value)),
      jacobian_(std::move(jacobian)),
      hessian_(std::move(hessian)) {
  if (order_ != 1 && order_ != 2) {
    throw std::invalid_argument("smoothness order must be 1 or 2");
  }
  if (order_ == 2 && !hessian_) {
    throw std::invalid_argument("order-2 map needs a Hessian evaluator");
  }
}

SmoothMap SmoothMap::from_polynomials(int nx, int nu,
                                      std::vector<Polynomial> outputs) {
  for (const auto& p : outputs) {
    if (p.num_vars() != nx + nu) {
      throw std::invalid_argument("polynomial variable count mismatch");
    }
  }
  const int out = static_cast<int>(outputs.size());
  const int nz = nx + nu;
  auto shared = std::make_shared<const std::vector<Polynomial>>(
      std::move(outputs));
  auto pack = [nx, nu](const Vec& x, const Vec& u, double* z) {
    for (int i = 0; i < nx; ++i) z[i] = x[i];
    for (int i = 0; i < nu; ++i) z[nx + i] = u[i];
  };
  if (nz > kMaxPolyVars) {
    throw std::invalid_argument("polynomial maps support at most 64 inputs");
  }
  ValueFn value = [shared, pack](const Vec& x, const Vec& u,
                                 Eigen::Ref<Vec> result) {
    double z[kMaxPolyVars];
    pack(x, u, z);
    for (std::size_t i = 0; i < shared->size(); ++i) {
      result[i] = (*shared)[i].eval(z);
    }
  };
  JacobianFn jacobian = [shared, pack, nz](const Vec& x, const Vec& u,
                                           Eigen::Ref<Mat> result) {
    double z[kMaxPolyVars];
    double row[kMaxPolyVars];
    pack(x, u, z);
    for (std::size_t i = 0; i < shared->size(); ++i) {
      (*shared)[i].gradient(z, row);
      for (int j = 0; j < nz; ++j) result(i, j) = row[j];
    }
  };
  HessianFn hessian = [shared, pack, nz](const Vec& x, const Vec& u,
                                         int output, Eigen::Ref<Mat> result) {
    std::vector<double> z(nz);
    pack(x, u, z.data());
    Mat h(nz, nz);
    (*shared)[output].hessian(z.data(), h.data());
    result = h;
  };
  return SmoothMap(nx, nu, out, 2, std::move(value), std::move(jacobian),
                   std::move(hessian));
}

void SmoothMap::value(const Vec& x, const Vec& u, Eigen::Ref<Vec> out) const {
  value_(x, u, out);
}

Vec SmoothMap::value(const Vec& x, const Vec& u) const {
  Vec out(out_dim_);
  value_(x, u, out);
  return out;
}

void SmoothMap::jacobian(const Vec& x, const Vec& u,
                         Eigen::Ref<Mat> out) const {
  jacobian_(x, u, out);
}

Mat SmoothMap::jacobian(const Vec& x, const Vec& u) const {
  Mat out(out_dim_, in_dim());
  jacobian_(x, u, out);
  return out;
}

Mat SmoothMap::hessian(const Vec& x, const Vec& u, int output) const {
  if (order_ < 2) {
    throw std::logic_error("second derivative requested from a C^1 map");
  }
  Mat out(in_dim(), in_dim());
  hessian_(x, u, output, out);
  return out;
}

double SmoothMap::scalar(const Vec& x) const {
  // Works for state-only maps (g, phi) and control-only maps alike.
  Vec out(out_dim_);
  if (nx_ > 0) {
    value_(x, empty_vec(), out);
  } else {
    value_(empty_vec(), x, out);
  }
  return out[0];
}

Vec SmoothMap::gradient(const Vec& x) const {
  Mat jac(out_dim_, in_dim());
  if (nx_ > 0) {
    jacobian_(x, empty_vec(), jac);
  } else {
    jacobian_(empty_vec(), x, jac);
  }
  return jac.row(0).transpose();
}

Mat SmoothMap::hessian(const Vec& x) const {
  return nx_ > 0 ? hessian(x, empty_vec(), 0) : hessian(empty_vec(), x, 0);
}

void ProblemSpec::check() const {
  auto fail = [](const std::string& what) {
    throw std::invalid_argument(what);
  };
  if (!(horizon > 0.0)) fail("nonpositive horizon");
  if (n < 1 || m < 1) fail("state and control dimensions must be positive");
  if (f.empty() || g.empty() || c.empty() || phi.empty()) {
    fail("problem maps f, g, c, phi must all be set");
  }
  if (f.nx() != n || f.nu() != m || f.out_dim() != n) {
    fail("dimension mismatch in f");
  }
  if (g.nx() != n || g.nu() != 0 || g.out_dim() != 1) {
    fail("dimension mismatch in g");
  }
  if (c.nx() != 0 || c.nu() != m || c.out_dim() != l) {
    fail("dimension mismatch in c");
  }
  if (phi.nx() != n || phi.nu() != 0 || phi.out_dim() != 1) {
    fail("dimension mismatch in phi");
  }
  if (x0.size() != n) fail("dimension mismatch in x0");
  if (box_lower.size() != m || box_upper.size() != m) {
    fail("dimension mismatch in control box");
  }
  if ((box_upper.array() < box_lower.array()).any()) {
    fail("control box has lower > upper");
  }
  if (initial_guess && initial_guess->dim() != m) {
    fail("dimension mismatch in initial guess");
  }
}

Vec ProblemSpec::project_to_box(const Vec& u) const {
  return u.cwiseMax(box_lower).cwiseMin(box_upper);
}

bool ValidationReport::passed() const {
  return initial_state_interior &&
         std::all_of(maps.begin(), maps.end(),
                     [](const MapCheck& m) { return m.passed; });
}

namespace {

double relative_mismatch(const Mat& analytic, const Mat& numeric) {
  double worst = 0.0;
  for (Eigen::Index i = 0; i < analytic.size(); ++i) {
    const double denom = std::max(1.0, std::abs(numeric(i)));
    worst = std::max(worst, std::abs(analytic(i) - numeric(i)) / denom);
  }
  return worst;
}

MapCheck check_map(const std::string& name, const SmoothMap& map,
                   const std::vector<std::pair<Vec, Vec>>& points,
                   double jac_tol, double hess_tol) {
  MapCheck check;
  check.name = name;
  const int nz = map.in_dim();
  for (const auto& [x, u] : points) {
    Vec xs = x.head(map.nx());
    Vec us = u.head(map.nu());
    auto split = [&](const Vec& z, Vec& xo, Vec& uo) {
      xo = z.head(map.nx());
      uo = z.tail(map.nu());
    };
    Vec z(nz);
    z << xs, us;

    const Mat jac = map.jacobian(xs, us);
    Mat jac_fd(map.out_dim(), nz);
    for (int j = 0; j < nz; ++j) {
      const double h = 1e-6 * std::max(1.0, std::abs(z[j]));
      Vec zp = z, zm = z;
      zp[j] += h;
      zm[j] -= h;
      Vec xp, up, xm, um;
      split(zp, xp, up);
      split(zm, xm, um);
      jac_fd.col(j) = (map.value(xp, up) - map.value(xm, um)) / (2 * h);
    }
    check.jacobian_error =
        std::max(check.jacobian_error, relative_mismatch(jac, jac_fd));

    if (map.order() == 2) {
      for (int i = 0; i < map.out_dim(); ++i) {
        const Mat hess = map.hessian(xs, us, i);
        Mat hess_fd(nz, nz);
        for (int j = 0; j < nz; ++j) {
          const double h = 1e-5 * std::max(1.0, std::abs(z[j]));
          Vec zp = z, zm = z;
          zp[j] += h;
          zm[j] -= h;
          Vec xp, up, xm, um;
          split(zp, xp, up);
          split(zm, xm, um);
          hess_fd.col(j) = ((map.jacobian(xp, up) - map.jacobian(xm, um)) /
                            (2 * h))
                               .row(i)
                               .transpose();
        }
        check.hessian_error =
            std::max(check.hessian_error, relative_mismatch(hess, hess_fd));
      }
    }
  }
  check.passed = check.jacobian_error <= jac_tol &&
                 (map.order() < 2 || check.hessian_error <= hess_tol);
  return check;
}

}  // namespace

ValidationReport validate_spec(const ProblemSpec& spec, int samples,
                               std::uint64_t seed) {
  spec.check();
  ValidationReport report;
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> unit(-1.0, 1.0);
  std::uniform_real_distribution<double> fraction(0.0, 1.0);

  std::vector<std::pair<Vec, Vec>> points;
  for (int s = 0; s < samples; ++s) {
    Vec x = spec.x0;
    for (int i = 0; i < spec.n; ++i) x[i] += 2.0 * unit(rng);
    Vec u(spec.m);
    for (int i = 0; i < spec.m; ++i) {
      double lo = spec.box_lower[i];
      double hi = spec.box_upper[i];
      if (!std::isfinite(lo) || !std::isfinite(hi)) {
        lo = -1.0;
        hi = 1.0;
      }
      u[i] = lo + (hi - lo) * fraction(rng);
    }
    points.emplace_back(std::move(x), std::move(u));
  }

  // Control-only maps see the sampled control in their u slot.
  std::vector<std::pair<Vec, Vec>> control_points;
  for (const auto& [x, u] : points) control_points.emplace_back(Vec(0), u);

  report.maps.push_back(check_map("f", spec.f, points, report.jacobian_tol,
                                  report.hessian_tol));
  report.maps.push_back(check_map("g", spec.g, points, report.jacobian_tol,
                                  report.hessian_tol));
  report.maps.push_back(check_map("c", spec.c, control_points,
                                  report.jacobian_tol, report.hessian_tol));
  report.maps.push_back(check_map("phi", spec.phi, points,
                                  report.jacobian_tol, report.hessian_tol));

  report.g_at_x0 = spec.g.scalar(spec.x0);
  report.initial_state_interior = report.g_at_x0 < 0.0;
  return report;
}

std::vector<int> active_constraints(const ProblemSpec& spec, const Vec& u,
                                    double delta) {
  const Vec cu = spec.c.value(Vec(0), u);
  std::vector<int> active;
  for (int i = 0; i < spec.l; ++i) {
    if (cu[i] >= -delta) active.push_back(i);
  }
  return active;
}

ActiveSet active_set(const ProblemSpec& spec, const ControlSignal& control,
                     double delta) {
  ActiveSet set;
  set.delta = delta;
  set.per_cell.reserve(control.cells());
  for (int k = 0; k < control.cells(); ++k) {
    set.per_cell.push_back(active_constraints(spec, control.value(k), delta));
  }
  return set;
}

LigResult check_lig(const ProblemSpec& spec, const ControlSignal& control,
                    double delta, double epsilon) {
  LigResult result;
  result.margin = std::numeric_limits<double>::infinity();
  const Vec none(0);
  for (int k = 0; k < control.cells(); ++k) {
    const Vec u = control.value(k);
    const auto active = active_constraints(spec, u, delta);
    if (active.empty()) continue;
    const Mat jac = spec.c.jacobian(none, u);
    // Columns are the active gradients.
    Mat grads(spec.m, static_cast<int>(active.size()));
    for (std::size_t a = 0; a < active.size(); ++a) {
      grads.col(static_cast<int>(a)) = jac.row(active[a]).transpose();
    }
    double sigma = 0.0;
    if (static_cast<int>(active.size()) <= spec.m) {
      Eigen::JacobiSVD<Mat> svd(grads);
      sigma = svd.singularValues().minCoeff();
    }
    if (sigma < result.margin) {
      result.margin = sigma;
      result.worst_cell = k;
    }
  }
  result.satisfied = result.margin >= epsilon;
  return result;
}

}  // namespace tcrisis
