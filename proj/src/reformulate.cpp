#include "tcrisis/reformulate.hpp"

#include <algorithm>
#include <cmath>
#include <string>

namespace tcrisis {

CrossingVector::CrossingVector(std::vector<double> tau, double horizon)
    : tau_(std::move(tau)), horizon_(horizon) {
  if (!(horizon_ > 0.0)) throw std::invalid_argument("nonpositive horizon");
  double previous = 0.0;
  for (double t : tau_) {
    if (!(t > previous)) {
      throw std::invalid_argument("crossing times must increase inside (0, T)");
    }
    previous = t;
  }
  if (!tau_.empty() && !(tau_.back() < horizon_)) {
    throw std::invalid_argument("crossing times must increase inside (0, T)");
  }
}

double CrossingVector::at(int j) const {
  if (j == 0) return 0.0;
  if (j == r() + 1) return horizon_;
  return tau_.at(j - 1);
}

double pi_tau(double s, const CrossingVector& tau) {
  const int r = tau.r();
  if (!(s >= 0.0 && s <= r + 1)) {
    throw std::out_of_range("normalized time " + std::to_string(s) +
                            " outside [0, r+1]");
  }
  const int j = std::min(static_cast<int>(std::floor(s)), r);
  return tau.at(j) + (s - j) * tau.slope(j);
}

double pi_tau_inverse(double t, const CrossingVector& tau) {
  const int r = tau.r();
  if (!(t >= 0.0 && t <= tau.horizon())) {
    throw std::out_of_range("physical time " + std::to_string(t) +
                            " outside [0, T]");
  }
  int j = 0;
  while (j < r && t >= tau.at(j + 1)) ++j;
  return j + (t - tau.at(j)) / tau.slope(j);
}

ControlSignal to_normalized(const ControlSignal& control,
                            const CrossingVector& tau, int cells_per_arc) {
  if (cells_per_arc < 1) throw std::invalid_argument("cells_per_arc < 1");
  const int arcs = tau.r() + 1;
  const int cells = arcs * cells_per_arc;
  Mat values(control.dim(), cells);
  std::vector<double> nodes(cells + 1);
  for (int a = 0; a < arcs; ++a) {
    for (int k = 0; k < cells_per_arc; ++k) {
      const int cell = a * cells_per_arc + k;
      nodes[cell] = a + static_cast<double>(k) / cells_per_arc;
      const double mid = a + (k + 0.5) / cells_per_arc;
      values.col(cell) = control.at(pi_tau(mid, tau));
    }
  }
  nodes[cells] = arcs;
  return ControlSignal(std::move(nodes), std::move(values),
                       TimeDomain::kNormalized);
}

ControlSignal from_normalized(const ControlSignal& control,
                              const CrossingVector& tau) {
  std::vector<double> nodes(control.cells() + 1);
  for (int k = 0; k <= control.cells(); ++k) {
    nodes[k] = pi_tau(control.node(k), tau);
  }
  // Arc endpoints are exact.
  for (int k = 0; k <= control.cells(); ++k) {
    const double s = control.node(k);
    if (s == std::floor(s)) nodes[k] = tau.at(static_cast<int>(s));
  }
  return ControlSignal(std::move(nodes), control.values(),
                       TimeDomain::kPhysical);
}

int arc_of_cell(const ControlSignal& normalized, int cell) {
  return static_cast<int>(std::floor(normalized.midpoint(cell)));
}

Trajectory integrate_normalized(const ProblemSpec& spec,
                                const ControlSignal& normalized,
                                const CrossingVector& tau, int substeps) {
  if (normalized.domain() != TimeDomain::kNormalized) {
    throw std::invalid_argument("integrate_normalized needs a normalized control");
  }
  std::vector<double> scale(normalized.cells());
  for (int k = 0; k < normalized.cells(); ++k) {
    const int arc = arc_of_cell(normalized, k);
    if (arc < 0 || arc > tau.r()) {
      throw std::invalid_argument("normalized control does not cover [0, r+1]");
    }
    scale[k] = tau.slope(arc);
  }
  return integrate_scaled(spec, normalized, std::move(scale), substeps);
}

double reformulated_objective(const ProblemSpec& spec, const Vec& final_state,
                              const CrossingVector& tau) {
  double sum = spec.phi.scalar(final_state);
  for (int j = 1; j <= tau.r(); ++j) sum += (j % 2 ? -1.0 : 1.0) * tau.at(j);
  return sum;
}

Vec eval_F(const ProblemSpec& spec, const Vec& y, const Vec& v,
           double horizon) {
  const int n = spec.n;
  const int m = spec.m;
  if (y.size() != 2 * n + 1 || v.size() != 2 * m) {
    throw std::invalid_argument("augmented state/control dimension mismatch");
  }
  const double xi = y[2 * n];
  Vec out(2 * n + 1);
  out.head(n) = xi * spec.f.value(y.head(n), v.head(m));
  out.segment(n, n) = (horizon - xi) * spec.f.value(y.segment(n, n), v.tail(m));
  out[2 * n] = 0.0;
  return out;
}

Vec eval_G(const ProblemSpec& spec, const Vec& y0, const Vec& y1) {
  const int n = spec.n;
  if (y0.size() != 2 * n + 1 || y1.size() != 2 * n + 1) {
    throw std::invalid_argument("augmented state dimension mismatch");
  }
  Vec out(2 * n + 2);
  out.head(n) = y0.head(n);
  out[n] = y0[2 * n];
  out.segment(n + 1, n) = y0.segment(n, n) - y1.head(n);
  out[2 * n + 1] = spec.g.scalar(y1.head(n));
  return out;
}

double eval_psi(const ProblemSpec& spec, const Vec& y, double horizon) {
  const int n = spec.n;
  return spec.phi.scalar(y.segment(n, n)) + horizon - y[2 * n];
}

bool in_C(const ProblemSpec& spec, const Vec& gval, double horizon,
          double tol) {
  const int n = spec.n;
  if (gval.size() != 2 * n + 2) return false;
  if ((gval.head(n) - spec.x0).cwiseAbs().maxCoeff() > tol) return false;
  const double xi = gval[n];
  if (!(xi > 0.0 && xi < horizon)) return false;
  if (gval.segment(n + 1, n).cwiseAbs().maxCoeff() > tol) return false;
  return std::abs(gval[2 * n + 1]) <= tol;
}

}  // namespace tcrisis
