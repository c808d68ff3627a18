#include "tcrisis/multipliers.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include <Eigen/SVD>

namespace tcrisis {
namespace {

int steps_per_arc(const Solution& solution) {
  return solution.n_arc * solution.physical_trajectory.substeps;
}

double median(std::vector<double> values) {
  if (values.empty()) return 0.0;
  const std::size_t mid = values.size() / 2;
  std::nth_element(values.begin(), values.begin() + mid, values.end());
  double upper = values[mid];
  if (values.size() % 2 == 1) return upper;
  const double lower =
      *std::max_element(values.begin(), values.begin() + mid);
  return 0.5 * (lower + upper);
}

// -f_x(x(t), u)^T p, with x(t) from the Hermite interpolant of step k.
Vec costate_rhs(const ProblemSpec& spec, const Trajectory& traj, int k,
                double t, const Vec& u, const Vec& p) {
  const Vec x = traj.dense(spec, k, t);
  const Mat jac = spec.f.jacobian(x, u);
  return -jac.leftCols(spec.n).transpose() * p;
}

// Integrates the costate of step k backward from its right end value.
Vec costate_step_back(const ProblemSpec& spec, const Trajectory& traj, int k,
                      const Vec& p_end, int refinement) {
  const Vec u = traj.control.value(traj.cell_of_step(k));
  const double t1 = traj.times[k + 1];
  const double h = traj.step_size(k) / refinement;
  Vec p = p_end;
  for (int i = 0; i < refinement; ++i) {
    const double tb = t1 - i * h;
    // Backward in time: dp/d(-t) = -rhs.
    const Vec k1 = -costate_rhs(spec, traj, k, tb, u, p);
    const Vec k2 = -costate_rhs(spec, traj, k, tb - 0.5 * h, u, p + 0.5 * h * k1);
    const Vec k3 = -costate_rhs(spec, traj, k, tb - 0.5 * h, u, p + 0.5 * h * k2);
    const Vec k4 = -costate_rhs(spec, traj, k, tb - h, u, p + h * k3);
    p += (h / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4);
  }
  return p;
}

double hamiltonian(const ProblemSpec& spec, const Vec& x, const Vec& p,
                   const Vec& u) {
  return p.dot(spec.f.value(x, u));
}

}  // namespace

Vec PontryaginCertificate::p_end(int k) const {
  for (int j = 0; j < r(); ++j) {
    if (crossing_nodes[j] == k + 1) return p_before.col(j);
  }
  return p.col(k + 1);
}

PontryaginCertificate PontryaginCertificate::scaled(double factor) const {
  PontryaginCertificate out = *this;
  out.alpha *= factor;
  out.gamma *= factor;
  out.p *= factor;
  out.p_before *= factor;
  out.p_after *= factor;
  out.nu *= factor;
  out.hamiltonian_arc *= factor;
  out.gamma_nlp *= factor;
  for (double& s : out.stationarity) s *= std::abs(factor);
  out.h0 = 0.0;  // H + 1_{K^c} is not homogeneous
  return out;
}

int arc_of_step(const Solution& solution, int k) {
  if (solution.r() == 0) return 0;
  return std::min(k / steps_per_arc(solution), solution.r());
}

namespace {

// Backward sweep of the adjoint equation. With `given` null the jump
// coefficients come from the Hamiltonian jump law; otherwise they are taken
// as given.
PontryaginCertificate backward_costate(const ProblemSpec& spec,
                                       const Solution& solution, double alpha,
                                       const Vec* given,
                                       const CertificateOptions& options) {
  const Trajectory& traj = solution.physical_trajectory;
  const int r = solution.r();
  const int last = traj.steps();
  PontryaginCertificate cert;
  cert.alpha = alpha;
  cert.times = traj.times;
  cert.gamma = Vec::Zero(r);
  cert.p.resize(spec.n, last + 1);
  cert.p_before.resize(spec.n, r);
  cert.p_after.resize(spec.n, r);
  for (int j = 1; j <= r; ++j) {
    cert.crossing_nodes.push_back(j * steps_per_arc(solution));
  }

  Vec p = alpha * spec.phi.gradient(traj.final_state());
  cert.p.col(last) = p;
  for (int k = last; k >= 1; --k) {
    const auto hit = std::find(cert.crossing_nodes.begin(),
                               cert.crossing_nodes.end(), k);
    if (hit != cert.crossing_nodes.end()) {
      const int j = static_cast<int>(hit - cert.crossing_nodes.begin()) + 1;
      const Vec x = traj.states.col(k);
      const Vec grad_g = spec.g.gradient(x);
      double gamma = 0.0;
      if (given) {
        gamma = (*given)[j - 1];
      } else {
        const Vec u_before = traj.control.value(traj.cell_of_step(k - 1));
        const Vec u_after = traj.control.value(traj.cell_of_step(k));
        const Vec f_before = spec.f.value(x, u_before);
        const double h_after = hamiltonian(spec, x, p, u_after);
        // Exit crossings (odd j) lower H by alpha, entries raise it.
        const double h_before = h_after + (j % 2 ? alpha : -alpha);
        const double normal = grad_g.dot(f_before);
        if (std::abs(normal) < options.transversality_tol) {
          throw AssumptionViolation(
              "nontransverse, gamma undefined at crossing " +
              std::to_string(j));
        }
        gamma = (p.dot(f_before) - h_before) / normal;
      }
      cert.gamma[j - 1] = gamma;
      cert.p_after.col(j - 1) = p;
      p = p - gamma * grad_g;
      cert.p_before.col(j - 1) = p;
    }
    p = costate_step_back(spec, traj, k - 1, p, options.backward_refinement);
    cert.p.col(k - 1) = p;
  }
  return cert;
}

}  // namespace

PontryaginCertificate compute_costate(const ProblemSpec& spec,
                                      const Solution& solution,
                                      const CertificateOptions& options) {
  return backward_costate(spec, solution, 1.0, nullptr, options);
}

PontryaginCertificate costate_with_jumps(const ProblemSpec& spec,
                                         const Solution& solution,
                                         double alpha, const Vec& gamma,
                                         const CertificateOptions& options) {
  if (gamma.size() != solution.r()) {
    throw std::invalid_argument("one jump coefficient per crossing expected");
  }
  return backward_costate(spec, solution, alpha, &gamma, options);
}

std::vector<bool> outside_steps(const ProblemSpec& spec,
                                const Solution& solution) {
  const Trajectory& traj = solution.physical_trajectory;
  std::vector<bool> out(traj.steps());
  for (int k = 0; k < traj.steps(); ++k) {
    const double tm = 0.5 * (traj.times[k] + traj.times[k + 1]);
    out[k] = spec.g.scalar(traj.dense(spec, k, tm)) > 0.0;
  }
  return out;
}

void compute_nu(const ProblemSpec& spec, const Solution& solution,
                PontryaginCertificate& cert,
                const CertificateOptions& options) {
  const Trajectory& traj = solution.physical_trajectory;
  const ControlSignal& control = traj.control;
  const int cells = control.cells();
  const int sub = traj.substeps;
  cert.nu = Mat::Zero(spec.l, cells);
  cert.stationarity.assign(cells, 0.0);
  cert.rank_deficient.assign(cells, false);
  const Vec none(0);
  for (int c = 0; c < cells; ++c) {
    const Vec u = control.value(c);
    const double tm = control.midpoint(c);
    const int k = c * sub + sub / 2 - (sub % 2 == 0 ? 1 : 0);
    const double theta =
        std::clamp((tm - traj.times[k]) / traj.step_size(k), 0.0, 1.0);
    const Vec x = traj.dense(spec, k, tm);
    const Vec p = (1 - theta) * cert.p_start(k) + theta * cert.p_end(k);
    const Vec grad_u_h = spec.f.jacobian(x, u).rightCols(spec.m).transpose() * p;
    const auto active = active_constraints(spec, u, options.active_delta);
    if (active.empty()) {
      cert.stationarity[c] = grad_u_h.norm();
      continue;
    }
    const Mat jac = spec.c.jacobian(none, u);
    Mat grads(spec.m, static_cast<int>(active.size()));
    for (std::size_t a = 0; a < active.size(); ++a) {
      grads.col(static_cast<int>(a)) = jac.row(active[a]).transpose();
    }
    Eigen::JacobiSVD<Mat> svd(grads, Eigen::ComputeThinU | Eigen::ComputeThinV);
    const Vec sv = svd.singularValues();
    if (static_cast<int>(active.size()) > spec.m ||
        sv.minCoeff() < options.rank_tol) {
      cert.rank_deficient[c] = true;
    }
    svd.setThreshold(options.rank_tol);
    const Vec nu_active = svd.solve(-grad_u_h);
    for (std::size_t a = 0; a < active.size(); ++a) {
      cert.nu(active[a], c) = nu_active[static_cast<int>(a)];
    }
    cert.stationarity[c] = (grad_u_h + grads * nu_active).norm();
  }
}

HamiltonianSamples sample_hamiltonian(const ProblemSpec& spec,
                                      const Solution& solution,
                                      const PontryaginCertificate& cert) {
  const Trajectory& traj = solution.physical_trajectory;
  HamiltonianSamples out;
  const int steps = traj.steps();
  out.start.resize(steps);
  out.end.resize(steps);
  out.mid.resize(steps);
  for (int k = 0; k < steps; ++k) {
    const Vec u = traj.control.value(traj.cell_of_step(k));
    const Vec p0 = cert.p_start(k);
    const Vec p1 = cert.p_end(k);
    out.start[k] = hamiltonian(spec, traj.states.col(k), p0, u);
    out.end[k] = hamiltonian(spec, traj.states.col(k + 1), p1, u);
    const double tm = 0.5 * (traj.times[k] + traj.times[k + 1]);
    out.mid[k] =
        hamiltonian(spec, traj.dense(spec, k, tm), 0.5 * (p0 + p1), u);
  }
  return out;
}

namespace {

Vec arc_medians(const Solution& solution, const HamiltonianSamples& h) {
  const int arcs = solution.r() + 1;
  std::vector<std::vector<double>> per_arc(arcs);
  for (std::size_t k = 0; k < h.start.size(); ++k) {
    const int arc = arc_of_step(solution, static_cast<int>(k));
    per_arc[arc].push_back(h.start[k]);
    per_arc[arc].push_back(h.end[k]);
  }
  Vec out(arcs);
  for (int a = 0; a < arcs; ++a) out[a] = median(per_arc[a]);
  return out;
}

}  // namespace

Vec arc_hamiltonian_deviation(const ProblemSpec& spec,
                              const Solution& solution,
                              const PontryaginCertificate& cert) {
  const HamiltonianSamples h = sample_hamiltonian(spec, solution, cert);
  const Vec medians = arc_medians(solution, h);
  Vec dev = Vec::Zero(medians.size());
  for (std::size_t k = 0; k < h.start.size(); ++k) {
    const int arc = arc_of_step(solution, static_cast<int>(k));
    dev[arc] = std::max({dev[arc], std::abs(h.start[k] - medians[arc]),
                         std::abs(h.end[k] - medians[arc])});
  }
  return dev;
}

double h0_deviation(const ProblemSpec& spec, const Solution& solution,
                    const PontryaginCertificate& cert) {
  const HamiltonianSamples h = sample_hamiltonian(spec, solution, cert);
  const std::vector<bool> outside = outside_steps(spec, solution);
  std::vector<double> values;
  for (std::size_t k = 0; k < h.start.size(); ++k) {
    const double indicator = outside[k] ? 1.0 : 0.0;
    values.push_back(h.start[k] + indicator);
    values.push_back(h.end[k] + indicator);
  }
  const double center = median(values);
  double dev = 0.0;
  for (double v : values) dev = std::max(dev, std::abs(v - center));
  return dev;
}

Vec rho_weighted_integral(const ProblemSpec& spec, const Solution& solution,
                          const PontryaginCertificate& cert) {
  const Trajectory& traj = solution.physical_trajectory;
  const HamiltonianSamples h = sample_hamiltonian(spec, solution, cert);
  const int r = solution.r();
  Vec arc_integral = Vec::Zero(r + 1);
  for (int k = 0; k < traj.steps(); ++k) {
    arc_integral[arc_of_step(solution, k)] += traj.step_size(k) * h.mid[k];
  }
  Vec out(r);
  for (int j = 1; j <= r; ++j) {
    out[j - 1] = arc_integral[j - 1] / solution.tau.slope(j - 1) -
                 arc_integral[j] / solution.tau.slope(j);
  }
  return out;
}

PontryaginCertificate build_certificate(const ProblemSpec& spec,
                                        const Solution& solution,
                                        const CertificateOptions& options) {
  PontryaginCertificate cert = compute_costate(spec, solution, options);
  compute_nu(spec, solution, cert, options);
  const HamiltonianSamples h = sample_hamiltonian(spec, solution, cert);
  cert.hamiltonian_arc = arc_medians(solution, h);
  const std::vector<bool> outside = outside_steps(spec, solution);
  std::vector<double> h0;
  for (std::size_t k = 0; k < h.start.size(); ++k) {
    const double indicator = outside[k] ? 1.0 : 0.0;
    h0.push_back(h.start[k] + indicator);
    h0.push_back(h.end[k] + indicator);
  }
  cert.h0 = median(std::move(h0));
  if (solution.equality_multipliers.size() == solution.r()) {
    cert.gamma_nlp = -solution.equality_multipliers;
  }
  return cert;
}

AugmentedCertificate map_to_augmented(const ProblemSpec& spec,
                                      const Solution& solution,
                                      const PontryaginCertificate& cert,
                                      double tol) {
  if (solution.r() != 1) {
    throw std::invalid_argument("augmented mapping defined for r = 1");
  }
  const Trajectory& traj = solution.physical_trajectory;
  const int per_arc = steps_per_arc(solution);
  const double tau = solution.tau.at(1);
  const double horizon = spec.horizon;
  const int n = spec.n;

  AugmentedCertificate aug;
  aug.alpha = cert.alpha;
  aug.s.resize(per_arc + 1);
  aug.p1.resize(n, per_arc + 1);
  aug.p2.resize(n, per_arc + 1);
  for (int k = 0; k <= per_arc; ++k) {
    aug.s[k] = solution.normalized_trajectory.times[k];
    aug.p1.col(k) = k == per_arc ? Vec(cert.p_before.col(0)) : Vec(cert.p.col(k));
    aug.p2.col(k) = cert.p.col(per_arc + k);
  }
  aug.beta1 = -aug.p1.col(0);
  aug.beta3 = -aug.p2.col(0);
  aug.beta2 = 0.0;
  // The inner transversality row p1(1) = -beta3 + beta4 grad g pins beta4 to
  // the negative of the costate jump coefficient.
  aug.beta4 = -cert.gamma[0];

  const int cells_arc = solution.n_arc;
  aug.mu1 = tau * cert.nu.leftCols(cells_arc);
  aug.mu2 = (horizon - tau) * cert.nu.middleCols(cells_arc, cells_arc);

  const HamiltonianSamples h = sample_hamiltonian(spec, solution, cert);
  aug.lambda.resize(per_arc + 1);
  aug.lambda[0] = 0.0;
  for (int k = 0; k < per_arc; ++k) {
    const double ds = aug.s[k + 1] - aug.s[k];
    aug.lambda[k + 1] = aug.lambda[k] + ds * (-h.mid[k] + h.mid[per_arc + k]);
  }

  const Vec y1_end = traj.states.col(per_arc);
  const Vec y2_end = traj.final_state();
  aug.transversality_inner =
      (aug.p1.col(per_arc) + aug.beta3 - aug.beta4 * spec.g.gradient(y1_end))
          .cwiseAbs()
          .maxCoeff();
  aug.transversality_final =
      (aug.p2.col(per_arc) - aug.alpha * spec.phi.gradient(y2_end))
          .cwiseAbs()
          .maxCoeff();
  aug.transversality_initial =
      (aug.p1.col(0) + aug.beta1).cwiseAbs().maxCoeff() +
      (aug.p2.col(0) + aug.beta3).cwiseAbs().maxCoeff();
  aug.lambda_final = std::abs(aug.lambda[per_arc] + aug.alpha);

  // Stationarity of the augmented Hamiltonian in (v1, v2), cellwise.
  const Vec none(0);
  const int sub = traj.substeps;
  for (int c = 0; c < 2 * cells_arc; ++c) {
    const double scale = c < cells_arc ? tau : horizon - tau;
    const Vec u = traj.control.value(c);
    const int k = c * sub;
    const double tm = traj.control.midpoint(c);
    const int step = std::min(k + sub / 2, traj.steps() - 1);
    const double theta =
        std::clamp((tm - traj.times[step]) / traj.step_size(step), 0.0, 1.0);
    const Vec x = traj.dense(spec, step, tm);
    const Vec p = (1 - theta) * cert.p_start(step) + theta * cert.p_end(step);
    const Vec mu = c < cells_arc ? Vec(aug.mu1.col(c))
                                 : Vec(aug.mu2.col(c - cells_arc));
    const Vec grad = scale * spec.f.jacobian(x, u).rightCols(spec.m).transpose() * p +
                     spec.c.jacobian(none, u).transpose() * mu;
    aug.stationarity = std::max(aug.stationarity, grad.cwiseAbs().maxCoeff());
  }
  aug.consistent = aug.transversality_inner <= tol &&
                   aug.transversality_final <= tol &&
                   aug.transversality_initial <= tol &&
                   aug.lambda_final <= tol && aug.stationarity <= tol;
  return aug;
}

}  // namespace tcrisis
