#include "tcrisis/verify.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <random>

#include <Eigen/LU>
#include <Eigen/SVD>

namespace tcrisis {

const char* to_string(SecondOrderResult::Status status) {
  switch (status) {
    case SecondOrderResult::Status::kPassed:
      return "passed";
    case SecondOrderResult::Status::kFailed:
      return "failed";
    case SecondOrderResult::Status::kVacuous:
      return "vacuous (cone trivial)";
    case SecondOrderResult::Status::kSkipped:
      return "skipped";
  }
  return "unknown";
}

double ReportEntry::violation_ratio() const {
  if (passed) return 0.0;
  switch (kind) {
    case EntryKind::kResidual:
      return value / tolerance;
    case EntryKind::kLowerBound:
      return -value / tolerance;
    case EntryKind::kThreshold:
      return tolerance / std::max(value, std::numeric_limits<double>::min());
  }
  return 0.0;
}

const ReportEntry* VerificationReport::find(const std::string& name) const {
  for (const auto& e : entries) {
    if (e.name == name) return &e;
  }
  return nullptr;
}

bool VerificationReport::first_order_passed() const {
  return std::all_of(entries.begin(), entries.end(),
                     [](const ReportEntry& e) { return e.passed; });
}

bool VerificationReport::passed() const {
  return first_order_passed() &&
         second_order.status != SecondOrderResult::Status::kFailed &&
         second_order.status != SecondOrderResult::Status::kSkipped;
}

namespace {

ReportEntry make_entry(std::string name, double value, double tolerance,
                       EntryKind kind = EntryKind::kResidual) {
  ReportEntry e;
  e.name = std::move(name);
  e.value = value;
  e.tolerance = tolerance;
  e.kind = kind;
  switch (kind) {
    case EntryKind::kResidual:
      e.passed = value <= tolerance;
      break;
    case EntryKind::kLowerBound:
      e.passed = value >= -tolerance;
      break;
    case EntryKind::kThreshold:
      e.passed = value >= tolerance;
      break;
  }
  return e;
}

struct CellPoint {
  Vec x;
  Vec p;
  Vec u;
};

// State and costate at the midpoint of a physical control cell.
CellPoint cell_point(const ProblemSpec& spec, const Solution& solution,
                     const PontryaginCertificate& cert, int c) {
  const Trajectory& traj = solution.physical_trajectory;
  const int sub = traj.substeps;
  const double tm = traj.control.midpoint(c);
  const int k = c * sub + sub / 2 - (sub % 2 == 0 ? 1 : 0);
  const double theta =
      std::clamp((tm - traj.times[k]) / traj.step_size(k), 0.0, 1.0);
  CellPoint pt;
  pt.x = traj.dense(spec, k, tm);
  pt.p = (1 - theta) * cert.p_start(k) + theta * cert.p_end(k);
  pt.u = traj.control.value(c);
  return pt;
}

std::vector<Vec> pontryagin_samples(const ProblemSpec& spec, int per_dim) {
  const int m = spec.m;
  // Keep the tensor grid below a million points.
  while (per_dim > 2 && std::pow(per_dim, m) > 1e6) per_dim /= 2;
  std::vector<Vec> out;
  std::vector<int> idx(m, 0);
  const Vec none(0);
  while (true) {
    Vec u(m);
    for (int i = 0; i < m; ++i) {
      double lo = spec.box_lower[i];
      double hi = spec.box_upper[i];
      if (!std::isfinite(lo)) lo = -10.0;
      if (!std::isfinite(hi)) hi = 10.0;
      u[i] = per_dim == 1 ? lo : lo + (hi - lo) * idx[i] / (per_dim - 1);
    }
    if ((spec.c.value(none, u).array() <= 1e-12).all()) out.push_back(u);
    int d = 0;
    while (d < m && ++idx[d] == per_dim) idx[d++] = 0;
    if (d == m) break;
  }
  return out;
}

}  // namespace

PontryaginCertificate costate_from_multipliers(
    const ProblemSpec& spec, const Solution& solution,
    const PontryaginCertificate& cert) {
  PontryaginCertificate rebuilt =
      costate_with_jumps(spec, solution, cert.alpha, cert.gamma);
  rebuilt.nu = cert.nu;
  rebuilt.gamma_nlp = cert.gamma_nlp;
  return rebuilt;
}

VerificationReport check_first_order(const ProblemSpec& spec,
                                     const Solution& solution,
                                     const PontryaginCertificate& cert,
                                     const VerifyTolerances& tol) {
  VerificationReport report;
  const Trajectory& traj = solution.physical_trajectory;
  const PontryaginCertificate p = costate_from_multipliers(spec, solution, cert);
  const int r = solution.r();
  const int cells = traj.control.cells();
  const Vec none(0);

  // Stationarity, sign and complementarity of nu, cellwise.
  double stationarity = 0.0;
  double nu_min = std::numeric_limits<double>::infinity();
  double complementarity = 0.0;
  for (int c = 0; c < cells; ++c) {
    const CellPoint pt = cell_point(spec, solution, p, c);
    const Vec nu = cert.nu.col(c);
    const Vec grad = spec.f.jacobian(pt.x, pt.u).rightCols(spec.m).transpose() *
                         pt.p +
                     spec.c.jacobian(none, pt.u).transpose() * nu;
    stationarity = std::max(stationarity, grad.cwiseAbs().maxCoeff());
    nu_min = std::min(nu_min, nu.minCoeff());
    const Vec cu = spec.c.value(none, pt.u);
    complementarity =
        std::max(complementarity, (nu.array() * cu.array()).abs().maxCoeff());
  }
  report.entries.push_back(
      make_entry("stationarity", stationarity, tol.stationarity));
  report.entries.push_back(
      make_entry("nu_sign", nu_min, tol.sign, EntryKind::kLowerBound));
  report.entries.push_back(
      make_entry("complementarity", complementarity, tol.complementarity));

  // Jump conditions at the crossings.
  double costate_jump = 0.0;
  double hamiltonian_jump = 0.0;
  double crossing = 0.0;
  for (int j = 1; j <= r; ++j) {
    const int node = p.crossing_nodes[j - 1];
    const Vec x = traj.states.col(node);
    const Vec grad_g = spec.g.gradient(x);
    if (cert.p_after.cols() == r && cert.p_before.cols() == r) {
      costate_jump = std::max(
          costate_jump, (cert.p_after.col(j - 1) - cert.p_before.col(j - 1) -
                         cert.gamma[j - 1] * grad_g)
                            .cwiseAbs()
                            .maxCoeff());
    }
    const Vec u_before = traj.control.value(traj.cell_of_step(node - 1));
    const Vec u_after = traj.control.value(traj.cell_of_step(node));
    const double h_before =
        p.p_before.col(j - 1).dot(spec.f.value(x, u_before));
    const double h_after = p.p_after.col(j - 1).dot(spec.f.value(x, u_after));
    const double expected = j % 2 ? cert.alpha : -cert.alpha;
    hamiltonian_jump =
        std::max(hamiltonian_jump, std::abs(h_before - h_after - expected));
    crossing = std::max(crossing, std::abs(spec.g.scalar(x)));
  }
  report.entries.push_back(make_entry("costate_jump", costate_jump, tol.jump));
  report.entries.push_back(
      make_entry("hamiltonian_jump", hamiltonian_jump, tol.hamiltonian));
  report.entries.push_back(
      make_entry("crossing_feasibility", crossing, tol.crossing));

  // Terminal condition of the stored costate.
  if (cert.p.cols() == traj.steps() + 1) {
    const double terminal =
        (cert.p.col(traj.steps()) -
         cert.alpha * spec.phi.gradient(traj.final_state()))
            .cwiseAbs()
            .maxCoeff();
    report.entries.push_back(make_entry("costate_terminal", terminal, tol.jump));
  }

  // Hamiltonian laws.
  const Vec arc_dev = arc_hamiltonian_deviation(spec, solution, p);
  report.entries.push_back(make_entry(
      "hamiltonian_arc", arc_dev.size() ? arc_dev.maxCoeff() : 0.0,
      tol.hamiltonian));
  report.entries.push_back(
      make_entry("hamiltonian_h0", h0_deviation(spec, solution, p), tol.h0));

  const Vec rho = rho_weighted_integral(spec, solution, p);
  double integral = 0.0;
  for (int j = 1; j <= r; ++j) {
    integral = std::max(integral,
                        std::abs(rho[j - 1] + (j % 2 ? -1.0 : 1.0) * cert.alpha));
  }
  report.entries.push_back(
      make_entry("integral_relation", integral, tol.integral));

  // Global minimality of the Hamiltonian over the sampled box hull.
  const std::vector<Vec> samples =
      pontryagin_samples(spec, tol.pontryagin_samples);
  double margin = std::numeric_limits<double>::infinity();
  for (int c = 0; c < cells; ++c) {
    const CellPoint pt = cell_point(spec, solution, p, c);
    const double h_bar = pt.p.dot(spec.f.value(pt.x, pt.u));
    for (const Vec& u : samples) {
      margin = std::min(margin, pt.p.dot(spec.f.value(pt.x, u)) - h_bar);
    }
  }
  if (samples.empty()) margin = 0.0;
  report.entries.push_back(make_entry("pontryagin_margin", margin,
                                      tol.pontryagin, EntryKind::kLowerBound));

  const LigResult lig =
      check_lig(spec, traj.control, kDefaultActiveDelta, tol.lig_epsilon);
  report.entries.push_back(make_entry("lig_margin", lig.margin,
                                      tol.lig_epsilon, EntryKind::kThreshold));

  if (cert.gamma_nlp.size() == r && r > 0) {
    report.entries.push_back(make_entry(
        "gamma_crosscheck",
        (cert.gamma - cert.gamma_nlp).cwiseAbs().maxCoeff(),
        tol.gamma_crosscheck));
  }
  return report;
}

namespace {

// Trajectory the solution was optimized on: normalized when crossings exist.
const Trajectory& working_trajectory(const Solution& solution) {
  return solution.r() > 0 ? solution.normalized_trajectory
                          : solution.physical_trajectory;
}

int working_arc(const Solution& solution, int cell) {
  return solution.r() > 0 ? cell / solution.n_arc : 0;
}

}  // namespace

Mat linearize(const ProblemSpec& spec, const Solution& solution, const Mat& du,
              const Vec& dtau) {
  const Trajectory& traj = working_trajectory(solution);
  const int r = solution.r();
  const int n = spec.n;
  if (du.rows() != spec.m || du.cols() != traj.control.cells() ||
      dtau.size() != r) {
    throw std::invalid_argument("perturbation has the wrong shape");
  }
  // Perturbation of the arc slopes: d(tau_{a+1} - tau_a).
  auto dtau_at = [&](int j) {
    return (j == 0 || j == r + 1) ? 0.0 : dtau[j - 1];
  };
  Mat dx(n, traj.steps() + 1);
  dx.col(0).setZero();
  Vec d = Vec::Zero(n);
  for (int k = 0; k < traj.steps(); ++k) {
    const int cell = traj.cell_of_step(k);
    const int arc = working_arc(solution, cell);
    const double sigma = traj.scale[cell];
    const double dsigma = dtau_at(arc + 1) - dtau_at(arc);
    const double h = traj.step_size(k);
    const Vec x = traj.states.col(k);
    const Vec u = traj.control.value(cell);
    const Vec v = du.col(cell);

    auto stage = [&](const Vec& z, const Vec& dz, Vec& kz) {
      const Mat jac = spec.f.jacobian(z, u);
      const Vec fz = spec.f.value(z, u);
      kz = sigma * fz;
      return Vec(dsigma * fz + sigma * (jac.leftCols(n) * dz +
                                        jac.rightCols(spec.m) * v));
    };
    Vec k1, k2, k3, k4;
    const Vec d1 = stage(x, d, k1);
    const Vec d2 = stage(x + 0.5 * h * k1, d + 0.5 * h * d1, k2);
    const Vec d3 = stage(x + 0.5 * h * k2, d + 0.5 * h * d2, k3);
    const Vec d4 = stage(x + h * k3, d + h * d3, k4);
    d += (h / 6.0) * (d1 + 2.0 * d2 + 2.0 * d3 + d4);
    dx.col(k + 1) = d;
  }
  return dx;
}

double CriticalDirection::norm(const Solution& solution) const {
  const ControlSignal& grid = solution.physical_trajectory.control;
  double sum = 0.0;
  for (int c = 0; c < du.cols(); ++c) {
    sum += grid.width(c) * du.col(c).squaredNorm();
  }
  return std::sqrt(sum) + dtau.norm();
}

CriticalDirection make_direction(const ProblemSpec& spec,
                                 const Solution& solution, Mat du, Vec dtau) {
  CriticalDirection d;
  d.dx = linearize(spec, solution, du, dtau);
  d.du = std::move(du);
  d.dtau = std::move(dtau);
  return d;
}

namespace {

struct CellActivity {
  std::vector<int> strong;
  std::vector<int> weak;
};

std::vector<CellActivity> classify_activity(const ProblemSpec& spec,
                                            const Solution& solution,
                                            const PontryaginCertificate& cert,
                                            const VerifyTolerances& tol) {
  const ControlSignal& control = solution.physical_trajectory.control;
  std::vector<CellActivity> out(control.cells());
  for (int c = 0; c < control.cells(); ++c) {
    for (int i : active_constraints(spec, control.value(c),
                                    kDefaultActiveDelta)) {
      if (cert.nu.size() && cert.nu(i, c) > tol.strong_activity) {
        out[c].strong.push_back(i);
      } else {
        out[c].weak.push_back(i);
      }
    }
  }
  return out;
}

ConeConditions cone_conditions_with(const ProblemSpec& spec,
                                    const Solution& solution,
                                    const PontryaginCertificate& cert,
                                    const std::vector<CellActivity>& activity,
                                    const CriticalDirection& d) {
  ConeConditions out;
  const Trajectory& traj = solution.physical_trajectory;
  const Vec none(0);
  for (int c = 0; c < traj.control.cells(); ++c) {
    if (activity[c].strong.empty() && activity[c].weak.empty()) continue;
    const Mat jac = spec.c.jacobian(none, traj.control.value(c));
    for (int i : activity[c].strong) {
      out.control_tangency =
          std::max(out.control_tangency, std::abs(jac.row(i).dot(d.du.col(c))));
    }
    for (int i : activity[c].weak) {
      const double slope = jac.row(i).dot(d.du.col(c));
      out.control_tangency = std::max(out.control_tangency, slope);
      if (cert.nu.size()) {
        out.cost_allowance +=
            traj.control.width(c) * std::max(cert.nu(i, c), 0.0) * std::abs(slope);
      }
    }
  }
  const int r = solution.r();
  for (int j = 1; j <= r; ++j) {
    const int node = j * solution.n_arc * traj.substeps;
    out.crossing_tangency = std::max(
        out.crossing_tangency,
        std::abs(spec.g.gradient(traj.states.col(node)).dot(d.dx.col(node))));
  }
  out.cost = spec.phi.gradient(traj.final_state()).dot(d.dx.col(traj.steps()));
  for (int j = 1; j <= r; ++j) out.cost += (j % 2 ? -1.0 : 1.0) * d.dtau[j - 1];
  return out;
}

}  // namespace

ConeConditions cone_conditions(const ProblemSpec& spec,
                               const Solution& solution,
                               const PontryaginCertificate& cert,
                               const CriticalDirection& d,
                               const VerifyTolerances& tol) {
  return cone_conditions_with(spec, solution, cert,
                              classify_activity(spec, solution, cert, tol), d);
}

bool in_critical_cone(const ConeConditions& c, const VerifyTolerances& tol) {
  return c.control_tangency <= 1e-10 && c.crossing_tangency <= tol.cone &&
         c.cost <= tol.cone + c.cost_allowance;
}

CriticalSample sample_critical(const ProblemSpec& spec,
                               const Solution& solution,
                               const PontryaginCertificate& cert, int count,
                               std::uint64_t seed,
                               const VerifyTolerances& tol) {
  CriticalSample out;
  const Trajectory& traj = solution.physical_trajectory;
  const int cells = traj.control.cells();
  const int r = solution.r();
  const int m = spec.m;
  const auto activity = classify_activity(spec, solution, cert, tol);
  const Vec none(0);

  // Columns of the map dtau -> Dg dx(tau_i) at du = 0.
  std::vector<Mat> tau_response;
  Mat response(r, r);
  auto crossing_rows = [&](const Mat& dx) {
    Vec v(r);
    for (int i = 1; i <= r; ++i) {
      const int node = i * solution.n_arc * traj.substeps;
      v[i - 1] = spec.g.gradient(traj.states.col(node)).dot(dx.col(node));
    }
    return v;
  };
  for (int j = 0; j < r; ++j) {
    tau_response.push_back(
        linearize(spec, solution, Mat::Zero(m, cells), Vec::Unit(r, j)));
    response.col(j) = crossing_rows(tau_response.back());
  }
  bool singular = false;
  if (r > 0) {
    Eigen::JacobiSVD<Mat> svd(response);
    const Vec sv = svd.singularValues();
    singular = sv.minCoeff() <= 0.0 || sv.maxCoeff() / sv.minCoeff() > 1e10;
  }

  // Cells whose strongly active rows span R^m force du = 0 there; when
  // that holds everywhere, du = 0 and dtau = 0 so the cone is {0}.
  bool pinned = true;
  for (int c = 0; c < cells && pinned; ++c) {
    const auto& act = activity[c];
    if (!act.weak.empty() || static_cast<int>(act.strong.size()) < m) {
      pinned = false;
      break;
    }
    const Mat jac = spec.c.jacobian(none, traj.control.value(c));
    Mat a(static_cast<int>(act.strong.size()), m);
    for (std::size_t q = 0; q < act.strong.size(); ++q) {
      a.row(static_cast<int>(q)) = jac.row(act.strong[q]);
    }
    Eigen::JacobiSVD<Mat> svd(a);
    svd.setThreshold(1e-12);
    pinned = svd.rank() == m;
  }
  if (pinned && (r == 0 || !singular)) {
    out.warning = "cone nearly trivial";
    return out;
  }

  std::mt19937_64 rng(seed);
  std::normal_distribution<double> normal(0.0, 1.0);
  const int max_attempts = 10 * count;
  while (static_cast<int>(out.directions.size()) < count &&
         out.attempts < max_attempts) {
    ++out.attempts;
    Mat du(m, cells);
    for (int c = 0; c < cells; ++c) {
      for (int i = 0; i < m; ++i) du(i, c) = normal(rng);
    }
    bool weak_present = false;
    for (int c = 0; c < cells; ++c) {
      const auto& act = activity[c];
      if (act.strong.empty() && act.weak.empty()) continue;
      const Mat jac = spec.c.jacobian(none, traj.control.value(c));
      std::vector<int> rows = act.strong;
      Vec v = du.col(c);
      for (std::size_t pass = 0; pass <= act.weak.size(); ++pass) {
        if (!rows.empty()) {
          Mat a(static_cast<int>(rows.size()), m);
          for (std::size_t q = 0; q < rows.size(); ++q) {
            a.row(static_cast<int>(q)) = jac.row(rows[q]);
          }
          Eigen::JacobiSVD<Mat> svd(a, Eigen::ComputeThinU | Eigen::ComputeThinV);
          v -= svd.solve(a * v);
        }
        bool added = false;
        for (int i : act.weak) {
          if (std::find(rows.begin(), rows.end(), i) != rows.end()) continue;
          if (jac.row(i).dot(v) > 0.0) {
            rows.push_back(i);
            added = true;
          }
        }
        if (!added) break;
      }
      if (!act.weak.empty()) weak_present = true;
      du.col(c) = v;
    }

    Vec dtau = Vec::Zero(r);
    Mat dx = linearize(spec, solution, du, Vec::Zero(r));
    if (r > 0) {
      if (singular) {
        ++out.singular;
        continue;
      }
      dtau = response.fullPivLu().solve(-crossing_rows(dx));
      for (int j = 0; j < r; ++j) dx += dtau[j] * tau_response[j];
    }
    CriticalDirection d{std::move(du), std::move(dtau), std::move(dx)};
    ConeConditions cone = cone_conditions_with(spec, solution, cert, activity, d);
    if (cone.cost > tol.cone) {
      // The reversed direction may violate one-sided rows.
      CriticalDirection neg{-d.du, -d.dtau, -d.dx};
      const ConeConditions neg_cone =
          cone_conditions_with(spec, solution, cert, activity, neg);
      if (!weak_present || in_critical_cone(neg_cone, tol)) {
        d = std::move(neg);
        cone = neg_cone;
      }
    }
    if (!in_critical_cone(cone, tol)) {
      ++out.cost_rejected;
      continue;
    }
    const double norm = d.norm(solution);
    if (norm < 1e-12) {
      ++out.trivial;
      continue;
    }
    d.du /= norm;
    d.dtau /= norm;
    d.dx /= norm;
    out.directions.push_back(std::move(d));
  }
  if (static_cast<int>(out.directions.size()) < std::max(1, count / 10)) {
    out.warning = "cone nearly trivial";
  }
  return out;
}

double omega_bilinear(const ProblemSpec& spec, const Solution& solution,
                      const PontryaginCertificate& cert,
                      const CriticalDirection& a, const CriticalDirection& b) {
  const Trajectory& traj = solution.physical_trajectory;
  const int n = spec.n;
  const int m = spec.m;
  const int r = solution.r();
  const int last = traj.steps();
  double total = a.dx.col(last).dot(spec.phi.hessian(traj.final_state()) *
                                    b.dx.col(last));
  // The crossing terms enter with the equality multipliers lambda = -gamma
  // of the reformulated Lagrangian.
  for (int j = 1; j <= r; ++j) {
    const int node = cert.crossing_nodes[j - 1];
    const Vec x = traj.states.col(node);
    total -= cert.gamma[j - 1] *
             a.dx.col(node).dot(spec.g.hessian(x) * b.dx.col(node));
  }

  auto dtau_at = [&](const Vec& dt, int j) {
    return (j == 0 || j == r + 1) ? 0.0 : dt[j - 1];
  };
  const Vec none(0);
  Vec za(n + m), zb(n + m);
  for (int k = 0; k < last; ++k) {
    const int cell = traj.cell_of_step(k);
    const int arc = arc_of_step(solution, k);
    const double h = traj.step_size(k);
    const double tm = 0.5 * (traj.times[k] + traj.times[k + 1]);
    const Vec x = traj.dense(spec, k, tm);
    const Vec u = traj.control.value(cell);
    const Vec p = 0.5 * (cert.p_start(k) + cert.p_end(k));
    za << 0.5 * (a.dx.col(k) + a.dx.col(k + 1)), a.du.col(cell);
    zb << 0.5 * (b.dx.col(k) + b.dx.col(k + 1)), b.du.col(cell);

    Mat hess = Mat::Zero(n + m, n + m);
    if (spec.f.order() >= 2) {
      for (int i = 0; i < n; ++i) hess += p[i] * spec.f.hessian(x, u, i);
    }
    if (spec.c.order() >= 2 && cert.nu.size()) {
      for (int i = 0; i < spec.l; ++i) {
        const double nu = cert.nu(i, cell);
        if (nu != 0.0) {
          hess.bottomRightCorner(m, m) += nu * spec.c.hessian(none, u, i);
        }
      }
    }
    total += h * za.dot(hess * zb);

    const Mat jac = spec.f.jacobian(x, u);
    Vec dh_row = jac.transpose() * p;  // DH^a as a row over (x, u)
    if (cert.nu.size()) {
      dh_row.tail(m) += spec.c.jacobian(none, u).transpose() * cert.nu.col(cell);
    }
    if (r > 0) {
      const double slope = solution.tau.slope(arc);
      const double rho_a =
          (dtau_at(a.dtau, arc + 1) - dtau_at(a.dtau, arc)) / slope;
      const double rho_b =
          (dtau_at(b.dtau, arc + 1) - dtau_at(b.dtau, arc)) / slope;
      total += h * (rho_a * dh_row.dot(zb) + rho_b * dh_row.dot(za));
    }
  }
  return total;
}

double evaluate_omega(const ProblemSpec& spec, const Solution& solution,
                      const PontryaginCertificate& cert,
                      const CriticalDirection& d) {
  return omega_bilinear(spec, solution, cert, d, d);
}

double reformulated_lagrangian(const ProblemSpec& spec,
                               const Solution& solution,
                               const PontryaginCertificate& cert,
                               const Mat& du, const Vec& dtau) {
  const int r = solution.r();
  ControlSignal u = solution.normalized_control;
  u.values() += du;
  const Vec base = Eigen::Map<const Vec>(solution.tau.values().data(), r);
  const Vec moved = base + dtau;
  const CrossingVector tau(std::vector<double>(moved.data(), moved.data() + r),
                           spec.horizon);
  const Trajectory traj =
      integrate_normalized(spec, u, tau, solution.substeps);
  double value = reformulated_objective(spec, traj.final_state(), tau);
  const int per_arc = solution.n_arc * solution.substeps;
  for (int j = 1; j <= r; ++j) {
    value -= cert.gamma[j - 1] * spec.g.scalar(traj.states.col(j * per_arc));
  }
  const Vec none(0);
  for (int c = 0; c < u.cells(); ++c) {
    const double slope = tau.slope(arc_of_cell(u, c));
    value += u.width(c) * slope *
             cert.nu.col(c).dot(spec.c.value(none, u.value(c)));
  }
  return value;
}

SecondOrderResult second_order_check(const ProblemSpec& spec,
                                     const Solution& solution,
                                     const PontryaginCertificate& cert,
                                     int count, std::uint64_t seed,
                                     const VerifyTolerances& tol) {
  SecondOrderResult result;
  result.requested = count;
  const CriticalSample sample =
      sample_critical(spec, solution, cert, count, seed, tol);
  result.accepted = static_cast<int>(sample.directions.size());
  result.note = sample.warning;
  if (sample.directions.empty()) {
    result.status = SecondOrderResult::Status::kVacuous;
    result.note = "vacuous (cone trivial)";
    return result;
  }
  double worst = std::numeric_limits<double>::infinity();
  for (const auto& d : sample.directions) {
    const double norm = d.norm(solution);
    const double value =
        evaluate_omega(spec, solution, cert, d) / (norm * norm);
    result.normalized_values.push_back(value);
    result.dtau.push_back(d.dtau);
    worst = std::min(worst, value);
  }
  result.min_normalized_omega = worst;
  result.status = worst >= -tol.omega ? SecondOrderResult::Status::kPassed
                                      : SecondOrderResult::Status::kFailed;
  return result;
}

VerificationReport verify_solution(const ProblemSpec& spec,
                                   const Solution& solution,
                                   const PontryaginCertificate& cert,
                                   int omega_samples, std::uint64_t seed,
                                   const VerifyTolerances& tol) {
  VerificationReport report = check_first_order(spec, solution, cert, tol);
  if (!report.first_order_passed()) {
    report.second_order.status = SecondOrderResult::Status::kSkipped;
    report.second_order.requested = omega_samples;
    report.second_order.note = "first-order conditions failed";
    return report;
  }
  report.second_order =
      second_order_check(spec, solution, cert, omega_samples, seed, tol);
  return report;
}

}  // namespace tcrisis
