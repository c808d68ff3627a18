#include "tcrisis/solve.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <limits>
#include <ostream>

namespace tcrisis {
namespace {

int cells_per_arc(const ControlSignal& normalized, const CrossingVector& tau) {
  const int arcs = tau.r() + 1;
  if (normalized.domain() != TimeDomain::kNormalized ||
      normalized.cells() % arcs != 0) {
    throw std::invalid_argument(
        "normalized control must have the same cell count on every arc");
  }
  const int per_arc = normalized.cells() / arcs;
  for (int j = 0; j <= arcs; ++j) {
    if (std::abs(normalized.node(j * per_arc) - j) > 1e-12) {
      throw std::invalid_argument("normalized grid is not arc aligned");
    }
  }
  return per_arc;
}

}  // namespace

ObjectiveGradient objective_and_gradient(const ProblemSpec& spec,
                                         const ControlSignal& normalized,
                                         const CrossingVector& tau,
                                         int substeps) {
  const int r = tau.r();
  const int per_arc = cells_per_arc(normalized, tau);
  const Trajectory traj =
      integrate_normalized(spec, normalized, tau, substeps);
  const int n = spec.n;
  const int m = spec.m;
  const int cells = normalized.cells();
  const int functionals = r + 1;  // objective, then g(x(j))
  const int last = traj.steps();

  ObjectiveGradient out;
  out.value = reformulated_objective(spec, traj.final_state(), tau);
  out.constraints.resize(r);
  for (int j = 1; j <= r; ++j) {
    out.constraints[j - 1] =
        spec.g.scalar(traj.states.col(j * per_arc * substeps));
  }

  Mat lam = Mat::Zero(n, functionals);
  lam.col(0) = spec.phi.gradient(traj.final_state());
  Mat bar_u_all = Mat::Zero(m * functionals, cells);
  Mat bar_sigma = Mat::Zero(r + 1, functionals);

  Mat bk1(n, functionals), bk2(n, functionals), bk3(n, functionals),
      bk4(n, functionals), bx(n, functionals), bz(n, functionals);
  Mat bu(m, functionals);
  for (int k = last; k >= 1; --k) {
    if (k % (per_arc * substeps) == 0) {
      const int j = k / (per_arc * substeps);
      if (j >= 1 && j <= r) lam.col(j) += spec.g.gradient(traj.states.col(k));
    }
    const int step = k - 1;
    const int cell = traj.cell_of_step(step);
    const int arc = cell / per_arc;
    const double sigma = traj.scale[cell];
    const double h = traj.step_size(step);
    const Vec x = traj.states.col(step);
    const Vec u = normalized.value(cell);

    const Vec f1 = spec.f.value(x, u);
    const Vec z2 = x + 0.5 * h * sigma * f1;
    const Vec f2 = spec.f.value(z2, u);
    const Vec z3 = x + 0.5 * h * sigma * f2;
    const Vec f3 = spec.f.value(z3, u);
    const Vec z4 = x + h * sigma * f3;
    const Vec f4 = spec.f.value(z4, u);
    const Mat j1 = spec.f.jacobian(x, u);
    const Mat j2 = spec.f.jacobian(z2, u);
    const Mat j3 = spec.f.jacobian(z3, u);
    const Mat j4 = spec.f.jacobian(z4, u);

    bk1 = (h / 6.0) * lam;
    bk2 = (h / 3.0) * lam;
    bk3 = (h / 3.0) * lam;
    bk4 = (h / 6.0) * lam;
    bx = lam;
    bu.setZero();

    auto stage = [&](const Mat& jac, const Vec& fv, const Mat& bk) {
      bz.noalias() = sigma * jac.leftCols(n).transpose() * bk;
      bu.noalias() += sigma * jac.rightCols(m).transpose() * bk;
      bar_sigma.row(arc).noalias() += fv.transpose() * bk;
      bx += bz;
    };
    stage(j4, f4, bk4);
    bk3 += h * bz;
    stage(j3, f3, bk3);
    bk2 += 0.5 * h * bz;
    stage(j2, f2, bk2);
    bk1 += 0.5 * h * bz;
    stage(j1, f1, bk1);

    lam = bx;
    for (int f = 0; f < functionals; ++f) {
      bar_u_all.block(f * m, cell, m, 1) += bu.col(f);
    }
  }

  out.value_control = bar_u_all.topRows(m);
  out.value_tau.resize(r);
  out.constraint_tau.resize(r, r);
  for (int j = 1; j <= r; ++j) {
    const double sign = j % 2 ? -1.0 : 1.0;
    out.value_tau[j - 1] = sign + bar_sigma(j - 1, 0) - bar_sigma(j, 0);
    for (int i = 1; i <= r; ++i) {
      out.constraint_tau(i - 1, j - 1) =
          bar_sigma(j - 1, i) - bar_sigma(j, i);
    }
  }
  for (int i = 1; i <= r; ++i) {
    out.constraint_control.push_back(bar_u_all.middleRows(i * m, m));
  }
  return out;
}

Vec project_crossing_times(const Vec& tau, double horizon, double gap) {
  const int r = static_cast<int>(tau.size());
  if (r == 0) return tau;
  const double upper = horizon - (r + 1) * gap;
  if (upper < 0.0) {
    throw std::invalid_argument("crossing gap too large for the horizon");
  }
  // Pool adjacent violators on w_j = tau_j - j * gap, then clip.
  std::vector<double> level;
  std::vector<int> count;
  for (int j = 0; j < r; ++j) {
    level.push_back(tau[j] - (j + 1) * gap);
    count.push_back(1);
    while (level.size() > 1 && level[level.size() - 2] > level.back()) {
      const double merged =
          (level[level.size() - 2] * count[count.size() - 2] +
           level.back() * count.back()) /
          (count[count.size() - 2] + count.back());
      const int total = count[count.size() - 2] + count.back();
      level.pop_back();
      count.pop_back();
      level.back() = merged;
      count.back() = total;
    }
  }
  Vec out(r);
  int j = 0;
  for (std::size_t b = 0; b < level.size(); ++b) {
    const double w = std::clamp(level[b], 0.0, upper);
    for (int c = 0; c < count[b]; ++c, ++j) out[j] = w + (j + 1) * gap;
  }
  return out;
}

namespace {

struct Iterate {
  Mat controls;
  Vec tau;
  ObjectiveGradient og;
  double merit = 0.0;
  Mat grad_controls;  // merit gradient
  Vec grad_tau;
};

class AugmentedLagrangianSolver {
 public:
  AugmentedLagrangianSolver(const ProblemSpec& spec,
                            const ControlSignal& grid,
                            const SolverOptions& options)
      : spec_(spec),
        grid_(grid),
        opt_(options),
        horizon_(spec.horizon),
        gap_(options.gap(spec.horizon)),
        weight_(grid.width(0)) {}

  Solution run(Mat controls, Vec tau) {
    const int r = static_cast<int>(tau.size());
    lambda_ = Vec::Zero(r);
    penalty_ = opt_.penalty_initial;
    Iterate it = evaluate(project_controls(std::move(controls)),
                          project_crossing_times(tau, horizon_, gap_));
    double previous_infeasibility = infeasibility(it);
    double inner_tol = std::max(opt_.kkt_tol, 1e-2);
    bool converged = false;
    double pg = std::numeric_limits<double>::infinity();
    for (int outer = 0; outer < opt_.max_outer; ++outer) {
      pg = minimize_inner(it, outer, inner_tol);
      const double infeas = infeasibility(it);
      // Multiplier estimate consistent with the current merit gradient.
      const Vec updated = lambda_ + penalty_ * it.og.constraints;
      if (infeas <= opt_.eq_tol && pg <= opt_.kkt_tol) {
        lambda_ = updated;
        converged = true;
        break;
      }
      lambda_ = updated;
      if (infeas > opt_.required_shrink * previous_infeasibility) {
        penalty_ *= opt_.penalty_growth;
      }
      previous_infeasibility = infeas;
      inner_tol = std::max(opt_.kkt_tol, 0.1 * inner_tol);
      it = evaluate(std::move(it.controls), std::move(it.tau));
    }
    Solution sol;
    sol.normalized_control = grid_;
    sol.normalized_control.values() = it.controls;
    sol.tau = CrossingVector(std::vector<double>(it.tau.data(),
                                                 it.tau.data() + it.tau.size()),
                             horizon_);
    sol.reformulated_objective = it.og.value;
    // Outside time equals sum (-1)^j tau_j, plus T when r is odd.
    sol.objective = it.og.value + (r % 2 ? horizon_ : 0.0);
    sol.infeasibility = infeasibility(it);
    sol.projected_gradient = pg;
    sol.equality_multipliers = lambda_;
    sol.converged = converged;
    sol.log = std::move(log_);
    return sol;
  }

 private:
  double infeasibility(const Iterate& it) const {
    return it.og.constraints.size() ? it.og.constraints.cwiseAbs().maxCoeff()
                                     : 0.0;
  }

  Mat project_controls(Mat controls) const {
    for (int k = 0; k < controls.cols(); ++k) {
      controls.col(k) = spec_.project_to_box(controls.col(k));
    }
    return controls;
  }

  Iterate evaluate(Mat controls, Vec tau) const {
    Iterate it;
    it.controls = std::move(controls);
    it.tau = std::move(tau);
    ControlSignal signal = grid_;
    signal.values() = it.controls;
    const CrossingVector cv(
        std::vector<double>(it.tau.data(), it.tau.data() + it.tau.size()),
        horizon_);
    it.og = objective_and_gradient(spec_, signal, cv, opt_.substeps);
    const Vec& c = it.og.constraints;
    it.merit = it.og.value + lambda_.dot(c) + 0.5 * penalty_ * c.squaredNorm();
    it.grad_controls = it.og.value_control;
    it.grad_tau = it.og.value_tau;
    for (int j = 0; j < c.size(); ++j) {
      const double w = lambda_[j] + penalty_ * c[j];
      it.grad_controls += w * it.og.constraint_control[j];
      it.grad_tau += w * it.og.constraint_tau.row(j).transpose();
    }
    return it;
  }

  // Inner product with cell widths on the controls (L2 in normalized time).
  double metric_dot(const Mat& a_u, const Vec& a_t, const Mat& b_u,
                    const Vec& b_t) const {
    return weight_ * (a_u.array() * b_u.array()).sum() + a_t.dot(b_t);
  }

  std::pair<Mat, Vec> trial(const Iterate& it, double alpha) const {
    Mat u = project_controls(it.controls - (alpha / weight_) * it.grad_controls);
    Vec t = project_crossing_times(it.tau - alpha * it.grad_tau, horizon_, gap_);
    return {std::move(u), std::move(t)};
  }

  double projected_gradient_norm(const Iterate& it) const {
    auto [u, t] = trial(it, 1.0);
    const Mat du = u - it.controls;
    const Vec dt = t - it.tau;
    return std::sqrt(metric_dot(du, dt, du, dt));
  }

  double minimize_inner(Iterate& it, int outer, double tol) {
    double alpha = 1.0;
    double pg = projected_gradient_norm(it);
    for (int inner = 0; inner < opt_.max_inner; ++inner) {
      if (pg <= tol) break;
      bool accepted = false;
      Iterate next;
      double a = alpha;
      for (int backtrack = 0; backtrack < 60; ++backtrack) {
        auto [u, t] = trial(it, a);
        const double decrease =
            (it.grad_controls.array() * (u - it.controls).array()).sum() +
            it.grad_tau.dot(t - it.tau);
        next = evaluate(std::move(u), std::move(t));
        if (next.merit <= it.merit + opt_.armijo * decrease) {
          accepted = true;
          break;
        }
        a *= 0.5;
      }
      if (!accepted) break;
      // Barzilai-Borwein step in the weighted metric.
      const Mat su = next.controls - it.controls;
      const Vec st = next.tau - it.tau;
      const double sy =
          (su.array() * (next.grad_controls - it.grad_controls).array()).sum() +
          st.dot(next.grad_tau - it.grad_tau);
      const double ss = metric_dot(su, st, su, st);
      alpha = sy > 0.0 ? std::clamp(ss / sy, 1e-10, 1e10) : std::min(1e10, 2 * a);
      it = std::move(next);
      pg = projected_gradient_norm(it);
      IterationRecord rec;
      rec.outer = outer;
      rec.inner = inner;
      rec.merit = it.merit;
      rec.objective = it.og.value;
      rec.infeasibility = infeasibility(it);
      rec.projected_gradient = pg;
      rec.step = a;
      rec.penalty = penalty_;
      log_.push_back(rec);
    }
    return pg;
  }

  const ProblemSpec& spec_;
  const ControlSignal& grid_;
  SolverOptions opt_;
  double horizon_;
  double gap_;
  double weight_;
  Vec lambda_;
  double penalty_ = 10.0;
  std::vector<IterationRecord> log_;
};

}  // namespace

void attach_trajectories(const ProblemSpec& spec, const SolverOptions& opt,
                         Solution& sol) {
  sol.n_arc = sol.normalized_control.cells() / (sol.r() + 1);
  sol.substeps = opt.substeps;
  sol.normalized_trajectory = integrate_normalized(
      spec, sol.normalized_control, sol.tau, opt.substeps);
  sol.physical_control = from_normalized(sol.normalized_control, sol.tau);
  sol.physical_trajectory =
      integrate(spec, sol.physical_control, opt.substeps);
  try {
    const CrossingStructure detected =
        detect_crossings(spec, sol.physical_trajectory);
    if (detected.r() != sol.r()) {
      sol.structure_consistent = false;
      sol.note = "physical image has " + std::to_string(detected.r()) +
                 " crossings, expected " + std::to_string(sol.r());
      return;
    }
    for (int j = 0; j < sol.r(); ++j) {
      sol.structure_mismatch =
          std::max(sol.structure_mismatch,
                   std::abs(detected.crossings[j].time - sol.tau.at(j + 1)));
    }
    if (sol.structure_mismatch > 10 * opt.eq_tol) {
      sol.structure_consistent = false;
      sol.note = "detected crossing times drift from tau";
    }
  } catch (const AssumptionViolation& e) {
    sol.structure_consistent = false;
    sol.note = e.what();
  }
}

Solution solve_fixed_structure(const ProblemSpec& spec,
                               const ControlSignal& initial_normalized,
                               const CrossingVector& initial_tau,
                               const SolverOptions& options) {
  if (initial_tau.r() < 1) {
    throw std::invalid_argument("fixed-structure solve needs r >= 1");
  }
  if (std::abs(initial_tau.horizon() - spec.horizon) > 1e-12) {
    throw std::invalid_argument("crossing vector horizon differs from T");
  }
  cells_per_arc(initial_normalized, initial_tau);
  AugmentedLagrangianSolver solver(spec, initial_normalized, options);
  const Vec tau0 = Eigen::Map<const Vec>(initial_tau.values().data(),
                                         initial_tau.r());
  Solution sol = solver.run(initial_normalized.values(), tau0);
  attach_trajectories(spec, options, sol);
  if (!sol.converged) {
    sol.note = sol.note.empty() ? "not converged" : "not converged; " + sol.note;
  }
  return sol;
}

Solution solve_time_crisis(const ProblemSpec& spec,
                           const ControlSignal& initial_physical,
                           const SolverOptions& options) {
  const Trajectory init = integrate(spec, initial_physical, options.substeps);
  const CrossingStructure structure = detect_crossings(spec, init);
  if (structure.r() == 0) {
    Solution sol;
    sol.tau = CrossingVector({}, spec.horizon);
    sol.physical_control = initial_physical;
    sol.physical_trajectory = init;
    sol.objective = crisis_cost(spec, init, structure);
    sol.reformulated_objective = sol.objective;
    sol.converged = true;
    sol.structure_free = true;
    sol.substeps = options.substeps;
    sol.note = "no crossing structure";
    return sol;
  }
  const CrossingVector tau(structure.times(), spec.horizon);
  const ControlSignal normalized =
      to_normalized(initial_physical, tau, options.n_arc);
  return solve_fixed_structure(spec, normalized, tau, options);
}

void write_iteration_csv(std::ostream& out, const Solution& solution) {
  out << "outer,inner,merit,objective,infeasibility,projected_gradient,step,"
         "penalty\n";
  char buf[256];
  for (const auto& rec : solution.log) {
    std::snprintf(buf, sizeof buf, "%d,%d,%.17g,%.17g,%.17g,%.17g,%.17g,%.17g\n",
                  rec.outer, rec.inner, rec.merit, rec.objective,
                  rec.infeasibility, rec.projected_gradient, rec.step,
                  rec.penalty);
    out << buf;
  }
}

}  // namespace tcrisis
