#pragma once

#include <iosfwd>
#include <string>
#include <vector>

#include "tcrisis/reformulate.hpp"

namespace tcrisis {

struct SolverOptions {
  int n_arc = 500;     // normalized cells per unit arc
  int substeps = 1;    // RK4 steps per cell
  double eq_tol = 1e-8;
  double kkt_tol = 1e-6;
  double tau_gap = -1.0;  // <= 0 means 1e-3 * T
  int max_outer = 200;
  int max_inner = 2000;
  double penalty_initial = 10.0;
  double penalty_growth = 10.0;
  double required_shrink = 0.25;  // grow the penalty unless |g| shrinks 4x
  double armijo = 1e-4;

  double gap(double horizon) const {
    return tau_gap > 0.0 ? tau_gap : 1e-3 * horizon;
  }
};

/// Value and exact discrete-adjoint gradients of the reformulated objective
/// and of the crossing constraints g(x(j)), j = 1..r.
struct ObjectiveGradient {
  double value = 0.0;
  Vec constraints;                  // r
  Mat value_control;                // m x cells
  Vec value_tau;                    // r
  std::vector<Mat> constraint_control;  // r entries, m x cells
  Mat constraint_tau;               // r x r, row j = constraint j
};

ObjectiveGradient objective_and_gradient(const ProblemSpec& spec,
                                         const ControlSignal& normalized,
                                         const CrossingVector& tau,
                                         int substeps = 1);

struct IterationRecord {
  int outer = 0;
  int inner = 0;
  double merit = 0.0;
  double objective = 0.0;
  double infeasibility = 0.0;
  double projected_gradient = 0.0;
  double step = 0.0;
  double penalty = 0.0;
};

struct Solution {
  CrossingVector tau;
  ControlSignal normalized_control;
  Trajectory normalized_trajectory;
  ControlSignal physical_control;
  Trajectory physical_trajectory;
  double objective = 0.0;               // time-crisis cost of the iterate
  double reformulated_objective = 0.0;  // phi(x(r+1)) + sum (-1)^j tau_j
  double infeasibility = 0.0;           // max_j |g(x(j))|
  double projected_gradient = 0.0;
  Vec equality_multipliers;         // augmented-Lagrangian estimates
  bool converged = false;
  bool structure_consistent = true;
  bool structure_free = false;      // no crossing: nothing was optimized
  double structure_mismatch = 0.0;  // max |detected - tau|
  int n_arc = 0;
  int substeps = 1;
  std::string note;
  std::vector<IterationRecord> log;

  int r() const { return tau.r(); }
};

/// Projects tau onto {tau_1 >= gap, tau_{j+1} - tau_j >= gap, T - tau_r >=
/// gap}.
Vec project_crossing_times(const Vec& tau, double horizon, double gap);

Solution solve_fixed_structure(const ProblemSpec& spec,
                               const ControlSignal& initial_normalized,
                               const CrossingVector& initial_tau,
                               const SolverOptions& options = {});

/// Detects the crossing structure of the initial control and solves with that
/// structure frozen.
Solution solve_time_crisis(const ProblemSpec& spec,
                           const ControlSignal& initial_physical,
                           const SolverOptions& options = {});

/// Fills n_arc, substeps, both trajectories and the physical control from
/// (tau, normalized_control), then checks that the physical image crosses at
/// tau.
void attach_trajectories(const ProblemSpec& spec, const SolverOptions& opt,
                         Solution& sol);

void write_iteration_csv(std::ostream& out, const Solution& solution);

}  // namespace tcrisis
