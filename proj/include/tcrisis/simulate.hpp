#pragma once

#include <iosfwd>
#include <vector>

#include "tcrisis/problem.hpp"

namespace tcrisis {

/**
 * RK4 solution of x' = scale * f(x, u) for a piecewise-constant control.
 *
 * Each control cell is split into `substeps` equal steps. `scale` holds one
 * time-scaling factor per control cell (all ones in physical time, the arc
 * slopes of the change of time in normalized time).
 */
struct Trajectory {
  ControlSignal control;
  int substeps = 1;
  std::vector<double> scale;
  std::vector<double> times;  // steps + 1 nodes
  Mat states;                 // n x (steps + 1)

  TimeDomain domain() const { return control.domain(); }
  int steps() const { return static_cast<int>(times.size()) - 1; }
  int cell_of_step(int k) const { return k / substeps; }
  double step_size(int k) const { return times[k + 1] - times[k]; }
  Vec state(int k) const { return states.col(k); }
  Vec final_state() const { return states.col(states.cols() - 1); }
  /// Node index of control-grid node `cell_node` (0..cells).
  int node_of_cell_boundary(int cell_node) const {
    return cell_node * substeps;
  }
  /// Cubic Hermite interpolant of step k at time t in [times[k], times[k+1]].
  Vec dense(const ProblemSpec& spec, int k, double t) const;
};

/// One classical RK4 step of x' = scale * f(x, u) with step h.
Vec rk4_step(const ProblemSpec& spec, const Vec& x, const Vec& u, double scale,
             double h);

Trajectory integrate(const ProblemSpec& spec, const ControlSignal& control,
                     int substeps = 1);

/// Same scheme with a per-cell time scaling.
Trajectory integrate_scaled(const ProblemSpec& spec,
                            const ControlSignal& control,
                            std::vector<double> scale, int substeps);

enum class CrossingDirection { kExit, kEntry };  // K -> K^c, K^c -> K

struct Crossing {
  double time = 0.0;
  CrossingDirection direction = CrossingDirection::kExit;
  Vec state;
  double g_value = 0.0;
  double margin_before = 0.0;  // |grad g . f(x, u(t-))|
  double margin_after = 0.0;   // |grad g . f(x, u(t+))|
  int step = 0;                // step containing the crossing (or node index)
  bool on_node = false;
  int bisections = 0;
};

struct CrossingStructure {
  std::vector<Crossing> crossings;
  int r() const { return static_cast<int>(crossings.size()); }
  std::vector<double> times() const;
  bool transverse() const;
};

inline constexpr double kCrossingTol = 1e-10;
inline constexpr int kMaxBisections = 80;

/// Throws AssumptionViolation on tangential contact, on non-alternating
/// directions, or when the initial state is not interior to K.
CrossingStructure detect_crossings(const ProblemSpec& spec,
                                   const Trajectory& traj,
                                   double crossing_tol = kCrossingTol);

/// phi(x(T)) plus the total length of the arcs spent outside K, measured
/// from the refined crossing times.
double crisis_cost(const ProblemSpec& spec, const Trajectory& traj,
                   const CrossingStructure& crossings);

/// CSV with columns t, x_1..x_n, u_1..u_m, g(x); one row per step node.
void write_trajectory_csv(std::ostream& out, const ProblemSpec& spec,
                          const Trajectory& traj);

}  // namespace tcrisis
