#pragma once

#include <vector>

#include "tcrisis/simulate.hpp"

namespace tcrisis {

/// Crossing times 0 < tau_1 < ... < tau_r < T with tau_0 = 0, tau_{r+1} = T.
class CrossingVector {
 public:
  CrossingVector() = default;
  CrossingVector(std::vector<double> tau, double horizon);

  int r() const { return static_cast<int>(tau_.size()); }
  double horizon() const { return horizon_; }
  /// j in 0..r+1, with the boundary conventions.
  double at(int j) const;
  /// Length of arc j (0..r), i.e. the slope of pi_tau on [j, j+1].
  double slope(int j) const { return at(j + 1) - at(j); }
  const std::vector<double>& values() const { return tau_; }

 private:
  std::vector<double> tau_;
  double horizon_ = 0.0;
};

/// Piecewise-affine change of time [0, r+1] -> [0, T].
double pi_tau(double s, const CrossingVector& tau);
double pi_tau_inverse(double t, const CrossingVector& tau);

/// Resamples a physical control on a uniform normalized grid with
/// `cells_per_arc` cells on each unit arc (value at the midpoint preimage).
ControlSignal to_normalized(const ControlSignal& control,
                            const CrossingVector& tau, int cells_per_arc);

/// Image of a normalized control: same values, nodes mapped through pi_tau.
ControlSignal from_normalized(const ControlSignal& control,
                              const CrossingVector& tau);

/// Arc index (0..r) of a normalized cell.
int arc_of_cell(const ControlSignal& normalized, int cell);

/// RK4 on dx/ds = (d pi_tau / ds) f(x, u) over [0, r+1].
Trajectory integrate_normalized(const ProblemSpec& spec,
                                const ControlSignal& normalized,
                                const CrossingVector& tau, int substeps = 1);

/// phi(x(r+1)) + sum_j (-1)^j tau_j.
double reformulated_objective(const ProblemSpec& spec, const Vec& final_state,
                              const CrossingVector& tau);

// Augmented single-crossing system on [0, 1]. y = (y1, y2, xi),
// v = (v1, v2).
Vec eval_F(const ProblemSpec& spec, const Vec& y, const Vec& v,
           double horizon);
Vec eval_G(const ProblemSpec& spec, const Vec& y0, const Vec& y1);
double eval_psi(const ProblemSpec& spec, const Vec& y, double horizon);
bool in_C(const ProblemSpec& spec, const Vec& gval, double horizon,
          double tol);

}  // namespace tcrisis
