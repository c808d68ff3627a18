#pragma once

#include <vector>

#include "tcrisis/solve.hpp"

namespace tcrisis {

struct CertificateOptions {
  double active_delta = kDefaultActiveDelta;
  double transversality_tol = 1e-8;
  double rank_tol = 1e-10;
  int backward_refinement = 1;  // RK4 substeps per trajectory step for p
};

/**
 * Normalized Pontryagin certificate (alpha, gamma, nu, p) on the physical
 * grid of a solution.
 *
 * The costate is stored right-continuously at the trajectory nodes; at the
 * crossing nodes the left limits live in p_before. Hamiltonians are sampled
 * at both ends of every step with the control of that step.
 */
struct PontryaginCertificate {
  double alpha = 1.0;
  Vec gamma;           // r
  std::vector<double> times;
  Mat p;               // n x (steps + 1), right limits at crossings
  Mat p_before;        // n x r, p(tau_j^-)
  Mat p_after;         // n x r, p(tau_j^+)
  std::vector<int> crossing_nodes;  // node index of tau_j
  Mat nu;              // l x cells
  std::vector<double> stationarity;  // |grad_u H^a| per cell
  std::vector<bool> rank_deficient;  // per cell
  Vec hamiltonian_arc;               // median H per arc (r + 1)
  double h0 = 0.0;                   // median of H + 1_{K^c}
  Vec gamma_nlp;                     // -(equality multipliers) of the solver

  int r() const { return static_cast<int>(gamma.size()); }
  /// p at the left / right end of step k with one-sided limits at
  /// crossings.
  Vec p_start(int k) const { return p.col(k); }
  Vec p_end(int k) const;

  /// Multiplies (alpha, gamma, nu, p) by factor.
  PontryaginCertificate scaled(double factor) const;
};

/// Arc (0..r) of step k of a solution's physical trajectory.
int arc_of_step(const Solution& solution, int k);

/// Whether arc j lies outside K (odd arcs).
inline bool arc_outside(int arc) { return arc % 2 == 1; }

/// Backward RK4 costate with Hamiltonian-jump gammas; nu left empty.
PontryaginCertificate compute_costate(const ProblemSpec& spec,
                                      const Solution& solution,
                                      const CertificateOptions& options = {});

/// Costate for prescribed (alpha, gamma): adjoint equation plus the jump
/// condition, no Hamiltonian rule.
PontryaginCertificate costate_with_jumps(const ProblemSpec& spec,
                                         const Solution& solution,
                                         double alpha, const Vec& gamma,
                                         const CertificateOptions& options = {});

/// Whether the state at the midpoint of each physical step lies outside K.
std::vector<bool> outside_steps(const ProblemSpec& spec,
                                const Solution& solution);

/// Per-cell least-squares nu on the delta-active set.
void compute_nu(const ProblemSpec& spec, const Solution& solution,
                PontryaginCertificate& cert,
                const CertificateOptions& options = {});

/// compute_costate followed by compute_nu, Hamiltonian summaries and the
/// NLP multiplier cross-check.
PontryaginCertificate build_certificate(const ProblemSpec& spec,
                                        const Solution& solution,
                                        const CertificateOptions& options = {});

/// H(x, p, u) = p . f(x, u) at both ends of every step.
struct HamiltonianSamples {
  std::vector<double> start;  // per step
  std::vector<double> end;    // per step
  std::vector<double> mid;    // per step, midpoint rule
};

HamiltonianSamples sample_hamiltonian(const ProblemSpec& spec,
                                      const Solution& solution,
                                      const PontryaginCertificate& cert);

/// Max over each arc of |H - H_arc(j)|.
Vec arc_hamiltonian_deviation(const ProblemSpec& spec,
                              const Solution& solution,
                              const PontryaginCertificate& cert);

/// Max deviation of H + 1_{K^c}(x) from its median over the whole horizon,
/// with the indicator taken at step midpoints.
double h0_deviation(const ProblemSpec& spec, const Solution& solution,
                    const PontryaginCertificate& cert);

/// Integral of (rho_tau(t))_j H dt for each j (midpoint rule, arcs split at
/// the crossing nodes). The first-order relation is value_j + (-1)^j = 0.
Vec rho_weighted_integral(const ProblemSpec& spec, const Solution& solution,
                          const PontryaginCertificate& cert);

/// Multipliers of the augmented single-crossing problem on [0, 1].
struct AugmentedCertificate {
  double alpha = 1.0;
  Vec beta1, beta3;  // n
  double beta2 = 0.0;
  double beta4 = 0.0;
  std::vector<double> s;  // normalized nodes on [0, 1]
  Mat p1, p2;             // n x (nodes)
  Vec lambda;             // ξ costate at the nodes
  Mat mu1, mu2;           // l x cells

  // Verification rows.
  double transversality_inner = 0.0;  // |p1(1) + beta3 - beta4 grad g|
  double transversality_final = 0.0;  // |p2(1) - alpha grad phi|
  double transversality_initial = 0.0;  // |p1(0) + beta1| + |p2(0) + beta3|
  double lambda_final = 0.0;          // |lambda(1) + alpha|
  double stationarity = 0.0;          // sup |grad_v H^a|
  bool consistent = false;
};

AugmentedCertificate map_to_augmented(const ProblemSpec& spec,
                                      const Solution& solution,
                                      const PontryaginCertificate& cert,
                                      double tol = 1e-5);

}  // namespace tcrisis
