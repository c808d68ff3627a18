#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "tcrisis/multipliers.hpp"

namespace tcrisis {

struct VerifyTolerances {
  double stationarity = 1e-6;
  double sign = 1e-6;
  double complementarity = 1e-6;
  double jump = 1e-8;
  double hamiltonian = 1e-4;
  double h0 = 1e-4;
  double integral = 1e-4;
  double crossing = 1e-6;
  double pontryagin = 1e-6;
  double lig_epsilon = 1e-6;
  double gamma_crosscheck = 1e-4;
  double omega = 1e-4;
  double cone = 1e-8;
  // Multipliers at or below this are treated as zero when classifying
  // active constraints as strongly or weakly active.
  double strong_activity = 1e-5;
  int pontryagin_samples = 101;  // per control dimension
};

enum class EntryKind {
  kResidual,    // passes when value <= tolerance
  kLowerBound,  // passes when value >= -tolerance
  kThreshold,   // passes when value >= tolerance
};

struct ReportEntry {
  std::string name;
  double value = 0.0;
  double tolerance = 0.0;
  EntryKind kind = EntryKind::kResidual;
  bool passed = false;

  /// How many tolerances the entry is away from passing (0 when it passes).
  double violation_ratio() const;
};

struct SecondOrderResult {
  enum class Status { kPassed, kFailed, kVacuous, kSkipped };
  Status status = Status::kSkipped;
  double min_normalized_omega = 0.0;
  int accepted = 0;
  int requested = 0;
  std::string note;
  std::vector<double> normalized_values;  // Omega / |d|^2 per direction
  std::vector<Vec> dtau;                  // per direction
};

const char* to_string(SecondOrderResult::Status status);

struct VerificationReport {
  std::vector<ReportEntry> entries;
  SecondOrderResult second_order;

  const ReportEntry* find(const std::string& name) const;
  bool first_order_passed() const;
  /// First-order entries plus the second-order check unless it failed.
  bool passed() const;
};

/// First-order residual suite. The costate is rebuilt from (alpha, gamma) of
/// the certificate so that faulty jump coefficients show up downstream.
VerificationReport check_first_order(const ProblemSpec& spec,
                                     const Solution& solution,
                                     const PontryaginCertificate& cert,
                                     const VerifyTolerances& tol = {});

/// Costate implied by (alpha, gamma) through the adjoint equation and the
/// jump condition.
PontryaginCertificate costate_from_multipliers(
    const ProblemSpec& spec, const Solution& solution,
    const PontryaginCertificate& cert);

struct CriticalDirection {
  Mat du;    // m x cells (physical cells of the solution)
  Vec dtau;  // r
  Mat dx;    // n x (steps + 1)

  double norm(const Solution& solution) const;  // |du|_L2 + |dtau|
};

/// Tangent of the solution's RK4 recursion: delta x on the physical nodes for
/// control perturbation du (per cell) and crossing perturbation dtau.
Mat linearize(const ProblemSpec& spec, const Solution& solution, const Mat& du,
              const Vec& dtau);

CriticalDirection make_direction(const ProblemSpec& spec,
                                 const Solution& solution, Mat du, Vec dtau);

struct ConeConditions {
  double control_tangency = 0.0;  // max violation of active-constraint rows
  double crossing_tangency = 0.0;  // max_j |Dg dx(tau_j)|
  double cost = 0.0;               // Dphi dx(T) + sum (-1)^j dtau_j
  // int sum_weak nu_i |Dc_i du| dt: first-order size of the cost carried by
  // multipliers below the strong-activity threshold. Added to the cost
  // tolerance.
  double cost_allowance = 0.0;
};

ConeConditions cone_conditions(const ProblemSpec& spec,
                               const Solution& solution,
                               const PontryaginCertificate& cert,
                               const CriticalDirection& d,
                               const VerifyTolerances& tol = {});

bool in_critical_cone(const ConeConditions& c, const VerifyTolerances& tol);

struct CriticalSample {
  std::vector<CriticalDirection> directions;
  int attempts = 0;
  int singular = 0;
  int cost_rejected = 0;
  int trivial = 0;
  std::string warning;
};

CriticalSample sample_critical(const ProblemSpec& spec,
                               const Solution& solution,
                               const PontryaginCertificate& cert, int count,
                               std::uint64_t seed,
                               const VerifyTolerances& tol = {});

/// Symmetric bilinear form associated with Omega.
double omega_bilinear(const ProblemSpec& spec, const Solution& solution,
                      const PontryaginCertificate& cert,
                      const CriticalDirection& a, const CriticalDirection& b);

double evaluate_omega(const ProblemSpec& spec, const Solution& solution,
                      const PontryaginCertificate& cert,
                      const CriticalDirection& d);

/// Lagrangian of the reformulated problem,
///   phi(x(r+1)) + sum (-1)^j tau_j + sum lambda_j g(x(j)) + int mu . c ds
/// with lambda = -gamma and mu = (d pi / ds) nu, evaluated after moving the
/// normalized controls by du (per cell) and tau by dtau.
double reformulated_lagrangian(const ProblemSpec& spec,
                               const Solution& solution,
                               const PontryaginCertificate& cert,
                               const Mat& du, const Vec& dtau);

/// First-order suite, then the second-order check when the first order
/// passes.
VerificationReport verify_solution(const ProblemSpec& spec,
                                   const Solution& solution,
                                   const PontryaginCertificate& cert,
                                   int omega_samples, std::uint64_t seed,
                                   const VerifyTolerances& tol = {});

SecondOrderResult second_order_check(const ProblemSpec& spec,
                                     const Solution& solution,
                                     const PontryaginCertificate& cert,
                                     int count, std::uint64_t seed,
                                     const VerifyTolerances& tol = {});

}  // namespace tcrisis
