#include <cmath>
#include <random>

#include <gtest/gtest.h>

#include "tcrisis/verify.hpp"

namespace tcrisis {
namespace {

ControlSignal normalized_constant(int r, int n_arc, double value) {
  return ControlSignal::constant(0.0, r + 1.0, (r + 1) * n_arc,
                                 Vec::Constant(1, value),
                                 TimeDomain::kNormalized);
}

struct Solved {
  ProblemSpec spec;
  Solution sol;
  PontryaginCertificate cert;
};

Solved solve_catalog(const std::string& name) {
  Solved s{catalog(name), {}, {}};
  s.sol = solve_fixed_structure(s.spec, normalized_constant(1, 500, 0.5),
                                CrossingVector({1.5}, 2.0));
  s.cert = build_certificate(s.spec, s.sol);
  return s;
}

const Solved& linear() {
  static const Solved s = solve_catalog("linear_payoff_1d");
  return s;
}

const Solved& quad() {
  static const Solved s = solve_catalog("quad_payoff_1d");
  return s;
}

double ratio(const VerificationReport& report, const std::string& name) {
  const ReportEntry* e = report.find(name);
  EXPECT_NE(e, nullptr) << name;
  return e ? e->violation_ratio() : 0.0;
}

CriticalDirection random_direction(const Solved& s, std::mt19937_64& rng) {
  std::normal_distribution<double> normal;
  Mat du(s.spec.m, s.sol.physical_control.cells());
  for (int c = 0; c < du.cols(); ++c) du(0, c) = normal(rng);
  Vec dtau(s.sol.r());
  for (int j = 0; j < dtau.size(); ++j) dtau[j] = normal(rng);
  return make_direction(s.spec, s.sol, du, dtau);
}

TEST(FirstOrder, LinearPassesEveryEntry) {
  const Solved& s = linear();
  const VerificationReport report = check_first_order(s.spec, s.sol, s.cert);
  for (const ReportEntry& e : report.entries) {
    EXPECT_TRUE(e.passed) << e.name << " " << e.value;
  }
  EXPECT_TRUE(report.first_order_passed());
}

TEST(FirstOrder, QuadPassesEveryEntry) {
  const Solved& s = quad();
  const VerificationReport report = check_first_order(s.spec, s.sol, s.cert);
  for (const ReportEntry& e : report.entries) {
    EXPECT_TRUE(e.passed) << e.name << " " << e.value;
  }
}

TEST(FirstOrder, FlippedGammaIsDetected) {
  const Solved& s = linear();
  PontryaginCertificate bad = s.cert;
  bad.gamma = -bad.gamma;
  const VerificationReport report = check_first_order(s.spec, s.sol, bad);
  EXPECT_FALSE(report.first_order_passed());
  EXPECT_GE(ratio(report, "costate_jump"), 10.0);
  EXPECT_GE(ratio(report, "hamiltonian_jump"), 10.0);
  EXPECT_GE(ratio(report, "stationarity"), 10.0);
  EXPECT_GE(ratio(report, "integral_relation"), 10.0);
}

TEST(FirstOrder, NegatedNuIsDetected) {
  const Solved& s = linear();
  PontryaginCertificate bad = s.cert;
  bad.nu(0, 10) = -bad.nu(0, 10);
  const VerificationReport report = check_first_order(s.spec, s.sol, bad);
  EXPECT_GE(ratio(report, "nu_sign"), 10.0);
  EXPECT_GE(ratio(report, "stationarity"), 10.0);
  EXPECT_TRUE(report.find("costate_jump")->passed);
}

TEST(FirstOrder, ShiftedTauIsDetectedAndGatesSecondOrder) {
  const Solved& s = linear();
  Solution shifted = s.sol;
  shifted.tau = CrossingVector({s.sol.tau.at(1) + 0.2}, s.spec.horizon);
  attach_trajectories(s.spec, SolverOptions{}, shifted);
  const PontryaginCertificate cert = build_certificate(s.spec, shifted);
  const VerificationReport report =
      verify_solution(s.spec, shifted, cert, 20, 1);
  EXPECT_GE(ratio(report, "crossing_feasibility"), 10.0);
  EXPECT_FALSE(report.passed());
  EXPECT_EQ(report.second_order.status, SecondOrderResult::Status::kSkipped);
  EXPECT_EQ(report.second_order.note, "first-order conditions failed");
}

TEST(FirstOrder, CostateFromMultipliersMatchesCertificate) {
  const Solved& s = quad();
  const PontryaginCertificate rebuilt =
      costate_from_multipliers(s.spec, s.sol, s.cert);
  EXPECT_LE((rebuilt.p - s.cert.p).cwiseAbs().maxCoeff(), 1e-14);
  EXPECT_EQ(rebuilt.nu, s.cert.nu);
}

TEST(Linearize, ZeroAndLinear) {
  const Solved& s = quad();
  std::mt19937_64 rng(3);
  const int cells = s.sol.physical_control.cells();
  EXPECT_EQ(linearize(s.spec, s.sol, Mat::Zero(1, cells), Vec::Zero(1))
                .cwiseAbs()
                .maxCoeff(),
            0.0);
  const CriticalDirection a = random_direction(s, rng);
  const CriticalDirection b = random_direction(s, rng);
  const Mat sum = linearize(s.spec, s.sol, a.du + 3 * b.du, a.dtau + 3 * b.dtau);
  EXPECT_LE((sum - a.dx - 3 * b.dx).cwiseAbs().maxCoeff(), 1e-12);
  EXPECT_THROW(linearize(s.spec, s.sol, Mat::Zero(1, cells + 1), Vec::Zero(1)),
               std::invalid_argument);
}

TEST(Linearize, MatchesFiniteDifferences) {
  const Solved& s = quad();
  std::mt19937_64 rng(4);
  const CriticalDirection d = random_direction(s, rng);
  const double eps = 1e-6;
  auto states = [&](double t) {
    ControlSignal u = s.sol.normalized_control;
    u.values() += t * d.du;
    const CrossingVector tau({s.sol.tau.at(1) + t * d.dtau[0]}, s.spec.horizon);
    return integrate_normalized(s.spec, u, tau, s.sol.substeps).states;
  };
  const Mat fd = (states(eps) - states(-eps)) / (2 * eps);
  EXPECT_LE((fd - d.dx).cwiseAbs().maxCoeff(), 1e-7);
}

TEST(CriticalCone, SamplesSatisfyConeConditions) {
  const Solved& s = quad();
  const VerifyTolerances tol;
  const CriticalSample sample = sample_critical(s.spec, s.sol, s.cert, 40, 9);
  ASSERT_GE(sample.directions.size(), 20u) << sample.warning;
  for (const CriticalDirection& d : sample.directions) {
    EXPECT_NEAR(d.norm(s.sol), 1.0, 1e-12);
    EXPECT_TRUE(in_critical_cone(cone_conditions(s.spec, s.sol, s.cert, d), tol));
  }
}

TEST(CriticalCone, RejectsViolatingDirection) {
  // On the last arc u = 1 with nu = 1: increasing u leaves U.
  const Solved& s = quad();
  const int cells = s.sol.physical_control.cells();
  Mat du = Mat::Zero(1, cells);
  du(0, cells - 5) = 1.0;
  const CriticalDirection d = make_direction(s.spec, s.sol, du, Vec::Zero(1));
  const ConeConditions c = cone_conditions(s.spec, s.sol, s.cert, d);
  EXPECT_GT(c.control_tangency, 0.5);
  EXPECT_FALSE(in_critical_cone(c, VerifyTolerances{}));
}

TEST(CriticalCone, LinearConeIsTrivial) {
  const Solved& s = linear();
  const CriticalSample sample = sample_critical(s.spec, s.sol, s.cert, 30, 1);
  EXPECT_TRUE(sample.directions.empty());
  const SecondOrderResult result =
      second_order_check(s.spec, s.sol, s.cert, 30, 1);
  EXPECT_EQ(result.status, SecondOrderResult::Status::kVacuous);
  EXPECT_EQ(result.note, "vacuous (cone trivial)");
}

TEST(Omega, ZeroHomogeneousAndSymmetric) {
  const Solved& s = quad();
  std::mt19937_64 rng(6);
  const int cells = s.sol.physical_control.cells();
  const CriticalDirection zero =
      make_direction(s.spec, s.sol, Mat::Zero(1, cells), Vec::Zero(1));
  EXPECT_EQ(evaluate_omega(s.spec, s.sol, s.cert, zero), 0.0);
  for (int trial = 0; trial < 5; ++trial) {
    const CriticalDirection a = random_direction(s, rng);
    const CriticalDirection b = random_direction(s, rng);
    const double oa = evaluate_omega(s.spec, s.sol, s.cert, a);
    const double ob = evaluate_omega(s.spec, s.sol, s.cert, b);
    const double scale = std::abs(oa) + std::abs(ob) + 1.0;
    const CriticalDirection a2 = make_direction(s.spec, s.sol, 2 * a.du, 2 * a.dtau);
    EXPECT_LE(std::abs(evaluate_omega(s.spec, s.sol, s.cert, a2) - 4 * oa),
              1e-10 * scale);
    const double bab = omega_bilinear(s.spec, s.sol, s.cert, a, b);
    const double bba = omega_bilinear(s.spec, s.sol, s.cert, b, a);
    EXPECT_LE(std::abs(bab - bba), 1e-10 * scale);
    const CriticalDirection sum =
        make_direction(s.spec, s.sol, a.du + b.du, a.dtau + b.dtau);
    EXPECT_LE(std::abs(evaluate_omega(s.spec, s.sol, s.cert, sum) - oa - ob -
                       2 * bab),
              1e-10 * scale);
  }
}

double second_difference(const Solved& s, const CriticalDirection& d, double eps) {
  const double up =
      reformulated_lagrangian(s.spec, s.sol, s.cert, eps * d.du, eps * d.dtau);
  const double mid = reformulated_lagrangian(s.spec, s.sol, s.cert,
                                             0 * d.du, 0 * d.dtau);
  const double down =
      reformulated_lagrangian(s.spec, s.sol, s.cert, -eps * d.du, -eps * d.dtau);
  return (up - 2 * mid + down) / (eps * eps);
}

TEST(Omega, MatchesSecondDifferenceOnQuad) {
  const Solved& s = quad();
  const CriticalSample sample = sample_critical(s.spec, s.sol, s.cert, 10, 2);
  ASSERT_EQ(sample.directions.size(), 10u);
  for (const CriticalDirection& d : sample.directions) {
    const double omega = evaluate_omega(s.spec, s.sol, s.cert, d);
    const double fd = second_difference(s, d, 1e-3);
    EXPECT_GT(std::abs(fd), 1e-3);
    EXPECT_NEAR(omega, fd, 0.05 * std::abs(fd) + 1e-8);
  }
}

TEST(Omega, MatchesSecondDifferenceWithCurvedBoundary) {
  // K = {x + x^2 / 2 <= 0} bends, so the D^2 g term contributes.
  const ProblemSpec spec =
      parse_problem_config(
          "n = 1\nm = 1\nhorizon = 2\nx0 = -1\nf1 = u1\ng = x1 + 0.5*x1^2\n"
          "c1 = u1 - 1\nc2 = -u1 - 1\nbox_lower = -1\nbox_upper = 1\n"
          "phi = -2*x1 + 0.5*x1^2\n")
          .spec;
  Solved s{spec, {}, {}};
  s.sol = solve_fixed_structure(spec, normalized_constant(1, 200, 0.5),
                                CrossingVector({1.5}, 2.0));
  ASSERT_TRUE(s.sol.converged) << s.sol.note;
  s.cert = build_certificate(spec, s.sol);
  ASSERT_GT(std::abs(s.cert.gamma[0]), 0.1);
  std::mt19937_64 rng(8);
  for (int trial = 0; trial < 5; ++trial) {
    const CriticalDirection d = random_direction(s, rng);
    const double omega = evaluate_omega(spec, s.sol, s.cert, d);
    const double fd = second_difference(s, d, 1e-3);
    EXPECT_GT(std::abs(fd), 1e-3);
    EXPECT_NEAR(omega, fd, 0.05 * std::abs(fd) + 1e-6);
  }
}

TEST(SecondOrder, QuadPasses) {
  const Solved& s = quad();
  const VerificationReport report = verify_solution(s.spec, s.sol, s.cert, 200, 1);
  EXPECT_TRUE(report.passed());
  EXPECT_EQ(report.second_order.status, SecondOrderResult::Status::kPassed);
  EXPECT_GE(report.second_order.accepted, 200);
  EXPECT_GE(report.second_order.min_normalized_omega, -1e-4);
}

TEST(SecondOrder, SeededSamplingIsDeterministic) {
  const Solved& s = quad();
  const SecondOrderResult a = second_order_check(s.spec, s.sol, s.cert, 20, 5);
  const SecondOrderResult b = second_order_check(s.spec, s.sol, s.cert, 20, 5);
  EXPECT_EQ(a.normalized_values, b.normalized_values);
}

}  // namespace
}  // namespace tcrisis
