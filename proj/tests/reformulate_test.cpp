#include <algorithm>
#include <cmath>
#include <random>

#include <gtest/gtest.h>

#include "tcrisis/reformulate.hpp"

namespace tcrisis {
namespace {

ControlSignal physical(double horizon, const std::vector<double>& nodes,
                       const std::vector<double>& values) {
  std::vector<double> all = nodes;
  all.push_back(horizon);
  return ControlSignal(all, Eigen::Map<const Mat>(values.data(), 1, values.size()),
                       TimeDomain::kPhysical);
}

// Normalized control equal to u o pi_tau: nodes are the preimages of the
// physical nodes together with the arc endpoints.
ControlSignal exact_transport(const ControlSignal& u, const CrossingVector& tau) {
  std::vector<double> s;
  for (double t : u.nodes()) s.push_back(pi_tau_inverse(t, tau));
  for (int j = 0; j <= tau.r() + 1; ++j) s.push_back(j);
  std::sort(s.begin(), s.end());
  s.erase(std::unique(s.begin(), s.end(),
                      [](double a, double b) { return std::abs(a - b) < 1e-13; }),
          s.end());
  Mat values(u.dim(), static_cast<int>(s.size()) - 1);
  for (int k = 0; k + 1 < static_cast<int>(s.size()); ++k) {
    values.col(k) = u.at(pi_tau(0.5 * (s[k] + s[k + 1]), tau));
  }
  return ControlSignal(s, values, TimeDomain::kNormalized);
}

TEST(CrossingVector, Validation) {
  EXPECT_NO_THROW(CrossingVector({1.0, 2.0}, 4.0));
  EXPECT_THROW(CrossingVector({2.0, 1.0}, 4.0), std::invalid_argument);
  EXPECT_THROW(CrossingVector({1.0, 1.0}, 4.0), std::invalid_argument);
  EXPECT_THROW(CrossingVector({0.0}, 4.0), std::invalid_argument);
  EXPECT_THROW(CrossingVector({4.0}, 4.0), std::invalid_argument);
  const CrossingVector tau({1.0, 2.5}, 4.0);
  EXPECT_EQ(tau.at(0), 0.0);
  EXPECT_EQ(tau.at(3), 4.0);
  EXPECT_EQ(tau.slope(1), 1.5);
}

TEST(PiTau, ClosedFormValues) {
  EXPECT_DOUBLE_EQ(pi_tau(0.5, CrossingVector({1.0}, 2.0)), 0.5);
  EXPECT_DOUBLE_EQ(pi_tau(1.5, CrossingVector({1.0}, 2.0)), 1.5);
  // (T - tau) s + 2 tau - T at s = 1.5.
  EXPECT_DOUBLE_EQ(pi_tau(1.5, CrossingVector({0.5}, 2.0)), 1.25);
  EXPECT_DOUBLE_EQ(pi_tau(2.5, CrossingVector({1.0, 2.0}, 4.0)), 3.0);
}

TEST(PiTau, NodesAndInverse) {
  const CrossingVector tau({0.3, 1.7, 2.2}, 3.0);
  for (int j = 0; j <= 4; ++j) EXPECT_DOUBLE_EQ(pi_tau(j, tau), tau.at(j));
  double prev = -1.0;
  for (int k = 0; k <= 400; ++k) {
    const double s = 4.0 * k / 400;
    const double t = pi_tau(s, tau);
    EXPECT_GT(t, prev);
    prev = t;
    EXPECT_NEAR(pi_tau_inverse(t, tau), s, 1e-14);
  }
  EXPECT_THROW(pi_tau(-0.1, tau), std::out_of_range);
  EXPECT_THROW(pi_tau(4.1, tau), std::out_of_range);
  EXPECT_THROW(pi_tau_inverse(3.5, tau), std::out_of_range);
}

TEST(Transport, ConstantAndIdentityCases) {
  const CrossingVector tau({1.0}, 2.0);
  const ControlSignal ones = ControlSignal::constant(
      0.0, 2.0, 8, Vec::Constant(1, 1.0), TimeDomain::kPhysical);
  const ControlSignal n1 = to_normalized(ones, tau, 10);
  EXPECT_EQ(n1.cells(), 20);
  EXPECT_TRUE((n1.values().array() == 1.0).all());
  EXPECT_EQ(n1.domain(), TimeDomain::kNormalized);

  const ControlSignal step = physical(2.0, {0.0, 1.0}, {-1.0, 1.0});
  const ControlSignal n2 = to_normalized(step, tau, 10);
  for (int c = 0; c < n2.cells(); ++c) {
    EXPECT_EQ(n2.value(c)[0], c < 10 ? -1.0 : 1.0);
  }
}

TEST(Transport, RoundTripOnAlignedGrid) {
  const CrossingVector tau({0.5}, 2.0);
  Mat values(1, 8);
  values << 0.1, -0.2, 0.3, -0.4, 0.5, -0.6, 0.7, -0.8;
  const ControlSignal normalized =
      ControlSignal::uniform(0.0, 2.0, values, TimeDomain::kNormalized);
  const ControlSignal phys = from_normalized(normalized, tau);
  EXPECT_EQ(phys.node(4), 0.5);
  EXPECT_EQ(phys.end(), 2.0);
  const ControlSignal back = to_normalized(phys, tau, 4);
  EXPECT_EQ(back.values(), values);
  for (int k = 0; k <= 8; ++k) EXPECT_NEAR(back.node(k), normalized.node(k), 1e-15);
}

TEST(IntegrateNormalized, ClosedForms) {
  const ProblemSpec spec = catalog("linear_payoff_1d");
  const ControlSignal ones = ControlSignal::constant(
      0.0, 2.0, 100, Vec::Constant(1, 1.0), TimeDomain::kNormalized);
  const Trajectory a = integrate_normalized(spec, ones, CrossingVector({1.0}, 2.0));
  EXPECT_NEAR(a.states(0, 50), 0.0, 1e-14);
  EXPECT_NEAR(a.final_state()[0], 1.0, 1e-14);
  const Trajectory b = integrate_normalized(spec, ones, CrossingVector({0.5}, 2.0));
  EXPECT_NEAR(b.states(0, 50), -0.5, 1e-15);
  EXPECT_THROW(integrate_normalized(spec, ControlSignal::constant(
                                              0.0, 2.0, 4, Vec::Ones(1),
                                              TimeDomain::kPhysical),
                                    CrossingVector({1.0}, 2.0)),
               std::invalid_argument);
}

TEST(IntegrateNormalized, ConjugateToPhysicalTrajectory) {
  const ProblemSpec spec = catalog("double_crossing_1d");
  const ControlSignal u = subdivide(*spec.initial_guess, 0.05);
  const Trajectory x = integrate(spec, u);
  const CrossingVector tau(detect_crossings(spec, x).times(), spec.horizon);
  const ControlSignal normalized = exact_transport(u, tau);
  const Trajectory xt = integrate_normalized(spec, normalized, tau);
  for (int k = 0; k <= xt.steps(); ++k) {
    const double t = pi_tau(xt.times[k], tau);
    // Physical trajectory is piecewise linear here; compare with its node
    // interpolation.
    const int cell = std::min(u.cell_at(t), u.cells() - 1);
    const double expected =
        x.states(0, cell) + (t - u.node(cell)) * u.value(cell)[0];
    EXPECT_NEAR(xt.states(0, k), expected, 1e-10);
  }
}

TEST(ReformulatedObjective, CostConjugacy) {
  std::mt19937_64 rng(5);
  std::uniform_real_distribution<double> value(-1.0, 1.0);
  for (const char* name : {"linear_payoff_1d", "quad_payoff_1d",
                           "double_crossing_1d"}) {
    const ProblemSpec spec = catalog(name);
    int checked = 0;
    for (int trial = 0; trial < 200 && checked < 20; ++trial) {
      const int segments = 2 + static_cast<int>(rng() % 4);
      std::vector<double> nodes{0.0}, values;
      for (int q = 1; q < segments; ++q) {
        nodes.push_back(spec.horizon * q / segments);
      }
      for (int q = 0; q < segments; ++q) values.push_back(value(rng));
      const ControlSignal u = physical(spec.horizon, nodes, values);
      const Trajectory x = integrate(spec, subdivide(u, 0.01));
      CrossingStructure cs;
      try {
        cs = detect_crossings(spec, x);
      } catch (const AssumptionViolation&) {
        continue;
      }
      if (cs.r() == 0) continue;
      const CrossingVector tau(cs.times(), spec.horizon);
      const Trajectory xt =
          integrate_normalized(spec, exact_transport(u, tau), tau);
      const double reformulated =
          reformulated_objective(spec, xt.final_state(), tau);
      const double offset = cs.r() % 2 ? spec.horizon : 0.0;
      EXPECT_NEAR(crisis_cost(spec, x, cs), reformulated + offset, 1e-8) << name;
      ++checked;
    }
    EXPECT_GE(checked, 5) << name;
  }
}

TEST(Augmented, FieldsAndPayoff) {
  const ProblemSpec spec = catalog("linear_payoff_1d");
  Vec y(3), v(2);
  y << -0.5, 0.25, 1.5;
  v << 0.2, -0.7;
  const Vec F = eval_F(spec, y, v, 2.0);
  EXPECT_DOUBLE_EQ(F[0], 1.5 * 0.2);
  EXPECT_DOUBLE_EQ(F[1], 0.5 * -0.7);
  EXPECT_EQ(F[2], 0.0);
  Vec yp(3);
  yp << 0.0, 1.0, 1.0;
  EXPECT_DOUBLE_EQ(eval_psi(spec, yp, 2.0), -1.0);
}

TEST(Augmented, OptimalTrajectoryLiesInC) {
  // u = 1, tau = 1: y1 runs -1 -> 0 and y2 runs 0 -> 1, xi = 1.
  const ProblemSpec spec = catalog("linear_payoff_1d");
  Vec y0(3), y1(3);
  y0 << -1.0, 0.0, 1.0;
  y1 << 0.0, 1.0, 1.0;
  const Vec G = eval_G(spec, y0, y1);
  ASSERT_EQ(G.size(), 4);
  EXPECT_TRUE(in_C(spec, G, 2.0, 1e-8));
  Vec g_boundary = G;
  g_boundary[1] = 2.0;  // xi = T
  EXPECT_FALSE(in_C(spec, g_boundary, 2.0, 1e-8));
  Vec y1_off = y1;
  y1_off[0] = 0.1;
  EXPECT_FALSE(in_C(spec, eval_G(spec, y0, y1_off), 2.0, 1e-8));
}

}  // namespace
}  // namespace tcrisis
