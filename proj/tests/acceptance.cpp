// Acceptance run: one PASS/FAIL line per criterion.

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <functional>
#include <map>
#include <random>
#include <sstream>
#include <string>
#include <vector>

#include "oracles.hpp"
#include "tcrisis/cli.hpp"

namespace fs = std::filesystem;
using namespace tcrisis;

namespace {

struct Outcome {
  bool passed = true;
  std::string detail;

  void require(bool ok, const std::string& what) {
    if (!ok) passed = false;
    if (!detail.empty()) detail += "; ";
    detail += what + (ok ? "" : " [fail]");
  }
};

std::string fmt(const char* format, double v) {
  char buf[64];
  std::snprintf(buf, sizeof buf, format, v);
  return buf;
}

std::string sci(double v) { return fmt("%.2e", v); }

double linear_phi(double x) { return -2.0 * x; }
double quad_phi(double x) { return -2.0 * x + 0.5 * x * x; }
double dc_phi(double x) { return (x + 1.0) * (x + 1.0); }

ControlSignal normalized_constant(int r, int n_arc, double value) {
  return ControlSignal::constant(0.0, r + 1.0, (r + 1) * n_arc,
                                 Vec::Constant(1, value),
                                 TimeDomain::kNormalized);
}

struct Solved {
  ProblemSpec spec;
  Solution sol;
  PontryaginCertificate cert;
  double seconds = 0.0;
};

Solved solve_single(const std::string& name) {
  const auto t0 = std::chrono::steady_clock::now();
  Solved s{catalog(name), {}, {}, 0.0};
  s.sol = solve_fixed_structure(s.spec, normalized_constant(1, 500, 0.5),
                                CrossingVector({1.5}, 2.0));
  s.cert = build_certificate(s.spec, s.sol);
  s.seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0)
                  .count();
  return s;
}

Solved solve_double() {
  const auto t0 = std::chrono::steady_clock::now();
  Solved s{catalog("double_crossing_1d"), {}, {}, 0.0};
  s.sol = solve_time_crisis(s.spec, subdivide(*s.spec.initial_guess, 1.0 / 500));
  s.cert = build_certificate(s.spec, s.sol);
  s.seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0)
                  .count();
  return s;
}

const Solved& linear() {
  static const Solved s = solve_single("linear_payoff_1d");
  return s;
}
const Solved& quad() {
  static const Solved s = solve_single("quad_payoff_1d");
  return s;
}
const Solved& double_crossing() {
  static const Solved s = solve_double();
  return s;
}

// Max |p - value| over the nodes of one arc (one-sided values at crossings
// are the stored right limits, so the before side uses p_before).
double costate_deviation(const Solved& s, int arc, double value) {
  const int per_arc = s.sol.physical_trajectory.steps() / (s.sol.r() + 1);
  double dev = 0.0;
  for (int k = arc * per_arc; k <= (arc + 1) * per_arc; ++k) {
    double p = s.cert.p(0, k);
    if (k == (arc + 1) * per_arc && arc < s.sol.r()) p = s.cert.p_before(0, arc);
    dev = std::max(dev, std::abs(p - value));
  }
  return dev;
}

Outcome criterion1() {
  Outcome o;
  const auto best = oracle::two_piece(linear_phi, -1.0, 2.0, 2000);
  const Solved& s = linear();
  o.require(std::abs(best.cost + 1.0) <= 1e-9,
            "oracle min " + fmt("%.6f", best.cost));
  o.require(s.sol.converged, "converged");
  o.require(std::abs(s.sol.tau.at(1) - 1.0) <= 1e-3,
            "tau " + fmt("%.6f", s.sol.tau.at(1)));
  o.require(std::abs(s.sol.objective - best.cost) <= 1e-3,
            "objective " + fmt("%.6f", s.sol.objective));
  const double p0 = costate_deviation(s, 0, -1.0);
  const double p1 = costate_deviation(s, 1, -2.0);
  o.require(std::max(p0, p1) <= 1e-3, "p dev " + sci(std::max(p0, p1)));
  o.require(std::abs(s.cert.gamma[0] + 1.0) <= 1e-3,
            "gamma " + fmt("%.6f", s.cert.gamma[0]));
  double nu_dev = 0.0;
  for (int c = 0; c < s.cert.nu.cols(); ++c) {
    const double want = c < s.sol.n_arc ? 1.0 : 2.0;
    nu_dev = std::max({nu_dev, std::abs(s.cert.nu(0, c) - want),
                       std::abs(s.cert.nu(1, c))});
  }
  o.require(nu_dev <= 1e-3, "nu dev " + sci(nu_dev));
  const double h_dev = std::max(std::abs(s.cert.hamiltonian_arc[0] + 1.0),
                                std::abs(s.cert.hamiltonian_arc[1] + 2.0));
  o.require(h_dev <= 1e-3, "H_arc dev " + sci(h_dev));
  return o;
}

void hamiltonian_laws(Outcome& o, const std::string& label, const Solved& s) {
  const double arc = arc_hamiltonian_deviation(s.spec, s.sol, s.cert).maxCoeff();
  double jump = 0.0;
  for (int j = 1; j <= s.sol.r(); ++j) {
    // Exit lowers H by 1, entry raises it by 1.
    const double expected = j % 2 ? -1.0 : 1.0;
    jump = std::max(jump, std::abs(s.cert.hamiltonian_arc[j] -
                                   s.cert.hamiltonian_arc[j - 1] - expected));
  }
  const double h0 = h0_deviation(s.spec, s.sol, s.cert);
  o.require(arc <= 1e-4 && jump <= 1e-4 && h0 <= 1e-4,
            label + " arc " + sci(arc) + " jump " + sci(jump) + " H0 " + sci(h0));
}

Outcome criterion2() {
  Outcome o;
  hamiltonian_laws(o, "linear", linear());
  hamiltonian_laws(o, "quad", quad());
  hamiltonian_laws(o, "double", double_crossing());
  return o;
}

double integral_residual(const Solved& s) {
  const Vec rho = rho_weighted_integral(s.spec, s.sol, s.cert);
  double worst = 0.0;
  for (int j = 1; j <= rho.size(); ++j) {
    worst = std::max(worst, std::abs(rho[j - 1] + (j % 2 ? -1.0 : 1.0)));
  }
  return worst;
}

Outcome criterion3() {
  Outcome o;
  for (const auto& [label, s] :
       {std::pair<std::string, const Solved*>{"linear", &linear()},
        {"quad", &quad()},
        {"double", &double_crossing()}}) {
    const double worst = integral_residual(*s);
    const std::string conv = s->sol.converged ? "" : " (not converged)";
    o.require(worst <= 1e-4, label + " " + sci(worst) + conv);
  }
  return o;
}

double gradient_error(const ProblemSpec& spec, const ControlSignal& u,
                      const CrossingVector& tau) {
  const ObjectiveGradient og = objective_and_gradient(spec, u, tau);
  const int r = tau.r();
  const int cells = u.cells();
  auto eval = [&](const ControlSignal& uu, const CrossingVector& tt) {
    const Trajectory traj = integrate_normalized(spec, uu, tt);
    Vec out(r + 1);
    out[0] = reformulated_objective(spec, traj.final_state(), tt);
    const int per_arc = uu.cells() / (r + 1);
    for (int j = 1; j <= r; ++j) out[j] = spec.g.scalar(traj.state(j * per_arc));
    return out;
  };
  Mat fd(r + 1, cells + r), adj(r + 1, cells + r);
  for (int c = 0; c < cells; ++c) {
    const double h = 1e-6 * std::max(1.0, std::abs(u.value(c)[0]));
    ControlSignal plus = u, minus = u;
    plus.values()(0, c) += h;
    minus.values()(0, c) -= h;
    fd.col(c) = (eval(plus, tau) - eval(minus, tau)) / (2 * h);
    adj(0, c) = og.value_control(0, c);
    for (int j = 0; j < r; ++j) adj(j + 1, c) = og.constraint_control[j](0, c);
  }
  for (int j = 0; j < r; ++j) {
    const double h = 1e-6 * tau.at(j + 1);
    std::vector<double> tp = tau.values(), tm = tau.values();
    tp[j] += h;
    tm[j] -= h;
    fd.col(cells + j) = (eval(u, CrossingVector(tp, tau.horizon())) -
                         eval(u, CrossingVector(tm, tau.horizon()))) /
                        (2 * h);
    adj(0, cells + j) = og.value_tau[j];
    for (int i = 0; i < r; ++i) adj(i + 1, cells + j) = og.constraint_tau(i, j);
  }
  double worst = 0.0;
  for (int row = 0; row <= r; ++row) {
    const double scale = std::max(fd.row(row).cwiseAbs().maxCoeff(), 1e-12);
    worst = std::max(worst, (adj.row(row) - fd.row(row)).cwiseAbs().maxCoeff() / scale);
  }
  return worst;
}

Outcome criterion4() {
  Outcome o;
  std::mt19937_64 rng(2024);
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  for (const std::string& name : catalog_names()) {
    const ProblemSpec spec = catalog(name);
    const int r = name == "double_crossing_1d" ? 2 : 1;
    double worst = 0.0;
    for (int point = 0; point < 20; ++point) {
      Mat values(1, (r + 1) * 25);
      for (int c = 0; c < values.cols(); ++c) values(0, c) = 2 * unit(rng) - 1;
      std::vector<double> t;
      for (int j = 0; j < r; ++j) {
        t.push_back(spec.horizon * (j + 0.1 + 0.8 * unit(rng)) / r);
      }
      worst = std::max(
          worst, gradient_error(spec,
                                ControlSignal::uniform(0.0, r + 1.0, values,
                                                       TimeDomain::kNormalized),
                                CrossingVector(t, spec.horizon)));
    }
    o.require(worst <= 1e-6, name + " " + sci(worst));
  }
  return o;
}

// Normalized control equal to u o pi_tau on the preimage grid.
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

Outcome criterion5() {
  Outcome o;
  std::mt19937_64 rng(77);
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  for (const std::string& name : catalog_names()) {
    const ProblemSpec spec = catalog(name);
    // Offsets crisis - reformulated, grouped by the parity of r.
    std::map<int, std::vector<double>> offsets;
    int samples = 0;
    for (int trial = 0; trial < 20000 && samples < 50; ++trial) {
      const int segments = 2 + static_cast<int>(rng() % 5);
      std::vector<double> nodes{0.0};
      for (int q = 1; q < segments; ++q) nodes.push_back(spec.horizon * unit(rng));
      std::sort(nodes.begin(), nodes.end());
      nodes.push_back(spec.horizon);
      if (std::adjacent_find(nodes.begin(), nodes.end()) != nodes.end()) continue;
      Mat values(1, segments);
      for (int q = 0; q < segments; ++q) values(0, q) = 2 * unit(rng) - 1;
      const ControlSignal u(nodes, values, TimeDomain::kPhysical);
      const Trajectory x = integrate(spec, subdivide(u, 0.01));
      CrossingStructure cs;
      try {
        cs = detect_crossings(spec, x);
      } catch (const AssumptionViolation&) {
        continue;
      }
      if (cs.r() == 0) continue;
      const CrossingVector tau(cs.times(), spec.horizon);
      const Trajectory xt = integrate_normalized(spec, exact_transport(u, tau), tau);
      offsets[cs.r() % 2].push_back(
          crisis_cost(spec, x, cs) -
          reformulated_objective(spec, xt.final_state(), tau));
      ++samples;
    }
    double spread = 0.0;
    std::string constants;
    for (auto& [parity, v] : offsets) {
      std::vector<double> sorted = v;
      std::sort(sorted.begin(), sorted.end());
      const double c = sorted[sorted.size() / 2];
      for (double d : v) spread = std::max(spread, std::abs(d - c));
      constants += (parity ? " odd r " : " even r ") + fmt("%.6f", c);
      o.require(std::abs(c - (parity ? spec.horizon : 0.0)) <= 1e-8,
                name + (parity ? " odd" : " even") + " constant");
    }
    o.require(samples == 50 && spread <= 1e-8,
              name + " " + std::to_string(samples) + " samples, max dev " +
                  sci(spread) + "," + constants);
  }
  return o;
}

Outcome criterion6() {
  Outcome o;
  const Solved& s = linear();
  const AugmentedCertificate aug = map_to_augmented(s.spec, s.sol, s.cert);
  o.require(aug.transversality_inner <= 1e-5 && aug.transversality_final <= 1e-5,
            "transversality " +
                sci(std::max(aug.transversality_inner, aug.transversality_final)));
  o.require(aug.lambda_final <= 1e-5, "lambda(1) + alpha " + sci(aug.lambda_final));
  o.require(aug.stationarity <= 1e-5, "stationarity " + sci(aug.stationarity));
  return o;
}

Outcome criterion7() {
  Outcome o;
  const Solved& s = quad();
  const SecondOrderResult so = second_order_check(s.spec, s.sol, s.cert, 250, 1);
  o.require(s.sol.converged, "converged");
  o.require(so.accepted >= 200, std::to_string(so.accepted) + " directions");
  o.require(so.status == SecondOrderResult::Status::kPassed &&
                so.min_normalized_omega >= -1e-4,
            "min normalized Omega " + fmt("%.4g", so.min_normalized_omega));

  const CriticalSample sample = sample_critical(s.spec, s.sol, s.cert, 10, 3);
  double homog = 0.0, symm = 0.0, fd_rel = 0.0;
  for (std::size_t k = 0; k < sample.directions.size(); ++k) {
    const CriticalDirection& a = sample.directions[k];
    const CriticalDirection& b = sample.directions[(k + 1) % sample.directions.size()];
    const double oa = evaluate_omega(s.spec, s.sol, s.cert, a);
    const CriticalDirection a3 =
        make_direction(s.spec, s.sol, 3.0 * a.du, 3.0 * a.dtau);
    homog = std::max(homog, std::abs(evaluate_omega(s.spec, s.sol, s.cert, a3) -
                                     9.0 * oa));
    symm = std::max(symm, std::abs(omega_bilinear(s.spec, s.sol, s.cert, a, b) -
                                   omega_bilinear(s.spec, s.sol, s.cert, b, a)));
    const double eps = 1e-3;
    const double fd =
        (reformulated_lagrangian(s.spec, s.sol, s.cert, eps * a.du, eps * a.dtau) -
         2 * reformulated_lagrangian(s.spec, s.sol, s.cert, 0 * a.du, 0 * a.dtau) +
         reformulated_lagrangian(s.spec, s.sol, s.cert, -eps * a.du, -eps * a.dtau)) /
        (eps * eps);
    fd_rel = std::max(fd_rel, std::abs(oa - fd) / std::max(std::abs(fd), 1e-12));
  }
  o.require(sample.directions.size() == 10, "10 FD directions");
  o.require(homog <= 1e-10, "homogeneity " + sci(homog));
  o.require(symm <= 1e-10, "symmetry " + sci(symm));
  o.require(fd_rel <= 0.05, "FD rel " + sci(fd_rel));
  return o;
}

Outcome criterion8() {
  Outcome o;
  const ProblemSpec spec = catalog("double_crossing_1d");
  const Trajectory init = integrate(spec, subdivide(*spec.initial_guess, 1.0 / 500));
  const CrossingStructure cs = detect_crossings(spec, init);
  const double init_cost = crisis_cost(spec, init, cs);
  o.require(cs.r() == 2 && std::abs(cs.crossings[0].time - 1.0) <= 1e-9 &&
                std::abs(cs.crossings[1].time - 2.0) <= 1e-9,
            "init r " + std::to_string(cs.r()));
  const Solved& s = double_crossing();
  o.require(s.sol.r() == 2, "solve keeps r = 2");
  o.require(s.sol.objective < init_cost,
            "cost " + fmt("%.4f", init_cost) + " -> " + fmt("%.4f", s.sol.objective));
  const auto best = oracle::bang_family(dc_phi, -1.0, spec.horizon, 100);
  o.require(std::abs(s.sol.objective - best.cost) <= 1e-2,
            "oracle " + fmt("%.4f", best.cost));
  Outcome laws;
  hamiltonian_laws(laws, "laws", s);
  const double integral = integral_residual(s);
  o.require(laws.passed, laws.detail);
  o.require(integral <= 1e-4, "integral " + sci(integral));
  o.detail += "; " + fmt("%.1f s", s.seconds);
  return o;
}

Outcome criterion9() {
  Outcome o;
  const Solved& s = linear();
  auto worst = [](const VerificationReport& r, std::initializer_list<const char*> names) {
    double w = 0.0;
    for (const char* n : names) {
      if (const ReportEntry* e = r.find(n)) w = std::max(w, e->violation_ratio());
    }
    return w;
  };
  PontryaginCertificate flipped = s.cert;
  flipped.gamma = -flipped.gamma;
  const double g = worst(check_first_order(s.spec, s.sol, flipped),
                         {"costate_jump", "hamiltonian_jump", "integral_relation"});
  o.require(g >= 10.0, "gamma flip " + fmt("%.3g", g) + "x");
  PontryaginCertificate negated = s.cert;
  negated.nu(0, 100) = -negated.nu(0, 100);
  const double n = worst(check_first_order(s.spec, s.sol, negated), {"nu_sign"});
  o.require(n >= 10.0, "nu negation " + fmt("%.3g", n) + "x");
  Solution shifted = s.sol;
  shifted.tau = CrossingVector({s.sol.tau.at(1) + 0.2}, s.spec.horizon);
  attach_trajectories(s.spec, SolverOptions{}, shifted);
  const PontryaginCertificate cert = build_certificate(s.spec, shifted);
  const double t = worst(check_first_order(s.spec, shifted, cert),
                         {"crossing_feasibility"});
  o.require(t >= 10.0, "tau shift " + fmt("%.3g", t) + "x");
  return o;
}

std::string slurp(const fs::path& p) {
  std::ifstream f(p, std::ios::binary);
  std::ostringstream s;
  s << f.rdbuf();
  return s.str();
}

Outcome criterion10() {
  Outcome o;
  const fs::path root = fs::temp_directory_path() / "tcrisis_acceptance";
  fs::remove_all(root);
  for (const char* name : {"a", "b"}) {
    const std::string out = (root / name).string();
    const char* argv[] = {"tcrisis", "report", "--problem", "quad_payoff_1d",
                          "--control", "0.7", "--seed", "42", "--no-timestamp",
                          "--out", out.c_str()};
    std::ostringstream sink, err;
    const int code = run_cli(11, argv, sink, err);
    o.require(code == 0, std::string("run ") + name + " exit " + std::to_string(code));
  }
  int files = 0, identical = 0;
  for (const auto& entry : fs::directory_iterator(root / "a")) {
    ++files;
    const fs::path other = root / "b" / entry.path().filename();
    if (fs::exists(other) && slurp(entry.path()) == slurp(other)) ++identical;
  }
  o.require(files > 0 && files == identical,
            std::to_string(identical) + "/" + std::to_string(files) +
                " artifacts identical");
  return o;
}

}  // namespace

int main() {
  const std::vector<std::function<Outcome()>> criteria = {
      criterion1, criterion2, criterion3, criterion4, criterion5,
      criterion6, criterion7, criterion8, criterion9, criterion10};
  int failed = 0;
  for (std::size_t k = 0; k < criteria.size(); ++k) {
    Outcome o;
    try {
      o = criteria[k]();
    } catch (const std::exception& e) {
      o.passed = false;
      o.detail = std::string("exception: ") + e.what();
    }
    if (!o.passed) ++failed;
    std::printf("criterion %zu: %s  %s\n", k + 1, o.passed ? "PASS" : "FAIL",
                o.detail.c_str());
    std::fflush(stdout);
  }
  return failed == 0 ? 0 : 1;
}
