#include "tcrisis/cli.hpp"

#include <chrono>
#include <ctime>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <iostream>
#include <sstream>

#include <CLI11.hpp>

#include "tcrisis/io.hpp"

namespace tcrisis {

namespace fs = std::filesystem;

namespace {

struct HelpRequested {
  std::string text;
};

int to_int(const std::string& key, const std::string& value) {
  try {
    std::size_t used = 0;
    const int v = std::stoi(value, &used);
    if (used == value.size()) return v;
  } catch (const std::exception&) {
  }
  throw ConfigError("option '" + key + "': not an integer: " + value);
}

double to_real(const std::string& key, const std::string& value) {
  try {
    std::size_t used = 0;
    const double v = std::stod(value, &used);
    if (used == value.size()) return v;
  } catch (const std::exception&) {
  }
  throw ConfigError("option '" + key + "': not a number: " + value);
}

void apply_option(RunConfig& rc, const std::string& key,
                  const std::string& value) {
  SolverOptions& s = rc.solver;
  if (key == "n_arc" || key == "N_arc") {
    s.n_arc = to_int(key, value);
  } else if (key == "substeps") {
    s.substeps = to_int(key, value);
  } else if (key == "eq_tol") {
    s.eq_tol = to_real(key, value);
  } else if (key == "kkt_tol") {
    s.kkt_tol = to_real(key, value);
  } else if (key == "tau_gap") {
    s.tau_gap = to_real(key, value);
  } else if (key == "max_iter" || key == "max_outer") {
    s.max_outer = to_int(key, value);
  } else if (key == "max_inner") {
    s.max_inner = to_int(key, value);
  } else if (key == "penalty_initial") {
    s.penalty_initial = to_real(key, value);
  } else if (key == "penalty_growth") {
    s.penalty_growth = to_real(key, value);
  } else if (key == "seed") {
    rc.seed = static_cast<std::uint64_t>(to_int(key, value));
  } else if (key == "pontry_samples") {
    rc.tolerances.pontryagin_samples = to_int(key, value);
  } else if (key == "omega_samples") {
    rc.omega_samples = to_int(key, value);
  } else {
    throw ConfigError("unknown option key '" + key + "'");
  }
}

void check_run_config(const RunConfig& rc) {
  const SolverOptions& s = rc.solver;
  if (s.n_arc < 1 || s.substeps < 1 || s.max_outer < 1 || s.max_inner < 1) {
    throw ConfigError("n_arc, substeps and iteration limits must be >= 1");
  }
  if (!(s.eq_tol > 0) || !(s.kkt_tol > 0)) {
    throw ConfigError("tolerances must be > 0");
  }
  if (rc.tolerances.pontryagin_samples < 2 || rc.omega_samples < 0) {
    throw ConfigError("pontry-samples must be >= 2 and omega-samples >= 0");
  }
  if (rc.problem.empty() == rc.config.empty()) {
    throw ConfigError("exactly one of --problem and --config is required");
  }
}

ProblemConfig load_problem(const RunConfig& rc) {
  if (!rc.config.empty()) return load_problem_config(rc.config);
  ProblemConfig pc;
  try {
    pc.spec = catalog(rc.problem);
  } catch (const std::invalid_argument& e) {
    throw ConfigError(e.what());
  }
  return pc;
}

std::string timestamp() {
  const std::time_t now =
      std::chrono::system_clock::to_time_t(std::chrono::system_clock::now());
  std::tm tm{};
  gmtime_r(&now, &tm);
  std::ostringstream s;
  s << std::put_time(&tm, "%Y-%m-%dT%H:%M:%SZ");
  return s.str();
}

fs::path out_dir(const RunConfig& rc) {
  fs::path dir(rc.out);
  fs::create_directories(dir);
  return dir;
}

void write_json(const RunConfig& rc, const fs::path& path, Json j) {
  if (rc.timestamp) j["generated"] = timestamp();
  std::ofstream f(path);
  f << j.dump(2) << '\n';
  if (!f) throw std::runtime_error("cannot write " + path.string());
}

template <typename Fn>
void write_text(const fs::path& path, Fn&& fn) {
  std::ofstream f(path);
  fn(f);
  if (!f) throw std::runtime_error("cannot write " + path.string());
}

std::optional<ControlSignal> initial_control(const RunConfig& rc,
                                             const ProblemSpec& spec) {
  if (!rc.control.empty()) {
    if (fs::is_regular_file(rc.control)) {
      return read_control_csv(rc.control, spec.m, spec.horizon);
    }
    return parse_control(rc.control, spec.m, spec.horizon);
  }
  return spec.initial_guess;
}

// Simulation grid: the given signal with cells no wider than 1 / n_arc.
ControlSignal simulation_grid(const RunConfig& rc, const ControlSignal& u) {
  return subdivide(u, 1.0 / rc.solver.n_arc);
}

Solution run_solve(const RunConfig& rc, const ProblemSpec& spec) {
  if (auto u = initial_control(rc, spec)) {
    return solve_time_crisis(spec, simulation_grid(rc, *u), rc.solver);
  }
  // No initial control anywhere: one crossing at 3T/4 and every cell at
  // three quarters of the box hull.
  Vec value(spec.m);
  for (int i = 0; i < spec.m; ++i) {
    const double lo = spec.box_lower[i];
    const double hi = spec.box_upper[i];
    value[i] = (std::isfinite(lo) && std::isfinite(hi)) ? lo + 0.75 * (hi - lo)
                                                        : 0.5;
  }
  const CrossingVector tau({0.75 * spec.horizon}, spec.horizon);
  const ControlSignal u = ControlSignal::constant(
      0.0, 2.0, 2 * rc.solver.n_arc, value, TimeDomain::kNormalized);
  return solve_fixed_structure(spec, u, tau, rc.solver);
}

void write_solution(const RunConfig& rc, const ProblemSpec& spec,
                    const Solution& sol) {
  const fs::path dir = out_dir(rc);
  write_json(rc, dir / "solution.json", solution_to_json(spec, sol, rc.solver));
  write_text(dir / "iterations.csv",
             [&](std::ostream& f) { write_iteration_csv(f, sol); });
  write_text(dir / "trajectory.csv", [&](std::ostream& f) {
    write_trajectory_csv(f, spec, sol.physical_trajectory);
  });
  if (!sol.structure_free) {
    write_text(dir / "normalized_trajectory.csv", [&](std::ostream& f) {
      write_normalized_trajectory_csv(f, spec, sol);
    });
  }
}

int solve_exit_code(const Solution& sol) {
  if (!sol.structure_consistent) return kExitAssumption;
  if (!sol.converged) return kExitNotConverged;
  return kExitOk;
}

std::string short_double(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.3g", v);
  return buf;
}

std::string join(const std::vector<double>& v) {
  std::string s;
  for (std::size_t k = 0; k < v.size(); ++k) {
    if (k) s += ", ";
    s += format_double(v[k]);
  }
  return "(" + s + ")";
}

struct Verified {
  Solution solution;
  PontryaginCertificate cert;
  VerificationReport report;
};

// Loads the solve artifact from the output directory when it belongs to the
// same problem, otherwise solves inline.
Solution obtain_solution(const RunConfig& rc, const ProblemSpec& spec,
                         std::ostream& err) {
  const fs::path path = fs::path(rc.out) / "solution.json";
  if (fs::is_regular_file(path)) {
    std::ifstream f(path);
    const Json j = Json::parse(f);
    if (j.value("problem", "") == spec.name) return solution_from_json(spec, j);
    err << "solution.json belongs to another problem; solving inline\n";
  }
  Solution sol = run_solve(rc, spec);
  write_solution(rc, spec, sol);
  return sol;
}

int verify_exit_code(const VerificationReport& report) {
  const ReportEntry* lig = report.find("lig_margin");
  if (lig && !lig->passed) return kExitAssumption;
  return report.passed() ? kExitOk : kExitChecksFailed;
}

Verified run_verify(const RunConfig& rc, const ProblemSpec& spec,
                    std::ostream& err) {
  Verified v;
  v.solution = obtain_solution(rc, spec, err);
  v.cert = build_certificate(spec, v.solution);
  v.report = verify_solution(spec, v.solution, v.cert, rc.omega_samples,
                             rc.seed, rc.tolerances);
  const fs::path dir = out_dir(rc);
  write_json(rc, dir / "certificate.json",
             certificate_to_json(spec, v.solution, v.cert));
  write_text(dir / "costate.csv", [&](std::ostream& f) {
    write_costate_csv(f, v.solution, v.cert);
  });
  write_json(rc, dir / "report.json", report_to_json(v.report));
  write_text(dir / "directions.csv", [&](std::ostream& f) {
    write_directions_csv(f, v.report.second_order);
  });
  return v;
}

std::string report_text(const RunConfig& rc, const ProblemSpec& spec,
                        const Verified& v) {
  std::ostringstream s;
  if (rc.timestamp) s << "# generated " << timestamp() << '\n';
  const Solution& sol = v.solution;
  s << "problem: " << spec.name << '\n';
  s << "objective: " << format_double(sol.objective) << '\n';
  s << "converged: " << (sol.converged ? "yes" : "no") << '\n';
  s << "r: " << sol.r() << '\n';
  s << "tau: " << join(sol.tau.values()) << '\n';
  s << "alpha: " << format_double(v.cert.alpha) << '\n';
  s << "gamma: "
    << join(std::vector<double>(v.cert.gamma.data(),
                                v.cert.gamma.data() + v.cert.gamma.size()))
    << '\n';
  const Vec& h = v.cert.hamiltonian_arc;
  s << "H_arc: " << join(std::vector<double>(h.data(), h.data() + h.size()))
    << '\n';
  s << '\n';
  s << std::left << std::setw(24) << "check" << std::setw(26) << "value"
    << std::setw(12) << "tolerance" << "result\n";
  for (const auto& e : v.report.entries) {
    s << std::setw(24) << e.name << std::setw(26) << format_double(e.value)
      << std::setw(12) << short_double(e.tolerance)
      << (e.passed ? "PASS" : "FAIL") << '\n';
  }
  const auto& so = v.report.second_order;
  s << std::setw(24) << "second_order"
    << std::setw(26) << format_double(so.min_normalized_omega)
    << std::setw(12) << short_double(rc.tolerances.omega)
    << to_string(so.status);
  if (!so.note.empty() && so.note != to_string(so.status)) {
    s << " (" << so.note << ")";
  }
  s << " [" << so.accepted << "/" << so.requested << " directions]\n";
  s << "\noverall: " << (v.report.passed() ? "PASS" : "FAIL") << '\n';
  return s.str();
}

}  // namespace

ControlSignal read_control_csv(const std::string& path, int m,
                               double horizon) {
  std::ifstream f(path);
  if (!f) throw ConfigError("cannot open control file " + path);
  std::vector<double> nodes;
  std::vector<Vec> values;
  std::string line;
  int line_no = 0;
  while (std::getline(f, line)) {
    ++line_no;
    if (line.empty() || line[0] == '#') continue;
    std::stringstream row(line);
    std::string cell;
    std::vector<double> fields;
    bool numeric = true;
    while (std::getline(row, cell, ',')) {
      try {
        std::size_t used = 0;
        fields.push_back(std::stod(cell, &used));
      } catch (const std::exception&) {
        numeric = false;
        break;
      }
    }
    if (!numeric) {
      if (nodes.empty() && values.empty()) continue;  // header
      throw ConfigError(path + ":" + std::to_string(line_no) + ": not numeric");
    }
    if (static_cast<int>(fields.size()) != m + 1) {
      throw ConfigError(path + ":" + std::to_string(line_no) + ": expected " +
                        std::to_string(m + 1) + " columns");
    }
    nodes.push_back(fields[0]);
    values.push_back(Eigen::Map<const Vec>(fields.data() + 1, m));
  }
  if (nodes.empty() || nodes.front() != 0.0) {
    throw ConfigError(path + ": first row must start at t = 0");
  }
  nodes.push_back(horizon);
  Mat v(m, static_cast<int>(values.size()));
  for (std::size_t k = 0; k < values.size(); ++k) {
    v.col(static_cast<int>(k)) = values[k];
  }
  try {
    return ControlSignal(std::move(nodes), std::move(v), TimeDomain::kPhysical);
  } catch (const std::invalid_argument& e) {
    throw ConfigError(path + ": " + e.what());
  }
}

RunConfig parse_run_config(int argc, const char* const* argv) {
  RunConfig rc;
  CLI::App app{"Time-crisis optimal control: solve and certify"};
  app.add_option("command", rc.command, "simulate | solve | verify | report")
      ->required()
      ->check(CLI::IsMember({"simulate", "solve", "verify", "report"}));
  app.add_option("--problem", rc.problem, "catalog problem name");
  app.add_option("--config", rc.config, "problem config file");
  app.add_option("--control", rc.control,
                 "control: \"v\", \"t0: v0; t1: v1\" or a CSV file");
  app.add_option("--out", rc.out, "output directory")->capture_default_str();
  std::uint64_t seed = 0;
  int n_arc = 0, substeps = 0, pontry = 0, omega = 0;
  double eq_tol = 0.0, kkt_tol = 0.0;
  auto* o_seed = app.add_option("--seed", seed, "random seed");
  auto* o_arc = app.add_option("--n-arc", n_arc, "normalized cells per arc");
  auto* o_sub = app.add_option("--substeps", substeps, "RK4 steps per cell");
  auto* o_eq = app.add_option("--eq-tol", eq_tol, "crossing constraint tolerance");
  auto* o_kkt = app.add_option("--kkt-tol", kkt_tol, "projected gradient tolerance");
  auto* o_pontry = app.add_option("--pontry-samples", pontry,
                                  "Hamiltonian samples per control dimension");
  auto* o_omega =
      app.add_option("--omega-samples", omega, "sampled critical directions");
  bool no_timestamp = false;
  app.add_flag("--no-timestamp", no_timestamp, "omit generation timestamps");

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp&) {
    throw HelpRequested{app.help()};
  }

  if (!rc.config.empty()) {
    const ProblemConfig pc = load_problem_config(rc.config);
    for (const auto& [key, value] : pc.options) apply_option(rc, key, value);
  }
  if (o_seed->count()) rc.seed = seed;
  if (o_arc->count()) rc.solver.n_arc = n_arc;
  if (o_sub->count()) rc.solver.substeps = substeps;
  if (o_eq->count()) rc.solver.eq_tol = eq_tol;
  if (o_kkt->count()) rc.solver.kkt_tol = kkt_tol;
  if (o_pontry->count()) rc.tolerances.pontryagin_samples = pontry;
  if (o_omega->count()) rc.omega_samples = omega;
  rc.timestamp = !no_timestamp;
  check_run_config(rc);
  return rc;
}

int cmd_simulate(const RunConfig& rc, std::ostream& out, std::ostream& err) {
  const ProblemSpec spec = load_problem(rc).spec;
  const auto u = initial_control(rc, spec);
  if (!u) {
    err << "simulate needs --control (or an initial_control in the config)\n";
    return kExitUsage;
  }
  const Trajectory traj =
      integrate(spec, simulation_grid(rc, *u), rc.solver.substeps);
  const CrossingStructure structure = detect_crossings(spec, traj);
  const double cost = crisis_cost(spec, traj, structure);
  const fs::path dir = out_dir(rc);
  write_text(dir / "trajectory.csv",
             [&](std::ostream& f) { write_trajectory_csv(f, spec, traj); });
  Json j = crossings_to_json(structure);
  j["crisis_cost"] = cost;
  j["problem"] = spec.name;
  write_json(rc, dir / "crossings.json", j);
  out << "crisis_cost " << format_double(cost) << '\n';
  out << "crossings " << structure.r() << '\n';
  return kExitOk;
}

int cmd_solve(const RunConfig& rc, std::ostream& out, std::ostream& err) {
  const ProblemSpec spec = load_problem(rc).spec;
  const Solution sol = run_solve(rc, spec);
  write_solution(rc, spec, sol);
  out << "objective " << format_double(sol.objective) << '\n';
  out << "tau " << join(sol.tau.values()) << '\n';
  out << "converged " << (sol.converged ? "yes" : "no") << '\n';
  if (!sol.note.empty()) err << sol.note << '\n';
  return solve_exit_code(sol);
}

int cmd_verify(const RunConfig& rc, std::ostream& out, std::ostream& err) {
  const ProblemSpec spec = load_problem(rc).spec;
  const Verified v = run_verify(rc, spec, err);
  for (const auto& e : v.report.entries) {
    out << e.name << ' ' << format_double(e.value) << ' '
        << (e.passed ? "PASS" : "FAIL") << '\n';
  }
  out << "second_order " << to_string(v.report.second_order.status) << '\n';
  return verify_exit_code(v.report);
}

int cmd_report(const RunConfig& rc, std::ostream& out, std::ostream& err) {
  const ProblemSpec spec = load_problem(rc).spec;
  const Verified v = run_verify(rc, spec, err);
  const std::string text = report_text(rc, spec, v);
  write_text(out_dir(rc) / "report.txt", [&](std::ostream& f) { f << text; });
  out << text;
  return verify_exit_code(v.report);
}

int run_cli(int argc, const char* const* argv, std::ostream& out,
            std::ostream& err) {
  RunConfig rc;
  try {
    rc = parse_run_config(argc, argv);
  } catch (const HelpRequested& h) {
    out << h.text;
    return kExitOk;
  } catch (const CLI::ParseError& e) {
    err << "usage error: " << e.what() << '\n';
    return kExitUsage;
  } catch (const ConfigError& e) {
    err << "usage error: " << e.what() << '\n';
    return kExitUsage;
  }
  try {
    if (rc.command == "simulate") return cmd_simulate(rc, out, err);
    if (rc.command == "solve") return cmd_solve(rc, out, err);
    if (rc.command == "verify") return cmd_verify(rc, out, err);
    return cmd_report(rc, out, err);
  } catch (const ConfigError& e) {
    err << "usage error: " << e.what() << '\n';
    return kExitUsage;
  } catch (const AssumptionViolation& e) {
    err << "assumption violated: " << e.what() << '\n';
    return kExitAssumption;
  } catch (const std::exception& e) {
    err << "error: " << e.what() << '\n';
    return kExitChecksFailed;
  }
}

}  // namespace tcrisis
