#include "tcrisis/io.hpp"

#include <algorithm>
#include <cstdio>
#include <ostream>
#include <stdexcept>

namespace tcrisis {

std::string format_double(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

namespace {

Json vec_json(const Vec& v) {
  return Json(std::vector<double>(v.data(), v.data() + v.size()));
}

// Row-major list of rows.
Json mat_json(const Mat& m) {
  Json rows = Json::array();
  for (int i = 0; i < m.rows(); ++i) rows.push_back(vec_json(m.row(i)));
  return rows;
}

Vec json_vec(const Json& j) {
  const auto v = j.get<std::vector<double>>();
  return Eigen::Map<const Vec>(v.data(), static_cast<int>(v.size()));
}

Mat json_mat(const Json& j, int cols) {
  Mat m(static_cast<int>(j.size()), cols);
  for (int i = 0; i < m.rows(); ++i) {
    const Vec row = json_vec(j[i]);
    if (row.size() != cols) throw std::runtime_error("ragged matrix in JSON");
    m.row(i) = row;
  }
  return m;
}

const char* kind_name(EntryKind kind) {
  switch (kind) {
    case EntryKind::kResidual:
      return "residual";
    case EntryKind::kLowerBound:
      return "lower_bound";
    case EntryKind::kThreshold:
      return "threshold";
  }
  return "residual";
}

}  // namespace

Json crossings_to_json(const CrossingStructure& structure) {
  Json list = Json::array();
  for (const auto& c : structure.crossings) {
    list.push_back({
        {"time", c.time},
        {"direction", c.direction == CrossingDirection::kExit ? "exit" : "entry"},
        {"state", vec_json(c.state)},
        {"g", c.g_value},
        {"margin_before", c.margin_before},
        {"margin_after", c.margin_after},
        {"step", c.step},
        {"on_node", c.on_node},
        {"bisections", c.bisections},
    });
  }
  return {{"r", structure.r()},
          {"transverse", structure.transverse()},
          {"crossings", list}};
}

Json solution_to_json(const ProblemSpec& spec, const Solution& solution,
                      const SolverOptions& options) {
  Json j;
  j["problem"] = spec.name;
  j["horizon"] = spec.horizon;
  j["r"] = solution.r();
  j["tau"] = solution.tau.values();
  j["objective"] = solution.objective;
  j["reformulated_objective"] = solution.reformulated_objective;
  j["infeasibility"] = solution.infeasibility;
  j["projected_gradient"] = solution.projected_gradient;
  j["equality_multipliers"] = vec_json(solution.equality_multipliers);
  j["converged"] = solution.converged;
  j["structure_consistent"] = solution.structure_consistent;
  j["structure_free"] = solution.structure_free;
  j["structure_mismatch"] = solution.structure_mismatch;
  j["n_arc"] = solution.n_arc;
  j["substeps"] = solution.substeps;
  j["eq_tol"] = options.eq_tol;
  j["kkt_tol"] = options.kkt_tol;
  j["note"] = solution.note;
  j["iterations"] = solution.log.size();
  if (!solution.structure_free) {
    j["normalized_control"] = mat_json(solution.normalized_control.values());
    const auto nodes = solution.normalized_control.nodes();
    j["normalized_nodes"] = std::vector<double>(nodes.begin(), nodes.end());
  }
  const ControlSignal& phys = solution.physical_control;
  j["physical_control"] = {
      {"nodes", std::vector<double>(phys.nodes().begin(), phys.nodes().end())},
      {"values", mat_json(phys.values())}};
  return j;
}

Solution solution_from_json(const ProblemSpec& spec, const Json& j) {
  if (j.at("problem").get<std::string>() != spec.name) {
    throw std::runtime_error("solution was computed for problem '" +
                             j.at("problem").get<std::string>() + "'");
  }
  Solution sol;
  const int substeps = j.at("substeps").get<int>();
  if (j.at("structure_free").get<bool>()) {
    const auto& pc = j.at("physical_control");
    auto nodes = pc.at("nodes").get<std::vector<double>>();
    const int cells = static_cast<int>(nodes.size()) - 1;
    sol.physical_control = ControlSignal(
        std::move(nodes), json_mat(pc.at("values"), cells), TimeDomain::kPhysical);
    sol.physical_trajectory = integrate(spec, sol.physical_control, substeps);
    sol.tau = CrossingVector({}, spec.horizon);
    sol.substeps = substeps;
  } else {
    sol.tau = CrossingVector(j.at("tau").get<std::vector<double>>(),
                             spec.horizon);
    auto nodes = j.at("normalized_nodes").get<std::vector<double>>();
    const int cells = static_cast<int>(nodes.size()) - 1;
    sol.normalized_control =
        ControlSignal(std::move(nodes), json_mat(j.at("normalized_control"), cells),
                      TimeDomain::kNormalized);
    SolverOptions opt;
    opt.substeps = substeps;
    opt.eq_tol = j.at("eq_tol").get<double>();
    attach_trajectories(spec, opt, sol);
  }
  sol.objective = j.at("objective").get<double>();
  sol.reformulated_objective = j.at("reformulated_objective").get<double>();
  sol.infeasibility = j.at("infeasibility").get<double>();
  sol.projected_gradient = j.at("projected_gradient").get<double>();
  sol.equality_multipliers = json_vec(j.at("equality_multipliers"));
  sol.converged = j.at("converged").get<bool>();
  sol.structure_consistent = j.at("structure_consistent").get<bool>();
  sol.structure_free = j.at("structure_free").get<bool>();
  sol.structure_mismatch = j.at("structure_mismatch").get<double>();
  sol.n_arc = j.at("n_arc").get<int>();
  sol.note = j.at("note").get<std::string>();
  return sol;
}

Json certificate_to_json(const ProblemSpec& spec, const Solution& solution,
                         const PontryaginCertificate& cert) {
  Json j;
  j["alpha"] = cert.alpha;
  j["gamma"] = vec_json(cert.gamma);
  j["gamma_nlp"] = vec_json(cert.gamma_nlp);
  j["hamiltonian_arc"] = vec_json(cert.hamiltonian_arc);
  j["h0"] = cert.h0;
  j["crossing_times"] = solution.tau.values();
  j["p_initial"] = vec_json(cert.p.col(0));
  j["p_final"] = vec_json(cert.p.col(cert.p.cols() - 1));
  j["p_before"] = mat_json(cert.p_before.transpose());
  j["p_after"] = mat_json(cert.p_after.transpose());
  if (cert.nu.size()) {
    j["nu_min"] = vec_json(cert.nu.rowwise().minCoeff());
    j["nu_max"] = vec_json(cert.nu.rowwise().maxCoeff());
  }
  j["stationarity_max"] =
      cert.stationarity.empty()
          ? 0.0
          : *std::max_element(cert.stationarity.begin(), cert.stationarity.end());
  j["rank_deficient_cells"] =
      std::count(cert.rank_deficient.begin(), cert.rank_deficient.end(), true);

  Json residuals;
  residuals["hamiltonian_arc_deviation"] =
      vec_json(arc_hamiltonian_deviation(spec, solution, cert));
  residuals["h0_deviation"] = h0_deviation(spec, solution, cert);
  const Vec rho = rho_weighted_integral(spec, solution, cert);
  Vec relation(rho.size());
  for (int k = 0; k < rho.size(); ++k) {
    relation[k] = rho[k] + (k % 2 == 0 ? -1.0 : 1.0) * cert.alpha;
  }
  residuals["rho_weighted_integral"] = vec_json(rho);
  residuals["integral_relation"] = vec_json(relation);
  j["residuals"] = residuals;

  if (solution.r() == 1) {
    const AugmentedCertificate aug = map_to_augmented(spec, solution, cert);
    j["augmented"] = {
        {"alpha", aug.alpha},
        {"beta1", vec_json(aug.beta1)},
        {"beta2", aug.beta2},
        {"beta3", vec_json(aug.beta3)},
        {"beta4", aug.beta4},
        {"lambda_final", aug.lambda.size() ? aug.lambda[aug.lambda.size() - 1]
                                           : 0.0},
        {"transversality_inner", aug.transversality_inner},
        {"transversality_final", aug.transversality_final},
        {"transversality_initial", aug.transversality_initial},
        {"lambda_final_residual", aug.lambda_final},
        {"stationarity", aug.stationarity},
        {"consistent", aug.consistent},
    };
  }
  return j;
}

Json report_to_json(const VerificationReport& report) {
  Json entries = Json::array();
  for (const auto& e : report.entries) {
    entries.push_back({{"name", e.name},
                       {"value", e.value},
                       {"tolerance", e.tolerance},
                       {"kind", kind_name(e.kind)},
                       {"passed", e.passed}});
  }
  const auto& so = report.second_order;
  return {{"entries", entries},
          {"first_order_passed", report.first_order_passed()},
          {"second_order",
           {{"status", to_string(so.status)},
            {"min_normalized_omega", so.min_normalized_omega},
            {"accepted", so.accepted},
            {"requested", so.requested},
            {"note", so.note}}},
          {"passed", report.passed()}};
}

void write_normalized_trajectory_csv(std::ostream& out,
                                     const ProblemSpec& spec,
                                     const Solution& solution) {
  const Trajectory& traj = solution.normalized_trajectory;
  out << "s";
  for (int i = 1; i <= spec.n; ++i) out << ",x_" << i;
  for (int i = 1; i <= spec.m; ++i) out << ",u_" << i;
  out << ",g,interval\n";
  for (int k = 0; k <= traj.steps(); ++k) {
    const int step = std::min(k, traj.steps() - 1);
    const int cell = traj.cell_of_step(step);
    out << format_double(traj.times[k]);
    const Vec x = traj.states.col(k);
    for (int i = 0; i < spec.n; ++i) out << ',' << format_double(x[i]);
    for (int i = 0; i < spec.m; ++i) {
      out << ',' << format_double(traj.control.values()(i, cell));
    }
    out << ',' << format_double(spec.g.scalar(x)) << ','
        << arc_of_cell(solution.normalized_control, cell) << '\n';
  }
}

void write_costate_csv(std::ostream& out, const Solution& solution,
                       const PontryaginCertificate& cert) {
  const int n = static_cast<int>(cert.p.rows());
  out << "t";
  for (int i = 1; i <= n; ++i) out << ",p_" << i;
  out << ",side\n";
  const auto& times = solution.physical_trajectory.times;
  auto row = [&](double t, const Vec& p, const char* side) {
    out << format_double(t);
    for (int i = 0; i < n; ++i) out << ',' << format_double(p[i]);
    out << ',' << side << '\n';
  };
  for (int k = 0; k < cert.p.cols(); ++k) {
    const auto it = std::find(cert.crossing_nodes.begin(),
                              cert.crossing_nodes.end(), k);
    if (it == cert.crossing_nodes.end()) {
      row(times[k], cert.p.col(k), "node");
    } else {
      const int j = static_cast<int>(it - cert.crossing_nodes.begin());
      row(times[k], cert.p_before.col(j), "before");
      row(times[k], cert.p_after.col(j), "after");
    }
  }
}

void write_directions_csv(std::ostream& out, const SecondOrderResult& result) {
  const int r = result.dtau.empty() ? 0 : static_cast<int>(result.dtau[0].size());
  out << "index,normalized_omega";
  for (int j = 1; j <= r; ++j) out << ",dtau_" << j;
  out << '\n';
  for (std::size_t k = 0; k < result.normalized_values.size(); ++k) {
    out << k << ',' << format_double(result.normalized_values[k]);
    for (int j = 0; j < r; ++j) out << ',' << format_double(result.dtau[k][j]);
    out << '\n';
  }
}

}  // namespace tcrisis
