#pragma once

#include <iosfwd>
#include <string>

#include <json.hpp>

#include "tcrisis/verify.hpp"

namespace tcrisis {

using Json = nlohmann::json;

/// %.17g
std::string format_double(double v);

Json crossings_to_json(const CrossingStructure& structure);

Json solution_to_json(const ProblemSpec& spec, const Solution& solution,
                      const SolverOptions& options);

/// Rebuilds a Solution written by solution_to_json: controls, tau and flags
/// are read back and the trajectories are integrated again. The iteration
/// log is not restored.
Solution solution_from_json(const ProblemSpec& spec, const Json& j);

Json certificate_to_json(const ProblemSpec& spec, const Solution& solution,
                         const PontryaginCertificate& cert);

Json report_to_json(const VerificationReport& report);

/// Trajectory CSV with an extra `interval` column holding the arc index.
void write_normalized_trajectory_csv(std::ostream& out,
                                     const ProblemSpec& spec,
                                     const Solution& solution);

/// t, p_1..p_n, side. Crossing nodes get two rows, side "before" and
/// "after"; other nodes have side "node".
void write_costate_csv(std::ostream& out, const Solution& solution,
                       const PontryaginCertificate& cert);

/// index, normalized_omega, dtau_1..dtau_r
void write_directions_csv(std::ostream& out, const SecondOrderResult& result);

}  // namespace tcrisis
