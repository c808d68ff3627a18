#pragma once

#include <cstdint>
#include <iosfwd>
#include <optional>
#include <string>

#include "tcrisis/verify.hpp"

namespace tcrisis {

enum ExitCode : int {
  kExitOk = 0,
  kExitChecksFailed = 1,
  kExitUsage = 2,
  kExitNotConverged = 3,
  kExitAssumption = 4,
};

struct RunConfig {
  std::string command;  // simulate | solve | verify | report
  std::string problem;  // catalog name
  std::string config;   // config file path
  std::string control;  // shorthand signal or CSV path
  std::string out = "out";
  std::uint64_t seed = 1;
  SolverOptions solver;
  VerifyTolerances tolerances;
  int omega_samples = 250;
  bool timestamp = true;
};

/// Parses argv into a RunConfig. Options found in a problem config file are
/// applied first and command-line flags override them. Throws ConfigError on
/// invalid input.
RunConfig parse_run_config(int argc, const char* const* argv);

/// Entry point shared by the executable and the tests.
int run_cli(int argc, const char* const* argv, std::ostream& out,
            std::ostream& err);

int cmd_simulate(const RunConfig& rc, std::ostream& out, std::ostream& err);
int cmd_solve(const RunConfig& rc, std::ostream& out, std::ostream& err);
int cmd_verify(const RunConfig& rc, std::ostream& out, std::ostream& err);
int cmd_report(const RunConfig& rc, std::ostream& out, std::ostream& err);

/// Reads `t,u_1,..,u_m` rows (cell start times, header optional) into a
/// control on [0, horizon].
ControlSignal read_control_csv(const std::string& path, int m, double horizon);

}  // namespace tcrisis
