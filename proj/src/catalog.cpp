#include <string>

#include "tcrisis/problem.hpp"

namespace tcrisis {
namespace {

// Scalar state, scalar control, x' = u with |u| <= 1 and K = {x <= 0}.
constexpr const char* kLinearPayoff = R"(
name = linear_payoff_1d
n = 1
m = 1
horizon = 2
x0 = -1
box_lower = -1
box_upper = 1
f1 = u1
g = x1
c1 = u1 - 1
c2 = -u1 - 1
phi = -2*x1
)";

constexpr const char* kQuadPayoff = R"(
name = quad_payoff_1d
n = 1
m = 1
horizon = 2
x0 = -1
box_lower = -1
box_upper = 1
f1 = u1
g = x1
c1 = u1 - 1
c2 = -u1 - 1
phi = -2*x1 + 0.5*x1^2
)";

// The stored guess leaves K at t = 1 and re-enters at t = 2.
constexpr const char* kDoubleCrossing = R"(
name = double_crossing_1d
n = 1
m = 1
horizon = 4
x0 = -1
box_lower = -1
box_upper = 1
f1 = u1
g = x1
c1 = u1 - 1
c2 = -u1 - 1
phi = x1^2 + 2*x1 + 1
initial_control = 0: 1; 1.5: -1
)";

}  // namespace

std::vector<std::string> catalog_names() {
  return {"linear_payoff_1d", "quad_payoff_1d", "double_crossing_1d"};
}

ProblemSpec catalog(std::string_view name) {
  if (name == "linear_payoff_1d") return parse_problem_config(kLinearPayoff).spec;
  if (name == "quad_payoff_1d") return parse_problem_config(kQuadPayoff).spec;
  if (name == "double_crossing_1d") {
    return parse_problem_config(kDoubleCrossing).spec;
  }
  throw std::invalid_argument("unknown catalog problem '" + std::string(name) +
                              "'");
}

}  // namespace tcrisis
