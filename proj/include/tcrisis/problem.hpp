#pragma once

#include <cstdint>
#include <functional>
#include <map>
#include <optional>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

#include "tcrisis/control.hpp"

namespace tcrisis {

/// Raised when a standing assumption of the time-crisis analysis fails on a
/// concrete trajectory (tangential contact with the boundary of K, rank
/// deficient active constraints, ...).
class AssumptionViolation : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Malformed problem or run configuration text.
class ConfigError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/**
 * Multivariate polynomial in the variables z = (x_1..x_nx, u_1..u_nu).
 *
 * Derivatives are exact, which makes every polynomial map usable for both
 * first- and second-order checks.
 */
class Polynomial {
 public:
  struct Term {
    double coefficient = 0.0;
    std::vector<int> powers;
  };

  Polynomial() = default;
  explicit Polynomial(int num_vars) : num_vars_(num_vars) {}

  /// Parses e.g. "-2*x1 + 0.5*x1^2 - u2 + 3". Variables are x1..x<nx>,
  /// u1..u<nu>; exponents are nonnegative integers.
  static Polynomial parse(std::string_view text, int nx, int nu);

  Polynomial& add_term(double coefficient, std::vector<int> powers);

  int num_vars() const { return num_vars_; }
  int degree() const;
  const std::vector<Term>& terms() const { return terms_; }

  double eval(const double* z) const;
  void gradient(const double* z, double* out) const;
  /// Accumulates into the column-major num_vars x num_vars buffer.
  void hessian(const double* z, double* out) const;

 private:
  int num_vars_ = 0;
  std::vector<Term> terms_;
};

/**
 * A map R^nx x R^nu -> R^out with analytic first and (optionally) second
 * derivatives. Jacobian columns and Hessian rows/columns are ordered (x, u).
 * Evaluators must be pure; a SmoothMap is immutable once built.
 */
class SmoothMap {
 public:
  using ValueFn =
      std::function<void(const Vec& x, const Vec& u, Eigen::Ref<Vec> out)>;
  using JacobianFn =
      std::function<void(const Vec& x, const Vec& u, Eigen::Ref<Mat> out)>;
  using HessianFn = std::function<void(const Vec& x, const Vec& u, int output,
                                       Eigen::Ref<Mat> out)>;

  SmoothMap() = default;
  SmoothMap(int nx, int nu, int out_dim, int order, ValueFn value,
            JacobianFn jacobian, HessianFn hessian = {});

  static SmoothMap from_polynomials(int nx, int nu,
                                    std::vector<Polynomial> outputs);

  int nx() const { return nx_; }
  int nu() const { return nu_; }
  int in_dim() const { return nx_ + nu_; }
  int out_dim() const { return out_dim_; }
  int order() const { return order_; }
  bool empty() const { return !value_; }

  void value(const Vec& x, const Vec& u, Eigen::Ref<Vec> out) const;
  Vec value(const Vec& x, const Vec& u) const;
  void jacobian(const Vec& x, const Vec& u, Eigen::Ref<Mat> out) const;
  Mat jacobian(const Vec& x, const Vec& u) const;
  Mat hessian(const Vec& x, const Vec& u, int output) const;

  // Shorthands for maps of the state only (g, phi) or control only (c).
  double scalar(const Vec& x) const;
  Vec gradient(const Vec& x) const;
  Mat hessian(const Vec& x) const;

 private:
  int nx_ = 0;
  int nu_ = 0;
  int out_dim_ = 0;
  int order_ = 1;
  ValueFn value_;
  JacobianFn jacobian_;
  HessianFn hessian_;
};

/// Data of the finite-horizon time-crisis problem
///   min phi(x(T)) + meas{t in [0,T] : g(x(t)) > 0}
///   s.t. x' = f(x,u), x(0) = x0, c(u(t)) <= 0.
struct ProblemSpec {
  std::string name;
  int n = 0;  // state dimension
  int m = 0;  // control dimension
  int l = 0;  // number of control constraints
  SmoothMap f;    // R^n x R^m -> R^n
  SmoothMap g;    // R^n -> R, K = {g <= 0}
  SmoothMap c;    // R^m -> R^l, U = {c <= 0}
  SmoothMap phi;  // R^n -> R
  Vec x0;
  double horizon = 0.0;
  // Box hull of U, used for projection and for Pontryagin sampling.
  Vec box_lower;
  Vec box_upper;
  std::optional<ControlSignal> initial_guess;

  /// Throws std::invalid_argument on inconsistent dimensions or T <= 0.
  void check() const;

  Vec dynamics(const Vec& x, const Vec& u) const { return f.value(x, u); }
  double constraint_set_value(const Vec& x) const { return g.scalar(x); }
  Vec project_to_box(const Vec& u) const;
};

struct MapCheck {
  std::string name;
  double jacobian_error = 0.0;  // max relative mismatch vs central differences
  double hessian_error = 0.0;   // same for Hessian vs differenced Jacobian
  bool passed = true;
};

struct ValidationReport {
  std::vector<MapCheck> maps;
  double g_at_x0 = 0.0;
  bool initial_state_interior = true;
  double jacobian_tol = 1e-5;
  double hessian_tol = 1e-4;

  bool passed() const;
};

/// Samples points (x around x0, u in the box hull) and compares analytic
/// derivatives against central differences.
ValidationReport validate_spec(const ProblemSpec& spec, int samples,
                               std::uint64_t seed);

/// Default activity threshold on c values for active sets.
inline constexpr double kDefaultActiveDelta = 1e-6;

/// Indices i with c_i(u) >= -delta.
std::vector<int> active_constraints(const ProblemSpec& spec, const Vec& u,
                                    double delta);

/// Per-cell active sets I(t) of a control signal.
struct ActiveSet {
  double delta = kDefaultActiveDelta;
  std::vector<std::vector<int>> per_cell;
};

ActiveSet active_set(const ProblemSpec& spec, const ControlSignal& control,
                     double delta = kDefaultActiveDelta);

struct LigResult {
  bool satisfied = true;
  double margin = 0.0;  // +inf when no constraint is ever active
  int worst_cell = -1;
};

/// Linear independence of the gradients of the delta-active control
/// constraints: the smallest singular value of grad c_I(u(t)) (an m x |I|
/// matrix, zero when |I| > m), minimized over cells, compared to epsilon.
LigResult check_lig(const ProblemSpec& spec, const ControlSignal& control,
                    double delta, double epsilon);

/// Built-in problems: "linear_payoff_1d", "quad_payoff_1d",
/// "double_crossing_1d".
ProblemSpec catalog(std::string_view name);
std::vector<std::string> catalog_names();

/// A parsed problem file: the problem itself plus any extra `key = value`
/// entries (solver options and the like) that the problem grammar does not
/// consume.
struct ProblemConfig {
  ProblemSpec spec;
  std::map<std::string, std::string> options;
};

ProblemConfig parse_problem_config(std::string_view text);
ProblemConfig load_problem_config(const std::string& path);

/// Control on [0, horizon] from "v" (constant) or "t0: v0; t1: v1; ..."
/// (piecewise constant, t0 = 0), vector values split by ',' or spaces.
ControlSignal parse_control(const std::string& text, int m, double horizon);

}  // namespace tcrisis
