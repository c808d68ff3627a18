#include "tcrisis/simulate.hpp"

#include <cmath>
#include <cstdio>
#include <ostream>
#include <string>

namespace tcrisis {

Vec rk4_step(const ProblemSpec& spec, const Vec& x, const Vec& u, double scale,
             double h) {
  const Vec k1 = scale * spec.f.value(x, u);
  const Vec k2 = scale * spec.f.value(x + 0.5 * h * k1, u);
  const Vec k3 = scale * spec.f.value(x + 0.5 * h * k2, u);
  const Vec k4 = scale * spec.f.value(x + h * k3, u);
  return x + (h / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4);
}

Trajectory integrate_scaled(const ProblemSpec& spec,
                            const ControlSignal& control,
                            std::vector<double> scale, int substeps) {
  if (substeps < 1) throw std::invalid_argument("substeps must be >= 1");
  if (control.dim() != spec.m) {
    throw std::invalid_argument("control dimension does not match problem");
  }
  if (static_cast<int>(scale.size()) != control.cells()) {
    throw std::invalid_argument("one time scale per control cell expected");
  }
  Trajectory traj;
  traj.control = control;
  traj.substeps = substeps;
  traj.scale = std::move(scale);
  const int steps = control.cells() * substeps;
  traj.times.resize(steps + 1);
  traj.states.resize(spec.n, steps + 1);
  traj.states.col(0) = spec.x0;
  traj.times[0] = control.start();
  Vec x = spec.x0;
  for (int c = 0; c < control.cells(); ++c) {
    const Vec u = control.value(c);
    const double h = control.width(c) / substeps;
    for (int s = 0; s < substeps; ++s) {
      const int k = c * substeps + s;
      x = rk4_step(spec, x, u, traj.scale[c], h);
      traj.times[k + 1] =
          s + 1 == substeps ? control.node(c + 1) : control.node(c) + (s + 1) * h;
      if (!x.allFinite()) {
        throw std::runtime_error("state blew up at t = " +
                                 std::to_string(traj.times[k + 1]));
      }
      traj.states.col(k + 1) = x;
    }
  }
  return traj;
}

Trajectory integrate(const ProblemSpec& spec, const ControlSignal& control,
                     int substeps) {
  return integrate_scaled(spec, control,
                          std::vector<double>(control.cells(), 1.0), substeps);
}

Vec Trajectory::dense(const ProblemSpec& spec, int k, double t) const {
  const int c = cell_of_step(k);
  const Vec u = control.value(c);
  const double h = step_size(k);
  const double theta = (t - times[k]) / h;
  const Vec x0 = states.col(k);
  const Vec x1 = states.col(k + 1);
  const Vec d0 = scale[c] * spec.f.value(x0, u);
  const Vec d1 = scale[c] * spec.f.value(x1, u);
  const double t2 = theta * theta;
  const double t3 = t2 * theta;
  return (2 * t3 - 3 * t2 + 1) * x0 + (t3 - 2 * t2 + theta) * h * d0 +
         (-2 * t3 + 3 * t2) * x1 + (t3 - t2) * h * d1;
}

std::vector<double> CrossingStructure::times() const {
  std::vector<double> out;
  out.reserve(crossings.size());
  for (const auto& c : crossings) out.push_back(c.time);
  return out;
}

bool CrossingStructure::transverse() const {
  for (const auto& c : crossings) {
    if (!(c.margin_before > 0.0) || !(c.margin_after > 0.0)) return false;
  }
  return true;
}

namespace {

int side_of(double g, double tol) {
  if (g > tol) return 1;
  if (g < -tol) return -1;
  return 0;
}

double normal_speed(const ProblemSpec& spec, const Vec& x, const Vec& u) {
  return std::abs(spec.g.gradient(x).dot(spec.f.value(x, u)));
}

}  // namespace

CrossingStructure detect_crossings(const ProblemSpec& spec,
                                   const Trajectory& traj,
                                   double crossing_tol) {
  const int last = traj.steps();
  std::vector<double> gv(last + 1);
  for (int k = 0; k <= last; ++k) gv[k] = spec.g.scalar(traj.states.col(k));
  if (!(gv[0] < 0.0)) {
    throw AssumptionViolation("initial state is not interior to K");
  }

  CrossingStructure result;
  int side = -1;
  auto add = [&](Crossing c) {
    const bool exit = side < 0;
    c.direction = exit ? CrossingDirection::kExit : CrossingDirection::kEntry;
    if (!result.crossings.empty() &&
        result.crossings.back().direction == c.direction) {
      throw AssumptionViolation("crossing directions do not alternate");
    }
    result.crossings.push_back(std::move(c));
    side = -side;
  };

  int k = 1;
  while (k <= last) {
    const int s = side_of(gv[k], crossing_tol);
    if (s == 0) {
      int e = k;
      while (e < last && side_of(gv[e + 1], crossing_tol) == 0) ++e;
      if (e == last) break;  // ends on the boundary: no crossing in (0, T)
      const int next = side_of(gv[e + 1], crossing_tol);
      if (next == side || e > k) {
        throw AssumptionViolation(
            "nontransverse contact with the boundary of K at t = " +
            std::to_string(traj.times[k]));
      }
      Crossing c;
      c.time = traj.times[k];
      c.state = traj.states.col(k);
      c.g_value = gv[k];
      c.step = k;
      c.on_node = true;
      const Vec before = traj.control.value(traj.cell_of_step(k - 1));
      const Vec after = traj.control.value(traj.cell_of_step(k));
      c.margin_before = normal_speed(spec, c.state, before);
      c.margin_after = normal_speed(spec, c.state, after);
      add(std::move(c));
      k = e + 2;
      continue;
    }
    if (s != side) {
      const int step = k - 1;
      double a = traj.times[step];
      double b = traj.times[k];
      const double ga = gv[step];
      Crossing c;
      c.step = step;
      double mid = 0.5 * (a + b);
      Vec xm = traj.dense(spec, step, mid);
      double gm = spec.g.scalar(xm);
      while (std::abs(gm) > crossing_tol && c.bisections < kMaxBisections) {
        if ((gm > 0) == (ga > 0)) {
          a = mid;
        } else {
          b = mid;
        }
        mid = 0.5 * (a + b);
        xm = traj.dense(spec, step, mid);
        gm = spec.g.scalar(xm);
        ++c.bisections;
      }
      c.time = mid;
      c.state = xm;
      c.g_value = gm;
      const Vec u = traj.control.value(traj.cell_of_step(step));
      c.margin_before = normal_speed(spec, xm, u);
      c.margin_after = c.margin_before;
      add(std::move(c));
    }
    ++k;
  }
  return result;
}

double crisis_cost(const ProblemSpec& spec, const Trajectory& traj,
                   const CrossingStructure& crossings) {
  if (traj.domain() != TimeDomain::kPhysical) {
    throw std::invalid_argument("crisis cost needs a physical-time trajectory");
  }
  std::vector<double> tau{traj.times.front()};
  for (double t : crossings.times()) tau.push_back(t);
  tau.push_back(traj.times.back());
  double outside = 0.0;
  for (std::size_t j = 1; j + 1 < tau.size(); j += 2) {
    outside += tau[j + 1] - tau[j];
  }
  return spec.phi.scalar(traj.final_state()) + outside;
}

void write_trajectory_csv(std::ostream& out, const ProblemSpec& spec,
                          const Trajectory& traj) {
  out << "t";
  for (int i = 1; i <= spec.n; ++i) out << ",x_" << i;
  for (int i = 1; i <= spec.m; ++i) out << ",u_" << i;
  out << ",g\n";
  char buf[32];
  auto put = [&](double v) {
    std::snprintf(buf, sizeof buf, "%.17g", v);
    out << buf;
  };
  for (int k = 0; k <= traj.steps(); ++k) {
    put(traj.times[k]);
    const Vec x = traj.states.col(k);
    for (int i = 0; i < spec.n; ++i) {
      out << ',';
      put(x[i]);
    }
    const int cell = traj.cell_of_step(std::min(k, traj.steps() - 1));
    for (int i = 0; i < spec.m; ++i) {
      out << ',';
      put(traj.control.values()(i, cell));
    }
    out << ',';
    put(spec.g.scalar(x));
    out << '\n';
  }
}

}  // namespace tcrisis
