#include "tcrisis/control.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>
#include <string>

namespace tcrisis {

const char* to_string(TimeDomain domain) {
  return domain == TimeDomain::kPhysical ? "physical" : "normalized";
}

ControlSignal::ControlSignal(std::vector<double> nodes, Mat values,
                             TimeDomain domain)
    : nodes_(std::move(nodes)), values_(std::move(values)), domain_(domain) {
  if (values_.cols() < 1) {
    throw std::invalid_argument("control signal needs at least one cell");
  }
  if (nodes_.size() != static_cast<std::size_t>(values_.cols()) + 1) {
    throw std::invalid_argument("control signal: " +
                                std::to_string(nodes_.size()) +
                                " nodes for " +
                                std::to_string(values_.cols()) + " cells");
  }
  for (std::size_t k = 0; k + 1 < nodes_.size(); ++k) {
    if (!(nodes_[k + 1] > nodes_[k])) {
      throw std::invalid_argument("control signal nodes must increase");
    }
  }
  if (!values_.allFinite()) {
    throw std::invalid_argument("control signal values must be finite");
  }
}

ControlSignal ControlSignal::uniform(double start, double end, Mat values,
                                     TimeDomain domain) {
  const int cells = static_cast<int>(values.cols());
  if (cells < 1) {
    throw std::invalid_argument("control signal needs at least one cell");
  }
  std::vector<double> nodes(cells + 1);
  const double h = (end - start) / cells;
  for (int k = 0; k <= cells; ++k) nodes[k] = start + k * h;
  nodes.back() = end;
  return ControlSignal(std::move(nodes), std::move(values), domain);
}

ControlSignal ControlSignal::constant(double start, double end, int cells,
                                      const Vec& value, TimeDomain domain) {
  Mat values = value.replicate(1, cells);
  return uniform(start, end, std::move(values), domain);
}

int ControlSignal::cell_at(double t) const {
  if (t <= nodes_.front()) return 0;
  if (t >= nodes_.back()) return cells() - 1;
  auto it = std::upper_bound(nodes_.begin(), nodes_.end(), t);
  return static_cast<int>(it - nodes_.begin()) - 1;
}

double ControlSignal::l2_norm() const {
  double sum = 0.0;
  for (int k = 0; k < cells(); ++k) {
    sum += width(k) * values_.col(k).squaredNorm();
  }
  return std::sqrt(sum);
}

ControlSignal subdivide(const ControlSignal& control, double max_width) {
  if (!(max_width > 0.0)) throw std::invalid_argument("max_width must be > 0");
  std::vector<double> nodes{control.start()};
  std::vector<int> source;
  for (int k = 0; k < control.cells(); ++k) {
    const int pieces =
        std::max(1, static_cast<int>(std::ceil(control.width(k) / max_width - 1e-9)));
    for (int q = 1; q <= pieces; ++q) {
      nodes.push_back(q == pieces ? control.node(k + 1)
                                  : control.node(k) + control.width(k) * q / pieces);
      source.push_back(k);
    }
  }
  Mat values(control.dim(), static_cast<int>(source.size()));
  for (std::size_t q = 0; q < source.size(); ++q) {
    values.col(static_cast<int>(q)) = control.value(source[q]);
  }
  return ControlSignal(std::move(nodes), std::move(values), control.domain());
}

}  // namespace tcrisis
