#pragma once

#include <span>
#include <vector>

#include <Eigen/Core>

namespace tcrisis {

using Vec = Eigen::VectorXd;
using Mat = Eigen::MatrixXd;

/// Which clock a signal or trajectory is expressed in: physical time on
/// [0, T] or normalized time on [0, r + 1].
enum class TimeDomain { kPhysical, kNormalized };

const char* to_string(TimeDomain domain);

/**
 * Piecewise-constant control u : [t_0, t_N] -> R^m.
 *
 * Cell k covers [nodes[k], nodes[k+1]) and carries values.col(k). The last
 * cell is closed on the right. Grids are uniform when built through
 * uniform(), but arc-aligned images of normalized grids are not, so the node
 * vector is stored explicitly.
 */
class ControlSignal {
 public:
  ControlSignal() = default;
  ControlSignal(std::vector<double> nodes, Mat values, TimeDomain domain);

  static ControlSignal uniform(double start, double end, Mat values,
                               TimeDomain domain);
  static ControlSignal constant(double start, double end, int cells,
                                const Vec& value, TimeDomain domain);

  int cells() const { return static_cast<int>(values_.cols()); }
  int dim() const { return static_cast<int>(values_.rows()); }
  TimeDomain domain() const { return domain_; }
  double start() const { return nodes_.front(); }
  double end() const { return nodes_.back(); }

  std::span<const double> nodes() const { return nodes_; }
  double node(int k) const { return nodes_[k]; }
  double width(int k) const { return nodes_[k + 1] - nodes_[k]; }
  double midpoint(int k) const { return 0.5 * (nodes_[k] + nodes_[k + 1]); }

  const Mat& values() const { return values_; }
  Mat& values() { return values_; }
  auto value(int k) const { return values_.col(k); }

  /// Index of the cell containing t. Nodes belong to the cell on their right
  /// except the final node.
  int cell_at(double t) const;
  Vec at(double t) const { return values_.col(cell_at(t)); }

  /// Sum of width(k) * |value(k)|^2 over cells, square-rooted.
  double l2_norm() const;

 private:
  std::vector<double> nodes_;
  Mat values_;
  TimeDomain domain_ = TimeDomain::kPhysical;
};

/// Same signal with every cell split into equal pieces no wider than
/// max_width.
ControlSignal subdivide(const ControlSignal& control, double max_width);

}  // namespace tcrisis
