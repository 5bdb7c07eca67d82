#pragma once

#include <Eigen/Dense>

#include <string>

#include "lfc/errors.hpp"

namespace lfc {

using Vector = Eigen::VectorXd;
using Matrix = Eigen::MatrixXd;

/// A fixed-length sequence of T+1 configurations in d-dimensional space,
/// indexed by integer timepoints 0..T. Row t of `waypoints()` is the
/// configuration at timepoint t. Values are immutable once constructed.
class Trajectory {
 public:
  explicit Trajectory(Matrix waypoints) : waypoints_(std::move(waypoints)) {
    if (waypoints_.rows() < 3) {
      throw InvalidArgument("trajectory needs at least 3 waypoints (T >= 2), got " +
                                std::to_string(waypoints_.rows()),
                            "waypoints");
    }
    if (waypoints_.cols() < 1) {
      throw InvalidArgument("trajectory dimension must be positive", "waypoints");
    }
    if (!waypoints_.allFinite()) {
      throw InvalidArgument("trajectory contains non-finite coordinates", "waypoints");
    }
  }

  /// T, the index of the last timepoint.
  [[nodiscard]] int horizon() const { return static_cast<int>(waypoints_.rows()) - 1; }
  [[nodiscard]] int num_waypoints() const { return static_cast<int>(waypoints_.rows()); }
  [[nodiscard]] int num_interior() const { return horizon() - 1; }
  [[nodiscard]] int dim() const { return static_cast<int>(waypoints_.cols()); }

  [[nodiscard]] const Matrix& waypoints() const { return waypoints_; }
  [[nodiscard]] Vector waypoint(int t) const { return waypoints_.row(t).transpose(); }
  [[nodiscard]] double operator()(int t, int k) const { return waypoints_(t, k); }

  /// Bit-exact comparison.
  friend bool operator==(const Trajectory& a, const Trajectory& b) {
    return a.waypoints_.rows() == b.waypoints_.rows() &&
           a.waypoints_.cols() == b.waypoints_.cols() && a.waypoints_ == b.waypoints_;
  }

 private:
  Matrix waypoints_;
};

/// A single waypoint correction: the user moved timepoint `t` to `q`.
struct Correction {
  int t = 0;
  Vector q;
};

/// Throws unless `c` is an interior, finite, dimension-matched correction of `xi`.
inline void validate_correction(const Correction& c, const Trajectory& xi) {
  if (c.t <= 0 || c.t >= xi.horizon()) {
    throw InvalidArgument("correction timepoint " + std::to_string(c.t) +
                              " is not interior (must satisfy 0 < t < " +
                              std::to_string(xi.horizon()) + ")",
                          "t");
  }
  if (c.q.size() != xi.dim()) {
    throw InvalidArgument("correction has dimension " + std::to_string(c.q.size()) +
                              ", trajectory has " + std::to_string(xi.dim()),
                          "q");
  }
  if (!c.q.allFinite()) {
    throw InvalidArgument("correction configuration is not finite", "q");
  }
}

}  // namespace lfc
