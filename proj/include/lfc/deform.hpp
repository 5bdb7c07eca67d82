#pragma once

#include <string>

#include "lfc/kernel.hpp"
#include "lfc/trajectory.hpp"

namespace lfc {

/// The minimum-norm change that carries a trajectory through a corrected
/// waypoint, together with the Lagrange multipliers (one per coordinate) of
/// the start, correction and goal constraints.
struct Deformation {
  Matrix delta;         // (T+1) x d; rows 0 and T are zero
  Vector start_multiplier;       // gamma
  Vector correction_multiplier;  // lambda
  Vector goal_multiplier;        // kappa
};

struct DeformResult {
  Trajectory corrected;
  Deformation deformation;
};

/// Shape of a unit correction at interior timepoint `t` (1 <= t <= n):
/// column t of the kernel scaled so its value at t is 1. Entry i of the
/// result corresponds to timepoint i+1.
inline Vector deformation_profile(const PropagationKernel& kernel, int t) {
  if (t < 1 || t > kernel.size()) {
    throw InvalidArgument("profile timepoint " + std::to_string(t) + " outside [1, " +
                              std::to_string(kernel.size()) + "]",
                          "t");
  }
  const int c = t - 1;
  const double pivot = kernel(c, c);
  if (!(pivot > 0.0)) {
    throw NumericalError("kernel diagonal at timepoint " + std::to_string(t) + " is not positive");
  }
  Vector profile = kernel.matrix().col(c) / pivot;
  profile(c) = 1.0;
  return profile;
}

/// Solves  min 1/2 |xi_bar - xi|_A^2  s.t. xi_bar(t) = q, xi_bar(0) = xi(0),
/// xi_bar(T) = xi(T), independently for each coordinate. With the endpoints
/// eliminated the interior change is K[:, t] * (q - xi(t)) / K[t, t].
inline DeformResult deform(const Trajectory& xi, const Correction& c,
                           const PropagationKernel& kernel) {
  validate_correction(c, xi);
  if (kernel.size() != xi.num_interior()) {
    throw InvalidArgument("kernel covers " + std::to_string(kernel.size()) +
                              " interior timepoints, trajectory has " +
                              std::to_string(xi.num_interior()),
                          "kernel");
  }
  const int big_t = xi.horizon();
  const int d = xi.dim();
  const int col = c.t - 1;
  const double pivot = kernel(col, col);
  if (!(pivot > 0.0)) {
    throw NumericalError("singular correction subsystem at t=" + std::to_string(c.t), "t");
  }

  const Vector shift = c.q - xi.waypoint(c.t);

  Deformation out;
  out.delta = Matrix::Zero(big_t + 1, d);
  out.delta.middleRows(1, big_t - 1).noalias() =
      kernel.matrix().col(col) * (shift.transpose() / pivot);
  out.delta.row(c.t) = shift.transpose();

  out.correction_multiplier = -shift / pivot;
  // Endpoint multipliers balance the coupling between the endpoints and
  // their interior neighbours in the full-length metric; only the velocity
  // metric couples them (off-diagonal -1).
  if (kernel.variant() == KernelVariant::Velocity) {
    out.start_multiplier = out.delta.row(1).transpose();
    out.goal_multiplier = out.delta.row(big_t - 1).transpose();
  } else {
    out.start_multiplier = Vector::Zero(d);
    out.goal_multiplier = Vector::Zero(d);
  }

  Matrix waypoints = xi.waypoints() + out.delta;
  waypoints.row(0) = xi.waypoints().row(0);
  waypoints.row(big_t) = xi.waypoints().row(big_t);
  waypoints.row(c.t) = c.q.transpose();
  return {Trajectory(std::move(waypoints)), std::move(out)};
}

}  // namespace lfc
