#pragma once

#include <cmath>
#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "lfc/trajectory.hpp"

namespace lfc {

/// Per-feature values phi(xi); one entry per object type.
using FeatureVector = Vector;
/// Linear cost weights, one per object type.
using Weights = Vector;

struct Obstacle {
  Vector position;
  int type_id = 0;
  double radius = 1.0;  // length-scale of the proximity feature
};

/// A planning problem: fixed endpoints plus typed obstacles. Generated
/// environments also carry the hidden ground-truth weights.
struct Environment {
  Vector start;
  Vector goal;
  std::vector<Obstacle> obstacles;
  int num_types = 1;
  int instances_per_type = 0;
  std::optional<Weights> ground_truth_w;
  std::uint64_t seed = 0;

  [[nodiscard]] int dim() const { return static_cast<int>(start.size()); }

  void validate() const {
    if (start.size() == 0 || start.size() != goal.size()) {
      throw InvalidArgument("start and goal must be non-empty and of equal dimension", "start");
    }
    if (!start.allFinite() || !goal.allFinite()) {
      throw InvalidArgument("start and goal must be finite", "start");
    }
    if (start == goal) throw InvalidArgument("start and goal coincide", "goal");
    if (num_types < 1) throw InvalidArgument("num_types must be >= 1", "num_types");
    for (std::size_t i = 0; i < obstacles.size(); ++i) {
      const Obstacle& o = obstacles[i];
      const std::string field = "obstacles[" + std::to_string(i) + "]";
      if (o.position.size() != start.size() || !o.position.allFinite()) {
        throw InvalidArgument(field + " position has wrong dimension or is not finite", field);
      }
      if (o.type_id < 0 || o.type_id >= num_types) {
        throw InvalidArgument(field + " type_id out of range", field);
      }
      if (!(o.radius > 0.0) || !std::isfinite(o.radius)) {
        throw InvalidArgument(field + " radius must be positive", field);
      }
    }
    if (ground_truth_w && ground_truth_w->size() != num_types) {
      throw InvalidArgument("ground_truth_w must have num_types entries", "ground_truth_w");
    }
  }
};

inline void check_dimensions(const Trajectory& xi, const Environment& env) {
  if (xi.dim() != env.dim()) {
    throw InvalidArgument("trajectory dimension " + std::to_string(xi.dim()) +
                              " does not match environment dimension " +
                              std::to_string(env.dim()),
                          "trajectory");
  }
}

inline void check_weights(const Weights& w, const Environment& env) {
  if (w.size() != env.num_types) {
    throw InvalidArgument("weight vector has " + std::to_string(w.size()) + " entries, expected " +
                              std::to_string(env.num_types),
                          "w");
  }
}

/// Gaussian proximity of a configuration to an obstacle, in (0, 1].
inline double proximity(const double* q, const Obstacle& o, int d) {
  double sq = 0.0;
  for (int k = 0; k < d; ++k) {
    const double diff = q[k] - o.position[k];
    sq += diff * diff;
  }
  return std::exp(-sq / (2.0 * o.radius * o.radius));
}

/// phi_k(xi) = 1/(T+1) * sum_t sum_{o of type k} exp(-|xi(t) - o|^2 / (2 r_o^2)).
inline FeatureVector features(const Trajectory& xi, const Environment& env) {
  check_dimensions(xi, env);
  FeatureVector phi = FeatureVector::Zero(env.num_types);
  const int d = xi.dim();
  const Matrix& x = xi.waypoints();
  Eigen::VectorXd q(d);
  for (int t = 0; t < xi.num_waypoints(); ++t) {
    q = x.row(t).transpose();
    for (const Obstacle& o : env.obstacles) phi[o.type_id] += proximity(q.data(), o, d);
  }
  return phi / static_cast<double>(xi.num_waypoints());
}

/// d phi_k / d xi(t) for every feature k: element k is a (T+1) x d matrix.
inline std::vector<Matrix> feature_gradients(const Trajectory& xi, const Environment& env) {
  check_dimensions(xi, env);
  const int d = xi.dim();
  const double norm = 1.0 / static_cast<double>(xi.num_waypoints());
  std::vector<Matrix> grads(env.num_types, Matrix::Zero(xi.num_waypoints(), d));
  const Matrix& x = xi.waypoints();
  Eigen::VectorXd q(d);
  for (int t = 0; t < xi.num_waypoints(); ++t) {
    q = x.row(t).transpose();
    for (const Obstacle& o : env.obstacles) {
      const double p = proximity(q.data(), o, d);
      const double s = -norm * p / (o.radius * o.radius);
      grads[o.type_id].row(t) += s * (q - o.position).transpose();
    }
  }
  return grads;
}

/// w . phi(xi)
inline double cost(const Trajectory& xi, const Environment& env, const Weights& w) {
  check_weights(w, env);
  return w.dot(features(xi, env));
}

}  // namespace lfc
