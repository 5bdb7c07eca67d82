#pragma once

#include <cmath>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "lfc/environment.hpp"
#include "lfc/trajectory.hpp"

namespace lfc {

struct PlannerConfig {
  int horizon = 40;         // T; trajectories have T+1 waypoints
  double smooth_mu = 0.5;   // weight of the sum-of-squared-velocities term
  double step = 1.0;        // initial step along the preconditioned gradient
  int max_iters = 500;
  double tol = 1e-6;        // stop when the interior gradient norm drops below this
  int max_halvings = 20;

  void validate() const {
    if (horizon < 2) throw InvalidArgument("planner horizon must be >= 2", "horizon");
    if (!(smooth_mu > 0.0)) throw InvalidArgument("smooth_mu must be positive", "smooth_mu");
    if (!(step > 0.0)) throw InvalidArgument("step must be positive", "step");
    if (max_iters < 1) throw InvalidArgument("max_iters must be >= 1", "max_iters");
    if (!(tol > 0.0)) throw InvalidArgument("tol must be positive", "tol");
    if (max_halvings < 0) throw InvalidArgument("max_halvings must be >= 0", "max_halvings");
  }
};

/// Uniform interpolation from start to goal with T+1 waypoints.
inline Trajectory straight_line(const Environment& env, int horizon) {
  if (horizon < 2) throw InvalidArgument("straight line needs T >= 2", "horizon");
  Matrix x(horizon + 1, env.dim());
  for (int t = 0; t <= horizon; ++t) {
    const double s = static_cast<double>(t) / static_cast<double>(horizon);
    x.row(t) = ((1.0 - s) * env.start + s * env.goal).transpose();
  }
  x.row(0) = env.start.transpose();
  x.row(horizon) = env.goal.transpose();
  return Trajectory(std::move(x));
}

namespace detail {

/// Obstacles with non-zero weight, flattened for the inner loop.
struct ActiveObstacles {
  int dim = 0;
  std::vector<double> position;   // count x dim, row-major
  std::vector<double> neg_half_inv_r2;  // -1 / (2 r^2)
  std::vector<double> weight;
  std::vector<double> grad_scale;  // -w / r^2

  [[nodiscard]] std::size_t size() const { return weight.size(); }
};

inline ActiveObstacles active_obstacles(const Environment& env, const Weights& w) {
  ActiveObstacles out;
  out.dim = env.dim();
  for (const Obstacle& o : env.obstacles) {
    const double wk = w[o.type_id];
    if (wk == 0.0) continue;
    for (int k = 0; k < out.dim; ++k) out.position.push_back(o.position[k]);
    out.neg_half_inv_r2.push_back(-1.0 / (2.0 * o.radius * o.radius));
    out.weight.push_back(wk);
    out.grad_scale.push_back(-wk / (o.radius * o.radius));
  }
  return out;
}

/// J = w.phi(x) + mu * sum_t |x(t+1) - x(t)|^2, and its gradient w.r.t. the
/// interior waypoints (rows 1..T-1 of x) written into `grad`.
inline double objective_and_gradient(const Matrix& x, const ActiveObstacles& active, double mu,
                                     Matrix* grad) {
  const int rows = static_cast<int>(x.rows());
  const int d = static_cast<int>(x.cols());
  const double norm = 1.0 / static_cast<double>(rows);
  const std::size_t count = active.size();
  double feature_term = 0.0;
  double smooth_term = 0.0;
  if (grad) grad->setZero(rows - 2, d);
  std::vector<double> diff(static_cast<std::size_t>(d));
  for (int t = 0; t < rows; ++t) {
    const bool interior = grad && t > 0 && t < rows - 1;
    for (std::size_t i = 0; i < count; ++i) {
      const double* c = active.position.data() + i * static_cast<std::size_t>(d);
      double sq = 0.0;
      for (int k = 0; k < d; ++k) {
        diff[k] = x(t, k) - c[k];
        sq += diff[k] * diff[k];
      }
      const double p = std::exp(sq * active.neg_half_inv_r2[i]);
      feature_term += active.weight[i] * p;
      if (interior) {
        const double s = active.grad_scale[i] * norm * p;
        for (int k = 0; k < d; ++k) (*grad)(t - 1, k) += s * diff[k];
      }
    }
    if (t + 1 < rows) {
      for (int k = 0; k < d; ++k) {
        const double v = x(t + 1, k) - x(t, k);
        smooth_term += v * v;
      }
    }
  }
  if (grad) {
    for (int k = 0; k < d; ++k) {
      for (int t = 1; t < rows - 1; ++t) {
        (*grad)(t - 1, k) += 2.0 * mu * (2.0 * x(t, k) - x(t - 1, k) - x(t + 1, k));
      }
    }
  }
  return norm * feature_term + mu * smooth_term;
}

/// Solves (c * tridiag(-1, 2, -1)) y = rhs column-wise (Thomas algorithm).
class SmoothnessPreconditioner {
 public:
  SmoothnessPreconditioner(int n, double c) : c_(c), upper_(n), inv_diag_(n) {
    double prev_upper = 0.0;
    for (int i = 0; i < n; ++i) {
      const double diag = 2.0 - (i > 0 ? -1.0 * prev_upper : 0.0);
      inv_diag_[i] = 1.0 / diag;
      upper_[i] = -1.0 * inv_diag_[i];
      prev_upper = upper_[i];
    }
  }

  [[nodiscard]] Matrix solve(const Matrix& rhs) const {
    const int n = static_cast<int>(rhs.rows());
    Matrix y(rhs.rows(), rhs.cols());
    for (int k = 0; k < rhs.cols(); ++k) {
      double prev = 0.0;
      for (int i = 0; i < n; ++i) {
        prev = (rhs(i, k) / c_ + (i > 0 ? prev : 0.0)) * inv_diag_[i];
        y(i, k) = prev;
      }
      for (int i = n - 2; i >= 0; --i) y(i, k) -= upper_[i] * y(i + 1, k);
    }
    return y;
  }

 private:
  double c_;
  std::vector<double> upper_;
  std::vector<double> inv_diag_;
};

}  // namespace detail

/// The planner objective for weights `w`.
inline double objective(const Trajectory& xi, const Environment& env, const Weights& w, double mu) {
  check_dimensions(xi, env);
  check_weights(w, env);
  return detail::objective_and_gradient(xi.waypoints(), detail::active_obstacles(env, w), mu,
                                        nullptr);
}

/// Locally minimizes the planner objective over interior waypoints, starting
/// from `warm_start` or the straight line. Steps follow the gradient
/// preconditioned by the smoothness Hessian and are halved on any increase,
/// so the objective never rises. Deterministic for fixed inputs.
inline Trajectory plan(const Environment& env, const Weights& w, const PlannerConfig& cfg,
                       const std::optional<Trajectory>& warm_start = std::nullopt) {
  cfg.validate();
  check_weights(w, env);
  if (!w.allFinite()) throw NumericalError("weight vector is not finite", "w");

  Trajectory init = warm_start ? *warm_start : straight_line(env, cfg.horizon);
  check_dimensions(init, env);
  Matrix x = init.waypoints();
  const int n = init.num_interior();
  const auto active = detail::active_obstacles(env, w);
  const detail::SmoothnessPreconditioner precond(n, 2.0 * cfg.smooth_mu);

  auto fail = [&](int iter) {
    std::ostringstream os;
    os.precision(17);
    os << "planner objective became non-finite at iteration " << iter << " for w = ["
       << w.transpose() << "]";
    return NumericalError(os.str(), "w");
  };

  Matrix grad;
  double value = detail::objective_and_gradient(x, active, cfg.smooth_mu, &grad);
  if (!std::isfinite(value)) throw fail(0);

  Matrix trial = x;
  Matrix trial_grad;
  double alpha = cfg.step;
  for (int iter = 1; iter <= cfg.max_iters; ++iter) {
    if (grad.norm() < cfg.tol) break;
    const Matrix direction = precond.solve(grad);
    bool accepted = false;
    for (int h = 0; h <= cfg.max_halvings; ++h) {
      trial.middleRows(1, n) = x.middleRows(1, n) - alpha * direction;
      const double trial_value =
          detail::objective_and_gradient(trial, active, cfg.smooth_mu, &trial_grad);
      if (!std::isfinite(trial_value)) throw fail(iter);
      if (trial_value < value) {
        x.swap(trial);
        grad.swap(trial_grad);
        value = trial_value;
        accepted = true;
        break;
      }
      alpha *= 0.5;
    }
    if (!accepted) break;
    alpha = std::min(cfg.step, 2.0 * alpha);
  }
  return Trajectory(std::move(x));
}

}  // namespace lfc
