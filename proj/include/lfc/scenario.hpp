#pragma once

#include <cstdint>
#include <random>
#include <string>

#include "lfc/environment.hpp"
#include "lfc/planner.hpp"

namespace lfc {

/// Settings for random environment generation.
struct GenConfig {
  double workspace_min = 0.0;
  double workspace_max = 10.0;
  double radius = 1.0;
  Vector start = Eigen::Vector2d(0.0, 5.0);
  Vector goal = Eigen::Vector2d(10.0, 5.0);
  double weight_bound = 1.0;  // ground truth weights ~ U[-bound, bound]
  int max_rejections = 100;
  PlannerConfig planner;
};

/// Minimum spread between the straight-line and optimal ground-truth costs.
inline constexpr double kMinNormalizationSpread = 1e-9;

/// Ground-truth anchors for cost normalization: the optimal trajectory (the
/// planner's output under w^H) and the straight line.
struct Reference {
  Weights ground_truth_w;
  Trajectory optimal;
  Trajectory straight;
  double optimal_cost = 0.0;
  double straight_cost = 1.0;
};

/// (c - c*) / (c_SL - c*)
inline double normalize_cost(double c, double optimal_cost, double straight_cost) {
  return (c - optimal_cost) / (straight_cost - optimal_cost);
}

/// Plans the ground-truth optimum and checks that normalization is defined.
inline Reference make_reference(const Environment& env, const PlannerConfig& cfg) {
  if (!env.ground_truth_w) {
    throw InvalidArgument("environment carries no ground-truth weights", "ground_truth_w");
  }
  const Weights& wh = *env.ground_truth_w;
  Trajectory straight = straight_line(env, cfg.horizon);
  Trajectory optimal = plan(env, wh, cfg);
  const double c_opt = cost(optimal, env, wh);
  const double c_sl = cost(straight, env, wh);
  if (!(c_sl - c_opt >= kMinNormalizationSpread)) {
    throw InvalidArgument("straight line is already optimal (cost spread " +
                              std::to_string(c_sl - c_opt) + ")",
                          "ground_truth_w");
  }
  return {wh, std::move(optimal), std::move(straight), c_opt, c_sl};
}

/// Ground-truth cost rescaled so the optimum scores 0 and the straight line 1.
inline double normalized_cost(const Trajectory& xi, const Environment& env, const Reference& ref) {
  return normalize_cost(cost(xi, env, ref.ground_truth_w), ref.optimal_cost, ref.straight_cost);
}

/// Draws F*M obstacles (M per type) uniformly in the workspace box and
/// ground-truth weights uniformly in [-bound, bound]. Draws whose straight line
/// is already optimal are discarded and redrawn with the next sub-seed.
inline Environment generate_environment(int num_types, int instances, std::uint64_t seed,
                                        const GenConfig& config = {}) {
  if (num_types < 1) throw InvalidArgument("number of feature types must be >= 1", "features");
  if (instances < 1) throw InvalidArgument("instances per type must be >= 1", "instances");
  for (int attempt = 0; attempt <= config.max_rejections; ++attempt) {
    std::seed_seq seq{static_cast<std::uint32_t>(seed), static_cast<std::uint32_t>(seed >> 32),
                      static_cast<std::uint32_t>(attempt)};
    std::mt19937_64 rng(seq);
    std::uniform_real_distribution<double> coord(config.workspace_min, config.workspace_max);
    std::uniform_real_distribution<double> weight(-config.weight_bound, config.weight_bound);

    Environment env;
    env.start = config.start;
    env.goal = config.goal;
    env.num_types = num_types;
    env.instances_per_type = instances;
    env.seed = seed;
    const int d = env.dim();
    for (int k = 0; k < num_types; ++k) {
      for (int m = 0; m < instances; ++m) {
        Obstacle o;
        o.position.resize(d);
        for (int i = 0; i < d; ++i) o.position[i] = coord(rng);
        o.type_id = k;
        o.radius = config.radius;
        env.obstacles.push_back(std::move(o));
      }
    }
    Weights w(num_types);
    for (int k = 0; k < num_types; ++k) w[k] = weight(rng);
    env.ground_truth_w = w;
    env.validate();

    try {
      (void)make_reference(env, config.planner);
      return env;
    } catch (const InvalidArgument&) {
      // degenerate normalization; redraw
    }
  }
  throw GenerationError("environment generation rejected " +
                            std::to_string(config.max_rejections + 1) + " draws for seed " +
                            std::to_string(seed),
                        "seed");
}

}  // namespace lfc
