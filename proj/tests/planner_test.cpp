#include <gtest/gtest.h>

#include <random>

#include "lfc/planner.hpp"
#include "lfc/scenario.hpp"
#include "oracles.hpp"

namespace lfc {
namespace {

Environment lone_obstacle(const Vector& position) {
  Environment env;
  env.start = Eigen::Vector2d(0, 5);
  env.goal = Eigen::Vector2d(10, 5);
  env.obstacles = {Obstacle{position, 0, 1.0}};
  return env;
}

double clearance(const Trajectory& xi, const Vector& p) {
  double best = std::numeric_limits<double>::infinity();
  for (int t = 0; t <= xi.horizon(); ++t) best = std::min(best, (xi.waypoint(t) - p).norm());
  return best;
}

TEST(StraightLineTest, Examples) {
  Environment env;
  env.start = Eigen::Vector2d(0, 0);
  env.goal = Eigen::Vector2d(1, 0);
  Matrix expected(3, 2);
  expected << 0, 0, 0.5, 0, 1, 0;
  EXPECT_EQ(straight_line(env, 2).waypoints(), expected);

  const Trajectory line = straight_line(lone_obstacle(Eigen::Vector2d(5, 5)), 40);
  EXPECT_EQ(line.num_waypoints(), 41);
  for (int t = 0; t < 40; ++t) {
    EXPECT_NEAR((line.waypoint(t + 1) - line.waypoint(t)).norm(), 0.25, 1e-12);
  }
  EXPECT_THROW(straight_line(env, 1), InvalidArgument);
}

TEST(PlannerTest, ZeroWeightsReturnStraightLine) {
  std::mt19937_64 rng(1);
  const Environment env = oracle::random_environment(rng, 2, 4);
  const Trajectory line = straight_line(env, 40);
  EXPECT_EQ(plan(env, Weights::Zero(2), PlannerConfig{}), line);
}

TEST(PlannerTest, AvoidsHeavilyWeightedObstacle) {
  const Vector p = Eigen::Vector2d(5, 5.0001);
  const Environment env = lone_obstacle(p);
  const Trajectory line = straight_line(env, 40);
  const Trajectory result = plan(env, Weights::Constant(1, 50.0), PlannerConfig{});
  EXPECT_GT(clearance(result, p), clearance(line, p));
}

TEST(PlannerTest, AttractedByNegativeWeight) {
  const Vector p = Eigen::Vector2d(5, 7);
  const Environment env = lone_obstacle(p);
  const Trajectory line = straight_line(env, 40);
  const Trajectory result = plan(env, Weights::Constant(1, -5.0), PlannerConfig{});
  EXPECT_LT(clearance(result, p), clearance(line, p));
}

TEST(PlannerTest, EndpointsPinnedAndObjectiveDecreases) {
  std::mt19937_64 rng(31);
  std::uniform_real_distribution<double> u(-20.0, 20.0);
  for (int trial = 0; trial < 20; ++trial) {
    Environment env = oracle::random_environment(rng, 3, 9);
    Weights w(3);
    for (int k = 0; k < 3; ++k) w[k] = u(rng);
    PlannerConfig cfg;
    const Trajectory line = straight_line(env, cfg.horizon);
    const Trajectory result = plan(env, w, cfg);
    EXPECT_EQ(result.waypoints().row(0), line.waypoints().row(0));
    EXPECT_EQ(result.waypoints().row(cfg.horizon), line.waypoints().row(cfg.horizon));
    EXPECT_LE(objective(result, env, w, cfg.smooth_mu), objective(line, env, w, cfg.smooth_mu));
  }
}

TEST(PlannerTest, ObjectiveNonIncreasingAcrossIterationBudgets) {
  std::mt19937_64 rng(8);
  const Environment env = oracle::random_environment(rng, 2, 6);
  const Weights w = Eigen::Vector2d(3.0, -2.0);
  PlannerConfig cfg;
  double previous = objective(straight_line(env, cfg.horizon), env, w, cfg.smooth_mu);
  for (int iters = 1; iters <= 60; ++iters) {
    cfg.max_iters = iters;
    const double value = objective(plan(env, w, cfg), env, w, cfg.smooth_mu);
    EXPECT_LE(value, previous) << iters;
    previous = value;
  }
}

TEST(PlannerTest, WarmStartIsUsed) {
  const Environment env = lone_obstacle(Eigen::Vector2d(5, 6));
  PlannerConfig cfg;
  cfg.max_iters = 1;
  Matrix bent = straight_line(env, cfg.horizon).waypoints();
  bent.middleRows(1, cfg.horizon - 1).col(1).array() += 2.0;
  const Trajectory from_bent = plan(env, Weights::Constant(1, 1.0), cfg, Trajectory(bent));
  const Trajectory cold = plan(env, Weights::Constant(1, 1.0), cfg);
  EXPECT_FALSE(from_bent == cold);
}

TEST(PlannerTest, Deterministic) {
  const Environment env = generate_environment(5, 2, 7);
  const Trajectory a = plan(env, *env.ground_truth_w * 30.0, PlannerConfig{});
  const Trajectory b = plan(env, *env.ground_truth_w * 30.0, PlannerConfig{});
  EXPECT_EQ(a, b);
}

TEST(PlannerTest, GradientMatchesObjective) {
  std::mt19937_64 rng(4);
  const Environment env = oracle::random_environment(rng, 2, 5);
  const Weights w = Eigen::Vector2d(2.0, -1.5);
  const Trajectory xi = oracle::random_trajectory(rng, 10, 2);
  Matrix grad;
  detail::objective_and_gradient(xi.waypoints(), detail::active_obstacles(env, w), 0.5, &grad);
  const double h = 1e-6;
  for (int t = 1; t < 10; ++t) {
    for (int k = 0; k < 2; ++k) {
      Matrix plus = xi.waypoints();
      Matrix minus = xi.waypoints();
      plus(t, k) += h;
      minus(t, k) -= h;
      const double fd = (objective(Trajectory(plus), env, w, 0.5) - objective(Trajectory(minus), env, w, 0.5)) / (2 * h);
      EXPECT_NEAR(grad(t - 1, k), fd, 1e-5 * std::max(1.0, std::abs(fd)));
    }
  }
}

TEST(PlannerTest, Errors) {
  const Environment env = lone_obstacle(Eigen::Vector2d(5, 5));
  EXPECT_THROW(plan(env, Weights::Zero(2), PlannerConfig{}), InvalidArgument);
  PlannerConfig bad;
  bad.max_iters = 0;
  EXPECT_THROW(plan(env, Weights::Zero(1), bad), InvalidArgument);
  bad = PlannerConfig{};
  bad.smooth_mu = -1;
  EXPECT_THROW(plan(env, Weights::Zero(1), bad), InvalidArgument);
  try {
    plan(env, Weights::Constant(1, INFINITY), PlannerConfig{});
    FAIL();
  } catch (const NumericalError& e) {
    EXPECT_EQ(e.field(), "w");
  }
}

}  // namespace
}  // namespace lfc
