#pragma once

#include <cstdint>
#include <optional>
#include <random>
#include <vector>

#include "lfc/trajectory.hpp"

namespace lfc {

enum class Strategy {
  Largest,   // correct where planned and optimal trajectories differ most
  Anywhere,  // correct at a random high-deviation timepoint
};

struct SimUserConfig {
  Strategy strategy = Strategy::Largest;
  std::uint64_t seed = 0;         // used by Anywhere and by noise
  double noise = 0.0;             // std-dev of Gaussian noise on the corrected configuration
  double done_threshold = 1e-3;   // workspace units
  double anywhere_fraction = 0.25;

  void validate() const {
    if (!(noise >= 0.0)) throw InvalidArgument("noise must be non-negative", "noise");
    if (!(done_threshold >= 0.0)) throw InvalidArgument("done_threshold must be non-negative", "done_threshold");
  }
};

/// Picks a correction that moves `planned` toward `optimal`, or returns
/// nullopt ("done") when every interior waypoint is within the done threshold.
/// Deviation is the Euclidean distance between corresponding waypoints.
inline std::optional<Correction> simulate_correction(const Trajectory& optimal,
                                                     const Trajectory& planned,
                                                     const SimUserConfig& cfg,
                                                     std::mt19937_64& rng) {
  if (optimal.num_waypoints() != planned.num_waypoints() || optimal.dim() != planned.dim()) {
    throw InvalidArgument("optimal and planned trajectories differ in shape", "planned");
  }
  cfg.validate();
  const int big_t = planned.horizon();
  std::vector<double> deviation(big_t + 1, 0.0);
  int argmax = 1;
  for (int t = 1; t < big_t; ++t) {
    deviation[t] = (optimal.waypoints().row(t) - planned.waypoints().row(t)).norm();
    if (deviation[t] > deviation[argmax]) argmax = t;
  }
  const double max_dev = deviation[argmax];
  if (max_dev < cfg.done_threshold) return std::nullopt;

  int t = argmax;
  if (cfg.strategy == Strategy::Anywhere) {
    std::vector<int> candidates;
    for (int s = 1; s < big_t; ++s) {
      if (deviation[s] > cfg.anywhere_fraction * max_dev) candidates.push_back(s);
    }
    std::uniform_int_distribution<std::size_t> pick(0, candidates.size() - 1);
    t = candidates[pick(rng)];
  }

  Vector q = optimal.waypoint(t);
  if (cfg.noise > 0.0) {
    std::normal_distribution<double> gauss(0.0, 1.0);
    for (int k = 0; k < q.size(); ++k) q[k] += cfg.noise * gauss(rng);
  }
  return Correction{t, std::move(q)};
}

/// A simulated user who knows the optimal trajectory. Owns its random stream,
/// so a given seed yields the same sequence of corrections.
class SimulatedUser {
 public:
  SimulatedUser(Trajectory optimal, SimUserConfig cfg)
      : optimal_(std::move(optimal)), cfg_(cfg), rng_(cfg.seed) {
    cfg_.validate();
  }

  std::optional<Correction> operator()(const Trajectory& planned) {
    return simulate_correction(optimal_, planned, cfg_, rng_);
  }

 private:
  Trajectory optimal_;
  SimUserConfig cfg_;
  std::mt19937_64 rng_;
};

}  // namespace lfc
