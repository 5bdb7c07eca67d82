#pragma once

#include <functional>
#include <optional>
#include <string>
#include <vector>

#include "lfc/deform.hpp"
#include "lfc/environment.hpp"
#include "lfc/kernel.hpp"
#include "lfc/planner.hpp"
#include "lfc/scenario.hpp"

namespace lfc {

struct LearnerState {
  Weights w;
  int iteration = 0;  // number of completed corrections
  double beta = 0.1;
  PropagationKernel kernel;
};

/// Everything observed and computed in one correction round.
struct TraceRecord {
  int iteration = 0;
  Weights w_before;
  Weights w_after;
  Trajectory planned;
  Correction correction;
  Trajectory corrected;
  FeatureVector phi_planned;
  FeatureVector phi_corrected;
  std::optional<double> normalized_cost;  // of `planned`, when ground truth is known
};

struct LearningTrace {
  std::vector<TraceRecord> records;
  /// Set when the correction source signalled "done": the trajectory it was
  /// satisfied with (planned at iteration records.size() + 1) and its cost.
  std::optional<Trajectory> final_planned;
  std::optional<double> final_normalized_cost;

  [[nodiscard]] bool stopped_early() const { return final_planned.has_value(); }
};

/// Returns the next correction for a planned trajectory, or nullopt once
/// the user is satisfied.
using CorrectionSource = std::function<std::optional<Correction>(const Trajectory& planned)>;

/// w - beta * (phi_bar - phi)
inline Weights update_weights(const Weights& w, const FeatureVector& phi_bar,
                              const FeatureVector& phi, double beta) {
  if (w.size() != phi_bar.size() || w.size() != phi.size()) {
    throw InvalidArgument("weight and feature vectors differ in length", "w");
  }
  if (!(beta > 0.0)) throw InvalidArgument("learning rate must be positive", "beta");
  Weights out(w.size());
  for (Eigen::Index k = 0; k < w.size(); ++k) out[k] = w[k] - beta * (phi_bar[k] - phi[k]);
  return out;
}

inline LearnerState initial_state(const Environment& env, const PropagationKernel& kernel,
                                  double beta) {
  if (!(beta > 0.0)) throw InvalidArgument("learning rate must be positive", "beta");
  return {Weights::Zero(env.num_types), 0, beta, kernel};
}

struct IterationOutcome {
  LearnerState state;
  TraceRecord record;
};

/// Deforms an already planned trajectory through `correction` and updates
/// the weights. The record's normalized cost is filled when `ref` is given.
inline IterationOutcome apply_correction(const LearnerState& state, const Environment& env,
                                         const Trajectory& planned, const Correction& correction,
                                         const Reference* ref = nullptr) {
  DeformResult deformed = deform(planned, correction, state.kernel);
  FeatureVector phi = features(planned, env);
  FeatureVector phi_bar = features(deformed.corrected, env);

  LearnerState next = state;
  next.w = update_weights(state.w, phi_bar, phi, state.beta);
  next.iteration = state.iteration + 1;

  TraceRecord rec{next.iteration,
                  state.w,
                  next.w,
                  planned,
                  correction,
                  std::move(deformed.corrected),
                  std::move(phi),
                  std::move(phi_bar),
                  std::nullopt};
  if (ref) rec.normalized_cost = normalized_cost(planned, env, *ref);
  return {std::move(next), std::move(rec)};
}

/// One round: plan with the current weights, ask for a correction,
/// extrapolate it and update the weights. Returns nullopt when the source
/// reports it is done; `planned_out` then holds the accepted trajectory.
inline std::optional<IterationOutcome> run_iteration(
    const LearnerState& state, const Environment& env, const CorrectionSource& source,
    const PlannerConfig& planner, const Reference* ref = nullptr,
    const std::optional<Trajectory>& warm_start = std::nullopt,
    std::optional<Trajectory>* planned_out = nullptr) {
  Trajectory planned = plan(env, state.w, planner, warm_start);
  std::optional<Correction> correction = source(planned);
  if (!correction) {
    if (planned_out) *planned_out = std::move(planned);
    return std::nullopt;
  }
  return apply_correction(state, env, planned, *correction, ref);
}

struct LoopOptions {
  PlannerConfig planner;
  bool warm_start = false;  // start each plan from the previous plan
};

/// Runs up to N rounds from w_0 = 0, stopping early when the source is done.
inline LearningTrace run_loop(const Environment& env, const PropagationKernel& kernel, double beta,
                              int iterations, const CorrectionSource& source,
                              const LoopOptions& options = {}, const Reference* ref = nullptr) {
  if (iterations < 1) throw InvalidArgument("iteration budget must be >= 1", "N");
  LearningTrace trace;
  LearnerState state = initial_state(env, kernel, beta);
  std::optional<Trajectory> previous;
  for (int i = 1; i <= iterations; ++i) {
    std::optional<Trajectory> accepted;
    auto outcome = run_iteration(state, env, source, options.planner, ref,
                                 options.warm_start ? previous : std::nullopt, &accepted);
    if (!outcome) {
      if (ref) trace.final_normalized_cost = normalized_cost(*accepted, env, *ref);
      trace.final_planned = std::move(accepted);
      break;
    }
    previous = outcome->record.planned;
    state = std::move(outcome->state);
    trace.records.push_back(std::move(outcome->record));
  }
  return trace;
}

/// Normalized cost of the planned trajectory at iterations 1..N. After an
/// early stop the accepted trajectory's cost is carried forward.
inline std::vector<double> cost_curve(const LearningTrace& trace, int iterations) {
  std::vector<double> curve;
  curve.reserve(iterations);
  for (const TraceRecord& r : trace.records) {
    if (!r.normalized_cost) throw InvalidArgument("trace has no normalized costs", "trace");
    curve.push_back(*r.normalized_cost);
  }
  if (trace.stopped_early() && trace.final_normalized_cost) {
    while (static_cast<int>(curve.size()) < iterations) curve.push_back(*trace.final_normalized_cost);
  }
  return curve;
}

}  // namespace lfc
