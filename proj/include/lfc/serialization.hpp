#pragma once

// JSON encodings of the library's value types. Output uses insertion-ordered
// objects so field order is canonical; doubles are printed in their shortest
// round-trip form, so reading a document back reproduces every bit.

#include <json.hpp>

#include <cstdint>
#include <string>
#include <string_view>

#include "lfc/environment.hpp"
#include "lfc/kernel.hpp"
#include "lfc/learner.hpp"
#include "lfc/planner.hpp"
#include "lfc/sim_user.hpp"

namespace lfc {

using Json = nlohmann::ordered_json;

namespace detail {

inline const Json& require(const Json& j, const char* key) {
  if (!j.is_object() || !j.contains(key)) {
    throw InvalidArgument(std::string("missing field '") + key + "'", key);
  }
  return j.at(key);
}

template <typename T>
T get_as(const Json& j, const char* key) {
  const Json& v = require(j, key);
  try {
    return v.get<T>();
  } catch (const nlohmann::json::exception&) {
    throw InvalidArgument(std::string("field '") + key + "' has the wrong type", key);
  }
}

template <typename T>
T get_or(const Json& j, const char* key, T fallback) {
  if (!j.is_object() || !j.contains(key) || j.at(key).is_null()) return fallback;
  return get_as<T>(j, key);
}

}  // namespace detail

inline Json vector_to_json(const Vector& v) {
  Json out = Json::array();
  for (Eigen::Index i = 0; i < v.size(); ++i) out.push_back(v[i]);
  return out;
}

inline Vector vector_from_json(const Json& j, const std::string& field = "vector") {
  if (!j.is_array()) throw InvalidArgument("'" + field + "' must be an array of numbers", field);
  Vector v(static_cast<Eigen::Index>(j.size()));
  for (std::size_t i = 0; i < j.size(); ++i) {
    if (!j[i].is_number()) throw InvalidArgument("'" + field + "' must contain only numbers", field);
    v[static_cast<Eigen::Index>(i)] = j[i].get<double>();
  }
  return v;
}

inline Json trajectory_to_json(const Trajectory& xi) {
  Json out = Json::array();
  for (int t = 0; t < xi.num_waypoints(); ++t) out.push_back(vector_to_json(xi.waypoint(t)));
  return out;
}

inline Trajectory trajectory_from_json(const Json& j, const std::string& field = "trajectory") {
  if (!j.is_array() || j.empty()) throw InvalidArgument("'" + field + "' must be a non-empty array", field);
  const Vector first = vector_from_json(j[0], field);
  Matrix x(static_cast<Eigen::Index>(j.size()), first.size());
  for (std::size_t t = 0; t < j.size(); ++t) {
    const Vector row = vector_from_json(j[t], field);
    if (row.size() != first.size()) throw InvalidArgument("ragged waypoint array", field);
    x.row(static_cast<Eigen::Index>(t)) = row.transpose();
  }
  try {
    return Trajectory(std::move(x));
  } catch (const InvalidArgument& e) {
    throw InvalidArgument(e.what(), field);
  }
}

inline Json environment_to_json(const Environment& env) {
  Json obstacles = Json::array();
  for (const Obstacle& o : env.obstacles) {
    obstacles.push_back(
        Json{{"position", vector_to_json(o.position)}, {"type_id", o.type_id}, {"radius", o.radius}});
  }
  Json out;
  out["dim"] = env.dim();
  out["start"] = vector_to_json(env.start);
  out["goal"] = vector_to_json(env.goal);
  out["obstacles"] = std::move(obstacles);
  out["num_types"] = env.num_types;
  out["instances_per_type"] = env.instances_per_type;
  out["ground_truth_w"] = env.ground_truth_w ? vector_to_json(*env.ground_truth_w) : Json(nullptr);
  out["seed"] = env.seed;
  return out;
}

inline Environment environment_from_json(const Json& j) {
  if (!j.is_object()) throw InvalidArgument("environment must be a JSON object", "environment");
  Environment env;
  env.start = vector_from_json(detail::require(j, "start"), "start");
  env.goal = vector_from_json(detail::require(j, "goal"), "goal");
  if (j.contains("dim") && detail::get_as<int>(j, "dim") != env.dim()) {
    throw InvalidArgument("'dim' disagrees with start", "dim");
  }
  const Json& obstacles = detail::require(j, "obstacles");
  if (!obstacles.is_array()) throw InvalidArgument("'obstacles' must be an array", "obstacles");
  for (const Json& o : obstacles) {
    Obstacle ob;
    ob.position = vector_from_json(detail::require(o, "position"), "obstacles.position");
    ob.type_id = detail::get_as<int>(o, "type_id");
    ob.radius = detail::get_or<double>(o, "radius", 1.0);
    env.obstacles.push_back(std::move(ob));
  }
  env.num_types = detail::get_as<int>(j, "num_types");
  env.instances_per_type = detail::get_or<int>(j, "instances_per_type", 0);
  if (j.contains("ground_truth_w") && !j.at("ground_truth_w").is_null()) {
    env.ground_truth_w = vector_from_json(j.at("ground_truth_w"), "ground_truth_w");
  }
  env.seed = detail::get_or<std::uint64_t>(j, "seed", 0);
  env.validate();
  return env;
}

inline Json kernel_to_json(const KernelSpec& spec) {
  Json out;
  switch (spec.variant) {
    case KernelVariant::Identity: out["variant"] = "identity"; break;
    case KernelVariant::Velocity: out["variant"] = "velocity"; break;
    case KernelVariant::Rbf:
      out["variant"] = "rbf";
      out["sigma"] = *spec.sigma;
      break;
  }
  return out;
}

/// Accepts {"variant": ..., "sigma": ...} or a name string ("rbf:3").
inline KernelSpec kernel_from_json(const Json& j) {
  if (j.is_string()) return KernelSpec::parse(j.get<std::string>());
  const auto variant = detail::get_as<std::string>(j, "variant");
  KernelSpec spec;
  if (variant == "identity" || variant == "euclidean") {
    spec.variant = KernelVariant::Identity;
  } else if (variant == "velocity") {
    spec.variant = KernelVariant::Velocity;
  } else if (variant == "rbf") {
    spec.variant = KernelVariant::Rbf;
  } else {
    throw InvalidArgument("unknown kernel variant '" + variant + "'", "variant");
  }
  if (j.contains("sigma") && !j.at("sigma").is_null()) spec.sigma = detail::get_as<double>(j, "sigma");
  spec.validate();
  return spec;
}

inline Json planner_to_json(const PlannerConfig& cfg) {
  return Json{{"horizon", cfg.horizon},     {"smooth_mu", cfg.smooth_mu},
              {"step", cfg.step},           {"max_iters", cfg.max_iters},
              {"tol", cfg.tol},             {"max_halvings", cfg.max_halvings}};
}

/// Fields absent from `j` keep the values of `base`.
inline PlannerConfig planner_from_json(const Json& j, PlannerConfig base = {}) {
  if (j.is_null()) return base;
  if (!j.is_object()) throw InvalidArgument("planner config must be an object", "planner");
  base.horizon = detail::get_or<int>(j, "horizon", base.horizon);
  base.smooth_mu = detail::get_or<double>(j, "smooth_mu", base.smooth_mu);
  base.step = detail::get_or<double>(j, "step", base.step);
  base.max_iters = detail::get_or<int>(j, "max_iters", base.max_iters);
  base.tol = detail::get_or<double>(j, "tol", base.tol);
  base.max_halvings = detail::get_or<int>(j, "max_halvings", base.max_halvings);
  base.validate();
  return base;
}

inline std::string strategy_name(Strategy s) { return s == Strategy::Largest ? "largest" : "anywhere"; }

inline Strategy strategy_from_name(std::string_view name) {
  if (name == "largest") return Strategy::Largest;
  if (name == "anywhere") return Strategy::Anywhere;
  throw InvalidArgument("unknown strategy '" + std::string(name) + "'", "strategy");
}

inline Json correction_to_json(const Correction& c) { return Json{{"t", c.t}, {"q", vector_to_json(c.q)}}; }

inline Correction correction_from_json(const Json& j) {
  return {detail::get_as<int>(j, "t"), vector_from_json(detail::require(j, "q"), "q")};
}

inline Json record_to_json(const TraceRecord& r) {
  Json out;
  out["iteration"] = r.iteration;
  out["w_before"] = vector_to_json(r.w_before);
  out["w_after"] = vector_to_json(r.w_after);
  out["planned"] = trajectory_to_json(r.planned);
  out["correction"] = correction_to_json(r.correction);
  out["corrected"] = trajectory_to_json(r.corrected);
  out["phi_planned"] = vector_to_json(r.phi_planned);
  out["phi_corrected"] = vector_to_json(r.phi_corrected);
  out["normalized_cost"] = r.normalized_cost ? Json(*r.normalized_cost) : Json(nullptr);
  return out;
}

/// One JSON document per line, one line per record.
inline std::string trace_to_jsonl(const LearningTrace& trace) {
  std::string out;
  for (const TraceRecord& r : trace.records) {
    out += record_to_json(r).dump();
    out += '\n';
  }
  return out;
}

/// 64-bit FNV-1a, used to fingerprint serialized traces.
inline std::uint64_t fingerprint(std::string_view bytes) {
  std::uint64_t h = 1469598103934665603ULL;
  for (unsigned char c : bytes) {
    h ^= c;
    h *= 1099511628211ULL;
  }
  return h;
}

}  // namespace lfc
