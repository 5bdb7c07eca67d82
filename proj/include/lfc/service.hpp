#pragma once

// Session-oriented API over the learning loop. SessionManager::handle maps a
// (method, path, body) request to a status code and a body; the HTTP server
// in tools/ is a thin adapter around it, and request logs can be replayed
// against a fresh manager to reproduce a session exactly.

#include <atomic>
#include <filesystem>
#include <fstream>
#include <functional>
#include <istream>
#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <shared_mutex>
#include <string>
#include <vector>

#include "lfc/deform.hpp"
#include "lfc/learner.hpp"
#include "lfc/planner.hpp"
#include "lfc/scenario.hpp"
#include "lfc/serialization.hpp"

namespace lfc {

enum class Phase { AwaitingCorrection, Replanning, Done };

inline const char* phase_name(Phase p) {
  switch (p) {
    case Phase::AwaitingCorrection: return "awaiting_correction";
    case Phase::Replanning: return "replanning";
    case Phase::Done: return "done";
  }
  return "unknown";
}

/// Error surfaced to API clients as {code, message, field?}.
class ApiError : public Error {
 public:
  ApiError(int status, std::string code, const std::string& message, std::string field = {})
      : Error(message, std::move(field)), status_(status), code_(std::move(code)) {}

  [[nodiscard]] int status() const { return status_; }
  [[nodiscard]] const std::string& code() const { return code_; }

 private:
  int status_;
  std::string code_;
};

struct ApiResponse {
  int status = 200;
  std::string body;
  std::string content_type = "application/json";

  [[nodiscard]] Json json() const { return Json::parse(body); }
};

struct ServiceConfig {
  GenConfig generator;              // also supplies the default planner
  std::optional<std::filesystem::path> trace_dir;  // dump traces here on finish
};

struct Session {
  std::string id;
  Environment env;
  std::optional<Reference> ref;
  PlannerConfig planner;
  LearnerState state;
  Trajectory planned;
  LearningTrace trace;
  Phase phase = Phase::AwaitingCorrection;
  mutable std::shared_mutex mutex;  // shared for reads and previews, exclusive for commits

  Session(std::string id_, Environment env_, std::optional<Reference> ref_, PlannerConfig planner_,
          LearnerState state_, Trajectory planned_)
      : id(std::move(id_)),
        env(std::move(env_)),
        ref(std::move(ref_)),
        planner(planner_),
        state(std::move(state_)),
        planned(std::move(planned_)) {}
};

struct LoggedRequest {
  std::string method;
  std::string path;
  std::string body;
};

class SessionManager {
 public:
  explicit SessionManager(ServiceConfig config = {}) : config_(std::move(config)) {}

  /// Observer invoked for every request before it is handled.
  void set_request_observer(std::function<void(const LoggedRequest&)> observer) {
    observer_ = std::move(observer);
  }

  ApiResponse handle(const std::string& method, const std::string& raw_path, const std::string& body) {
    const std::string path = strip_query(raw_path);
    // State-changing requests are logged and applied in one critical section,
    // so the log order is the order a replay must follow.
    std::unique_lock<std::mutex> order;
    if (method == "POST" && !is_preview(path)) order = std::unique_lock(order_mutex_);
    if (observer_) observer_({method, raw_path, body});
    try {
      return route(method, path, body);
    } catch (const ApiError& e) {
      return error_response(e.status(), e.code(), e.what(), e.field());
    } catch (const GenerationError& e) {
      return error_response(422, "generation_failed", e.what(), e.field());
    } catch (const InvalidArgument& e) {
      return error_response(400, "invalid_argument", e.what(), e.field());
    } catch (const NumericalError& e) {
      return error_response(422, "numerical_error", e.what(), e.field());
    } catch (const nlohmann::json::exception& e) {
      return error_response(400, "malformed_json", e.what(), "");
    }
  }

  /// Trace of a session as JSON lines; throws ApiError for unknown ids.
  std::string trace_jsonl(const std::string& id) const {
    auto s = find(id);
    std::shared_lock lock(s->mutex);
    return trace_to_jsonl(s->trace);
  }

  static Json kernels_catalog() {
    return Json{{"kernels",
                 Json::array({Json{{"variant", "identity"}, {"name", "identity"}},
                              Json{{"variant", "velocity"}, {"name", "velocity"}},
                              Json{{"variant", "rbf"}, {"name", "rbf"}, {"sigma_presets", {1, 3, 5}}}})}};
  }

 private:
  static std::string strip_query(const std::string& path) {
    const auto q = path.find('?');
    return q == std::string::npos ? path : path.substr(0, q);
  }

  static bool is_preview(const std::string& path) {
    const std::string suffix = "/preview";
    return path.size() >= suffix.size() && path.compare(path.size() - suffix.size(), suffix.size(), suffix) == 0;
  }

  static std::vector<std::string> split_path(const std::string& path) {
    std::vector<std::string> parts;
    std::string cur;
    for (char c : path) {
      if (c == '/') {
        if (!cur.empty()) parts.push_back(std::move(cur));
        cur.clear();
      } else {
        cur += c;
      }
    }
    if (!cur.empty()) parts.push_back(std::move(cur));
    return parts;
  }

  static ApiResponse json_response(const Json& j, int status = 200) { return {status, j.dump(), "application/json"}; }

  static ApiResponse error_response(int status, const std::string& code, const std::string& message,
                                    const std::string& field) {
    Json j{{"code", code}, {"message", message}};
    if (!field.empty()) j["field"] = field;
    return json_response(j, status);
  }

  static Json parse_body(const std::string& body) {
    if (body.empty()) return Json::object();
    Json j = Json::parse(body, nullptr, false);
    if (j.is_discarded() || !j.is_object()) {
      throw ApiError(400, "malformed_json", "request body must be a JSON object");
    }
    return j;
  }

  ApiResponse route(const std::string& method, const std::string& path, const std::string& body) {
    const auto parts = split_path(path);
    if (parts.size() == 1 && parts[0] == "kernels") {
      require_method(method, "GET");
      return json_response(kernels_catalog());
    }
    if (parts.empty() || parts[0] != "sessions") {
      throw ApiError(404, "not_found", "no route for " + path);
    }
    if (parts.size() == 1) {
      require_method(method, "POST");
      return json_response(create_session(parse_body(body)), 201);
    }
    const std::string& id = parts[1];
    if (parts.size() == 2) {
      require_method(method, "GET");
      return json_response(describe(id));
    }
    if (parts.size() == 3) {
      const std::string& action = parts[2];
      if (action == "preview") {
        require_method(method, "POST");
        return json_response(preview(id, parse_body(body)));
      }
      if (action == "corrections") {
        require_method(method, "POST");
        return json_response(commit(id, parse_body(body)));
      }
      if (action == "trace") {
        require_method(method, "GET");
        return {200, trace_jsonl(id), "application/x-ndjson"};
      }
      if (action == "finish") {
        require_method(method, "POST");
        return json_response(finish(id));
      }
    }
    throw ApiError(404, "not_found", "no route for " + path);
  }

  static void require_method(const std::string& method, const char* expected) {
    if (method != expected) {
      throw ApiError(405, "method_not_allowed", "expected " + std::string(expected) + ", got " + method);
    }
  }

  std::shared_ptr<Session> find(const std::string& id) const {
    std::shared_lock lock(sessions_mutex_);
    auto it = sessions_.find(id);
    if (it == sessions_.end()) throw ApiError(404, "unknown_session", "unknown session '" + id + "'", "id");
    return it->second;
  }

  static Json snapshot(const Session& s) {
    Json out;
    out["id"] = s.id;
    out["phase"] = phase_name(s.phase);
    out["iteration"] = s.state.iteration;
    out["kernel"] = kernel_to_json(s.state.kernel.spec());
    out["beta"] = s.state.beta;
    out["weights"] = vector_to_json(s.state.w);
    out["planned"] = trajectory_to_json(s.planned);
    out["environment"] = environment_to_json(s.env);
    if (s.ref) out["normalized_cost"] = normalized_cost(s.planned, s.env, *s.ref);
    return out;
  }

  Json create_session(const Json& req) {
    using detail::get_or;
    if (!req.contains("kernel")) throw ApiError(400, "invalid_argument", "missing field 'kernel'", "kernel");
    const KernelSpec kernel_spec = kernel_from_json(req.at("kernel"));
    const double beta = detail::get_as<double>(req, "beta");
    if (!(beta > 0.0)) throw ApiError(400, "invalid_argument", "beta must be positive", "beta");
    const PlannerConfig planner = planner_from_json(req.value("planner", Json(nullptr)), config_.generator.planner);

    Environment env;
    std::optional<Reference> ref;
    if (req.contains("environment")) {
      env = environment_from_json(req.at("environment"));
      if (env.ground_truth_w) {
        try {
          ref = make_reference(env, planner);
        } catch (const InvalidArgument&) {
          ref.reset();  // normalization undefined; serve without costs
        }
      }
    } else if (req.contains("seed")) {
      GenConfig gen = config_.generator;
      gen.planner = planner;
      env = generate_environment(get_or<int>(req, "features", 2), get_or<int>(req, "instances", 1),
                                 detail::get_as<std::uint64_t>(req, "seed"), gen);
      ref = make_reference(env, planner);
    } else {
      throw ApiError(400, "invalid_argument", "provide either 'seed' or 'environment'", "seed");
    }

    PropagationKernel kernel = make_kernel(kernel_spec, planner.horizon);
    LearnerState state = initial_state(env, kernel, beta);
    Trajectory planned = plan(env, state.w, planner);

    std::unique_lock lock(sessions_mutex_);
    const std::string id = "s" + std::to_string(++next_id_);
    auto session = std::make_shared<Session>(id, std::move(env), std::move(ref), planner, std::move(state),
                                             std::move(planned));
    sessions_.emplace(id, session);
    std::shared_lock session_lock(session->mutex);
    return snapshot(*session);
  }

  Json describe(const std::string& id) const {
    auto s = find(id);
    std::shared_lock lock(s->mutex);
    return snapshot(*s);
  }

  static Correction parse_correction(const Json& req) {
    if (!req.contains("t")) throw ApiError(400, "invalid_argument", "missing field 't'", "t");
    if (!req.contains("q")) throw ApiError(400, "invalid_argument", "missing field 'q'", "q");
    return correction_from_json(req);
  }

  Json preview(const std::string& id, const Json& req) const {
    auto s = find(id);
    std::shared_lock lock(s->mutex);
    if (s->phase != Phase::AwaitingCorrection) {
      throw ApiError(409, "phase_violation", std::string("session is ") + phase_name(s->phase), "phase");
    }
    const Correction c = parse_correction(req);
    const PropagationKernel kernel = req.contains("kernel")
                                         ? make_kernel(kernel_from_json(req.at("kernel")), s->planned.horizon())
                                         : s->state.kernel;
    const DeformResult result = deform(s->planned, c, kernel);
    Json out;
    out["kernel"] = kernel_to_json(kernel.spec());
    out["t"] = c.t;
    out["waypoints"] = trajectory_to_json(result.corrected);
    return out;
  }

  Json commit(const std::string& id, const Json& req) {
    auto s = find(id);
    std::unique_lock lock(s->mutex);
    if (s->phase != Phase::AwaitingCorrection) {
      throw ApiError(409, "phase_violation", std::string("session is ") + phase_name(s->phase), "phase");
    }
    const Correction c = parse_correction(req);
    s->phase = Phase::Replanning;
    try {
      const Reference* ref = s->ref ? &*s->ref : nullptr;
      IterationOutcome outcome = apply_correction(s->state, s->env, s->planned, c, ref);
      Trajectory next_plan = plan(s->env, outcome.state.w, s->planner);

      Json out;
      out["iteration"] = outcome.record.iteration;
      out["corrected"] = trajectory_to_json(outcome.record.corrected);
      out["weights"] = vector_to_json(outcome.state.w);
      out["planned"] = trajectory_to_json(next_plan);
      if (ref) {
        out["normalized_cost"] = Json{{"previous_planned", normalized_cost(s->planned, s->env, *ref)},
                                      {"corrected", normalized_cost(outcome.record.corrected, s->env, *ref)},
                                      {"planned", normalized_cost(next_plan, s->env, *ref)}};
      }
      s->state = std::move(outcome.state);
      s->trace.records.push_back(std::move(outcome.record));
      s->planned = std::move(next_plan);
      s->phase = Phase::AwaitingCorrection;
      out["phase"] = phase_name(s->phase);
      return out;
    } catch (...) {
      s->phase = Phase::AwaitingCorrection;
      throw;
    }
  }

  Json finish(const std::string& id) {
    auto s = find(id);
    std::unique_lock lock(s->mutex);
    if (s->phase != Phase::Done) {
      s->phase = Phase::Done;
      if (config_.trace_dir) {
        std::filesystem::create_directories(*config_.trace_dir);
        std::ofstream out(*config_.trace_dir / (s->id + ".jsonl"), std::ios::binary);
        out << trace_to_jsonl(s->trace);
      }
    }
    return Json{{"id", s->id}, {"phase", phase_name(s->phase)},
                {"iterations", static_cast<int>(s->trace.records.size())}};
  }

  ServiceConfig config_;
  std::function<void(const LoggedRequest&)> observer_;
  std::mutex order_mutex_;
  mutable std::shared_mutex sessions_mutex_;
  std::map<std::string, std::shared_ptr<Session>> sessions_;
  std::uint64_t next_id_ = 0;
};

inline Json logged_request_to_json(const LoggedRequest& r) {
  return Json{{"method", r.method}, {"path", r.path}, {"body", r.body}};
}

/// Re-issues every request of a JSON-lines log, in order, and returns the responses.
inline std::vector<ApiResponse> replay_requests(SessionManager& manager, std::istream& log) {
  std::vector<ApiResponse> responses;
  std::string line;
  while (std::getline(log, line)) {
    if (line.empty()) continue;
    const Json j = Json::parse(line);
    responses.push_back(manager.handle(j.at("method").get<std::string>(), j.at("path").get<std::string>(),
                                       j.value("body", std::string())));
  }
  return responses;
}

}  // namespace lfc
