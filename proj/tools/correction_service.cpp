// HTTP front end for the interactive correction loop.
//
//   correction_service --port 8080 --static-dir ui/dist --request-log requests.jsonl
//   correction_service --replay requests.jsonl --dump-trace s1

#include <CLI11.hpp>

#include <csignal>
#include <fstream>
#include <iostream>
#include <mutex>

#include "lfc/http_service.hpp"
#include "lfc/service.hpp"

namespace {

httplib::Server* g_server = nullptr;

void on_signal(int) {
  if (g_server) g_server->stop();
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Serve the learning-from-corrections session API over HTTP"};
  std::string host = "127.0.0.1";
  int port = 8080;
  std::string config_path;
  std::string static_dir;
  std::string trace_dir;
  std::string request_log;
  std::string replay_path;
  std::string dump_trace;
  app.add_option("--host", host, "Interface to bind");
  app.add_option("--port", port, "TCP port");
  app.add_option("--config", config_path, "JSON config: {port, planner:{...}, generator:{...}}");
  app.add_option("--static-dir", static_dir, "Directory served at / (UI bundle)");
  app.add_option("--trace-dir", trace_dir, "Write each session's trace here when it finishes");
  app.add_option("--request-log", request_log, "Append every request to this JSON-lines file");
  app.add_option("--replay", replay_path, "Replay a request log offline instead of serving");
  app.add_option("--dump-trace", dump_trace, "With --replay: print this session's trace");
  CLI11_PARSE(app, argc, argv);

  lfc::ServiceConfig config;
  try {
    if (!config_path.empty()) {
      std::ifstream in(config_path);
      if (!in) throw lfc::InvalidArgument("cannot open " + config_path, "config");
      const lfc::Json j = lfc::Json::parse(in);
      if (j.contains("port") && app.count("--port") == 0) port = j.at("port").get<int>();
      if (j.contains("planner")) config.generator.planner = lfc::planner_from_json(j.at("planner"));
      if (j.contains("generator")) {
        const lfc::Json& g = j.at("generator");
        config.generator.radius = g.value("radius", config.generator.radius);
        config.generator.workspace_min = g.value("workspace_min", config.generator.workspace_min);
        config.generator.workspace_max = g.value("workspace_max", config.generator.workspace_max);
        config.generator.weight_bound = g.value("weight_bound", config.generator.weight_bound);
      }
    }
  } catch (const std::exception& e) {
    std::cerr << "config error: " << e.what() << '\n';
    return 1;
  }
  if (!trace_dir.empty()) config.trace_dir = trace_dir;

  lfc::SessionManager manager(config);

  if (!replay_path.empty()) {
    std::ifstream log(replay_path);
    if (!log) {
      std::cerr << "cannot open " << replay_path << '\n';
      return 1;
    }
    const auto responses = lfc::replay_requests(manager, log);
    int failures = 0;
    for (const auto& r : responses) failures += r.status >= 400 ? 1 : 0;
    if (!dump_trace.empty()) {
      try {
        std::cout << manager.trace_jsonl(dump_trace);
      } catch (const std::exception& e) {
        std::cerr << e.what() << '\n';
        return 1;
      }
    } else {
      std::cout << "replayed " << responses.size() << " requests, " << failures << " errors\n";
    }
    return 0;
  }

  std::ofstream log_file;
  std::mutex log_mutex;
  if (!request_log.empty()) {
    log_file.open(request_log, std::ios::app);
    if (!log_file) {
      std::cerr << "cannot open " << request_log << '\n';
      return 1;
    }
    manager.set_request_observer([&](const lfc::LoggedRequest& r) {
      std::lock_guard lock(log_mutex);
      log_file << lfc::logged_request_to_json(r).dump() << '\n';
      log_file.flush();
    });
  }

  httplib::Server server;
  lfc::mount_api(server, manager);
  if (!static_dir.empty() && !server.set_mount_point("/", static_dir)) {
    std::cerr << "static directory " << static_dir << " does not exist\n";
    return 1;
  }
  g_server = &server;
  std::signal(SIGINT, on_signal);
  std::signal(SIGTERM, on_signal);
  std::cout << "listening on http://" << host << ':' << port << '\n' << std::flush;
  if (!server.listen(host, port)) {
    std::cerr << "failed to listen on " << host << ':' << port << '\n';
    return 1;
  }
  return 0;
}
