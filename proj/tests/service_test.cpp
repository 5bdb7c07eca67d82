#include <gtest/gtest.h>

#include <algorithm>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <thread>

#include "lfc/http_service.hpp"
#include "lfc/service.hpp"
#include "lfc/sim_user.hpp"

namespace lfc {
namespace {

Json create(SessionManager& m, const std::string& body, int expected_status = 201) {
  const ApiResponse r = m.handle("POST", "/sessions", body);
  EXPECT_EQ(r.status, expected_status) << r.body;
  return r.json();
}

Json post(SessionManager& m, const std::string& path, const Json& body, int expected_status = 200) {
  const ApiResponse r = m.handle("POST", path, body.dump());
  EXPECT_EQ(r.status, expected_status) << path << " " << r.body;
  return r.json();
}

Json correction(int t, double x, double y) { return Json{{"t", t}, {"q", {x, y}}}; }

const char* kVelocitySession = R"({"kernel":{"variant":"velocity"},"beta":20,"seed":7,"features":2,"instances":1})";

TEST(ServiceTest, CreateIsDeterministicAndShaped) {
  SessionManager a;
  SessionManager b;
  const Json ja = create(a, kVelocitySession);
  const Json jb = create(b, kVelocitySession);
  EXPECT_EQ(ja["id"], "s1");
  EXPECT_EQ(ja["planned"], jb["planned"]);
  EXPECT_EQ(ja["planned"].size(), 41u);
  EXPECT_EQ(ja["phase"], "awaiting_correction");
  EXPECT_EQ(ja["iteration"], 0);
  EXPECT_EQ(ja["normalized_cost"].get<double>(), 1.0);
  EXPECT_EQ(create(a, kVelocitySession)["id"], "s2");
}

TEST(ServiceTest, CreateErrors) {
  SessionManager m;
  Json e = create(m, R"({"kernel":{"variant":"rbf"},"beta":1,"seed":1})", 400);
  EXPECT_EQ(e["code"], "invalid_argument");
  EXPECT_EQ(e["field"], "sigma");
  e = create(m, R"({"kernel":"velocity","beta":0,"seed":1})", 400);
  EXPECT_EQ(e["field"], "beta");
  e = create(m, R"({"kernel":"velocity","beta":1})", 400);
  EXPECT_EQ(e["field"], "seed");
  e = create(m, R"({"beta":1,"seed":1})", 400);
  EXPECT_EQ(e["field"], "kernel");
  e = create(m, "{not json", 400);
  EXPECT_EQ(e["code"], "malformed_json");
  e = create(m, R"({"kernel":"velocity","beta":1,"seed":1,"features":0})", 400);
  EXPECT_EQ(e["field"], "features");
}

TEST(ServiceTest, HandAuthoredEnvironmentWithoutGroundTruth) {
  SessionManager m;
  const Json env = Json::parse(R"({"start":[0,0],"goal":[10,0],"num_types":1,
    "obstacles":[{"position":[5,0.5],"type_id":0,"radius":1}]})");
  const Json s = create(m, Json{{"kernel", "identity"}, {"beta", 1.0}, {"environment", env}}.dump());
  EXPECT_FALSE(s.contains("normalized_cost"));
  const Json c = post(m, "/sessions/s1/corrections", correction(20, 5, 2));
  EXPECT_FALSE(c.contains("normalized_cost"));
  EXPECT_EQ(c["iteration"], 1);
}

TEST(ServiceTest, KernelsCatalog) {
  SessionManager m;
  const ApiResponse r = m.handle("GET", "/kernels", "");
  ASSERT_EQ(r.status, 200);
  const Json j = r.json();
  ASSERT_EQ(j["kernels"].size(), 3u);
  EXPECT_EQ(j["kernels"][2]["sigma_presets"], Json::parse("[1,3,5]"));
}

TEST(ServiceTest, PreviewIsPure) {
  SessionManager m;
  create(m, kVelocitySession);
  post(m, "/sessions/s1/corrections", correction(20, 5, 7));
  const std::string before_trace = m.trace_jsonl("s1");
  const std::string before_state = m.handle("GET", "/sessions/s1", "").body;
  for (int i = 0; i < 1000; ++i) {
    const int t = 1 + i % 39;
    Json req = correction(t, 0.01 * i, 10.0 - 0.01 * i);
    if (i % 3 == 1) req["kernel"] = Json{{"variant", "rbf"}, {"sigma", 1 + i % 5}};
    if (i % 3 == 2) req["kernel"] = "identity";
    post(m, "/sessions/s1/preview", req);
  }
  EXPECT_EQ(fingerprint(m.trace_jsonl("s1")), fingerprint(before_trace));
  EXPECT_EQ(m.handle("GET", "/sessions/s1", "").body, before_state);
}

TEST(ServiceTest, PreviewShapes) {
  SessionManager m;
  const Json s = create(m, kVelocitySession);
  const Trajectory planned = trajectory_from_json(s["planned"]);
  // Moving a waypoint onto itself changes nothing.
  const Json same = post(m, "/sessions/s1/preview", Json{{"t", 12}, {"q", vector_to_json(planned.waypoint(12))}});
  EXPECT_EQ(trajectory_from_json(same["waypoints"]), planned);
  // Identity moves exactly one waypoint.
  Json req = correction(12, 3.0, 9.0);
  req["kernel"] = "identity";
  const Trajectory moved = trajectory_from_json(post(m, "/sessions/s1/preview", req)["waypoints"]);
  int changed = 0;
  for (int t = 0; t <= 40; ++t) changed += moved.waypoint(t) == planned.waypoint(t) ? 0 : 1;
  EXPECT_EQ(changed, 1);
  // Errors.
  EXPECT_EQ(post(m, "/sessions/s1/preview", correction(0, 1, 1), 400)["field"], "t");
  EXPECT_EQ(post(m, "/sessions/s1/preview", correction(40, 1, 1), 400)["field"], "t");
  EXPECT_EQ(post(m, "/sessions/s1/preview", Json{{"t", 3}, {"q", {1, 2, 3}}}, 400)["field"], "q");
  EXPECT_EQ(post(m, "/sessions/s9/preview", correction(3, 1, 1), 404)["code"], "unknown_session");
}

TEST(ServiceTest, PreviewThenCommitIsBitExact) {
  SessionManager m;
  create(m, kVelocitySession);
  const Json req = correction(17, 4.25, 6.5);
  const Json preview = post(m, "/sessions/s1/preview", req);
  const Json commit = post(m, "/sessions/s1/corrections", req);
  EXPECT_EQ(preview["waypoints"].dump(), commit["corrected"].dump());
}

TEST(ServiceTest, CommitAtPlannedWaypointIsFixedPoint) {
  SessionManager m;
  create(m, kVelocitySession);
  const Json c1 = post(m, "/sessions/s1/corrections", correction(20, 5, 8));
  const Trajectory planned = trajectory_from_json(c1["planned"]);
  const Json c2 = post(m, "/sessions/s1/corrections", Json{{"t", 9}, {"q", vector_to_json(planned.waypoint(9))}});
  EXPECT_EQ(c2["weights"], c1["weights"]);
  EXPECT_EQ(c2["planned"], c1["planned"]);
}

TEST(ServiceTest, CommitMatchesSimulatedPipeline) {
  // One obstacle; the simulated user's correction is sent through the API
  // and through the offline loop, and both must agree.
  SessionManager m;
  const Json s = create(m, R"({"kernel":"velocity","beta":20,"seed":3,"features":1,"instances":1})");
  const Environment env = environment_from_json(s["environment"]);
  const Reference ref = make_reference(env, PlannerConfig{});
  SimulatedUser user(ref.optimal, SimUserConfig{});
  const auto c = user(trajectory_from_json(s["planned"]));
  ASSERT_TRUE(c);
  const Json commit = post(m, "/sessions/s1/corrections", Json{{"t", c->t}, {"q", vector_to_json(c->q)}});

  SimulatedUser offline_user(ref.optimal, SimUserConfig{});
  const LearningTrace trace = run_loop(env, make_kernel(KernelVariant::Velocity, 40), 20.0, 2,
                                       [&](const Trajectory& p) { return offline_user(p); }, {}, &ref);
  ASSERT_EQ(trace.records.size(), 2u);
  EXPECT_EQ(commit["normalized_cost"]["planned"].get<double>(), *trace.records[1].normalized_cost);
  EXPECT_EQ(trajectory_from_json(commit["planned"]), trace.records[1].planned);
  EXPECT_LT(commit["normalized_cost"]["planned"].get<double>(),
            commit["normalized_cost"]["previous_planned"].get<double>());
}

TEST(ServiceTest, TraceAndFinish) {
  const auto dir = std::filesystem::temp_directory_path() / "lfc_service_traces";
  std::filesystem::remove_all(dir);
  ServiceConfig cfg;
  cfg.trace_dir = dir;
  SessionManager m(cfg);
  create(m, kVelocitySession);
  ApiResponse r = m.handle("GET", "/sessions/s1/trace", "");
  EXPECT_EQ(r.status, 200);
  EXPECT_EQ(r.content_type, "application/x-ndjson");
  EXPECT_EQ(r.body, "");
  for (int k = 0; k < 3; ++k) post(m, "/sessions/s1/corrections", correction(10 + k, 5, 6 + k));
  r = m.handle("GET", "/sessions/s1/trace", "");
  EXPECT_EQ(std::count(r.body.begin(), r.body.end(), '\n'), 3);

  const Json f1 = post(m, "/sessions/s1/finish", Json::object());
  const Json f2 = post(m, "/sessions/s1/finish", Json::object());
  EXPECT_EQ(f1, f2);
  EXPECT_EQ(f1["phase"], "done");
  EXPECT_EQ(f1["iterations"], 3);
  EXPECT_EQ(post(m, "/sessions/s1/corrections", correction(5, 1, 1), 409)["code"], "phase_violation");
  EXPECT_EQ(post(m, "/sessions/s1/preview", correction(5, 1, 1), 409)["code"], "phase_violation");

  std::ifstream dumped(dir / "s1.jsonl");
  std::stringstream ss;
  ss << dumped.rdbuf();
  EXPECT_EQ(ss.str(), r.body);
}

TEST(ServiceTest, RoutingErrors) {
  SessionManager m;
  EXPECT_EQ(m.handle("GET", "/nope", "").status, 404);
  EXPECT_EQ(m.handle("DELETE", "/sessions", "").status, 405);
  EXPECT_EQ(m.handle("GET", "/sessions/s1", "").status, 404);
  EXPECT_EQ(m.handle("GET", "/kernels?x=1", "").status, 200);
}

TEST(ServiceTest, FailedCommitLeavesSessionUntouched) {
  SessionManager m;
  create(m, kVelocitySession);
  const std::string before = m.handle("GET", "/sessions/s1", "").body;
  post(m, "/sessions/s1/corrections", correction(0, 1, 1), 400);
  post(m, "/sessions/s1/corrections", Json{{"t", 5}}, 400);
  EXPECT_EQ(m.handle("GET", "/sessions/s1", "").body, before);
  EXPECT_EQ(m.trace_jsonl("s1"), "");
}

TEST(ServiceTest, ReplayReproducesTrace) {
  std::ostringstream log;
  SessionManager live;
  live.set_request_observer([&](const LoggedRequest& r) { log << logged_request_to_json(r).dump() << '\n'; });
  create(live, kVelocitySession);
  create(live, R"({"kernel":{"variant":"rbf","sigma":3},"beta":50,"seed":11,"features":5,"instances":2})");
  for (int k = 0; k < 5; ++k) {
    post(live, "/sessions/s1/preview", correction(5 + k, 2, 2));
    post(live, "/sessions/s1/corrections", correction(5 + 6 * k, 1.0 + k, 7.0 - k));
    post(live, "/sessions/s2/corrections", correction(30 - k, 8.0 - k, 3.0 + k));
  }
  post(live, "/sessions/s1/finish", Json::object());

  SessionManager fresh;
  std::istringstream in(log.str());
  const auto responses = replay_requests(fresh, in);
  EXPECT_EQ(responses.size(), 18u);
  for (const char* id : {"s1", "s2"}) {
    EXPECT_EQ(fresh.trace_jsonl(id), live.trace_jsonl(id)) << id;
    EXPECT_FALSE(live.trace_jsonl(id).empty());
  }
}

TEST(ServiceTest, ConcurrentSessionsAndPreviews) {
  SessionManager m;
  create(m, kVelocitySession);
  create(m, kVelocitySession);
  std::vector<std::thread> threads;
  for (int i = 0; i < 4; ++i) {
    threads.emplace_back([&, i] {
      for (int k = 0; k < 50; ++k) m.handle("POST", "/sessions/s1/preview", correction(1 + (k + i) % 39, 3, 3).dump());
    });
  }
  threads.emplace_back([&] {
    for (int k = 0; k < 4; ++k) m.handle("POST", "/sessions/s1/corrections", correction(10 + k, 4, 8).dump());
  });
  threads.emplace_back([&] {
    for (int k = 0; k < 4; ++k) m.handle("POST", "/sessions/s2/corrections", correction(10 + k, 4, 8).dump());
  });
  for (auto& t : threads) t.join();
  // Both sessions received the same corrections, so their traces agree.
  EXPECT_EQ(m.trace_jsonl("s1"), m.trace_jsonl("s2"));
  const std::string trace = m.trace_jsonl("s1");
  EXPECT_EQ(std::count(trace.begin(), trace.end(), '\n'), 4);
}

TEST(HttpServiceTest, RoundTripOverLoopback) {
  SessionManager m;
  httplib::Server server;
  mount_api(server, m);
  const int port = server.bind_to_any_port("127.0.0.1");
  ASSERT_GT(port, 0);
  std::thread worker([&] { server.listen_after_bind(); });
  server.wait_until_ready();

  httplib::Client client("127.0.0.1", port);
  auto created = client.Post("/sessions", kVelocitySession, "application/json");
  ASSERT_TRUE(created);
  EXPECT_EQ(created->status, 201);
  const std::string id = Json::parse(created->body)["id"];
  auto preview = client.Post("/sessions/" + id + "/preview", correction(20, 5, 8).dump(), "application/json");
  ASSERT_TRUE(preview);
  EXPECT_EQ(preview->status, 200);
  auto commit = client.Post("/sessions/" + id + "/corrections", correction(20, 5, 8).dump(), "application/json");
  ASSERT_TRUE(commit);
  EXPECT_EQ(Json::parse(preview->body)["waypoints"], Json::parse(commit->body)["corrected"]);
  auto trace = client.Get("/sessions/" + id + "/trace");
  ASSERT_TRUE(trace);
  EXPECT_EQ(trace->body, m.trace_jsonl(id));
  auto bad = client.Post("/sessions/" + id + "/preview", correction(0, 5, 8).dump(), "application/json");
  ASSERT_TRUE(bad);
  EXPECT_EQ(bad->status, 400);
  EXPECT_EQ(Json::parse(bad->body)["field"], "t");
  auto kernels = client.Get("/kernels");
  ASSERT_TRUE(kernels);
  EXPECT_EQ(kernels->status, 200);

  server.stop();
  worker.join();
}

}  // namespace
}  // namespace lfc
