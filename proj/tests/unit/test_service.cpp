#include <gtest/gtest.h>

#include <atomic>
#include <future>
#include <set>
#include <thread>

#include "latcompass/builtin_generator.hpp"
#include "latcompass/png_codec.hpp"
#include "latcompass/remote_generator.hpp"
#include "latcompass/wire_server.hpp"
#include "support/api_fuzz.hpp"
#include "support/live_service.hpp"

namespace latcompass {
namespace {

using testing::LiveService;

json sorted_session(LiveService& svc, int category = 0, const std::string& space = "z") {
  auto created = svc.post("/api/sessions", {{"category", category}, {"space", space}});
  EXPECT_EQ(created.status, 201) << created.raw;
  const std::string sid = created.body["session_id"];
  auto pool = svc.post("/api/sessions/" + sid + "/pool", {{"count", 40}, {"seed", 500}});
  EXPECT_EQ(pool.status, 200) << pool.raw;
  int left = 0, right = 0;
  for (const auto& s : pool.body["samples"]) {
    const bool pos = s["z"][0].get<double>() > 0;
    if ((pos ? right : left) >= 7) continue;
    auto r = svc.post("/api/sessions/" + sid + "/assignments", {{"image_id", s["image_id"]}, {"side", pos ? "right" : "left"}});
    EXPECT_EQ(r.status, 200) << r.raw;
    (pos ? right : left)++;
  }
  EXPECT_EQ(left, 7);
  EXPECT_EQ(right, 7);
  return svc.get("/api/sessions/" + sid).body;
}

TEST(ServiceConfig, Validation) {
  ServiceConfig ok;
  EXPECT_NO_THROW(ok.validate());
  auto bad = [](auto mutate) {
    ServiceConfig c;
    mutate(c);
    try {
      c.validate();
    } catch (const Error& e) {
      return e.code() == ErrorCode::InvalidArgument;
    }
    return false;
  };
  EXPECT_TRUE(bad([](ServiceConfig& c) { c.port = 70000; }));
  EXPECT_TRUE(bad([](ServiceConfig& c) { c.truncation_theta = 0; }));
  EXPECT_TRUE(bad([](ServiceConfig& c) { c.svm_c = -1; }));
  EXPECT_TRUE(bad([](ServiceConfig& c) { c.step_multiplier = std::nan(""); }));
  EXPECT_TRUE(bad([](ServiceConfig& c) { c.min_per_class = 0; }));
  EXPECT_TRUE(bad([](ServiceConfig& c) { c.max_inflight_backend_calls = 0; }));
  EXPECT_TRUE(bad([](ServiceConfig& c) { c.session_ttl = std::chrono::seconds(0); }));
  EXPECT_TRUE(bad([](ServiceConfig& c) { c.backend = ""; }));
}

TEST(ServiceConfig, StatusMapping) {
  EXPECT_EQ(http_status(ErrorCode::UnknownSession), 404);
  EXPECT_EQ(http_status(ErrorCode::UnknownRecord), 404);
  EXPECT_EQ(http_status(ErrorCode::UnknownImage), 404);
  EXPECT_EQ(http_status(ErrorCode::ClassTooSmall), 400);
  EXPECT_EQ(http_status(ErrorCode::CalibrationUnderfilled), 400);
  EXPECT_EQ(http_status(ErrorCode::ClassImbalance), 400);
  EXPECT_EQ(http_status(ErrorCode::EmptyLabel), 400);
  EXPECT_EQ(http_status(ErrorCode::SingleClass), 422);
  EXPECT_EQ(http_status(ErrorCode::IterationLimit), 422);
  EXPECT_EQ(http_status(ErrorCode::BackendUnavailable), 502);
  EXPECT_EQ(http_status(ErrorCode::StorageFailure), 500);
}

TEST(ServiceConfig, MakeBackend) {
  ServiceConfig c;
  EXPECT_NE(dynamic_cast<const BuiltinGenerator*>(make_backend(c).get()), nullptr);
  c.backend = "ftp://example";
  EXPECT_THROW(make_backend(c), Error);
}

TEST(Service, Info) {
  LiveService svc;
  auto r = svc.get("/api/info");
  ASSERT_EQ(r.status, 200);
  EXPECT_EQ(r.body["generator"]["latent_dim"], 8);
  EXPECT_EQ(r.body["initial_steps"], 3);
  EXPECT_EQ(r.body["policy"]["min_total"], 14);
  EXPECT_EQ(r.body["truncation_theta"], 2.0);
  EXPECT_TRUE(r.body["fingerprint"].is_string());
}

TEST(Service, FullFlow) {
  LiveService svc;
  const json session = sorted_session(svc);
  const std::string sid = session["session_id"];
  EXPECT_EQ(session["counts"]["total"], 14);

  auto cal = svc.post("/api/sessions/" + sid + "/calibrate", json::object());
  ASSERT_EQ(cal.status, 201) << cal.raw;
  const std::string cid = cal.body["compass_id"];
  EXPECT_NEAR(cal.body["direction_norm_check"].get<double>(), 1.0, 1e-9);
  EXPECT_GT(cal.body["direction"][0].get<double>(), 0.7);
  EXPECT_EQ(cal.body["source_session"], sid);
  EXPECT_TRUE(cal.body["separable"].get<bool>());
  const double step = cal.body["step_unit"];

  const json start = session["pool"][20];
  auto traj = svc.post("/api/compasses/" + cid + "/trajectories", {{"start_image_id", start["image_id"]}});
  ASSERT_EQ(traj.status, 201) << traj.raw;
  const std::string tid = traj.body["trajectory_id"];
  ASSERT_EQ(traj.body["steps"].size(), 7u);
  EXPECT_EQ(traj.body["start_image_id"], start["image_id"]);
  for (const auto& s : traj.body["steps"]) {
    EXPECT_EQ(s["lambda"].get<double>(), s["step_index"].get<int>() * step);
    EXPECT_EQ(s["rendered_latent"].size(), 8u);
  }
  const json center = traj.body["steps"][3];
  ASSERT_EQ(center["step_index"], 0);
  EXPECT_EQ(svc.get(center["url"]).raw, svc.get(start["url"]).raw);

  auto fwd = svc.post("/api/trajectories/" + tid + "/extend", {{"end", "forward"}});
  ASSERT_EQ(fwd.status, 200) << fwd.raw;
  EXPECT_EQ(fwd.body["step"]["step_index"], 4);
  EXPECT_EQ(fwd.body["max_index"], 4);
  auto back = svc.post("/api/trajectories/" + tid + "/extend", {{"end", "backward"}});
  EXPECT_EQ(back.body["step"]["step_index"], -4);
  EXPECT_EQ(back.body["min_index"], -4);
  auto fetched = svc.get("/api/trajectories/" + tid);
  EXPECT_EQ(fetched.body["steps"].size(), 9u);
  EXPECT_EQ(svc.get("/api/compasses/" + cid + "/trajectories").body["trajectories"].size(), 1u);

  auto saved = svc.post("/api/compasses/" + cid + "/save", {{"label", "  fullness  "}});
  ASSERT_EQ(saved.status, 201) << saved.raw;
  EXPECT_EQ(saved.body["label"], "fullness");
  EXPECT_EQ(saved.body["moderation_status"], "pending");
  const std::string rid = saved.body["id"];
  EXPECT_TRUE(svc.get("/api/directions").body["directions"].empty());

  auto approved = svc.post("/api/directions/" + rid + "/moderation", {{"status", "approved"}});
  ASSERT_EQ(approved.status, 200);
  auto listed = svc.get("/api/directions?status=approved&space=z");
  ASSERT_EQ(listed.body["directions"].size(), 1u);
  EXPECT_EQ(listed.body["directions"][0]["id"], rid);
  EXPECT_TRUE(svc.get("/api/directions?space=layer:1").body["directions"].empty());

  auto loaded = svc.post("/api/directions/" + rid + "/load", json::object());
  ASSERT_EQ(loaded.status, 201) << loaded.raw;
  EXPECT_EQ(loaded.body["direction"], cal.body["direction"]);
  EXPECT_EQ(loaded.body["step_unit"], cal.body["step_unit"]);
  EXPECT_FALSE(loaded.body["fingerprint_mismatch"].get<bool>());
  const std::string lid = loaded.body["compass_id"];
  EXPECT_NE(lid, cid);

  auto by_seed = svc.post("/api/compasses/" + lid + "/trajectories", {{"seed", 77}, {"category", 2}});
  ASSERT_EQ(by_seed.status, 201) << by_seed.raw;
  EXPECT_EQ(by_seed.body["category"], 2);
  const auto sample = BuiltinGenerator().sample(77, 2);
  EXPECT_EQ(svc.get(by_seed.body["steps"][3]["url"]).raw, [&] {
    const auto png = encode_png(sample.pixels);
    return std::string(png.begin(), png.end());
  }());
}

TEST(Service, DetailFlow) {
  LiveService svc;
  const json session = sorted_session(svc, 1, "layer:1");
  auto cal = svc.post("/api/sessions/" + session["session_id"].get<std::string>() + "/calibrate", json::object());
  ASSERT_EQ(cal.status, 201) << cal.raw;
  EXPECT_EQ(cal.body["space"], "layer:1");
  EXPECT_EQ(cal.body["direction"].size(), 64u);
  auto traj = svc.post("/api/compasses/" + cal.body["compass_id"].get<std::string>() + "/trajectories",
                       {{"start_image_id", session["pool"][0]["image_id"]}});
  ASSERT_EQ(traj.status, 201) << traj.raw;
  EXPECT_FALSE(traj.body["steps"][0].contains("rendered_latent"));
}

TEST(Service, ErrorReplies) {
  LiveService svc;
  auto expect = [](const LiveService::Reply& r, int status, const std::string& code) {
    EXPECT_EQ(r.status, status) << r.raw;
    EXPECT_EQ(r.body.value("error_code", ""), code) << r.raw;
    EXPECT_TRUE(r.body.contains("message"));
  };
  expect(svc.get("/api/sessions/nope"), 404, "UnknownSession");
  expect(svc.get("/api/compasses/nope"), 404, "UnknownCompass");
  expect(svc.get("/api/trajectories/nope"), 404, "UnknownTrajectory");
  expect(svc.get("/api/images/nope"), 404, "UnknownImage");
  expect(svc.post("/api/directions/nope/load", json::object()), 404, "UnknownRecord");
  expect(svc.get("/api/nowhere"), 404, "NotFound");
  expect(svc.post_raw("/api/sessions", "{not json"), 400, "InvalidArgument");
  expect(svc.post_raw("/api/sessions", "[1]"), 400, "InvalidArgument");
  expect(svc.post("/api/sessions", {{"category", 9}, {"space", "z"}}), 400, "UnknownCategory");
  expect(svc.post("/api/sessions", {{"category", 0}, {"space", "layer:9"}}), 400, "UnknownLayer");
  expect(svc.post("/api/sessions", {{"category", 0}, {"space", "w"}}), 400, "InvalidArgument");
  expect(svc.get("/api/directions?status=pending"), 400, "InvalidArgument");

  auto created = svc.post("/api/sessions", {{"category", 0}, {"space", "z"}});
  const std::string sid = created.body["session_id"];
  expect(svc.post("/api/sessions/" + sid + "/pool", {{"count", 0}}), 400, "InvalidArgument");
  expect(svc.post("/api/sessions/" + sid + "/pool", {{"count", 257}}), 400, "InvalidArgument");
  expect(svc.post("/api/sessions/" + sid + "/pool", {{"count", "ten"}}), 400, "InvalidArgument");
  expect(svc.post("/api/sessions/" + sid + "/assignments", {{"image_id", "x"}, {"side", "left"}}), 404, "UnknownImage");
  expect(svc.post("/api/sessions/" + sid + "/calibrate", json::object()), 400, "ClassTooSmall");

  const json session = sorted_session(svc);
  const std::string full = session["session_id"];
  auto cal = svc.post("/api/sessions/" + full + "/calibrate", json::object());
  const std::string cid = cal.body["compass_id"];
  expect(svc.post("/api/compasses/" + cid + "/save", {{"label", "   "}}), 400, "EmptyLabel");
  expect(svc.post("/api/compasses/" + cid + "/save", {{"label", std::string(201, 'a')}}), 400, "LabelTooLong");
  expect(svc.post("/api/compasses/" + cid + "/trajectories", json::object()), 400, "InvalidArgument");
  expect(svc.post("/api/compasses/" + cid + "/trajectories", {{"seed", 1}, {"start_image_id", "x"}}), 400,
         "InvalidArgument");
  expect(svc.post("/api/compasses/" + cid + "/trajectories", {{"seed", 1}, {"category", 7}}), 400, "UnknownCategory");
  auto traj = svc.post("/api/compasses/" + cid + "/trajectories", {{"seed", 1}});
  expect(svc.post("/api/trajectories/" + traj.body["trajectory_id"].get<std::string>() + "/extend", {{"end", "up"}}),
         400, "InvalidArgument");
}

TEST(Service, PolicyErrorsOverHttp) {
  LiveService svc;
  auto created = svc.post("/api/sessions", {{"category", 0}, {"space", "z"}});
  const std::string sid = created.body["session_id"];
  auto pool = svc.post("/api/sessions/" + sid + "/pool", {{"count", 60}, {"seed", 9}});
  std::vector<std::string> pos, neg;
  for (const auto& s : pool.body["samples"]) (s["z"][0].get<double>() > 0 ? pos : neg).push_back(s["image_id"]);
  ASSERT_GE(pos.size(), 12u);
  ASSERT_GE(neg.size(), 12u);
  auto assign = [&](const std::string& id, const char* side) {
    ASSERT_EQ(svc.post("/api/sessions/" + sid + "/assignments", {{"image_id", id}, {"side", side}}).status, 200);
  };
  auto calibrate_code = [&] {
    return svc.post("/api/sessions/" + sid + "/calibrate", json::object()).body.value("error_code", "");
  };
  for (int i = 0; i < 6; ++i) assign(pos[static_cast<std::size_t>(i)], "right");
  for (int i = 0; i < 6; ++i) assign(neg[static_cast<std::size_t>(i)], "left");
  EXPECT_EQ(calibrate_code(), "CalibrationUnderfilled");
  for (int i = 6; i < 12; ++i) assign(pos[static_cast<std::size_t>(i)], "right");
  assign(neg[5], "unassigned");
  EXPECT_EQ(calibrate_code(), "ClassImbalance");
  for (int i = 0; i < 12; ++i) assign(neg[static_cast<std::size_t>(i)], "left");
  for (int i = 0; i < 12; ++i) assign(pos[static_cast<std::size_t>(i)], i < 4 ? "right" : "unassigned");
  EXPECT_EQ(calibrate_code(), "ClassTooSmall");
}

TEST(Service, PoolSeedsAdvance) {
  LiveService svc;
  const std::string sid = svc.post("/api/sessions", {{"category", 0}, {"space", "z"}}).body["session_id"];
  auto a = svc.post("/api/sessions/" + sid + "/pool", {{"count", 3}});
  auto b = svc.post("/api/sessions/" + sid + "/pool", {{"count", 3}});
  std::set<std::int64_t> seeds;
  for (const auto* r : {&a, &b}) {
    for (const auto& s : r->body["samples"]) seeds.insert(s["seed"].get<std::int64_t>());
  }
  EXPECT_EQ(seeds.size(), 6u);
  EXPECT_EQ(*seeds.rbegin() - *seeds.begin(), 5);
  EXPECT_EQ(svc.get("/api/sessions/" + sid).body["pool"].size(), 6u);
}

TEST(Service, UnreachableBackendFailsConstruction) {
  int port = 0;
  {
    GeneratorWireServer probe(std::make_shared<BuiltinGenerator>());
    port = probe.start("127.0.0.1", 0);
  }
  ServiceConfig cfg;
  testing::TempDir dir;
  cfg.data_dir = dir.path();
  cfg.backend = "http://127.0.0.1:" + std::to_string(port);
  cfg.backend_timeout = std::chrono::seconds(2);
  try {
    CompassService svc(cfg, make_backend(cfg));
    FAIL() << "expected BackendUnavailable";
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::BackendUnavailable);
  }
}

TEST(Service, BackendLossIs502) {
  auto wire = std::make_unique<GeneratorWireServer>(std::make_shared<BuiltinGenerator>());
  const int port = wire->start("127.0.0.1", 0);
  RemoteGeneratorOptions opts;
  opts.timeout = std::chrono::milliseconds(2000);
  LiveService svc({}, std::make_shared<RemoteGenerator>("http://127.0.0.1:" + std::to_string(port), opts));
  const std::string sid = svc.post("/api/sessions", {{"category", 0}, {"space", "z"}}).body["session_id"];
  ASSERT_EQ(svc.post("/api/sessions/" + sid + "/pool", {{"count", 2}}).status, 200);
  wire->stop();
  wire.reset();
  auto r = svc.post("/api/sessions/" + sid + "/pool", {{"count", 2}});
  EXPECT_EQ(r.status, 502) << r.raw;
  EXPECT_EQ(r.body["error_code"], "BackendUnavailable");
  EXPECT_EQ(svc.get("/api/sessions/" + sid).body["pool"].size(), 2u);
}

TEST(Service, StorageFailureIs500) {
  LiveService svc;
  const json session = sorted_session(svc);
  auto cal = svc.post("/api/sessions/" + session["session_id"].get<std::string>() + "/calibrate", json::object());
  std::filesystem::remove_all(svc.dir.path() / "data");
  std::ofstream(svc.dir.path() / "data") << "not a directory";
  auto r = svc.post("/api/compasses/" + cal.body["compass_id"].get<std::string>() + "/save", {{"label", "x"}});
  EXPECT_EQ(r.status, 500) << r.raw;
  EXPECT_EQ(r.body["error_code"], "StorageFailure");
}

TEST(Service, ConcurrentSessionsStayIsolated) {
  LiveService svc;
  std::vector<std::future<json>> futures;
  for (int i = 0; i < 6; ++i) {
    futures.push_back(std::async(std::launch::async, [&svc, i] {
      httplib::Client client("127.0.0.1", svc.port);
      client.set_read_timeout(30, 0);
      auto call = [&](const std::string& path, const json& body) {
        return LiveService::wrap(client.Post(path, body.dump(), "application/json"));
      };
      const std::string sid = call("/api/sessions", {{"category", i % 4}, {"space", "z"}}).body["session_id"];
      for (int k = 0; k < 5; ++k) call("/api/sessions/" + sid + "/pool", {{"count", 4}});
      return LiveService::wrap(client.Get("/api/sessions/" + sid)).body;
    }));
  }
  std::set<std::string> ids;
  for (auto& f : futures) {
    const json s = f.get();
    EXPECT_EQ(s["pool"].size(), 20u);
    for (const auto& p : s["pool"]) {
      EXPECT_EQ(p["category"], s["category"]);
      ids.insert(p["image_id"].get<std::string>());
    }
  }
  EXPECT_EQ(ids.size(), 120u);
}

TEST(Service, ConcurrentAssignmentsOnOneSession) {
  LiveService svc;
  const std::string sid = svc.post("/api/sessions", {{"category", 0}, {"space", "z"}}).body["session_id"];
  auto pool = svc.post("/api/sessions/" + sid + "/pool", {{"count", 32}, {"seed", 3}});
  std::vector<std::string> ids;
  for (const auto& s : pool.body["samples"]) ids.push_back(s["image_id"]);
  std::vector<std::thread> threads;
  for (int t = 0; t < 4; ++t) {
    threads.emplace_back([&, t] {
      httplib::Client client("127.0.0.1", svc.port);
      for (std::size_t i = static_cast<std::size_t>(t); i < ids.size(); i += 4) {
        client.Post("/api/sessions/" + sid + "/assignments",
                    json{{"image_id", ids[i]}, {"side", i % 2 ? "left" : "right"}}.dump(), "application/json");
      }
    });
  }
  for (auto& th : threads) th.join();
  auto s = svc.get("/api/sessions/" + sid);
  EXPECT_EQ(s.body["counts"]["left"], 16);
  EXPECT_EQ(s.body["counts"]["right"], 16);
}

TEST(Service, IdleEntriesExpire) {
  ServiceConfig cfg;
  cfg.session_ttl = std::chrono::seconds(60);
  LiveService svc(cfg);
  const json session = sorted_session(svc);
  const std::string sid = session["session_id"];
  auto cal = svc.post("/api/sessions/" + sid + "/calibrate", json::object());
  const std::string cid = cal.body["compass_id"];
  const std::string img = session["pool"][0]["image_id"];
  EXPECT_EQ(svc.service->session_count(), 1u);

  svc.service->expire_idle(std::chrono::steady_clock::now() + std::chrono::seconds(30));
  EXPECT_EQ(svc.get("/api/sessions/" + sid).status, 200);

  svc.service->expire_idle(std::chrono::steady_clock::now() + std::chrono::seconds(61));
  EXPECT_EQ(svc.service->session_count(), 0u);
  EXPECT_EQ(svc.get("/api/sessions/" + sid).status, 404);
  EXPECT_EQ(svc.get("/api/compasses/" + cid).status, 404);
  EXPECT_EQ(svc.get("/api/images/" + img).status, 404);
}

TEST(Service, FuzzedSequencesKeepInvariants) {
  LiveService svc;
  testing::ApiFuzzer fuzzer(svc, 20261016);
  const auto outcome = fuzzer.run(60);
  EXPECT_EQ(outcome.sequences, 60);
  EXPECT_GT(outcome.statuses.count(201), 0u);
  EXPECT_GT(outcome.statuses.count(404), 0u);
  for (const auto& v : outcome.violations) ADD_FAILURE() << v;
}

}  // namespace
}  // namespace latcompass
