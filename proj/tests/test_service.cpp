#include <gtest/gtest.h>

#include <spdlog/sinks/ostream_sink.h>

#include <sstream>
#include <thread>

#include "mcmine/mock_backend.hpp"
#include "mcmine/service.hpp"
#include "support.hpp"

using namespace mcmine;
using namespace mcmine::testing;

namespace {

Json analyze_body(const std::string& code = kFactorialStudentCode, const std::string& model = "mock") {
  return Json{{"problem", factorial_problem().description}, {"code", code}, {"model", model}};
}

Json bag_body(std::vector<std::string> codes, const std::string& mode = "") {
  Json pairs = Json::array();
  for (const auto& c : codes) pairs.push_back({{"problem", "P"}, {"code", c}});
  Json j{{"pairs", pairs}, {"model", "mock"}};
  if (!mode.empty()) j["mode"] = mode;
  return j;
}

FakeClient range_client() {
  return FakeClient([](const ModelConfig&, const Conversation& c) {
    const auto text = conversation_text(c);
    if (text.find("range(n)") != std::string::npos) {
      return Completion{found_reply("Student believes range(n) starts at 1."), std::string("trace"), std::nullopt};
    }
    return Completion{none_reply(), std::nullopt, std::nullopt};
  });
}

/// Runs the service on an ephemeral local port for the lifetime of the object.
class LiveServer {
 public:
  LiveServer(ChatClient& client, ServiceOptions opts = {})
      : service_(ModelRegistry::builtin(), client, templates_, std::move(opts)) {
    port_ = service_.bind_any_port();
    thread_ = std::thread([this] { service_.listen_after_bind(); });
    service_.server().wait_until_ready();
  }
  ~LiveServer() {
    service_.stop();
    thread_.join();
  }
  httplib::Client client() const {
    httplib::Client c("127.0.0.1", port_);
    c.set_read_timeout(5, 0);
    return c;
  }

 private:
  TemplateLibrary templates_;
  Service service_;
  int port_ = 0;
  std::thread thread_;
};

}  // namespace

TEST(Service, HealthAndModels) {
  auto client = range_client();
  TemplateLibrary lib;
  Service s(ModelRegistry::builtin(), client, lib);
  EXPECT_EQ(s.health().body, Json({{"ok", true}}));
  const auto m = s.models().body.at("models");
  ASSERT_FALSE(m.empty());
  bool saw_sonnet = false;
  for (const auto& e : m) {
    for (const char* k : {"id", "provider", "model_name", "reasoning", "supports_reasoning"}) {
      EXPECT_TRUE(e.contains(k)) << k;
    }
    if (e.at("id") == "sonnet-4.5") {
      saw_sonnet = true;
      EXPECT_EQ(e.at("supports_reasoning"), true);
      EXPECT_EQ(e.at("reasoning"), false);
    }
  }
  EXPECT_TRUE(saw_sonnet);
}

TEST(Service, AnalyzeReturnsPredictionAndTrace) {
  auto client = range_client();
  TemplateLibrary lib;
  Service s(ModelRegistry::builtin(), client, lib, {"*", true});
  const auto r = s.analyze(analyze_body().dump());
  ASSERT_EQ(r.status, 200) << r.body.dump();
  EXPECT_EQ(r.body.at("prediction").at("description"), "Student believes range(n) starts at 1.");
  EXPECT_EQ(r.body.at("reasoning_trace"), "trace");
  EXPECT_EQ(r.body.at("elapsed_ms"), 0);
}

TEST(Service, ReasoningFlagSelectsVariant) {
  std::vector<std::string> ids;
  FakeClient client([&](const ModelConfig& cfg, const Conversation&) {
    ids.push_back(cfg.id);
    return Completion{none_reply(), std::nullopt, std::nullopt};
  });
  TemplateLibrary lib;
  Service s(ModelRegistry::builtin(), client, lib);
  auto body = analyze_body("x = 1\n", "sonnet-4.5");
  s.analyze(body.dump());
  body["reasoning"] = true;
  s.analyze(body.dump());
  EXPECT_EQ(ids, (std::vector<std::string>{"sonnet-4.5", "sonnet-4.5-reasoning"}));
}

TEST(Service, BadRequestsAre400) {
  auto client = range_client();
  TemplateLibrary lib;
  Service s(ModelRegistry::builtin(), client, lib);
  EXPECT_EQ(s.analyze("not json").status, 400);
  EXPECT_EQ(s.analyze("[]").status, 400);
  EXPECT_EQ(s.analyze(Json{{"problem", "p"}, {"model", "mock"}}.dump()).status, 400);
  EXPECT_EQ(s.analyze(analyze_body("   ").dump()).status, 400);
  EXPECT_EQ(s.analyze(analyze_body("x", "no-such-model").dump()).status, 400);
  auto b = analyze_body();
  b["reasoning"] = "yes";
  EXPECT_EQ(s.analyze(b.dump()).status, 400);
  EXPECT_EQ(s.analyze_bag(Json{{"pairs", Json::array()}, {"model", "mock"}}.dump()).status, 400);
  EXPECT_EQ(s.analyze_bag(bag_body({"x"}, "both").dump()).status, 400);
  EXPECT_EQ(client.calls(), 0u);
}

TEST(Service, ProviderErrorsAreSanitized) {
  TemplateLibrary lib;
  const std::string secret = "SECRET-PROVIDER-BODY";
  const std::vector<std::pair<std::function<void()>, int>> cases = {
      {[&] { throw Unauthorized(secret); }, 401},
      {[&] { throw RateLimited(secret); }, 502},
      {[&] { throw ProviderRefusal(secret); }, 502},
      {[&] { throw GatewayError(secret); }, 502},
      {[&] { throw std::runtime_error(secret); }, 500},
  };
  for (const auto& [thrower, status] : cases) {
    FakeClient client([&](const ModelConfig&, const Conversation&) -> Completion {
      thrower();
      return {};
    });
    Service s(ModelRegistry::builtin(), client, lib);
    const auto r = s.analyze(analyze_body().dump());
    EXPECT_EQ(r.status, status);
    EXPECT_EQ(r.body.dump().find(secret), std::string::npos) << r.body.dump();
    EXPECT_TRUE(r.body.contains("error"));
  }
  auto garbage = FakeClient::text([&](const std::string&) { return secret; });
  Service s(ModelRegistry::builtin(), garbage, lib);
  const auto r = s.analyze(analyze_body().dump());
  EXPECT_EQ(r.status, 502);
  EXPECT_EQ(r.body.dump().find(secret), std::string::npos);
}

TEST(Service, AnalyzeBagSingleModeAggregates) {
  auto client = range_client();
  TemplateLibrary lib;
  Service s(ModelRegistry::builtin(), client, lib, {"*", true});
  const auto r = s.analyze_bag(bag_body({"for i in range(n): pass", "x = 1", "for j in range(n): f(j)"}).dump());
  ASSERT_EQ(r.status, 200) << r.body.dump();
  EXPECT_EQ(client.calls(), 3u);
  EXPECT_EQ(r.body.at("prediction").at("description"), "Student believes range(n) starts at 1.");
  EXPECT_TRUE(r.body.at("reasoning_trace").is_null());
  ASSERT_EQ(r.body.at("per_sample").size(), 3u);
  EXPECT_TRUE(r.body.at("per_sample")[1].at("prediction").is_null());
}

TEST(Service, AnalyzeBagMultiModeIsOneCall) {
  auto client = range_client();
  TemplateLibrary lib;
  Service s(ModelRegistry::builtin(), client, lib);
  const auto r = s.analyze_bag(bag_body({"for i in range(n): pass", "x = 1"}, "multi").dump());
  ASSERT_EQ(r.status, 200);
  EXPECT_EQ(client.calls(), 1u);
  EXPECT_TRUE(r.body.at("per_sample").empty());
  EXPECT_EQ(r.body.at("reasoning_trace"), "trace");
}

TEST(Service, InfoLogsNeverContainCode) {
  std::ostringstream log;
  auto sink = std::make_shared<spdlog::sinks::ostream_sink_mt>(log);
  auto logger = std::make_shared<spdlog::logger>("capture", sink);
  logger->set_level(spdlog::level::info);
  const auto previous = spdlog::default_logger();
  spdlog::set_default_logger(logger);

  auto client = range_client();
  TemplateLibrary lib;
  Service s(ModelRegistry::builtin(), client, lib);
  const std::string marker = "STUDENT_CODE_MARKER_42";
  s.analyze(analyze_body("x = '" + marker + "'\n").dump());
  s.analyze_bag(bag_body({marker + " = 1\n", "y = 2\n"}).dump());
  s.analyze(analyze_body("'" + marker, "no-such-model").dump());
  spdlog::set_default_logger(previous);

  EXPECT_NE(log.str().find("analyze"), std::string::npos);
  EXPECT_EQ(log.str().find(marker), std::string::npos) << log.str();
}

// ---------------------------------------------------------------------------
// Over HTTP

TEST(ServiceHttp, EndpointsAndCors) {
  auto fake = range_client();
  LiveServer server(fake, {"http://localhost:5173", true});
  auto http = server.client();

  auto health = http.Get("/api/health");
  ASSERT_TRUE(health);
  EXPECT_EQ(health->status, 200);
  EXPECT_EQ(Json::parse(health->body), Json({{"ok", true}}));
  EXPECT_EQ(health->get_header_value("Access-Control-Allow-Origin"), "http://localhost:5173");
  EXPECT_EQ(health->get_header_value("Content-Type"), "application/json");

  auto models = http.Get("/api/models");
  ASSERT_TRUE(models);
  EXPECT_TRUE(Json::parse(models->body).at("models").is_array());

  auto pre = http.Options("/api/analyze");
  ASSERT_TRUE(pre);
  EXPECT_EQ(pre->status, 204);
  EXPECT_NE(pre->get_header_value("Access-Control-Allow-Methods").find("POST"), std::string::npos);
  EXPECT_EQ(pre->get_header_value("Access-Control-Allow-Headers"), "Content-Type");

  auto analyze = http.Post("/api/analyze", analyze_body().dump(), "application/json");
  ASSERT_TRUE(analyze);
  EXPECT_EQ(analyze->status, 200);
  EXPECT_TRUE(Json::parse(analyze->body).at("prediction").contains("description"));

  auto bag = http.Post("/api/analyze-bag", bag_body({"a = 1", "b = 2"}).dump(), "application/json");
  ASSERT_TRUE(bag);
  EXPECT_EQ(bag->status, 200);

  auto bad = http.Post("/api/analyze", "{", "application/json");
  ASSERT_TRUE(bad);
  EXPECT_EQ(bad->status, 400);
  EXPECT_EQ(bad->get_header_value("Access-Control-Allow-Origin"), "http://localhost:5173");

  auto missing = http.Get("/api/nothing");
  ASSERT_TRUE(missing);
  EXPECT_EQ(missing->status, 404);
}

TEST(ServiceHttp, IdenticalRequestsIdenticalBodiesUnderMock) {
  MockBackend mock(scenario_from_json(Json::parse(R"json([
    {"match":{"substring":"range(n)"},"response":"<misconception><description>Student believes range(n) starts at 1.</description><explanation>loop</explanation></misconception>","reasoning":"t"},
    {"match":{"any":true},"response":"<misconception>NONE</misconception>"}])json")));
  LiveServer server(mock, {"*", true});
  auto http = server.client();
  const auto body = analyze_body().dump();
  auto a = http.Post("/api/analyze", body, "application/json");
  auto b = http.Post("/api/analyze", body, "application/json");
  ASSERT_TRUE(a && b);
  EXPECT_EQ(a->status, 200);
  EXPECT_EQ(a->body, b->body);
  const auto bb = bag_body({"for i in range(n): x", "y = 1"}).dump();
  auto c = http.Post("/api/analyze-bag", bb, "application/json");
  auto d = http.Post("/api/analyze-bag", bb, "application/json");
  ASSERT_TRUE(c && d);
  EXPECT_EQ(c->body, d->body);
}

TEST(ServiceHttp, UnauthorizedOverHttp) {
  FakeClient fake([](const ModelConfig&, const Conversation&) -> Completion {
    throw Unauthorized("ANTHROPIC_API_KEY is not set");
  });
  LiveServer server(fake);
  auto http = server.client();
  auto r = http.Post("/api/analyze", analyze_body("x = 1", "sonnet-4.5").dump(), "application/json");
  ASSERT_TRUE(r);
  EXPECT_EQ(r->status, 401);
}
