#include <gtest/gtest.h>

#include <atomic>
#include <chrono>
#include <deque>
#include <thread>

#include "mcmine/gateway.hpp"
#include "mcmine/registry.hpp"
#include "support.hpp"

using namespace mcmine;
using namespace mcmine::testing;
using namespace std::chrono_literals;

namespace {

class ScriptedTransport final : public Transport {
 public:
  std::deque<HttpResponse> responses;
  std::vector<HttpRequest> requests;
  std::function<void()> on_post;

  HttpResponse post(const HttpRequest& r) override {
    std::lock_guard lock(mu_);
    requests.push_back(r);
    if (on_post) on_post();
    if (responses.empty()) throw TransportError("connection refused");
    auto out = responses.front();
    if (responses.size() > 1) responses.pop_front();
    return out;
  }

 private:
  std::mutex mu_;
};

HostedOptions test_options(std::vector<std::chrono::milliseconds>* slept = nullptr) {
  HostedOptions o;
  o.credentials = [](Provider) { return std::optional<std::string>("k-test"); };
  o.sleep = [slept](std::chrono::milliseconds d) {
    if (slept) slept->push_back(d);
  };
  return o;
}

const char* kOpenAiOk = R"({"choices":[{"message":{"content":"hello"},"finish_reason":"stop"}],
                            "usage":{"prompt_tokens":3,"completion_tokens":1}})";

std::string header(const HttpRequest& r, const std::string& name) {
  for (const auto& [k, v] : r.headers) {
    if (k == name) return v;
  }
  return {};
}

}  // namespace

TEST(OpenAiAdapter, EffortConfigOmitsTemperature) {
  const auto req = build_openai_request(presets::o3_mini(Effort::medium), user_prompt("hi"), "K", "https://x");
  const auto body = Json::parse(req.body);
  EXPECT_EQ(req.url, "https://x/v1/chat/completions");
  EXPECT_EQ(header(req, "Authorization"), "Bearer K");
  EXPECT_EQ(body.at("reasoning_effort"), "medium");
  EXPECT_EQ(body.at("max_completion_tokens"), 9000);
  EXPECT_FALSE(body.contains("temperature"));
  EXPECT_EQ(body.at("messages")[0].at("role"), "user");
}

TEST(OpenAiAdapter, PlainConfigSendsTemperatureAndRejectsBudget) {
  auto cfg = presets::sonnet();
  cfg.provider = Provider::openai;
  EXPECT_EQ(Json::parse(build_openai_request(cfg, user_prompt("hi"), "K", "u").body).at("temperature"), 0.1);
  cfg.max_tokens = 6000;
  cfg.reasoning = ReasoningBudget{2000};
  EXPECT_THROW(build_openai_request(cfg, user_prompt("hi"), "K", "u"), ValidationError);
}

TEST(OpenAiAdapter, ParsesContentUsageAndRefusal) {
  const auto c = parse_openai_response({200, kOpenAiOk});
  EXPECT_EQ(c.text, "hello");
  EXPECT_EQ(c.usage, (Usage{3, 1}));
  EXPECT_THROW(parse_openai_response({200, R"({"choices":[{"message":{"content":null,"refusal":"no"}}]})"}),
               ProviderRefusal);
  EXPECT_THROW(parse_openai_response({200, R"({"choices":[{"message":{"content":""},"finish_reason":"content_filter"}]})"}),
               ProviderRefusal);
}

TEST(AnthropicAdapter, ReasoningForcesTemperatureOneAndBudget) {
  Conversation c{{Role::system, "sys"}, {Role::user, "u"}, {Role::assistant, "a"}, {Role::user, "u2"}};
  const auto req = build_anthropic_request(presets::sonnet_reasoning(), c, "K", "https://a");
  const auto body = Json::parse(req.body);
  EXPECT_EQ(req.url, "https://a/v1/messages");
  EXPECT_EQ(header(req, "x-api-key"), "K");
  EXPECT_EQ(header(req, "anthropic-version"), "2023-06-01");
  EXPECT_EQ(body.at("temperature"), 1.0);
  EXPECT_EQ(body.at("max_tokens"), 6000);
  EXPECT_EQ(body.at("thinking").at("budget_tokens"), 2000);
  EXPECT_EQ(body.at("system"), "sys");
  ASSERT_EQ(body.at("messages").size(), 3u);
  EXPECT_EQ(body.at("messages")[1].at("role"), "assistant");
}

TEST(AnthropicAdapter, PlainConfigAndEffortRejection) {
  const auto body = Json::parse(build_anthropic_request(presets::sonnet(), user_prompt("u"), "K", "u").body);
  EXPECT_EQ(body.at("temperature"), 0.1);
  EXPECT_EQ(body.at("max_tokens"), 4000);
  EXPECT_FALSE(body.contains("thinking"));
  auto cfg = presets::sonnet();
  cfg.reasoning = ReasoningEffort{Effort::low};
  EXPECT_THROW(build_anthropic_request(cfg, user_prompt("u"), "K", "u"), ValidationError);
}

TEST(AnthropicAdapter, ThinkingBlocksBecomeReasoningTrace) {
  const auto c = parse_anthropic_response(
      {200, R"({"content":[{"type":"thinking","thinking":"hmm"},{"type":"text","text":"answer"}],
                "stop_reason":"end_turn","usage":{"input_tokens":5,"output_tokens":7}})"});
  EXPECT_EQ(c.text, "answer");
  EXPECT_EQ(c.reasoning_trace, "hmm");
  EXPECT_EQ(c.usage, (Usage{5, 7}));
  EXPECT_THROW(parse_anthropic_response({200, R"({"content":[],"stop_reason":"refusal"})"}), ProviderRefusal);
}

TEST(GeminiAdapter, ThinkingBudgetAndThoughtParts) {
  const auto req = build_gemini_request(presets::gemini_flash_reasoning(), user_prompt("u"), "K", "https://g");
  const auto body = Json::parse(req.body);
  EXPECT_EQ(req.url, "https://g/v1beta/models/gemini-2.5-flash:generateContent");
  EXPECT_EQ(header(req, "x-goog-api-key"), "K");
  EXPECT_EQ(body.at("generationConfig").at("thinkingConfig").at("thinkingBudget"), 2000);
  EXPECT_EQ(body.at("generationConfig").at("maxOutputTokens"), 6000);
  EXPECT_EQ(Json::parse(build_gemini_request(presets::gemini_flash(), user_prompt("u"), "K", "g").body)
                .at("generationConfig")
                .at("thinkingConfig")
                .at("thinkingBudget"),
            0);
  const auto c = parse_gemini_response(
      {200, R"({"candidates":[{"content":{"parts":[{"text":"plan","thought":true},{"text":"out"}]},
                "finishReason":"STOP"}]})"});
  EXPECT_EQ(c.text, "out");
  EXPECT_EQ(c.reasoning_trace, "plan");
  EXPECT_THROW(parse_gemini_response({200, R"({"candidates":[{"finishReason":"SAFETY"}]})"}), ProviderRefusal);
  EXPECT_THROW(parse_gemini_response({200, R"({"promptFeedback":{"blockReason":"OTHER"}})"}), ProviderRefusal);
}

TEST(StatusMapping, HttpCodesToErrors) {
  EXPECT_THROW(parse_openai_response({401, "{}"}), Unauthorized);
  EXPECT_THROW(parse_openai_response({403, "{}"}), Unauthorized);
  EXPECT_THROW(parse_openai_response({429, "{}"}), RateLimited);
  EXPECT_THROW(parse_openai_response({503, "{}"}), TransportError);
  EXPECT_THROW(parse_openai_response({400, "{}"}), GatewayError);
  EXPECT_THROW(parse_openai_response({200, "not json"}), GatewayError);
}

TEST(StatusMapping, ProviderBodyIsNotEchoed) {
  try {
    parse_openai_response({500, "secret-internal-detail"});
    FAIL();
  } catch (const GatewayError& e) {
    EXPECT_EQ(std::string(e.what()).find("secret"), std::string::npos);
  }
}

// ---------------------------------------------------------------------------
// Hosted backend

TEST(Hosted, MissingCredentialFailsBeforeAnyRequest) {
  ScriptedTransport t;
  auto opts = test_options();
  opts.credentials = [](Provider) { return std::optional<std::string>{}; };
  HostedBackend backend(t, opts);
  try {
    backend.complete(presets::sonnet(), user_prompt("x"));
    FAIL();
  } catch (const Unauthorized& e) {
    EXPECT_NE(std::string(e.what()).find("ANTHROPIC_API_KEY"), std::string::npos);
  }
  EXPECT_TRUE(t.requests.empty());
}

TEST(Hosted, CredentialEnvVarNames) {
  EXPECT_EQ(credential_env_var(Provider::openai), "OPENAI_API_KEY");
  EXPECT_EQ(credential_env_var(Provider::anthropic), "ANTHROPIC_API_KEY");
  EXPECT_EQ(credential_env_var(Provider::gemini), "GEMINI_API_KEY");
}

TEST(Hosted, InvalidBudgetRejectedBeforeRequest) {
  ScriptedTransport t;
  HostedBackend backend(t, test_options());
  auto cfg = presets::sonnet_reasoning();
  cfg.reasoning = ReasoningBudget{6000};
  EXPECT_THROW(backend.complete(cfg, user_prompt("x")), ValidationError);
  EXPECT_TRUE(t.requests.empty());
}

TEST(Hosted, RetriesTransientFailuresWithBackoff) {
  ScriptedTransport t;
  t.responses = {{503, "{}"}, {429, "{}"}, {200, kOpenAiOk}};
  std::vector<std::chrono::milliseconds> slept;
  HostedBackend backend(t, test_options(&slept));
  EXPECT_EQ(backend.complete(presets::o3_mini(Effort::low), user_prompt("x")).text, "hello");
  EXPECT_EQ(t.requests.size(), 3u);
  EXPECT_EQ(slept, (std::vector<std::chrono::milliseconds>{1000ms, 4000ms}));
}

TEST(Hosted, GivesUpAfterThreeAttempts) {
  ScriptedTransport t;
  t.responses = {{429, "{}"}};
  std::vector<std::chrono::milliseconds> slept;
  HostedBackend backend(t, test_options(&slept));
  EXPECT_THROW(backend.complete(presets::o3_mini(Effort::low), user_prompt("x")), RateLimited);
  EXPECT_EQ(t.requests.size(), 3u);
  EXPECT_EQ(slept.size(), 2u);
}

TEST(Hosted, NonTransientErrorsAreNotRetried) {
  for (int status : {400, 401}) {
    ScriptedTransport t;
    t.responses = {{status, "{}"}};
    HostedBackend backend(t, test_options());
    EXPECT_THROW(backend.complete(presets::o3_mini(Effort::low), user_prompt("x")), GatewayError);
    EXPECT_EQ(t.requests.size(), 1u) << status;
  }
  ScriptedTransport t;
  t.responses = {{200, R"({"choices":[{"message":{"refusal":"no"}}]})"}};
  HostedBackend backend(t, test_options());
  EXPECT_THROW(backend.complete(presets::o3_mini(Effort::low), user_prompt("x")), ProviderRefusal);
  EXPECT_EQ(t.requests.size(), 1u);
}

TEST(Hosted, InFlightRequestsNeverExceedBound) {
  ScriptedTransport t;
  t.responses = {{200, kOpenAiOk}};
  std::atomic<int> in_flight{0}, peak{0};
  class Instrumented final : public Transport {
   public:
    Instrumented(Transport& inner, std::atomic<int>& f, std::atomic<int>& p) : inner_(inner), f_(f), p_(p) {}
    HttpResponse post(const HttpRequest& r) override {
      const int now = ++f_;
      int seen = p_.load();
      while (now > seen && !p_.compare_exchange_weak(seen, now)) {
      }
      std::this_thread::sleep_for(5ms);
      auto out = inner_.post(r);
      --f_;
      return out;
    }

   private:
    Transport& inner_;
    std::atomic<int>& f_;
    std::atomic<int>& p_;
  } instrumented(t, in_flight, peak);

  auto opts = test_options();
  opts.max_concurrency = 3;
  HostedBackend backend(instrumented, opts);
  {
    std::vector<std::jthread> threads;
    for (int i = 0; i < 16; ++i) {
      threads.emplace_back([&] {
        for (int k = 0; k < 4; ++k) backend.complete(presets::o3_mini(Effort::low), user_prompt("x"));
      });
    }
  }
  EXPECT_EQ(t.requests.size(), 64u);
  EXPECT_LE(peak.load(), 3);
  EXPECT_GE(peak.load(), 2);
}

// ---------------------------------------------------------------------------
// Gateway routing and registry

TEST(GatewayRouting, MockOverrideCapturesEveryProvider) {
  Gateway gw;
  ScriptedTransport t;
  gw.set_hosted(std::make_unique<HostedBackend>(t, test_options()));
  gw.set_mock(scenario_from_json(Json::parse(R"([{"match":{"any":true},"response":"M"}])")), true);
  EXPECT_EQ(gw.complete(presets::sonnet(), user_prompt("x")).text, "M");
  EXPECT_EQ(gw.complete(presets::o3_mini(Effort::low), user_prompt("x")).text, "M");
  EXPECT_TRUE(t.requests.empty());
  EXPECT_EQ(gw.calls(), 2u);
}

TEST(GatewayRouting, MockProviderWithoutOverride) {
  Gateway gw;
  ScriptedTransport t;
  t.responses = {{200, kOpenAiOk}};
  gw.set_hosted(std::make_unique<HostedBackend>(t, test_options()));
  gw.set_mock(scenario_from_json(Json::parse(R"([{"match":{"any":true},"response":"M"}])")), false);
  EXPECT_EQ(gw.complete(presets::mock(), user_prompt("x")).text, "M");
  EXPECT_EQ(gw.complete(presets::o3_mini(Effort::low), user_prompt("x")).text, "hello");
}

TEST(GatewayRouting, MockWithoutScenarioIsAnError) {
  Gateway gw;
  EXPECT_THROW(gw.complete(presets::mock(), user_prompt("x")), ValidationError);
}

TEST(Registry, BuiltinPresetsNamedVerbatim) {
  const auto r = ModelRegistry::builtin();
  for (const auto* id : {"o3-mini-low", "o3-mini-medium", "sonnet-4.5", "sonnet-4.5-reasoning", "gemini-2.5-flash",
                         "gemini-2.5-flash-reasoning", "mock"}) {
    EXPECT_TRUE(r.contains(id)) << id;
  }
  EXPECT_EQ(r.get("sonnet-4.5").temperature, 0.1);
  EXPECT_EQ(r.get("sonnet-4.5").max_tokens, 4000);
  EXPECT_EQ(r.get("sonnet-4.5-reasoning").temperature, 1.0);
  EXPECT_EQ(r.get("sonnet-4.5-reasoning").max_tokens, 6000);
  EXPECT_EQ(r.resolve("sonnet-4.5", true).id, "sonnet-4.5-reasoning");
  EXPECT_EQ(r.resolve("sonnet-4.5", false).id, "sonnet-4.5");
  EXPECT_EQ(r.resolve("mock", true).id, "mock");
  EXPECT_TRUE(r.supports_reasoning("gemini-2.5-flash"));
  EXPECT_FALSE(r.supports_reasoning("mock"));
  EXPECT_THROW(r.get("gpt-9"), ValidationError);
}

TEST(Registry, FromFile) {
  TempDir dir;
  write_file(dir / "models.json", R"({"models":[
    {"id":"a","provider":"anthropic","model_name":"m","temperature":0.1,"max_tokens":4000,
     "reasoning_variant":"a-r"},
    {"id":"a-r","provider":"anthropic","model_name":"m","temperature":1.0,"max_tokens":6000,
     "reasoning":{"type":"budget","tokens":2000}}]})");
  const auto r = ModelRegistry::load(dir / "models.json");
  EXPECT_EQ(r.ids(), (std::vector<std::string>{"a", "a-r"}));
  EXPECT_EQ(std::get<ReasoningBudget>(r.resolve("a", true).reasoning).tokens, 2000);
  EXPECT_THROW(ModelRegistry::from_json(Json::parse(R"({"models":[{"id":"x","provider":"openai",
      "reasoning_variant":"nope"}]})")),
               ValidationError);
  EXPECT_THROW(ModelRegistry::from_json(Json::parse(R"({"models":[{"id":"x","provider":"openai","max_tokens":10,
      "reasoning":{"type":"budget","tokens":10}}]})")),
               ValidationError);
}
