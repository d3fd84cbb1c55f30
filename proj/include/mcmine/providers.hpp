#pragma once

// Adapters from the neutral (ModelConfig, Conversation) request shape to each
// hosted vendor's wire format, and back from their responses.

#include <string>
#include <utility>
#include <vector>

#include "mcmine/chat.hpp"
#include "mcmine/serialization.hpp"

namespace mcmine {

struct HttpRequest {
  std::string url;
  std::vector<std::pair<std::string, std::string>> headers;
  std::string body;
};

struct HttpResponse {
  int status = 0;
  std::string body;
};

/// Raises TransportError when no HTTP response was obtained.
class Transport {
 public:
  virtual ~Transport() = default;
  virtual HttpResponse post(const HttpRequest& request) = 0;
};

struct ProviderEndpoints {
  std::string openai = "https://api.openai.com";
  std::string anthropic = "https://api.anthropic.com";
  std::string gemini = "https://generativelanguage.googleapis.com";
};

inline constexpr const char* kAnthropicVersion = "2023-06-01";

/// Environment variable holding the credential for a hosted provider.
inline std::string credential_env_var(Provider p) {
  switch (p) {
    case Provider::openai: return "OPENAI_API_KEY";
    case Provider::anthropic: return "ANTHROPIC_API_KEY";
    case Provider::gemini: return "GEMINI_API_KEY";
    case Provider::mock: return "";
  }
  return "";
}

namespace detail {

inline std::pair<std::string, Conversation> split_system(const Conversation& convo) {
  std::string system;
  Conversation rest;
  for (const auto& m : convo) {
    if (m.role == Role::system) {
      if (!system.empty()) system += "\n\n";
      system += m.content;
    } else {
      rest.push_back(m);
    }
  }
  return {std::move(system), std::move(rest)};
}

inline Json parse_body(const HttpResponse& r) {
  try {
    return Json::parse(r.body);
  } catch (const nlohmann::json::parse_error&) {
    throw TransportError("provider returned a non-JSON body (status " +
                         std::to_string(r.status) + ")");
  }
}

/// Maps a non-2xx status to the gateway error taxonomy. Provider bodies are
/// not echoed into messages.
inline void raise_for_status(const HttpResponse& r) {
  if (r.status >= 200 && r.status < 300) return;
  const auto code = std::to_string(r.status);
  if (r.status == 401 || r.status == 403) throw Unauthorized("provider rejected credential (" + code + ")");
  if (r.status == 429) throw RateLimited("provider rate limit (429)");
  if (r.status == 408 || r.status >= 500) throw TransportError("provider unavailable (" + code + ")");
  throw GatewayError("provider rejected request (" + code + ")");
}

inline std::optional<Usage> usage_from(const Json& u, const char* in_key, const char* out_key) {
  if (!u.is_object()) return std::nullopt;
  return Usage{u.value(in_key, 0), u.value(out_key, 0)};
}

}  // namespace detail

// ---------------------------------------------------------------------------

inline HttpRequest build_openai_request(const ModelConfig& cfg, const Conversation& convo,
                                        const std::string& key, const std::string& base) {
  if (std::holds_alternative<ReasoningBudget>(cfg.reasoning)) {
    throw ValidationError("openai adapter: use an effort level, not a thinking budget");
  }
  Json messages = Json::array();
  for (const auto& m : convo) messages.push_back({{"role", to_string(m.role)}, {"content", m.content}});
  Json body{{"model", cfg.model_name}, {"messages", std::move(messages)},
            {"max_completion_tokens", cfg.max_tokens}};
  if (const auto* e = std::get_if<ReasoningEffort>(&cfg.reasoning)) {
    // effort-style models take no temperature
    body["reasoning_effort"] = to_string(e->level);
  } else {
    body["temperature"] = cfg.temperature;
  }
  return HttpRequest{base + "/v1/chat/completions",
                     {{"Authorization", "Bearer " + key}, {"Content-Type", "application/json"}},
                     body.dump()};
}

inline Completion parse_openai_response(const HttpResponse& r) {
  detail::raise_for_status(r);
  const auto j = detail::parse_body(r);
  if (!j.contains("choices") || !j["choices"].is_array() || j["choices"].empty()) {
    throw GatewayError("openai response has no choices");
  }
  const auto& choice = j["choices"][0];
  const auto& msg = choice.value("message", Json::object());
  if (msg.contains("refusal") && msg["refusal"].is_string()) {
    throw ProviderRefusal("model refused the request");
  }
  if (choice.value("finish_reason", std::string{}) == "content_filter") {
    throw ProviderRefusal("response blocked by content filter");
  }
  Completion c;
  c.text = msg.contains("content") && msg["content"].is_string() ? msg["content"].get<std::string>()
                                                                 : std::string{};
  c.usage = detail::usage_from(j.value("usage", Json{}), "prompt_tokens", "completion_tokens");
  return c;
}

inline HttpRequest build_anthropic_request(const ModelConfig& cfg, const Conversation& convo,
                                           const std::string& key, const std::string& base) {
  if (std::holds_alternative<ReasoningEffort>(cfg.reasoning)) {
    throw ValidationError("anthropic adapter: use a thinking budget, not an effort level");
  }
  auto [system, rest] = detail::split_system(convo);
  Json messages = Json::array();
  for (const auto& m : rest) messages.push_back({{"role", to_string(m.role)}, {"content", m.content}});
  Json body{{"model", cfg.model_name}, {"max_tokens", cfg.max_tokens},
            {"messages", std::move(messages)}};
  if (!system.empty()) body["system"] = system;
  if (const auto* b = std::get_if<ReasoningBudget>(&cfg.reasoning)) {
    // extended thinking only accepts temperature 1.0
    body["temperature"] = 1.0;
    body["thinking"] = {{"type", "enabled"}, {"budget_tokens", b->tokens}};
  } else {
    body["temperature"] = cfg.temperature;
  }
  return HttpRequest{base + "/v1/messages",
                     {{"x-api-key", key},
                      {"anthropic-version", kAnthropicVersion},
                      {"Content-Type", "application/json"}},
                     body.dump()};
}

inline Completion parse_anthropic_response(const HttpResponse& r) {
  detail::raise_for_status(r);
  const auto j = detail::parse_body(r);
  if (j.value("stop_reason", std::string{}) == "refusal") {
    throw ProviderRefusal("model refused the request");
  }
  if (!j.contains("content") || !j["content"].is_array()) {
    throw GatewayError("anthropic response has no content");
  }
  Completion c;
  std::string thinking;
  for (const auto& block : j["content"]) {
    const auto type = block.value("type", std::string{});
    if (type == "text") {
      c.text += block.value("text", std::string{});
    } else if (type == "thinking") {
      thinking += block.value("thinking", std::string{});
    }
  }
  if (!thinking.empty()) c.reasoning_trace = std::move(thinking);
  c.usage = detail::usage_from(j.value("usage", Json{}), "input_tokens", "output_tokens");
  return c;
}

inline HttpRequest build_gemini_request(const ModelConfig& cfg, const Conversation& convo,
                                        const std::string& key, const std::string& base) {
  if (std::holds_alternative<ReasoningEffort>(cfg.reasoning)) {
    throw ValidationError("gemini adapter: use a thinking budget, not an effort level");
  }
  auto [system, rest] = detail::split_system(convo);
  Json contents = Json::array();
  for (const auto& m : rest) {
    contents.push_back({{"role", m.role == Role::assistant ? "model" : "user"},
                        {"parts", Json::array({Json{{"text", m.content}}})}});
  }
  Json gen{{"temperature", cfg.temperature}, {"maxOutputTokens", cfg.max_tokens}};
  if (const auto* b = std::get_if<ReasoningBudget>(&cfg.reasoning)) {
    gen["thinkingConfig"] = {{"thinkingBudget", b->tokens}, {"includeThoughts", true}};
  } else {
    gen["thinkingConfig"] = {{"thinkingBudget", 0}};
  }
  Json body{{"contents", std::move(contents)}, {"generationConfig", std::move(gen)}};
  if (!system.empty()) body["systemInstruction"] = {{"parts", Json::array({Json{{"text", system}}})}};
  return HttpRequest{base + "/v1beta/models/" + cfg.model_name + ":generateContent",
                     {{"x-goog-api-key", key}, {"Content-Type", "application/json"}},
                     body.dump()};
}

inline Completion parse_gemini_response(const HttpResponse& r) {
  detail::raise_for_status(r);
  const auto j = detail::parse_body(r);
  if (j.contains("promptFeedback") && j["promptFeedback"].contains("blockReason")) {
    throw ProviderRefusal("prompt blocked by provider");
  }
  if (!j.contains("candidates") || !j["candidates"].is_array() || j["candidates"].empty()) {
    throw GatewayError("gemini response has no candidates");
  }
  const auto& cand = j["candidates"][0];
  const auto finish = cand.value("finishReason", std::string{});
  if (finish == "SAFETY" || finish == "PROHIBITED_CONTENT" || finish == "RECITATION" ||
      finish == "BLOCKLIST") {
    throw ProviderRefusal("response blocked by provider (" + finish + ")");
  }
  Completion c;
  std::string thoughts;
  const auto content = cand.value("content", Json::object());
  for (const auto& part : content.value("parts", Json::array())) {
    const auto text = part.value("text", std::string{});
    if (part.value("thought", false)) {
      thoughts += text;
    } else {
      c.text += text;
    }
  }
  if (!thoughts.empty()) c.reasoning_trace = std::move(thoughts);
  c.usage = detail::usage_from(j.value("usageMetadata", Json{}), "promptTokenCount",
                               "candidatesTokenCount");
  return c;
}

inline HttpRequest build_provider_request(const ModelConfig& cfg, const Conversation& convo,
                                          const std::string& key, const ProviderEndpoints& ep) {
  switch (cfg.provider) {
    case Provider::openai: return build_openai_request(cfg, convo, key, ep.openai);
    case Provider::anthropic: return build_anthropic_request(cfg, convo, key, ep.anthropic);
    case Provider::gemini: return build_gemini_request(cfg, convo, key, ep.gemini);
    case Provider::mock: break;
  }
  throw ValidationError("mock provider has no wire format");
}

inline Completion parse_provider_response(Provider p, const HttpResponse& r) {
  switch (p) {
    case Provider::openai: return parse_openai_response(r);
    case Provider::anthropic: return parse_anthropic_response(r);
    case Provider::gemini: return parse_gemini_response(r);
    case Provider::mock: break;
  }
  throw ValidationError("mock provider has no wire format");
}

}  // namespace mcmine
