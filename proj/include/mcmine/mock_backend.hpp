#pragma once

// Scripted, deterministic chat backend plus a recorder that captures live
// traffic as a replayable scenario.

#include <algorithm>
#include <atomic>
#include <cstdint>
#include <cstdio>
#include <filesystem>
#include <mutex>
#include <string>
#include <variant>
#include <vector>

#include "mcmine/chat.hpp"
#include "mcmine/serialization.hpp"

namespace mcmine {

/// 64-bit FNV-1a, rendered as 16 lowercase hex digits.
inline std::string prompt_hash(std::string_view text) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char c : text) {
    h ^= c;
    h *= 0x100000001b3ULL;
  }
  char buf[17];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(h));
  return buf;
}

struct MatchAny {};
struct MatchSubstrings {
  std::vector<std::string> all;  // every literal must occur
};
struct MatchHash {
  std::string hash;
};
using Matcher = std::variant<MatchAny, MatchSubstrings, MatchHash>;

struct ScenarioRule {
  Matcher match;
  std::string response;
  std::optional<std::string> reasoning;

  bool matches(std::string_view prompt, const std::string& hash) const {
    if (std::holds_alternative<MatchAny>(match)) return true;
    if (const auto* h = std::get_if<MatchHash>(&match)) return h->hash == hash;
    for (const auto& needle : std::get<MatchSubstrings>(match).all) {
      if (prompt.find(needle) == std::string_view::npos) return false;
    }
    return true;
  }
};

struct Scenario {
  std::vector<ScenarioRule> rules;  // first match wins

  const ScenarioRule& select(std::string_view prompt) const {
    const auto h = prompt_hash(prompt);
    for (const auto& r : rules) {
      if (r.matches(prompt, h)) return r;
    }
    throw MalformedScenario("scenario has no default rule");
  }
};

inline Scenario scenario_from_json(const Json& j) {
  if (!j.is_array()) throw MalformedScenario("scenario must be a JSON array of rules");
  Scenario s;
  bool has_default = false;
  for (std::size_t i = 0; i < j.size(); ++i) {
    const auto& r = j[i];
    const auto where = "rule " + std::to_string(i);
    if (!r.is_object() || !r.contains("match") || !r.at("match").is_object()) {
      throw MalformedScenario(where + ": missing \"match\" object");
    }
    if (!r.contains("response") || !r.at("response").is_string()) {
      throw MalformedScenario(where + ": \"response\" must be a string");
    }
    ScenarioRule rule;
    const auto& m = r.at("match");
    if (m.contains("any")) {
      if (m.at("any") != true) throw MalformedScenario(where + ": \"any\" must be true");
      rule.match = MatchAny{};
      has_default = true;
    } else if (m.contains("substring")) {
      MatchSubstrings sub;
      const auto& v = m.at("substring");
      if (v.is_string()) {
        sub.all.push_back(v.get<std::string>());
      } else if (v.is_array() && !v.empty()) {
        for (const auto& s : v) {
          if (!s.is_string()) throw MalformedScenario(where + ": substrings must be strings");
          sub.all.push_back(s.get<std::string>());
        }
      } else {
        throw MalformedScenario(where + ": \"substring\" must be a string or non-empty array");
      }
      rule.match = std::move(sub);
    } else if (m.contains("hash")) {
      if (!m.at("hash").is_string()) throw MalformedScenario(where + ": \"hash\" must be a string");
      rule.match = MatchHash{m.at("hash").get<std::string>()};
    } else {
      throw MalformedScenario(where + ": unknown matcher");
    }
    rule.response = r.at("response").get<std::string>();
    if (r.contains("reasoning") && !r.at("reasoning").is_null()) {
      if (!r.at("reasoning").is_string()) {
        throw MalformedScenario(where + ": \"reasoning\" must be a string");
      }
      rule.reasoning = r.at("reasoning").get<std::string>();
    }
    s.rules.push_back(std::move(rule));
  }
  if (!has_default) throw MalformedScenario("scenario requires a default {\"any\":true} rule");
  return s;
}

inline Json to_json(const Scenario& s) {
  Json arr = Json::array();
  for (const auto& r : s.rules) {
    Json m;
    if (std::holds_alternative<MatchAny>(r.match)) {
      m = Json{{"any", true}};
    } else if (const auto* h = std::get_if<MatchHash>(&r.match)) {
      m = Json{{"hash", h->hash}};
    } else {
      const auto& all = std::get<MatchSubstrings>(r.match).all;
      m = Json{{"substring", all.size() == 1 ? Json(all.front()) : Json(all)}};
    }
    Json rule{{"match", std::move(m)}, {"response", r.response}};
    if (r.reasoning) rule["reasoning"] = *r.reasoning;
    arr.push_back(std::move(rule));
  }
  return arr;
}

inline Scenario mock_scenario_load(const std::filesystem::path& path) {
  std::string text;
  try {
    text = read_file(path);
  } catch (const ValidationError& e) {
    throw MalformedScenario(e.what());
  }
  try {
    return scenario_from_json(Json::parse(text));
  } catch (const nlohmann::json::parse_error& e) {
    throw MalformedScenario(path.string() + ": " + e.what());
  }
}

/// Responses depend only on prompt content, so results are independent of
/// call order and thread interleaving.
class MockBackend final : public ChatClient {
 public:
  explicit MockBackend(Scenario scenario) : scenario_(std::move(scenario)) {}

  Completion complete(const ModelConfig& config, const Conversation& convo) override {
    validate_model_config(config);
    if (convo.empty()) throw ValidationError("empty conversation");
    calls_.fetch_add(1, std::memory_order_relaxed);
    const auto& rule = scenario_.select(conversation_text(convo));
    return Completion{rule.response, rule.reasoning, std::nullopt};
  }

  std::size_t calls() const noexcept { return calls_.load(std::memory_order_relaxed); }
  const Scenario& scenario() const noexcept { return scenario_; }

 private:
  Scenario scenario_;
  std::atomic<std::size_t> calls_{0};
};

/// Forwards to another client and keeps every (prompt hash, completion) seen.
/// `scenario()` turns the recording into hash rules for replay.
class RecordingClient final : public ChatClient {
 public:
  explicit RecordingClient(ChatClient& inner) : inner_(inner) {}

  Completion complete(const ModelConfig& config, const Conversation& convo) override {
    auto c = inner_.complete(config, convo);
    const auto h = prompt_hash(conversation_text(convo));
    std::lock_guard lock(mu_);
    if (std::find(seen_.begin(), seen_.end(), h) == seen_.end()) {
      seen_.push_back(h);
      recorded_.push_back(ScenarioRule{MatchHash{h}, c.text, c.reasoning_trace});
    }
    return c;
  }

  Scenario scenario(std::string default_response = "<misconception>NONE</misconception>") const {
    std::lock_guard lock(mu_);
    Scenario s;
    s.rules = recorded_;
    std::sort(s.rules.begin(), s.rules.end(), [](const ScenarioRule& a, const ScenarioRule& b) {
      return std::get<MatchHash>(a.match).hash < std::get<MatchHash>(b.match).hash;
    });
    s.rules.push_back(ScenarioRule{MatchAny{}, std::move(default_response), std::nullopt});
    return s;
  }

 private:
  ChatClient& inner_;
  mutable std::mutex mu_;
  std::vector<std::string> seen_;
  std::vector<ScenarioRule> recorded_;
};

}  // namespace mcmine
