#pragma once

// HTTP service for interactive analysis: single-pair and whole-bag mining
// plus model discovery.

#include <chrono>
#include <string>
#include <utility>

#include <httplib.h>
#include <spdlog/spdlog.h>

#include "mcmine/chat.hpp"
#include "mcmine/mcminer.hpp"
#include "mcmine/prompt.hpp"
#include "mcmine/registry.hpp"
#include "mcmine/serialization.hpp"

namespace mcmine {

struct ServiceOptions {
  std::string cors_origin = "*";
  bool deterministic_timing = false;  // report elapsed_ms as 0 (mock runs)
};

struct ApiResponse {
  int status = 200;
  Json body;
};

class Service {
 public:
  Service(ModelRegistry registry, ChatClient& client, const TemplateLibrary& templates,
          ServiceOptions opts = {})
      : registry_(std::move(registry)), client_(client), templates_(templates), opts_(std::move(opts)) {
    install_routes();
  }

  ApiResponse health() const { return {200, Json{{"ok", true}}}; }

  ApiResponse models() const {
    Json list = Json::array();
    for (const auto& id : registry_.ids()) {
      const auto& c = registry_.get(id);
      list.push_back({{"id", id},
                      {"provider", to_string(c.provider)},
                      {"model_name", c.model_name},
                      {"reasoning", c.reasoning_enabled()},
                      {"supports_reasoning", registry_.supports_reasoning(id)}});
    }
    return {200, Json{{"models", std::move(list)}}};
  }

  ApiResponse analyze(const std::string& body) {
    return guarded("analyze", [&] {
      const auto req = parse_body(body);
      const auto problem = required_text(req, "problem");
      const auto code = required_text(req, "code");
      const auto& cfg = resolve_model(req);
      spdlog::info("analyze model={} problem_chars={} code_chars={}", cfg.id, problem.size(), code.size());
      const auto start = std::chrono::steady_clock::now();
      auto completion = client_.complete(cfg, user_prompt(single_prompt(problem, code, templates_)));
      spdlog::debug("analyze code: {}", code);
      auto out = prediction_body(completion);
      out["elapsed_ms"] = elapsed_since(start);
      return ApiResponse{200, std::move(out)};
    });
  }

  /// Single mode (default) mines each pair and aggregates by normalized text;
  /// "mode":"multi" sends the whole bag in one completion.
  ApiResponse analyze_bag(const std::string& body) {
    return guarded("analyze-bag", [&] {
      const auto req = parse_body(body);
      if (!req.contains("pairs") || !req.at("pairs").is_array() || req.at("pairs").empty()) {
        throw ValidationError("'pairs' must be a non-empty array");
      }
      std::vector<std::pair<std::string, std::string>> pairs;
      for (const auto& p : req.at("pairs")) {
        if (!p.is_object()) throw ValidationError("each pair must be an object");
        pairs.emplace_back(required_text(p, "problem"), required_text(p, "code"));
      }
      const auto mode = mine_mode_from_string(req.value("mode", std::string{"single"}));
      const auto& cfg = resolve_model(req);
      spdlog::info("analyze-bag model={} mode={} pairs={}", cfg.id, to_string(mode), pairs.size());
      const auto start = std::chrono::steady_clock::now();
      Json out;
      Json per_sample = Json::array();
      if (mode == MineMode::multi) {
        auto completion = client_.complete(cfg, user_prompt(multi_prompt(pairs, templates_)));
        out = prediction_body(completion);
      } else {
        std::vector<MiningPrediction> preds;
        for (const auto& [problem, code] : pairs) {
          auto completion = client_.complete(cfg, user_prompt(single_prompt(problem, code, templates_)));
          auto sample = prediction_body(completion);
          preds.push_back(prediction_from_json(sample.at("prediction")));
          per_sample.push_back(std::move(sample));
        }
        const auto agg = aggregate_single(preds, normalized_text_equivalence());
        out = Json{{"prediction", to_json(agg.prediction)}, {"reasoning_trace", nullptr}};
      }
      out["elapsed_ms"] = elapsed_since(start);
      out["per_sample"] = std::move(per_sample);
      return ApiResponse{200, std::move(out)};
    });
  }

  httplib::Server& server() noexcept { return server_; }

  /// Binds and serves until stop(); blocks.
  bool listen(const std::string& host, int port) {
    spdlog::info("listening on {}:{}", host, port);
    return server_.listen(host, port);
  }

  int bind_any_port(const std::string& host = "127.0.0.1") { return server_.bind_to_any_port(host); }
  bool listen_after_bind() { return server_.listen_after_bind(); }
  void stop() { server_.stop(); }

 private:
  static Json parse_body(const std::string& body) {
    Json j;
    try {
      j = Json::parse(body);
    } catch (const Json::parse_error&) {
      throw ValidationError("request body is not valid JSON");
    }
    if (!j.is_object()) throw ValidationError("request body must be a JSON object");
    return j;
  }

  static std::string required_text(const Json& j, const char* key) {
    if (!j.contains(key) || !j.at(key).is_string()) {
      throw ValidationError(std::string("'") + key + "' must be a string");
    }
    auto s = j.at(key).get<std::string>();
    if (detail::trim_view(s).empty()) throw ValidationError(std::string("'") + key + "' must not be empty");
    return s;
  }

  const ModelConfig& resolve_model(const Json& req) const {
    if (!req.contains("model") || !req.at("model").is_string()) {
      throw ValidationError("'model' must be a string");
    }
    bool reasoning = false;
    if (req.contains("reasoning")) {
      if (!req.at("reasoning").is_boolean()) throw ValidationError("'reasoning' must be a boolean");
      reasoning = req.at("reasoning").get<bool>();
    }
    return registry_.resolve(req.at("model").get<std::string>(), reasoning);
  }

  static Json prediction_body(const Completion& c) {
    return Json{{"prediction", to_json(parse_miner_output(c.text))},
                {"reasoning_trace", c.reasoning_trace ? Json(*c.reasoning_trace) : Json(nullptr)}};
  }

  std::int64_t elapsed_since(std::chrono::steady_clock::time_point start) const {
    if (opts_.deterministic_timing) return 0;
    return std::chrono::duration_cast<std::chrono::milliseconds>(std::chrono::steady_clock::now() - start)
        .count();
  }

  template <typename Fn>
  static ApiResponse guarded(const char* endpoint, Fn&& fn) {
    auto fail = [&](int status, std::string msg) {
      spdlog::warn("{} -> {}: {}", endpoint, status, msg);
      return ApiResponse{status, Json{{"error", std::move(msg)}}};
    };
    try {
      return fn();
    } catch (const ValidationError& e) {
      return fail(400, e.what());
    } catch (const Unauthorized&) {
      return fail(401, "missing or rejected provider credential");
    } catch (const RateLimited&) {
      return fail(502, "provider rate limit exceeded");
    } catch (const ProviderRefusal&) {
      return fail(502, "provider refused the request");
    } catch (const GatewayError&) {
      return fail(502, "provider request failed");
    } catch (const ParseError&) {
      return fail(502, "model output could not be parsed");
    } catch (const std::exception& e) {
      spdlog::error("{}: internal error: {}", endpoint, e.what());
      return ApiResponse{500, Json{{"error", "internal error"}}};
    }
  }

  void reply(httplib::Response& res, const ApiResponse& r) const {
    res.status = r.status;
    res.set_content(r.body.dump(), "application/json");
  }

  void install_routes() {
    server_.set_post_routing_handler([this](const httplib::Request&, httplib::Response& res) {
      res.set_header("Access-Control-Allow-Origin", opts_.cors_origin);
      res.set_header("Access-Control-Allow-Methods", "GET, POST, OPTIONS");
      res.set_header("Access-Control-Allow-Headers", "Content-Type");
    });
    server_.Options(R"(/api/.*)", [](const httplib::Request&, httplib::Response& res) { res.status = 204; });
    server_.Get("/api/health", [this](const httplib::Request&, httplib::Response& res) { reply(res, health()); });
    server_.Get("/api/models", [this](const httplib::Request&, httplib::Response& res) { reply(res, models()); });
    server_.Post("/api/analyze", [this](const httplib::Request& req, httplib::Response& res) {
      reply(res, analyze(req.body));
    });
    server_.Post("/api/analyze-bag", [this](const httplib::Request& req, httplib::Response& res) {
      reply(res, analyze_bag(req.body));
    });
  }

  ModelRegistry registry_;
  ChatClient& client_;
  const TemplateLibrary& templates_;
  ServiceOptions opts_;
  httplib::Server server_;
};

}  // namespace mcmine
