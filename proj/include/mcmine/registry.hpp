#pragma once

// Named model presets and the registry file that maps ids to ModelConfig.

#include <cstdlib>
#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "mcmine/core_model.hpp"
#include "mcmine/serialization.hpp"

namespace mcmine {

namespace presets {

inline ModelConfig o3_mini(Effort level) {
  // output budget 4000 plus 3000 (low) or 5000 (medium) reasoning tokens
  const int max_tokens = level == Effort::low ? 7000 : level == Effort::medium ? 9000 : 12000;
  return ModelConfig{"o3-mini-" + to_string(level), Provider::openai, "o3-mini", 1.0, max_tokens,
                     ReasoningEffort{level}};
}

inline ModelConfig sonnet() {
  return ModelConfig{"sonnet-4.5", Provider::anthropic, "claude-sonnet-4-5", 0.1, 4000, ReasoningOff{}};
}

inline ModelConfig sonnet_reasoning() {
  return ModelConfig{"sonnet-4.5-reasoning", Provider::anthropic, "claude-sonnet-4-5", 1.0, 6000,
                     ReasoningBudget{2000}};
}

inline ModelConfig gemini_flash() {
  return ModelConfig{"gemini-2.5-flash", Provider::gemini, "gemini-2.5-flash", 0.1, 4000,
                     ReasoningOff{}};
}

inline ModelConfig gemini_flash_reasoning() {
  return ModelConfig{"gemini-2.5-flash-reasoning", Provider::gemini, "gemini-2.5-flash", 0.1, 6000,
                     ReasoningBudget{2000}};
}

inline ModelConfig mock() {
  return ModelConfig{"mock", Provider::mock, "scripted", 0.0, 4000, ReasoningOff{}};
}

/// Injection and judge default: the reasoning-enabled Sonnet profile.
inline ModelConfig injection_default() { return sonnet_reasoning(); }
inline ModelConfig judge_default() { return sonnet_reasoning(); }

}  // namespace presets

struct RegistryEntry {
  ModelConfig config;
  std::optional<std::string> reasoning_variant;  // id to use when reasoning is requested
};

class ModelRegistry {
 public:
  static ModelRegistry builtin() {
    ModelRegistry r;
    r.add({presets::o3_mini(Effort::low), std::nullopt});
    r.add({presets::o3_mini(Effort::medium), std::nullopt});
    r.add({presets::sonnet(), std::string("sonnet-4.5-reasoning")});
    r.add({presets::sonnet_reasoning(), std::nullopt});
    r.add({presets::gemini_flash(), std::string("gemini-2.5-flash-reasoning")});
    r.add({presets::gemini_flash_reasoning(), std::nullopt});
    r.add({presets::mock(), std::nullopt});
    return r;
  }

  /// Registry file: {"models":[{<ModelConfig fields>, "reasoning_variant": id?}, ...]}
  static ModelRegistry from_json(const Json& j) {
    if (!j.is_object() || !j.contains("models") || !j.at("models").is_array()) {
      throw ValidationError("model registry: expected {\"models\": [...]}");
    }
    ModelRegistry r;
    for (const auto& m : j.at("models")) {
      RegistryEntry e{model_config_from_json(m), std::nullopt};
      if (m.contains("reasoning_variant") && m.at("reasoning_variant").is_string()) {
        e.reasoning_variant = m.at("reasoning_variant").get<std::string>();
      }
      r.add(std::move(e));
    }
    for (const auto& [id, e] : r.entries_) {
      if (e.reasoning_variant && !r.entries_.contains(*e.reasoning_variant)) {
        throw ValidationError("model registry: '" + id + "' names unknown reasoning variant '" +
                              *e.reasoning_variant + "'");
      }
    }
    return r;
  }

  static ModelRegistry load(const std::filesystem::path& path) {
    return from_json(parse_json(read_file(path), path.string()));
  }

  /// Registry from $MCMINE_CONFIG when set, otherwise the built-in presets.
  static ModelRegistry from_environment() {
    if (const char* p = std::getenv("MCMINE_CONFIG"); p && *p) return load(p);
    return builtin();
  }

  void add(RegistryEntry e) {
    validate_model_config(e.config);
    const auto id = e.config.id;
    if (!entries_.contains(id)) order_.push_back(id);
    entries_.insert_or_assign(id, std::move(e));
  }

  bool contains(const std::string& id) const { return entries_.contains(id); }

  const ModelConfig& get(const std::string& id) const {
    const auto it = entries_.find(id);
    if (it == entries_.end()) throw ValidationError("unknown model id '" + id + "'");
    return it->second.config;
  }

  /// The config to run for `id`, switching to its reasoning variant on request.
  const ModelConfig& resolve(const std::string& id, bool reasoning) const {
    const auto it = entries_.find(id);
    if (it == entries_.end()) throw ValidationError("unknown model id '" + id + "'");
    if (reasoning && it->second.reasoning_variant) return get(*it->second.reasoning_variant);
    return it->second.config;
  }

  bool supports_reasoning(const std::string& id) const {
    const auto& e = entries_.at(id);
    return e.config.reasoning_enabled() || e.reasoning_variant.has_value();
  }

  const std::vector<std::string>& ids() const noexcept { return order_; }

 private:
  std::map<std::string, RegistryEntry> entries_;
  std::vector<std::string> order_;
};

}  // namespace mcmine
