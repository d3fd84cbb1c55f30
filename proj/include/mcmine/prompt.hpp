#pragma once

// `{placeholder}` prompt templates, loaded from text assets at runtime.

#include <cstdlib>
#include <filesystem>
#include <map>
#include <mutex>
#include <set>
#include <string>
#include <string_view>
#include <vector>

#include "mcmine/errors.hpp"
#include "mcmine/serialization.hpp"

#ifndef MCMINE_DEFAULT_PROMPT_DIR
#define MCMINE_DEFAULT_PROMPT_DIR "assets/prompts"
#endif

namespace mcmine {

using Bindings = std::map<std::string, std::string>;

namespace detail {

inline bool is_ident_start(char c) noexcept {
  return (c >= 'a' && c <= 'z') || (c >= 'A' && c <= 'Z') || c == '_';
}
inline bool is_ident_char(char c) noexcept {
  return is_ident_start(c) || (c >= '0' && c <= '9');
}

struct PlaceholderSite {
  std::size_t begin;  // offset of '{'
  std::size_t end;    // one past '}'
  std::string_view name;
};

/// Every `{identifier}` occurrence, left to right, non-overlapping.
inline std::vector<PlaceholderSite> placeholder_sites(std::string_view body) {
  std::vector<PlaceholderSite> sites;
  for (std::size_t i = 0; i < body.size(); ++i) {
    if (body[i] != '{' || i + 1 >= body.size() || !is_ident_start(body[i + 1])) continue;
    std::size_t j = i + 1;
    while (j < body.size() && is_ident_char(body[j])) ++j;
    if (j < body.size() && body[j] == '}') {
      sites.push_back({i, j + 1, body.substr(i + 1, j - i - 1)});
      i = j;
    }
  }
  return sites;
}

}  // namespace detail

struct PromptTemplate {
  std::string name;
  std::string body;
  std::set<std::string> required;
};

/// Every placeholder name that occurs in `body`.
inline std::set<std::string> placeholders_in(std::string_view body) {
  std::set<std::string> out;
  for (const auto& site : detail::placeholder_sites(body)) out.emplace(site.name);
  return out;
}

/// Builds a template; each required name must occur in the body.
inline PromptTemplate make_template(std::string name, std::string body,
                                    std::set<std::string> required) {
  const auto present = placeholders_in(body);
  for (const auto& r : required) {
    if (!present.contains(r)) {
      throw ValidationError("template '" + name + "': required placeholder {" + r +
                            "} does not occur in body");
    }
  }
  return PromptTemplate{std::move(name), std::move(body), std::move(required)};
}

struct RenderResult {
  std::string text;
  std::vector<std::string> unknown;  // placeholder sites left intact
};

/// Single left-to-right pass; substituted text is never re-scanned.
inline RenderResult render_checked(const PromptTemplate& t, const Bindings& bindings) {
  for (const auto& r : t.required) {
    if (!bindings.contains(r)) throw MissingBinding(r);
  }
  RenderResult out;
  out.text.reserve(t.body.size());
  std::size_t pos = 0;
  for (const auto& site : detail::placeholder_sites(t.body)) {
    out.text.append(t.body, pos, site.begin - pos);
    const auto it = bindings.find(std::string(site.name));
    if (it != bindings.end()) {
      out.text += it->second;
    } else {
      out.text.append(t.body, site.begin, site.end - site.begin);
      out.unknown.emplace_back(site.name);
    }
    pos = site.end;
  }
  out.text.append(t.body, pos, std::string::npos);
  return out;
}

inline std::string render(const PromptTemplate& t, const Bindings& bindings) {
  return render_checked(t, bindings).text;
}

// ---------------------------------------------------------------------------

namespace prompts {
inline constexpr const char* kInject = "mcinject";
inline constexpr const char* kInjectRefine = "mcinject_refine";
inline constexpr const char* kJudge = "mcinject_judge";
inline constexpr const char* kMinerSingle = "mcminer_s";
inline constexpr const char* kMinerMulti = "mcminer_m";
inline constexpr const char* kMinerMultiSample = "mcminer_m_sample";
inline constexpr const char* kSemanticMatch = "semantic_match";
inline constexpr const char* kCodeSample = "code_sample";
}  // namespace prompts

/// Required bindings per shipped template. Asset files may add optional
/// placeholders but must keep these.
inline const std::map<std::string, std::set<std::string>>& required_bindings() {
  static const std::map<std::string, std::set<std::string>> table{
      {prompts::kInject,
       {"problem_description", "correct_solution", "misconception_description",
        "misconception_example"}},
      {prompts::kInjectRefine, {"judge_feedback"}},
      {prompts::kJudge, {"misconception_description", "misconception_example", "code_to_analyze"}},
      {prompts::kMinerSingle, {"problem_description", "student_code"}},
      {prompts::kMinerMulti, {"samples"}},
      {prompts::kMinerMultiSample, {"index", "problem_description", "student_code"}},
      {prompts::kSemanticMatch, {"ground_truth", "predicted_misconception", "code_samples"}},
      {prompts::kCodeSample, {"index", "code"}},
  };
  return table;
}

inline std::filesystem::path default_prompt_dir() {
  if (const char* env = std::getenv("MCMINE_PROMPT_DIR"); env && *env) return env;
  return MCMINE_DEFAULT_PROMPT_DIR;
}

/// Loads `<dir>/<name>.txt` lazily and caches it. Thread-safe.
class TemplateLibrary {
 public:
  explicit TemplateLibrary(std::filesystem::path dir = default_prompt_dir())
      : dir_(std::move(dir)) {}

  const PromptTemplate& get(const std::string& name) const {
    std::lock_guard lock(mu_);
    if (auto it = cache_.find(name); it != cache_.end()) return it->second;
    const auto& table = required_bindings();
    auto req_it = table.find(name);
    auto required = req_it == table.end() ? std::set<std::string>{} : req_it->second;
    auto body = read_file(dir_ / (name + ".txt"));
    return cache_.emplace(name, make_template(name, std::move(body), std::move(required)))
        .first->second;
  }

  /// Registers an in-memory template, overriding any asset of the same name.
  void put(PromptTemplate t) {
    std::lock_guard lock(mu_);
    cache_.insert_or_assign(t.name, std::move(t));
  }

  const std::filesystem::path& dir() const noexcept { return dir_; }

 private:
  std::filesystem::path dir_;
  mutable std::mutex mu_;
  mutable std::map<std::string, PromptTemplate> cache_;
};

}  // namespace mcmine
