#pragma once

// Domain types shared by every pipeline stage, plus pure structural checks.

#include <cstddef>
#include <cstdint>
#include <map>
#include <optional>
#include <set>
#include <string>
#include <string_view>
#include <variant>
#include <vector>

#include "mcmine/errors.hpp"

namespace mcmine {

enum class Category { harmful, benign };
enum class Origin { documented, artificial };

struct Misconception {
  std::string id;
  std::string description;
  std::string example_code;
  Category category = Category::harmful;
  Origin origin = Origin::documented;
  std::string source;

  friend bool operator==(const Misconception&, const Misconception&) = default;
};

struct Problem {
  std::string id;
  std::string description;
  std::vector<std::string> tests;
  std::string source;
  bool untested = false;

  friend bool operator==(const Problem&, const Problem&) = default;
};

struct SolutionSet {
  std::string problem_id;
  std::vector<std::string> solutions;

  friend bool operator==(const SolutionSet&, const SolutionSet&) = default;
};

struct ProblemCodePair {
  std::string problem_id;
  std::string code;
  std::optional<std::string> exhibits;  // absent for clean code

  friend bool operator==(const ProblemCodePair&, const ProblemCodePair&) = default;
};

struct Bag {
  std::string bag_id;
  std::vector<ProblemCodePair> pairs;
  std::optional<std::string> gt_label;  // absent = correct-only bag

  bool correct_only() const noexcept { return !gt_label.has_value(); }

  friend bool operator==(const Bag&, const Bag&) = default;
};

struct DatasetStats {
  std::uint64_t total_samples = 0;
  std::uint64_t samples_exhibiting = 0;
  std::uint64_t samples_clean = 0;
  std::uint64_t total_bags = 0;
  std::uint64_t bags_with_misconception = 0;
  std::uint64_t bags_correct_only = 0;

  friend bool operator==(const DatasetStats&, const DatasetStats&) = default;
};

struct Dataset {
  std::map<std::string, Misconception> misconceptions;
  std::map<std::string, Problem> problems;
  std::map<std::string, SolutionSet> solutions;
  std::vector<Bag> bags;
  std::uint64_t generation_seed = 0;
  DatasetStats stats;

  friend bool operator==(const Dataset&, const Dataset&) = default;
};

// ---------------------------------------------------------------------------
// Mining output and judge verdicts

struct FoundMisconception {
  std::string description;
  std::string explanation;

  friend bool operator==(const FoundMisconception&, const FoundMisconception&) = default;
};

struct NoneFound {
  friend bool operator==(const NoneFound&, const NoneFound&) = default;
};

using MiningPrediction = std::variant<FoundMisconception, NoneFound>;

inline bool is_found(const MiningPrediction& p) noexcept {
  return std::holds_alternative<FoundMisconception>(p);
}

inline const FoundMisconception* found(const MiningPrediction& p) noexcept {
  return std::get_if<FoundMisconception>(&p);
}

struct JudgeVerdict {
  bool exhibits = false;
  std::optional<std::string> feedback;

  friend bool operator==(const JudgeVerdict&, const JudgeVerdict&) = default;
};

// ---------------------------------------------------------------------------
// Model configuration

enum class Provider { openai, anthropic, gemini, mock };
enum class Effort { low, medium, high };

struct ReasoningOff {
  friend bool operator==(const ReasoningOff&, const ReasoningOff&) = default;
};
struct ReasoningBudget {
  int tokens = 0;
  friend bool operator==(const ReasoningBudget&, const ReasoningBudget&) = default;
};
struct ReasoningEffort {
  Effort level = Effort::medium;
  friend bool operator==(const ReasoningEffort&, const ReasoningEffort&) = default;
};
using Reasoning = std::variant<ReasoningOff, ReasoningBudget, ReasoningEffort>;

struct ModelConfig {
  std::string id;  // registry key, e.g. "sonnet-4.5-reasoning"
  Provider provider = Provider::mock;
  std::string model_name;
  double temperature = 0.1;
  int max_tokens = 4000;
  Reasoning reasoning = ReasoningOff{};

  bool reasoning_enabled() const noexcept {
    return !std::holds_alternative<ReasoningOff>(reasoning);
  }

  friend bool operator==(const ModelConfig&, const ModelConfig&) = default;
};

/// Throws ValidationError when max_tokens or the thinking budget is out of range.
inline void validate_model_config(const ModelConfig& cfg) {
  if (cfg.max_tokens <= 0) {
    throw ValidationError("model '" + cfg.id + "': max_tokens must be positive");
  }
  if (const auto* b = std::get_if<ReasoningBudget>(&cfg.reasoning)) {
    if (b->tokens <= 0 || b->tokens >= cfg.max_tokens) {
      throw ValidationError("model '" + cfg.id +
                            "': thinking budget must be in (0, max_tokens)");
    }
  }
}

// ---------------------------------------------------------------------------
// Description guideline checks

inline constexpr std::string_view kBeliefPrefix = "Student believes";

namespace detail {

inline std::string_view trim_view(std::string_view s) {
  const auto* ws = " \t\r\n\f\v";
  const auto b = s.find_first_not_of(ws);
  if (b == std::string_view::npos) return {};
  const auto e = s.find_last_not_of(ws);
  return s.substr(b, e - b + 1);
}

inline bool is_space(char c) noexcept {
  return c == ' ' || c == '\t' || c == '\n' || c == '\r' || c == '\f' || c == '\v';
}

}  // namespace detail

/// A terminator is one of . ! ? followed by whitespace or end of text, outside
/// backtick code spans. A single sentence has exactly one, at the very end.
inline bool is_single_sentence(std::string_view text) {
  const auto s = detail::trim_view(text);
  if (s.empty()) return false;
  std::size_t terminators = 0;
  std::size_t last_pos = std::string_view::npos;
  bool in_code = false;
  for (std::size_t i = 0; i < s.size(); ++i) {
    const char c = s[i];
    if (c == '`') {
      in_code = !in_code;
      continue;
    }
    if (in_code) continue;
    if (c == '.' || c == '!' || c == '?') {
      // runs like "..." or "?!" count once
      std::size_t j = i;
      while (j + 1 < s.size() && (s[j + 1] == '.' || s[j + 1] == '!' || s[j + 1] == '?')) ++j;
      if (j + 1 == s.size() || detail::is_space(s[j + 1])) {
        ++terminators;
        last_pos = j;
      }
      i = j;
    }
  }
  return terminators == 1 && last_pos == s.size() - 1;
}

inline bool has_belief_prefix(std::string_view text) {
  return detail::trim_view(text).starts_with(kBeliefPrefix);
}

// ---------------------------------------------------------------------------
// Dataset validation and statistics

struct Violation {
  std::string entity;  // offending key, e.g. "bag:b-0007"
  std::string message;

  std::string str() const { return entity + ": " + message; }
  friend bool operator==(const Violation&, const Violation&) = default;
};

struct BagBounds {
  std::size_t min_pairs = 4;
  std::size_t max_pairs = 8;
};

inline DatasetStats dataset_stats(const std::vector<Bag>& bags) {
  DatasetStats s;
  for (const auto& bag : bags) {
    ++s.total_bags;
    if (bag.gt_label) {
      ++s.bags_with_misconception;
    } else {
      ++s.bags_correct_only;
    }
    for (const auto& pair : bag.pairs) {
      ++s.total_samples;
      if (pair.exhibits) {
        ++s.samples_exhibiting;
      } else {
        ++s.samples_clean;
      }
    }
  }
  return s;
}

inline std::vector<Violation> validate_misconception(const Misconception& mc) {
  std::vector<Violation> out;
  const std::string who = "misconception:" + mc.id;
  if (mc.id.empty()) out.push_back({who, "empty id"});
  if (detail::trim_view(mc.description).empty()) {
    out.push_back({who, "description is empty"});
    return out;
  }
  if (!is_single_sentence(mc.description)) {
    out.push_back({who, "description must be exactly one sentence"});
  }
  if (!has_belief_prefix(mc.description)) {
    out.push_back({who, "description must start with \"Student believes\""});
  }
  return out;
}

inline std::vector<Violation> validate_dataset(const Dataset& d, BagBounds bounds = {}) {
  std::vector<Violation> out;
  auto add = [&out](std::string entity, std::string msg) {
    out.push_back({std::move(entity), std::move(msg)});
  };

  for (const auto& [key, mc] : d.misconceptions) {
    if (key != mc.id) add("misconception:" + key, "map key differs from id '" + mc.id + "'");
    for (auto& v : validate_misconception(mc)) out.push_back(std::move(v));
  }

  for (const auto& [key, p] : d.problems) {
    const std::string who = "problem:" + key;
    if (key != p.id) add(who, "map key differs from id '" + p.id + "'");
    if (detail::trim_view(p.description).empty()) add(who, "description is empty");
    if (p.tests.empty() && !p.untested) add(who, "no tests and not flagged untested");
  }

  for (const auto& [key, s] : d.solutions) {
    const std::string who = "solutions:" + key;
    if (key != s.problem_id) add(who, "map key differs from problem_id '" + s.problem_id + "'");
    if (!d.problems.contains(key)) add(who, "unknown problem");
    if (s.solutions.empty()) add(who, "solution set is empty");
  }

  std::set<std::string> seen_bags;
  for (const auto& bag : d.bags) {
    const std::string who = "bag:" + bag.bag_id;
    if (!seen_bags.insert(bag.bag_id).second) add(who, "duplicate bag_id");
    const auto n = bag.pairs.size();
    if (n < bounds.min_pairs || n > bounds.max_pairs) {
      add(who, "has " + std::to_string(n) + " pairs, expected " +
                   std::to_string(bounds.min_pairs) + ".." + std::to_string(bounds.max_pairs));
    }
    if (bag.gt_label) {
      if (!d.misconceptions.contains(*bag.gt_label)) {
        add(who, "unknown gt misconception '" + *bag.gt_label + "'");
      }
      bool any = false;
      for (const auto& pair : bag.pairs) any = any || pair.exhibits == bag.gt_label;
      if (!any) add(who, "labeled bag has no pair exhibiting '" + *bag.gt_label + "'");
    }
    for (std::size_t i = 0; i < bag.pairs.size(); ++i) {
      const auto& pair = bag.pairs[i];
      const std::string pwho = who + "#" + std::to_string(i);
      if (!d.problems.contains(pair.problem_id)) {
        add(pwho, "unknown problem '" + pair.problem_id + "'");
      }
      if (pair.code.empty()) add(pwho, "empty code");
      if (pair.exhibits && !d.misconceptions.contains(*pair.exhibits)) {
        add(pwho, "unknown misconception '" + *pair.exhibits + "'");
      }
      if (pair.exhibits && pair.exhibits != bag.gt_label) {
        add(pwho, "exhibits '" + *pair.exhibits + "' but the bag is labeled " +
                      (bag.gt_label ? "'" + *bag.gt_label + "'" : std::string("correct-only")));
      }
    }
  }

  const auto& s = d.stats;
  if (s.total_samples != s.samples_exhibiting + s.samples_clean) {
    add("stats", "total_samples != samples_exhibiting + samples_clean");
  }
  if (s.total_bags != s.bags_with_misconception + s.bags_correct_only) {
    add("stats", "total_bags != bags_with_misconception + bags_correct_only");
  }
  if (dataset_stats(d.bags) != s) add("stats:recount", "stored stats differ from a recount of the bags");
  return out;
}

}  // namespace mcmine
