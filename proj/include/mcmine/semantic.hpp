#pragma once

// LLM semantic matching of two misconception descriptions against the code
// they were drawn from. Shared by judge-based clustering and evaluation.

#include <cctype>
#include <string>
#include <string_view>
#include <vector>

#include "mcmine/core_model.hpp"
#include "mcmine/mcinject.hpp"
#include "mcmine/prompt.hpp"
#include "mcmine/tags.hpp"

namespace mcmine {

inline constexpr const char* kNoMisconception = "NO MISCONCEPTION";

/// Code of every pair as numbered sections, in bag order.
inline std::string render_code_samples(const Bag& bag, const TemplateLibrary& templates) {
  const auto& t = templates.get(prompts::kCodeSample);
  std::string out;
  for (std::size_t i = 0; i < bag.pairs.size(); ++i) {
    if (i) out += "\n";
    out += render(t, {{"index", std::to_string(i + 1)}, {"code", bag.pairs[i].code}});
  }
  return out;
}

inline std::string describe(const Misconception& mc) {
  if (detail::trim_view(mc.example_code).empty()) return mc.description;
  return mc.description + "\n\nExample:\n" + mc.example_code;
}

inline std::string describe(const FoundMisconception& f) {
  return "Description: " + f.description + "\nExplanation: " + f.explanation;
}

inline bool parse_match_output(std::string_view text) {
  const auto eval = first_tag_block(text, "evaluation");
  if (!eval) throw ParseError("semantic match output has no <evaluation> block");
  const auto m = first_tag_block(*eval, "match");
  if (!m) throw ParseError("semantic match output has no <match> tag");
  auto v = trimmed(*m);
  for (auto& c : v) c = static_cast<char>(std::tolower(static_cast<unsigned char>(c)));
  if (v == "true") return true;
  if (v == "false") return false;
  throw ParseError("semantic match must be true or false, got '" + v + "'");
}

/// One semantic-match completion, no short-circuits.
inline bool llm_semantic_match(const std::string& ground_truth, const std::string& predicted,
                               const std::string& code_samples, const ModelConfig& cfg,
                               const LlmContext& ctx) {
  const auto prompt = render(ctx.templates.get(prompts::kSemanticMatch),
                             {{"ground_truth", ground_truth},
                              {"predicted_misconception", predicted},
                              {"code_samples", code_samples}});
  return parse_match_output(ctx.client.complete(cfg, user_prompt(prompt)).text);
}

}  // namespace mcmine
