#pragma once

// Injection of a misconception into a correct solution, validated by an LLM
// judge with a bounded feedback-refinement loop.

#include <optional>
#include <string>
#include <variant>

#include "mcmine/chat.hpp"
#include "mcmine/core_model.hpp"
#include "mcmine/postprocess.hpp"
#include "mcmine/prompt.hpp"
#include "mcmine/registry.hpp"
#include "mcmine/serialization.hpp"
#include "mcmine/tags.hpp"

namespace mcmine {

/// Shared handles every LLM-backed stage needs.
struct LlmContext {
  ChatClient& client;
  const TemplateLibrary& templates;
};

struct Injected {
  std::string code;
  bool refined = false;
  friend bool operator==(const Injected&, const Injected&) = default;
};
struct Inapplicable {
  friend bool operator==(const Inapplicable&, const Inapplicable&) = default;
};
struct Rejected {
  std::string last_feedback;
  friend bool operator==(const Rejected&, const Rejected&) = default;
};
using InjectionOutcome = std::variant<Injected, Inapplicable, Rejected>;

inline const char* outcome_name(const InjectionOutcome& o) {
  if (std::holds_alternative<Injected>(o)) return "injected";
  if (std::holds_alternative<Inapplicable>(o)) return "inapplicable";
  return "rejected";
}

/// What one injection completion yielded.
struct InjectReply {
  std::optional<std::string> code;  // nullopt = Inapplicable
  std::string raw;
};

namespace detail {

// Drops a ``` fence pair wrapped around the block body, if present.
inline std::string_view unfence(std::string_view body) {
  auto t = trim_view(body);
  if (!t.starts_with("```")) return body;
  const auto first_nl = t.find('\n');
  if (first_nl == std::string_view::npos) return body;
  auto inner = t.substr(first_nl + 1);
  const auto close = inner.rfind("```");
  if (close == std::string_view::npos) return body;
  return inner.substr(0, close);
}

inline std::string normalize_code_block(std::string_view body) {
  body = unfence(body);
  // leading blank lines and trailing whitespace go; indentation of the first line stays
  std::size_t start = 0;
  while (true) {
    const auto nl = body.find('\n', start);
    if (nl == std::string_view::npos) break;
    if (!trim_view(body.substr(start, nl - start)).empty()) break;
    start = nl + 1;
  }
  body = body.substr(start);
  const auto last = body.find_last_not_of(" \t\r\n\f\v");
  if (last == std::string_view::npos) return {};
  std::string out(body.substr(0, last + 1));
  out += '\n';
  return out;
}

}  // namespace detail

/// Parses an injection completion: the first `<code>` block, `NONE` meaning
/// inapplicable. Comments are stripped from returned code.
inline std::optional<std::string> parse_injection_output(std::string_view text) {
  const auto block = first_tag_block(text, "code");
  if (!block) throw ParseError("injection output has no <code>...</code> block");
  if (trimmed(*block) == "NONE") return std::nullopt;
  auto code = detail::normalize_code_block(*block);
  if (code.empty()) throw ParseError("injection output has an empty <code> block");
  return strip_comments_guarded(code);
}

inline Conversation injection_conversation(const Problem& problem, std::string_view solution,
                                           const Misconception& mc, const TemplateLibrary& templates) {
  return user_prompt(render(templates.get(prompts::kInject),
                            {{"problem_description", problem.description},
                             {"correct_solution", std::string(solution)},
                             {"misconception_description", mc.description},
                             {"misconception_example", mc.example_code}}));
}

inline InjectReply inject(const Problem& problem, std::string_view solution, const Misconception& mc,
                          const ModelConfig& cfg, const LlmContext& ctx) {
  const auto convo = injection_conversation(problem, solution, mc, ctx.templates);
  auto completion = ctx.client.complete(cfg, convo);
  return InjectReply{parse_injection_output(completion.text), std::move(completion.text)};
}

/// Strict grammar: the answer block must hold exactly `Y` or `N`.
inline JudgeVerdict parse_judge_output(std::string_view text) {
  const auto answer = first_tag_block(text, "answer");
  if (!answer) throw ParseError("judge output has no <answer> block");
  const auto flag = first_tag_block(*answer, "exhibits_misconception");
  if (!flag) throw ParseError("judge answer has no <exhibits_misconception> tag");
  const auto value = trimmed(*flag);
  JudgeVerdict v;
  if (value == "Y") {
    v.exhibits = true;
  } else if (value == "N") {
    v.exhibits = false;
  } else {
    throw ParseError("judge verdict must be Y or N, got '" + value + "'");
  }
  if (const auto fb = first_tag_block(*answer, "feedback")) {
    auto t = trimmed(*fb);
    if (!t.empty() && t != "NONE") v.feedback = std::move(t);
  }
  return v;
}

struct JudgeReply {
  JudgeVerdict verdict;
  std::string raw;
};

inline JudgeReply judge_exhibits(const Misconception& mc, std::string_view code,
                                 const ModelConfig& cfg, const LlmContext& ctx) {
  const auto prompt = render(ctx.templates.get(prompts::kJudge),
                             {{"misconception_description", mc.description},
                              {"misconception_example", mc.example_code},
                              {"code_to_analyze", std::string(code)}});
  auto completion = ctx.client.complete(cfg, user_prompt(prompt));
  return JudgeReply{parse_judge_output(completion.text), std::move(completion.text)};
}

struct InjectionSettings {
  ModelConfig inject_model = presets::injection_default();
  ModelConfig judge_model = presets::judge_default();
  int max_refinements = 1;
};

struct InjectionAttempt {
  InjectionOutcome outcome;
  std::string raw_first;
  std::optional<std::string> raw_second;
  std::optional<std::string> judge_feedback;  // last feedback seen
  std::optional<std::string> warning;         // set when a parse failure was absorbed
};

/// Inject, judge, and on a rejected verdict with feedback re-prompt inside the
/// same conversation, at most `max_refinements` times.
inline InjectionAttempt inject_with_refinement(const Problem& problem, std::string_view solution,
                                               const Misconception& mc,
                                               const InjectionSettings& settings,
                                               const LlmContext& ctx) {
  auto convo = injection_conversation(problem, solution, mc, ctx.templates);
  auto first = ctx.client.complete(settings.inject_model, convo);
  InjectionAttempt attempt{Inapplicable{}, first.text, std::nullopt, std::nullopt, std::nullopt};
  auto code = parse_injection_output(first.text);
  if (!code) return attempt;

  std::string last_reply = first.text;
  for (int round = 0;; ++round) {
    const auto verdict = judge_exhibits(mc, *code, settings.judge_model, ctx).verdict;
    if (verdict.exhibits) {
      attempt.outcome = Injected{*code, round > 0};
      return attempt;
    }
    attempt.judge_feedback = verdict.feedback;
    if (!verdict.feedback || round >= settings.max_refinements) {
      attempt.outcome = Rejected{verdict.feedback.value_or("")};
      return attempt;
    }
    convo.push_back(Message{Role::assistant, last_reply});
    convo.push_back(Message{Role::user, render(ctx.templates.get(prompts::kInjectRefine),
                                               {{"judge_feedback", *verdict.feedback}})});
    auto next = ctx.client.complete(settings.inject_model, convo);
    last_reply = next.text;
    attempt.raw_second = next.text;
    code = parse_injection_output(next.text);
    if (!code) {
      // giving up after critique is a rejection, not an inapplicable pair
      attempt.outcome = Rejected{*verdict.feedback};
      return attempt;
    }
  }
}

inline Json audit_record(const std::string& problem_id, const std::string& misconception_id,
                         const InjectionAttempt& a) {
  const auto* inj = std::get_if<Injected>(&a.outcome);
  return Json{{"problem_id", problem_id},
              {"misconception_id", misconception_id},
              {"outcome", outcome_name(a.outcome)},
              {"refined", inj ? inj->refined : false},
              {"raw_first", a.raw_first},
              {"raw_second", a.raw_second ? Json(*a.raw_second) : Json(nullptr)},
              {"judge_feedback", a.judge_feedback ? Json(*a.judge_feedback) : Json(nullptr)},
              {"warning", a.warning ? Json(*a.warning) : Json(nullptr)}};
}

}  // namespace mcmine
