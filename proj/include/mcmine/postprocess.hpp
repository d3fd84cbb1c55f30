#pragma once

// Comment stripping and tokenizer-level hygiene checks for student code.

#include <string>
#include <string_view>
#include <vector>

#include "mcmine/errors.hpp"
#include "mcmine/tokenizer.hpp"

namespace mcmine {

class TokenizeError : public Error {
 public:
  explicit TokenizeError(Diagnostic d)
      : Error("line " + std::to_string(d.line) + ": " + d.message), diagnostic_(std::move(d)) {}
  const Diagnostic& diagnostic() const noexcept { return diagnostic_; }

 private:
  Diagnostic diagnostic_;
};

struct StripResult {
  std::string text;
  std::vector<int> line_map;  // output line i (0-based) came from input line line_map[i] (1-based)
};

namespace detail {

struct PhysicalLine {
  std::size_t begin;
  std::size_t content_end;  // before the terminator
  std::size_t end;          // after the terminator
};

inline std::vector<PhysicalLine> physical_lines(std::string_view src) {
  std::vector<PhysicalLine> lines;
  std::size_t pos = 0;
  while (pos < src.size()) {
    const auto nl = src.find('\n', pos);
    if (nl == std::string_view::npos) {
      lines.push_back({pos, src.size(), src.size()});
      break;
    }
    const auto content_end = nl > pos && src[nl - 1] == '\r' ? nl - 1 : nl;
    lines.push_back({pos, content_end, nl + 1});
    pos = nl + 1;
  }
  return lines;
}

}  // namespace detail

/// Removes every `#` comment together with the whitespace before it. Lines
/// left empty by the removal are dropped; all other bytes are kept.
inline StripResult strip_comments_mapped(std::string_view src) {
  const auto ts = tokenize(src);
  for (const auto& d : ts.diagnostics) {
    if (d.kind == DiagnosticKind::unterminated_string) throw TokenizeError(d);
  }

  StripResult out;
  out.text.reserve(src.size());
  std::size_t next_comment = 0;
  std::vector<const Token*> comments;
  for (const auto& t : ts.tokens) {
    if (t.kind == TokenKind::comment) comments.push_back(&t);
  }

  int lineno = 0;
  for (const auto& line : detail::physical_lines(src)) {
    ++lineno;
    const Token* c = nullptr;
    if (next_comment < comments.size() && comments[next_comment]->begin < line.end) {
      c = comments[next_comment++];
    }
    if (!c) {
      out.text.append(src.substr(line.begin, line.end - line.begin));
      out.line_map.push_back(lineno);
      continue;
    }
    auto cut = c->begin;
    while (cut > line.begin && (src[cut - 1] == ' ' || src[cut - 1] == '\t' || src[cut - 1] == '\f')) {
      --cut;
    }
    if (cut == line.begin) continue;  // comment-only line
    out.text.append(src.substr(line.begin, cut - line.begin));
    out.text.append(src.substr(line.content_end, line.end - line.content_end));
    out.line_map.push_back(lineno);
  }
  return out;
}

inline std::string strip_comments(std::string_view src) { return strip_comments_mapped(src).text; }

/// Hygiene checks only: balanced brackets, terminated strings, a consistent
/// indentation stack and no stray characters. Passing does not mean the code
/// parses.
inline std::vector<Diagnostic> validate_syntax(std::string_view src) {
  auto diags = tokenize(src).diagnostics;
  std::stable_sort(diags.begin(), diags.end(),
                   [](const Diagnostic& a, const Diagnostic& b) { return a.line < b.line; });
  return diags;
}

inline bool same_significant_tokens(std::string_view a, std::string_view b) {
  const auto ta = significant_tokens(tokenize(a));
  const auto tb = significant_tokens(tokenize(b));
  if (ta.size() != tb.size()) return false;
  for (std::size_t i = 0; i < ta.size(); ++i) {
    if (ta[i].kind != tb[i].kind) return false;
    // newline text may differ only when the final terminator is absent
    if (ta[i].kind != TokenKind::newline && ta[i].text != tb[i].text) return false;
  }
  return true;
}

/// Strips comments only if the result keeps the code token stream intact;
/// otherwise (or when the source does not tokenize) returns the input as is.
inline std::string strip_comments_guarded(std::string_view src, bool* changed = nullptr) {
  std::string result;
  try {
    result = strip_comments(src);
  } catch (const TokenizeError&) {
    if (changed) *changed = false;
    return std::string(src);
  }
  if (!same_significant_tokens(src, result)) {
    if (changed) *changed = false;
    return std::string(src);
  }
  if (changed) *changed = result != src;
  return result;
}

}  // namespace mcmine
