#pragma once

// Tokenizer for the student-code corpus language (Python). Covers what comment
// stripping and hygiene checks need: strings with prefixes and triple quotes,
// comments, brackets, line continuations and the indentation stack. It is not
// a parser and never throws; problems are reported as diagnostics.

#include <algorithm>
#include <cstddef>
#include <string>
#include <string_view>
#include <vector>

namespace mcmine {

enum class TokenKind {
  name,
  number,
  string,
  op,
  comment,
  newline,  // ends a logical line
  nl,       // blank line, comment-only line, or newline inside brackets
  indent,
  dedent,
  error,
  end_marker,
};

struct Token {
  TokenKind kind;
  std::size_t begin = 0;  // byte offsets into the source
  std::size_t end = 0;
  int line = 1;  // 1-based line of the first byte
  std::string_view text;
};

enum class DiagnosticKind { unbalanced_delimiter, unterminated_string, inconsistent_indent, stray_token };

inline const char* to_string(DiagnosticKind k) {
  switch (k) {
    case DiagnosticKind::unbalanced_delimiter: return "unbalanced_delimiter";
    case DiagnosticKind::unterminated_string: return "unterminated_string";
    case DiagnosticKind::inconsistent_indent: return "inconsistent_indent";
    case DiagnosticKind::stray_token: return "stray_token";
  }
  return "stray_token";
}

struct Diagnostic {
  int line = 0;
  DiagnosticKind kind = DiagnosticKind::stray_token;
  std::string message;

  friend bool operator==(const Diagnostic&, const Diagnostic&) = default;
};

struct TokenStream {
  std::vector<Token> tokens;
  std::vector<Diagnostic> diagnostics;
};

/// A tab advances the indentation column to the next multiple of this.
inline constexpr int kTabSize = 8;

namespace detail {

class Lexer {
 public:
  explicit Lexer(std::string_view src) : src_(src) {}

  TokenStream run() {
    while (pos_ < src_.size()) {
      if (!continued_ && brackets_.empty()) {
        if (!line_start()) continue;
      }
      continued_ = false;
      scan_rest_of_line();
    }
    finish();
    return std::move(out_);
  }

 private:
  struct Open {
    char c;
    int line;
  };

  std::string_view src_;
  std::size_t pos_ = 0;
  int line_ = 1;
  bool continued_ = false;
  bool logical_open_ = false;  // code tokens seen since the last NEWLINE
  std::vector<int> indents_{0};
  std::vector<Open> brackets_;
  TokenStream out_;

  char peek(std::size_t k = 0) const { return pos_ + k < src_.size() ? src_[pos_ + k] : '\0'; }
  bool at_eol() const { return pos_ >= src_.size() || peek() == '\n' || (peek() == '\r' && peek(1) == '\n'); }

  void emit(TokenKind kind, std::size_t begin, std::size_t end, int line) {
    out_.tokens.push_back(Token{kind, begin, end, line, src_.substr(begin, end - begin)});
    switch (kind) {
      case TokenKind::name:
      case TokenKind::number:
      case TokenKind::string:
      case TokenKind::op:
      case TokenKind::error: logical_open_ = true; break;
      case TokenKind::newline: logical_open_ = false; break;
      default: break;
    }
  }

  void diag(int line, DiagnosticKind kind, std::string msg) {
    out_.diagnostics.push_back(Diagnostic{line, kind, std::move(msg)});
  }

  // Consumes a line terminator at pos_, if any, and emits kind.
  void newline_token(TokenKind kind) {
    const auto begin = pos_;
    if (peek() == '\r') ++pos_;
    if (peek() == '\n') ++pos_;
    emit(kind, begin, pos_, line_);
    ++line_;
  }

  // Handles indentation at the start of a logical line. Returns false when the
  // line was blank or comment-only and has been fully consumed.
  bool line_start() {
    int column = 0;
    while (pos_ < src_.size()) {
      const char c = peek();
      if (c == ' ') {
        ++column;
      } else if (c == '\t') {
        column = (column / kTabSize + 1) * kTabSize;
      } else if (c == '\f') {
        column = 0;
      } else {
        break;
      }
      ++pos_;
    }
    if (pos_ >= src_.size()) return false;
    if (peek() == '#') {
      comment();
      if (pos_ < src_.size()) newline_token(TokenKind::nl);
      return false;
    }
    if (at_eol()) {
      newline_token(TokenKind::nl);
      return false;
    }
    if (peek() == '\\' && (peek(1) == '\n' || (peek(1) == '\r' && peek(2) == '\n'))) {
      // a line that starts with a continuation takes its indentation from the next line
      return true;
    }
    if (column > indents_.back()) {
      indents_.push_back(column);
      emit(TokenKind::indent, pos_, pos_, line_);
    } else if (column < indents_.back()) {
      while (column < indents_.back()) {
        indents_.pop_back();
        emit(TokenKind::dedent, pos_, pos_, line_);
      }
      if (column != indents_.back()) {
        diag(line_, DiagnosticKind::inconsistent_indent,
             "dedent to column " + std::to_string(column) + " matches no outer indentation level");
        indents_.push_back(column);
      }
    }
    return true;
  }

  void comment() {
    const auto begin = pos_;
    while (pos_ < src_.size() && peek() != '\n' && !(peek() == '\r' && peek(1) == '\n')) ++pos_;
    emit(TokenKind::comment, begin, pos_, line_);
  }

  void scan_rest_of_line() {
    while (pos_ < src_.size()) {
      const char c = peek();
      if (c == ' ' || c == '\t' || c == '\f') {
        ++pos_;
        continue;
      }
      if (c == '#') {
        comment();
        continue;
      }
      if (at_eol()) {
        newline_token(brackets_.empty() && logical_open_ ? TokenKind::newline : TokenKind::nl);
        return;
      }
      if (c == '\\') {
        if (peek(1) == '\n' || (peek(1) == '\r' && peek(2) == '\n')) {
          pos_ += peek(1) == '\r' ? 3 : 2;
          ++line_;
          continued_ = true;
          return;
        }
        stray(pos_, pos_ + 1);
        continue;
      }
      if (is_digit(c) || (c == '.' && is_digit(peek(1)))) {
        number();
      } else if (is_name_start(c)) {
        name_or_string();
      } else if (c == '"' || c == '\'') {
        string_literal(pos_);
      } else if (!op()) {
        stray(pos_, pos_ + 1);
      }
    }
  }

  void finish() {
    for (const auto& open : brackets_) {
      diag(open.line, DiagnosticKind::unbalanced_delimiter,
           std::string("'") + open.c + "' is never closed");
    }
    if (logical_open_) emit(TokenKind::newline, pos_, pos_, line_);
    while (indents_.size() > 1) {
      indents_.pop_back();
      emit(TokenKind::dedent, pos_, pos_, line_);
    }
    emit(TokenKind::end_marker, pos_, pos_, line_);
  }

  static bool is_digit(char c) { return c >= '0' && c <= '9'; }
  static bool is_name_start(char c) {
    return (c >= 'a' && c <= 'z') || (c >= 'A' && c <= 'Z') || c == '_' ||
           static_cast<unsigned char>(c) >= 0x80;
  }
  static bool is_name_char(char c) { return is_name_start(c) || is_digit(c); }

  void number() {
    const auto begin = pos_;
    const bool hex = peek() == '0' && (peek(1) == 'x' || peek(1) == 'X');
    while (pos_ < src_.size()) {
      const char c = peek();
      if (is_name_char(c) || c == '.') {
        ++pos_;
      } else if ((c == '+' || c == '-') && !hex && pos_ > begin &&
                 (src_[pos_ - 1] == 'e' || src_[pos_ - 1] == 'E')) {
        ++pos_;
      } else {
        break;
      }
    }
    emit(TokenKind::number, begin, pos_, line_);
  }

  void name_or_string() {
    const auto begin = pos_;
    while (pos_ < src_.size() && is_name_char(peek())) ++pos_;
    if ((peek() == '"' || peek() == '\'') && is_string_prefix(src_.substr(begin, pos_ - begin))) {
      string_literal(begin);
      return;
    }
    emit(TokenKind::name, begin, pos_, line_);
  }

  static bool is_string_prefix(std::string_view p) {
    if (p.empty() || p.size() > 2) return false;
    std::string lower;
    for (char c : p) lower += static_cast<char>(c >= 'A' && c <= 'Z' ? c + 32 : c);
    static constexpr std::string_view ok[] = {"r", "u", "b", "f", "br", "rb", "fr", "rf"};
    return std::find(std::begin(ok), std::end(ok), lower) != std::end(ok);
  }

  // pos_ is at the opening quote; begin includes any prefix.
  void string_literal(std::size_t begin) {
    const int start_line = line_;
    const char q = peek();
    const bool triple = peek(1) == q && peek(2) == q;
    pos_ += triple ? 3 : 1;
    while (pos_ < src_.size()) {
      const char c = peek();
      if (c == '\\') {
        if (peek(1) == '\n') ++line_;
        if (peek(1) == '\r' && peek(2) == '\n') {
          ++line_;
          ++pos_;
        }
        pos_ += 2;
        continue;
      }
      if (c == q) {
        if (!triple) {
          ++pos_;
          emit(TokenKind::string, begin, pos_, start_line);
          return;
        }
        if (peek(1) == q && peek(2) == q) {
          pos_ += 3;
          emit(TokenKind::string, begin, pos_, start_line);
          return;
        }
      }
      if (c == '\n') {
        if (!triple) break;
        ++line_;
      }
      if (!triple && c == '\r' && peek(1) == '\n') break;
      ++pos_;
    }
    pos_ = std::min(pos_, src_.size());
    diag(start_line, DiagnosticKind::unterminated_string,
         triple ? "triple-quoted string is never closed" : "string literal is not closed on its line");
    emit(TokenKind::error, begin, pos_, start_line);
  }

  bool op() {
    static constexpr std::string_view three[] = {"**=", "//=", ">>=", "<<=", "..."};
    static constexpr std::string_view two[] = {"**", "//", "<<", ">>", "<=", ">=", "==", "!=", "->",
                                               "+=", "-=", "*=", "/=", "%=", "&=", "|=", "^=", "@=",
                                               ":="};
    static constexpr std::string_view one = "+-*/%@&|^~<>()[]{},:;.=";
    const auto rest = src_.substr(pos_);
    for (auto t : three) {
      if (rest.starts_with(t)) return take_op(t.size());
    }
    for (auto t : two) {
      if (rest.starts_with(t)) return take_op(t.size());
    }
    if (one.find(peek()) == std::string_view::npos) return false;
    const char c = peek();
    if (c == '(' || c == '[' || c == '{') {
      brackets_.push_back({c, line_});
    } else if (c == ')' || c == ']' || c == '}') {
      const char want = c == ')' ? '(' : c == ']' ? '[' : '{';
      if (brackets_.empty()) {
        diag(line_, DiagnosticKind::unbalanced_delimiter, std::string("unmatched '") + c + "'");
      } else {
        if (brackets_.back().c != want) {
          diag(line_, DiagnosticKind::unbalanced_delimiter,
               std::string("'") + c + "' does not match '" + brackets_.back().c + "' opened on line " +
                   std::to_string(brackets_.back().line));
        }
        brackets_.pop_back();
      }
    }
    return take_op(1);
  }

  bool take_op(std::size_t n) {
    emit(TokenKind::op, pos_, pos_ + n, line_);
    pos_ += n;
    return true;
  }

  void stray(std::size_t begin, std::size_t end) {
    diag(line_, DiagnosticKind::stray_token,
         "unexpected character '" + std::string(src_.substr(begin, end - begin)) + "'");
    emit(TokenKind::error, begin, end, line_);
    pos_ = end;
  }
};

}  // namespace detail

inline TokenStream tokenize(std::string_view src) { return detail::Lexer(src).run(); }

/// Tokens that carry program meaning: everything but comments, non-logical
/// newlines and the end marker.
inline std::vector<Token> significant_tokens(const TokenStream& ts) {
  std::vector<Token> out;
  for (const auto& t : ts.tokens) {
    if (t.kind == TokenKind::comment || t.kind == TokenKind::nl || t.kind == TokenKind::end_marker) {
      continue;
    }
    out.push_back(t);
  }
  return out;
}

}  // namespace mcmine
