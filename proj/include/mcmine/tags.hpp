#pragma once

// Extraction of `<tag>…</tag>` blocks from free-form model output.

#include <optional>
#include <string>
#include <string_view>

#include "mcmine/core_model.hpp"

namespace mcmine {

/// Inner text of the first `<tag>…</tag>` block, or nullopt when there is no
/// opening tag followed by a matching close.
inline std::optional<std::string_view> first_tag_block(std::string_view text, std::string_view tag) {
  const std::string open = "<" + std::string(tag) + ">";
  const std::string close = "</" + std::string(tag) + ">";
  const auto b = text.find(open);
  if (b == std::string_view::npos) return std::nullopt;
  const auto inner = b + open.size();
  const auto e = text.find(close, inner);
  if (e == std::string_view::npos) return std::nullopt;
  return text.substr(inner, e - inner);
}

inline std::string trimmed(std::string_view s) { return std::string(detail::trim_view(s)); }

}  // namespace mcmine
