#pragma once

#include <optional>
#include <string>
#include <vector>

#include "mcmine/core_model.hpp"

namespace mcmine {

enum class Role { system, user, assistant };

inline const char* to_string(Role r) {
  switch (r) {
    case Role::system: return "system";
    case Role::user: return "user";
    case Role::assistant: return "assistant";
  }
  return "user";
}

struct Message {
  Role role = Role::user;
  std::string content;

  friend bool operator==(const Message&, const Message&) = default;
};

using Conversation = std::vector<Message>;

struct Usage {
  int input_tokens = 0;
  int output_tokens = 0;

  friend bool operator==(const Usage&, const Usage&) = default;
};

struct Completion {
  std::string text;
  std::optional<std::string> reasoning_trace;
  std::optional<Usage> usage;

  friend bool operator==(const Completion&, const Completion&) = default;
};

/// Anything that turns a conversation into a completion: hosted providers,
/// the scripted mock, recording wrappers and test fakes.
class ChatClient {
 public:
  virtual ~ChatClient() = default;
  virtual Completion complete(const ModelConfig& config, const Conversation& convo) = 0;
};

/// Text the mock backend matches against: message contents joined by a blank line.
inline std::string conversation_text(const Conversation& convo) {
  std::string out;
  for (std::size_t i = 0; i < convo.size(); ++i) {
    if (i) out += "\n\n";
    out += convo[i].content;
  }
  return out;
}

inline Conversation user_prompt(std::string text) {
  return Conversation{Message{Role::user, std::move(text)}};
}

}  // namespace mcmine
