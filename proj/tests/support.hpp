#pragma once

#include <atomic>
#include <filesystem>
#include <functional>
#include <mutex>
#include <random>
#include <string>
#include <vector>

#include "mcmine/chat.hpp"
#include "mcmine/core_model.hpp"
#include "mcmine/prompt.hpp"
#include "mcmine/serialization.hpp"

namespace mcmine::testing {

inline const std::filesystem::path kData = MCMINE_TEST_DATA;

/// Replies via a callback and keeps every conversation it was sent.
class FakeClient final : public ChatClient {
 public:
  using Responder = std::function<Completion(const ModelConfig&, const Conversation&)>;
  explicit FakeClient(Responder r) : respond_(std::move(r)) {}

  static FakeClient text(std::function<std::string(const std::string& prompt)> fn) {
    return FakeClient([fn = std::move(fn)](const ModelConfig&, const Conversation& c) {
      return Completion{fn(conversation_text(c)), std::nullopt, std::nullopt};
    });
  }

  Completion complete(const ModelConfig& cfg, const Conversation& convo) override {
    {
      std::lock_guard lock(mu_);
      seen_.push_back(convo);
    }
    return respond_(cfg, convo);
  }

  std::size_t calls() const {
    std::lock_guard lock(mu_);
    return seen_.size();
  }
  std::vector<Conversation> seen() const {
    std::lock_guard lock(mu_);
    return seen_;
  }

 private:
  Responder respond_;
  mutable std::mutex mu_;
  std::vector<Conversation> seen_;
};

class TempDir {
 public:
  TempDir() {
    static std::atomic<int> n{0};
    std::random_device rd;
    path_ = std::filesystem::temp_directory_path() /
            ("mcmine_test_" + std::to_string(rd()) + "_" + std::to_string(n++));
    std::filesystem::create_directories(path_);
  }
  ~TempDir() {
    std::error_code ec;
    std::filesystem::remove_all(path_, ec);
  }
  TempDir(const TempDir&) = delete;
  TempDir& operator=(const TempDir&) = delete;
  const std::filesystem::path& path() const { return path_; }
  std::filesystem::path operator/(const std::string& name) const { return path_ / name; }

 private:
  std::filesystem::path path_;
};

inline Misconception range_misconception() {
  return Misconception{"mc-range-inclusive",
                       "Student believes range(n) produces values from 1 to n inclusive.",
                       "for i in range(5):\n    print(i)\n",
                       Category::harmful,
                       Origin::documented,
                       "seed"};
}

inline Problem factorial_problem() {
  Problem p;
  p.id = "p-factorial";
  p.description =
      "Write the factorial(n) function that computes the factorial n! defined as: 0! = 1 and "
      "n! = n x (n - 1)!. If the input n is negative, the function should return 0.";
  p.tests = {"assert factorial(5) == 120"};
  p.source = "seed";
  return p;
}

inline const char* kFactorialStudentCode =
    "def factorial(n):\n"
    "  if n < 0:\n"
    "    return 0\n"
    "  fact = 1\n"
    "  for i in range(n):\n"
    "    fact = fact * i\n"
    "  return fact\n";

inline const char* kFactorialSolution =
    "def factorial(n):\n"
    "    if n < 0:\n"
    "        return 0\n"
    "    fact = 1\n"
    "    for i in range(1, n + 1):\n"
    "        fact = fact * i\n"
    "    return fact\n";

inline std::string found_reply(const std::string& description, const std::string& explanation = "shown") {
  return "<misconception>\n<description>" + description + "</description>\n<explanation>" + explanation +
         "</explanation>\n</misconception>";
}

inline std::string none_reply() { return "<misconception>NONE</misconception>"; }

inline std::string judge_reply(bool yes, const std::string& feedback = "NONE") {
  return std::string("<answer>\n<exhibits_misconception>") + (yes ? "Y" : "N") +
         "</exhibits_misconception>\n<feedback>" + feedback + "</feedback>\n</answer>";
}

inline std::string code_reply(const std::string& code) { return "<code>\n" + code + "</code>"; }

inline ModelConfig mock_model() {
  ModelConfig m;
  m.id = "mock";
  m.provider = Provider::mock;
  m.model_name = "scripted";
  return m;
}

}  // namespace mcmine::testing
