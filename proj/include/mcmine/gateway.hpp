#pragma once

// Uniform chat-completion entry point: hosted providers behind retries and a
// concurrency bound, or the scripted mock.

#include <atomic>
#include <chrono>
#include <cstdlib>
#include <functional>
#include <memory>
#include <optional>
#include <semaphore>
#include <thread>
#include <vector>

#include "mcmine/chat.hpp"
#include "mcmine/mock_backend.hpp"
#include "mcmine/providers.hpp"

namespace mcmine {

struct RetryPolicy {
  int max_attempts = 3;
  // delay before attempt i+2, i.e. after the first and second failures
  std::vector<std::chrono::milliseconds> backoff{std::chrono::seconds(1), std::chrono::seconds(4)};

  std::chrono::milliseconds delay_after(int failed_attempt) const {
    if (backoff.empty()) return std::chrono::milliseconds(0);
    const auto i = static_cast<std::size_t>(failed_attempt - 1);
    return i < backoff.size() ? backoff[i] : backoff.back();
  }
};

using Sleeper = std::function<void(std::chrono::milliseconds)>;
using CredentialSource = std::function<std::optional<std::string>(Provider)>;

inline std::optional<std::string> env_credentials(Provider p) {
  const auto var = credential_env_var(p);
  if (var.empty()) return std::nullopt;
  const char* v = std::getenv(var.c_str());
  if (!v || !*v) return std::nullopt;
  return std::string(v);
}

struct HostedOptions {
  RetryPolicy retry;
  int max_concurrency = 4;
  ProviderEndpoints endpoints;
  CredentialSource credentials = env_credentials;
  Sleeper sleep = [](std::chrono::milliseconds d) { std::this_thread::sleep_for(d); };
};

/// Individual requests only, no batching or streaming.
class HostedBackend final : public ChatClient {
 public:
  HostedBackend(Transport& transport, HostedOptions opts = {})
      : transport_(transport),
        opts_(std::move(opts)),
        slots_(std::max(1, opts_.max_concurrency)) {}

  Completion complete(const ModelConfig& config, const Conversation& convo) override {
    validate_model_config(config);
    if (convo.empty()) throw ValidationError("empty conversation");
    if (config.provider == Provider::mock) throw ValidationError("hosted backend got a mock config");
    const auto key = opts_.credentials ? opts_.credentials(config.provider) : std::nullopt;
    if (!key) {
      throw Unauthorized("missing credential: set " + credential_env_var(config.provider));
    }
    const auto request = build_provider_request(config, convo, *key, opts_.endpoints);

    for (int attempt = 1;; ++attempt) {
      try {
        HttpResponse response;
        {
          slots_.acquire();
          struct Release {
            std::counting_semaphore<>& s;
            ~Release() { s.release(); }
          } release{slots_};
          response = transport_.post(request);
        }
        return parse_provider_response(config.provider, response);
      } catch (const RateLimited&) {
        if (attempt >= opts_.retry.max_attempts) throw;
        opts_.sleep(opts_.retry.delay_after(attempt));
      } catch (const TransportError&) {
        if (attempt >= opts_.retry.max_attempts) throw;
        opts_.sleep(opts_.retry.delay_after(attempt));
      }
    }
  }

 private:
  Transport& transport_;
  HostedOptions opts_;
  std::counting_semaphore<> slots_;
};

/// Routes each call by provider. With a scenario override installed, every
/// call goes to the mock regardless of the configured provider.
class Gateway final : public ChatClient {
 public:
  Gateway() = default;

  void set_hosted(std::unique_ptr<ChatClient> hosted) { hosted_ = std::move(hosted); }

  void set_mock(Scenario scenario, bool override_all) {
    mock_ = std::make_unique<MockBackend>(std::move(scenario));
    override_all_ = override_all;
  }

  bool mock_only() const noexcept { return mock_ && override_all_; }

  Completion complete(const ModelConfig& config, const Conversation& convo) override {
    validate_model_config(config);
    calls_.fetch_add(1, std::memory_order_relaxed);
    if (config.provider == Provider::mock || override_all_) {
      if (!mock_) throw ValidationError("mock provider selected but no scenario loaded");
      return mock_->complete(config, convo);
    }
    if (!hosted_) throw TransportError("no hosted transport configured");
    return hosted_->complete(config, convo);
  }

  std::size_t calls() const noexcept { return calls_.load(std::memory_order_relaxed); }

 private:
  std::unique_ptr<ChatClient> hosted_;
  std::unique_ptr<MockBackend> mock_;
  bool override_all_ = false;
  std::atomic<std::size_t> calls_{0};
};

}  // namespace mcmine
