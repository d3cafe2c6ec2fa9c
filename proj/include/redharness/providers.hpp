#pragma once

#include "redharness/core.hpp"

#include <atomic>
#include <chrono>
#include <functional>
#include <memory>
#include <mutex>
#include <optional>
#include <string>
#include <vector>

namespace redharness::providers {

struct GenerationParams {
    int max_new_tokens = 1000;
    double temperature = 0.5;
    double top_p = 0.9;

    static GenerationParams target_defaults() { return {1000, 0.5, 0.9}; }
    static GenerationParams attacker_defaults() { return {512, 0.9, 0.9}; }
    bool operator==(const GenerationParams&) const = default;
};

struct RetryPolicy {
    int max_attempts = 3;
    std::chrono::milliseconds initial_backoff{200};
    double multiplier = 2.0;

    std::chrono::milliseconds backoff_for_attempt(int attempt) const;
};

struct ProviderConfig {
    std::string endpoint;          // e.g. "http://host:port/v1/chat/completions"
    std::string model;
    std::string api_key_env;       // environment variable name, never the secret
    std::chrono::milliseconds timeout{30000};
    RetryPolicy retry;
    double requests_per_second = 0.0;  // 0 = unlimited
};

class ProviderError : public std::runtime_error {
  public:
    ProviderError(std::string message, int status = 0)
        : std::runtime_error(std::move(message)), status_(status) {}
    int status() const { return status_; }

  private:
    int status_;
};

class TransportError : public ProviderError {
  public:
    using ProviderError::ProviderError;
};

/// Token bucket shared by all concurrent callers of one provider handle.
class RateLimiter {
  public:
    explicit RateLimiter(double requests_per_second);
    void acquire();

  private:
    double rate_;
    double tokens_;
    std::chrono::steady_clock::time_point last_refill_;
    std::mutex mu_;
};

class ChatProvider {
  public:
    virtual ~ChatProvider() = default;
    virtual std::string name() const = 0;

    /// Validates alternation and calls the backend. Last message must be a
    /// user message; the returned string is the assistant reply.
    std::string chat(const std::vector<core::Message>& messages, const GenerationParams& params);

    int call_count() const { return calls_.load(); }

  protected:
    virtual std::string complete(const std::vector<core::Message>& messages,
                                 const GenerationParams& params) = 0;

  private:
    std::atomic<int> calls_{0};
};

struct ScriptRule {
    std::optional<int> exact_turn;
    std::optional<int> min_turn;
    std::optional<std::string> last_user_contains;
    std::string response;

    bool matches(int turn, const std::string& last_user_text) const;
};

struct Script {
    std::vector<ScriptRule> rules;
    std::string fallback;
};

/// First matching rule wins, declaration order; the fallback guarantees totality.
std::string scripted_response(const Script& script, const std::vector<core::Message>& messages);

class ScriptedChatProvider : public ChatProvider {
  public:
    ScriptedChatProvider(std::string name, Script script)
        : name_(std::move(name)), script_(std::move(script)) {}
    std::string name() const override { return name_; }

  protected:
    std::string complete(const std::vector<core::Message>& messages,
                         const GenerationParams&) override {
        return scripted_response(script_, messages);
    }

  private:
    std::string name_;
    Script script_;
};

/// Chat-completion HTTP client: messages array in, assistant content out.
/// Retries timeouts, connection failures, 429 and 5xx per the retry policy.
class HttpChatProvider : public ChatProvider {
  public:
    explicit HttpChatProvider(ProviderConfig config);
    std::string name() const override { return config_.model; }

  protected:
    std::string complete(const std::vector<core::Message>& messages,
                         const GenerationParams& params) override;

  private:
    ProviderConfig config_;
    std::shared_ptr<RateLimiter> limiter_;
};

class Embedder {
  public:
    virtual ~Embedder() = default;

    /// One vector per input, equal dimensions, order preserved.
    std::vector<std::vector<double>> embed(const std::vector<std::string>& texts);

  protected:
    virtual std::vector<std::vector<double>> compute(const std::vector<std::string>& texts) = 0;
};

/// Assigns each distinct text its own unit axis; identical texts embed
/// identically, distinct texts (up to `dimension`) are pairwise orthogonal.
class OneHotEmbedder : public Embedder {
  public:
    explicit OneHotEmbedder(int dimension = 384) : dimension_(dimension) {}

  protected:
    std::vector<std::vector<double>> compute(const std::vector<std::string>& texts) override;

  private:
    int dimension_;
    std::map<std::string, int> index_;
    std::mutex mu_;
};

class HttpEmbedder : public Embedder {
  public:
    explicit HttpEmbedder(ProviderConfig config);

  protected:
    std::vector<std::vector<double>> compute(const std::vector<std::string>& texts) override;

  private:
    ProviderConfig config_;
    std::shared_ptr<RateLimiter> limiter_;
};

}  // namespace redharness::providers
