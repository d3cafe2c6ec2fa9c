#include "redharness/providers.hpp"

#include <httplib.h>
#include <nlohmann/json.hpp>

#include <cmath>
#include <cstdlib>
#include <thread>

namespace redharness::providers {

using nlohmann::json;

std::chrono::milliseconds RetryPolicy::backoff_for_attempt(int attempt) const {
    double scale = std::pow(multiplier, attempt);
    return std::chrono::milliseconds(
        static_cast<long>(static_cast<double>(initial_backoff.count()) * scale));
}

RateLimiter::RateLimiter(double requests_per_second)
    : rate_(requests_per_second), tokens_(requests_per_second > 0 ? 1.0 : 0.0),
      last_refill_(std::chrono::steady_clock::now()) {}

void RateLimiter::acquire() {
    if (rate_ <= 0) return;
    std::unique_lock lock(mu_);
    for (;;) {
        auto now = std::chrono::steady_clock::now();
        std::chrono::duration<double> elapsed = now - last_refill_;
        tokens_ = std::min(1.0, tokens_ + elapsed.count() * rate_);
        last_refill_ = now;
        if (tokens_ >= 1.0) {
            tokens_ -= 1.0;
            return;
        }
        auto wait = std::chrono::duration<double>((1.0 - tokens_) / rate_);
        lock.unlock();
        std::this_thread::sleep_for(wait);
        lock.lock();
    }
}

static void validate_transcript(const std::vector<core::Message>& messages) {
    if (messages.empty()) throw ProviderError("chat called with an empty message list");
    for (size_t i = 0; i < messages.size(); ++i) {
        core::Role expected = (i % 2 == 0) ? core::Role::User : core::Role::Assistant;
        if (messages[i].role != expected) {
            throw ProviderError("broken user/assistant alternation at message " + std::to_string(i));
        }
    }
    if (messages.back().role != core::Role::User) {
        throw ProviderError("last message must have role user");
    }
}

std::string ChatProvider::chat(const std::vector<core::Message>& messages,
                               const GenerationParams& params) {
    validate_transcript(messages);
    calls_.fetch_add(1);
    return complete(messages, params);
}

bool ScriptRule::matches(int turn, const std::string& last_user_text) const {
    if (exact_turn && turn != *exact_turn) return false;
    if (min_turn && turn < *min_turn) return false;
    if (last_user_contains && last_user_text.find(*last_user_contains) == std::string::npos) {
        return false;
    }
    return true;
}

std::string scripted_response(const Script& script, const std::vector<core::Message>& messages) {
    const auto& last = messages.back();
    const int turn = last.turn_index;
    for (const auto& rule : script.rules) {
        if (rule.matches(turn, last.text)) return rule.response;
    }
    return script.fallback;
}

HttpChatProvider::HttpChatProvider(ProviderConfig config)
    : config_(std::move(config)),
      limiter_(std::make_shared<RateLimiter>(config_.requests_per_second)) {}

namespace {

struct ParsedEndpoint {
    std::string base;  // scheme://host:port
    std::string path;
};

ParsedEndpoint split_endpoint(const std::string& endpoint) {
    auto scheme_end = endpoint.find("://");
    if (scheme_end == std::string::npos) {
        throw ProviderError("endpoint missing scheme: " + endpoint);
    }
    auto path_start = endpoint.find('/', scheme_end + 3);
    if (path_start == std::string::npos) return {endpoint, "/"};
    return {endpoint.substr(0, path_start), endpoint.substr(path_start)};
}

bool is_transient_status(int status) {
    return status == 429 || (status >= 500 && status < 600);
}

std::string body_excerpt(const std::string& body) {
    return body.size() > 200 ? body.substr(0, 200) + "..." : body;
}

/// Runs one HTTP POST per attempt until success, a terminal error, or attempt
/// exhaustion. `send` returns the response or nullopt on transport failure.
json post_with_retry(const ProviderConfig& config, RateLimiter& limiter, const json& payload) {
    auto [base, path] = split_endpoint(config.endpoint);
    httplib::Client client(base);
    client.set_connection_timeout(std::chrono::duration_cast<std::chrono::seconds>(config.timeout));
    client.set_read_timeout(std::chrono::duration_cast<std::chrono::seconds>(config.timeout));
    httplib::Headers headers;
    if (!config.api_key_env.empty()) {
        if (const char* key = std::getenv(config.api_key_env.c_str())) {
            headers.emplace("Authorization", std::string("Bearer ") + key);
        }
    }
    const std::string body = payload.dump();
    std::string last_error;
    for (int attempt = 0; attempt < config.retry.max_attempts; ++attempt) {
        if (attempt > 0) std::this_thread::sleep_for(config.retry.backoff_for_attempt(attempt - 1));
        limiter.acquire();
        auto res = client.Post(path, headers, body, "application/json");
        if (!res) {
            last_error = "transport failure: " + httplib::to_string(res.error());
            continue;
        }
        if (res->status >= 200 && res->status < 300) {
            try {
                return json::parse(res->body);
            } catch (const json::exception& e) {
                throw ProviderError(std::string("unparseable response body: ") + e.what(),
                                    res->status);
            }
        }
        if (is_transient_status(res->status)) {
            last_error = "status " + std::to_string(res->status);
            continue;
        }
        throw ProviderError("provider error, status " + std::to_string(res->status) + ": " +
                                body_excerpt(res->body),
                            res->status);
    }
    throw TransportError("retries exhausted after " + std::to_string(config.retry.max_attempts) +
                         " attempts (" + last_error + ")");
}

}  // namespace

std::string HttpChatProvider::complete(const std::vector<core::Message>& messages,
                                       const GenerationParams& params) {
    json payload;
    payload["model"] = config_.model;
    json msgs = json::array();
    for (const auto& m : messages) {
        msgs.push_back({{"role", core::to_string(m.role)}, {"content", m.text}});
    }
    payload["messages"] = msgs;
    payload["max_tokens"] = params.max_new_tokens;
    payload["temperature"] = params.temperature;
    payload["top_p"] = params.top_p;

    json response = post_with_retry(config_, *limiter_, payload);
    try {
        return response.at("choices").at(0).at("message").at("content").get<std::string>();
    } catch (const json::exception& e) {
        throw ProviderError(std::string("missing choices[0].message.content: ") + e.what());
    }
}

std::vector<std::vector<double>> Embedder::embed(const std::vector<std::string>& texts) {
    if (texts.empty()) throw ProviderError("embed called with no texts");
    auto vectors = compute(texts);
    if (vectors.size() != texts.size()) {
        throw ProviderError("embedder returned " + std::to_string(vectors.size()) +
                            " vectors for " + std::to_string(texts.size()) + " texts");
    }
    const size_t dim = vectors.front().size();
    for (size_t i = 0; i < vectors.size(); ++i) {
        if (vectors[i].size() != dim) {
            throw ProviderError("embedding dimension mismatch at index " + std::to_string(i));
        }
    }
    return vectors;
}

std::vector<std::vector<double>> OneHotEmbedder::compute(const std::vector<std::string>& texts) {
    std::scoped_lock lock(mu_);
    std::vector<std::vector<double>> out;
    out.reserve(texts.size());
    for (const auto& text : texts) {
        auto [it, inserted] = index_.try_emplace(text, static_cast<int>(index_.size()));
        if (inserted && it->second >= dimension_) {
            throw ProviderError("one-hot embedder exhausted its " + std::to_string(dimension_) +
                                " axes");
        }
        std::vector<double> v(dimension_, 0.0);
        v[it->second] = 1.0;
        out.push_back(std::move(v));
    }
    return out;
}

HttpEmbedder::HttpEmbedder(ProviderConfig config)
    : config_(std::move(config)),
      limiter_(std::make_shared<RateLimiter>(config_.requests_per_second)) {}

std::vector<std::vector<double>> HttpEmbedder::compute(const std::vector<std::string>& texts) {
    json payload;
    payload["model"] = config_.model;
    payload["input"] = texts;
    json response = post_with_retry(config_, *limiter_, payload);
    std::vector<std::vector<double>> out;
    try {
        for (const auto& item : response.at("data")) {
            out.push_back(item.at("embedding").get<std::vector<double>>());
        }
    } catch (const json::exception& e) {
        throw ProviderError(std::string("malformed embedding response: ") + e.what());
    }
    return out;
}

}  // namespace redharness::providers
