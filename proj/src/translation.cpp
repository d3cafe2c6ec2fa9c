#include "redharness/translation.hpp"

#include <httplib.h>
#include <nlohmann/json.hpp>

#include <thread>

namespace redharness::translation {

using nlohmann::json;

std::string Translator::translate(const TranslationRequest& request) {
    if (core::trim(request.text).empty()) {
        throw TranslationError("translate called with empty text");
    }
    calls_.fetch_add(1);
    {
        std::scoped_lock lock(ledger_mu_);
        ledger_[request.source_language + "->" + request.target_language] += 1;
    }
    std::string out = run(request);
    if (core::trim(out).empty()) {
        throw TranslationError("backend returned empty translation for hop " +
                               request.source_language + "->" + request.target_language);
    }
    return out;
}

std::map<std::string, int> Translator::call_ledger() const {
    std::scoped_lock lock(ledger_mu_);
    return ledger_;
}

std::string marker_prefix(const std::string& language_code) {
    return "⟦" + language_code + "⟧";  // ⟦code⟧
}

std::string MarkerTranslator::run(const TranslationRequest& request) {
    if (request.target_language != "en") {
        return marker_prefix(request.target_language) + request.text;
    }
    const std::string prefix = marker_prefix(request.source_language);
    if (request.text.rfind(prefix, 0) == 0) {
        return request.text.substr(prefix.size());
    }
    return request.text;
}

HttpTranslator::HttpTranslator(providers::ProviderConfig config)
    : config_(std::move(config)),
      limiter_(std::make_shared<providers::RateLimiter>(config_.requests_per_second)) {}

std::string HttpTranslator::run(const TranslationRequest& request) {
    auto scheme_end = config_.endpoint.find("://");
    if (scheme_end == std::string::npos) {
        throw TranslationError("endpoint missing scheme: " + config_.endpoint);
    }
    auto path_start = config_.endpoint.find('/', scheme_end + 3);
    std::string base = path_start == std::string::npos ? config_.endpoint
                                                       : config_.endpoint.substr(0, path_start);
    std::string path = path_start == std::string::npos ? "/" : config_.endpoint.substr(path_start);

    httplib::Client client(base);
    client.set_read_timeout(std::chrono::duration_cast<std::chrono::seconds>(config_.timeout));
    json payload = {{"text", request.text},
                    {"source", request.source_language},
                    {"target", request.target_language}};
    const std::string body = payload.dump();
    std::string last_error;
    for (int attempt = 0; attempt < config_.retry.max_attempts; ++attempt) {
        if (attempt > 0) {
            std::this_thread::sleep_for(config_.retry.backoff_for_attempt(attempt - 1));
        }
        limiter_->acquire();
        auto res = client.Post(path, body, "application/json");
        if (!res) {
            last_error = "transport failure";
            continue;
        }
        if (res->status == 429 || res->status >= 500) {
            last_error = "status " + std::to_string(res->status);
            continue;
        }
        if (res->status < 200 || res->status >= 300) {
            throw TranslationError("translation endpoint status " + std::to_string(res->status));
        }
        try {
            return json::parse(res->body).at("text").get<std::string>();
        } catch (const json::exception& e) {
            throw TranslationError(std::string("malformed translation response: ") + e.what());
        }
    }
    throw TranslationError("translation retries exhausted (" + last_error + ")");
}

}  // namespace redharness::translation
