#pragma once

#include "redharness/providers.hpp"

#include <atomic>
#include <map>
#include <mutex>
#include <string>

namespace redharness::translation {

struct TranslationRequest {
    std::string text;
    std::string source_language;
    std::string target_language;
};

class TranslationError : public std::runtime_error {
  public:
    using std::runtime_error::runtime_error;
};

class Translator {
  public:
    virtual ~Translator() = default;

    std::string translate(const TranslationRequest& request);

    int call_count() const { return calls_.load(); }

    /// Per-hop ledger, e.g. {"en->ja": 3, "ja->en": 3}. Tests assert against
    /// the turn choreography with this.
    std::map<std::string, int> call_ledger() const;

  protected:
    virtual std::string run(const TranslationRequest& request) = 0;

  private:
    std::atomic<int> calls_{0};
    mutable std::mutex ledger_mu_;
    std::map<std::string, int> ledger_;
};

/// Returns input verbatim; the English path.
class IdentityTranslator : public Translator {
  protected:
    std::string run(const TranslationRequest& request) override { return request.text; }
};

/// Reversible marker transform for offline tests: en->L wraps the text in a
/// language tag, L->en strips it, so every hop is visible in the transcript.
class MarkerTranslator : public Translator {
  protected:
    std::string run(const TranslationRequest& request) override;
};

std::string marker_prefix(const std::string& language_code);

class HttpTranslator : public Translator {
  public:
    explicit HttpTranslator(providers::ProviderConfig config);

  protected:
    std::string run(const TranslationRequest& request) override;

  private:
    providers::ProviderConfig config_;
    std::shared_ptr<providers::RateLimiter> limiter_;
};

}  // namespace redharness::translation
