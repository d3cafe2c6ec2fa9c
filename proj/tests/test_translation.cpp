#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include "redharness/translation.hpp"

using namespace redharness;
using translation::TranslationRequest;

TEST_CASE("identity translator returns input verbatim") {
    translation::IdentityTranslator t;
    CHECK(t.translate({"hello there", "en", "en"}) == "hello there");
    CHECK(t.call_count() == 1);
}

TEST_CASE("marker translator wraps on the way out and strips on the way back") {
    translation::MarkerTranslator t;
    const std::string out = t.translate({"hello", "en", "ja"});
    CHECK(out == translation::marker_prefix("ja") + "hello");
    CHECK(t.translate({out, "ja", "en"}) == "hello");
    // a round trip is the identity for any text
    for (const std::string text : {"a", "multi word text", "⟦decoy⟧ content"}) {
        CHECK(t.translate({t.translate({text, "en", "ar"}), "ar", "en"}) == text);
    }
}

TEST_CASE("marker translator passes unmarked text back unchanged") {
    translation::MarkerTranslator t;
    CHECK(t.translate({"plain reply", "ja", "en"}) == "plain reply");
}

TEST_CASE("ledger records each hop direction separately") {
    translation::MarkerTranslator t;
    t.translate({"a", "en", "ja"});
    t.translate({"b", "en", "ja"});
    t.translate({translation::marker_prefix("ja") + "c", "ja", "en"});
    auto ledger = t.call_ledger();
    CHECK(ledger["en->ja"] == 2);
    CHECK(ledger["ja->en"] == 1);
    CHECK(t.call_count() == 3);
}

TEST_CASE("empty text is rejected before reaching the backend") {
    translation::MarkerTranslator t;
    CHECK_THROWS_AS(t.translate({"", "en", "ja"}), translation::TranslationError);
    CHECK_THROWS_AS(t.translate({"   ", "en", "ja"}), translation::TranslationError);
    CHECK(t.call_count() == 0);
}

namespace {

// A backend that returns whitespace; the base class must refuse to pass it on.
class BlankTranslator : public translation::Translator {
  protected:
    std::string run(const TranslationRequest&) override { return "  "; }
};

}  // namespace

TEST_CASE("empty backend output is a hard error naming the hop") {
    BlankTranslator t;
    CHECK_THROWS_WITH_AS(t.translate({"x", "en", "hi"}), doctest::Contains("en->hi"),
                         translation::TranslationError);
}
