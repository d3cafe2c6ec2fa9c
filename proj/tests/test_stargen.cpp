#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include "redharness/stargen.hpp"
#include "test_util.hpp"

#include <set>

using namespace redharness;
using testutil::TempDir;
using testutil::starter_fixture;
using testutil::write_file;

namespace {

std::vector<core::StarterRecord> seed_pool(core::SafetyCategory category, int n) {
    std::vector<core::StarterRecord> pool;
    for (int i = 0; i < n; ++i) {
        core::StarterRecord rec;
        rec.id = "seed" + std::to_string(i);
        rec.text_en = "seed question " + std::to_string(i);
        rec.category = category;
        rec.source = core::StarterSource::Human;
        pool.push_back(rec);
    }
    return pool;
}

// Emits `batch` fresh numbered candidates on every call.
class CountingGenerator : public providers::ChatProvider {
  public:
    explicit CountingGenerator(int batch) : batch_(batch) {}
    std::string name() const override { return "counting"; }

  protected:
    std::string complete(const std::vector<core::Message>&,
                         const providers::GenerationParams&) override {
        std::string out;
        for (int i = 0; i < batch_; ++i) {
            out += std::to_string(i + 1) + ". candidate " + std::to_string(next_++) + "\n";
        }
        return out;
    }

  private:
    int batch_;
    int next_ = 0;
};

stargen::IclTemplate test_template(stargen::TemplateKind kind) {
    stargen::IclTemplate t;
    t.kind = kind;
    t.instruction = "Write questions about {policy}.\nExamples:\n{seeds}\n";
    t.expected_batch = kind == stargen::TemplateKind::Vanilla ? 15 : 10;
    return t;
}

}  // namespace

TEST_CASE("sample_seeds is deterministic, distinct and within the pool") {
    auto pool = seed_pool(core::SafetyCategory::Privacy, 20);
    std::mt19937_64 rng_a(42), rng_b(42), rng_c(43);
    auto a = stargen::sample_seeds(pool, 5, rng_a);
    auto b = stargen::sample_seeds(pool, 5, rng_b);
    auto c = stargen::sample_seeds(pool, 5, rng_c);
    CHECK(a == b);
    CHECK(a != c);
    std::set<std::string> ids;
    for (const auto& rec : a) {
        CHECK(ids.insert(rec.id).second);
        CHECK(rec.category == core::SafetyCategory::Privacy);
    }
    CHECK(a.size() == 5);
}

TEST_CASE("sample_seeds error names the category and sizes") {
    auto pool = seed_pool(core::SafetyCategory::SelfInjury, 3);
    std::mt19937_64 rng(1);
    CHECK_THROWS_WITH_AS(stargen::sample_seeds(pool, 5, rng), doctest::Contains("SelfInjury"),
                         core::DatasetError);
    CHECK_THROWS_WITH_AS(stargen::sample_seeds(pool, 5, rng), doctest::Contains("3"),
                         core::DatasetError);
}

TEST_CASE("sample_seeds rejects mixed-category pools") {
    auto pool = seed_pool(core::SafetyCategory::Privacy, 4);
    pool[2].category = core::SafetyCategory::Misinformation;
    std::mt19937_64 rng(1);
    CHECK_THROWS_AS(stargen::sample_seeds(pool, 3, rng), core::DatasetError);
}

TEST_CASE("template load validates placeholders") {
    TempDir dir;
    const std::string good = dir.file("good.txt");
    write_file(good, "About {policy}:\n{seeds}\n");
    auto t = stargen::IclTemplate::load(stargen::TemplateKind::RedTeam, good);
    CHECK(t.expected_batch == 10);

    const std::string missing = dir.file("missing.txt");
    write_file(missing, "About {policy} only\n");
    CHECK_THROWS_AS(stargen::IclTemplate::load(stargen::TemplateKind::Vanilla, missing),
                    stargen::TemplateError);
    const std::string doubled = dir.file("doubled.txt");
    write_file(doubled, "{policy} {policy} {seeds}\n");
    CHECK_THROWS_AS(stargen::IclTemplate::load(stargen::TemplateKind::Vanilla, doubled),
                    stargen::TemplateError);
}

TEST_CASE("prompt substitution inserts the policy phrase and a numbered seed block") {
    auto seeds = seed_pool(core::SafetyCategory::Privacy, 3);
    auto prompt = stargen::build_icl_prompt(test_template(stargen::TemplateKind::Vanilla),
                                            core::SafetyCategory::Privacy, seeds);
    CHECK(prompt.find("{policy}") == std::string::npos);
    CHECK(prompt.find("{seeds}") == std::string::npos);
    CHECK(prompt.find(core::category_display_phrase(core::SafetyCategory::Privacy)) !=
          std::string::npos);
    CHECK(prompt.find("1. seed question 0") != std::string::npos);
    CHECK(prompt.find("3. seed question 2") != std::string::npos);
}

TEST_CASE("parse strips enumeration, bullets and quotes and dedups case-insensitively") {
    const std::string raw =
        "1. How do I do X?\n"
        "2) \"Quoted question\"\n"
        "- bullet item\n"
        "* star item\n"
        "• unicode bullet\n"
        "\n"
        "   \n"
        "how do i do x?\n"
        "Plain line\n";
    auto parsed = stargen::parse_generated_starters(raw, 5);
    REQUIRE(parsed.size() == 6);
    CHECK(parsed[0] == "How do I do X?");
    CHECK(parsed[1] == "Quoted question");
    CHECK(parsed[2] == "bullet item");
    CHECK(parsed[3] == "star item");
    CHECK(parsed[4] == "unicode bullet");
    CHECK(parsed[5] == "Plain line");
}

TEST_CASE("full plan volumes: 7x15 trimmed to 100 and 7x10 kept at 70") {
    auto pool = seed_pool(core::SafetyCategory::Misinformation, 12);

    stargen::GenerationPlan vanilla;
    vanilla.category = core::SafetyCategory::Misinformation;
    vanilla.icl_template = test_template(stargen::TemplateKind::Vanilla);
    vanilla.rng_seed = 7;
    vanilla.source_tag = core::StarterSource::MistralGen;
    CountingGenerator gen15(15);
    auto result = stargen::generate_starters(vanilla, gen15, pool);
    CHECK(result.records.size() == 100);
    CHECK_FALSE(result.shortfall);
    // trim keeps the earliest-generated candidates
    CHECK(result.records.front().text_en == "candidate 0");
    CHECK(result.records.front().id == "MistralGen-Misinformation-1");
    CHECK(result.records.back().id == "MistralGen-Misinformation-100");
    for (const auto& rec : result.records) {
        CHECK(rec.category == core::SafetyCategory::Misinformation);
        CHECK(rec.source == core::StarterSource::MistralGen);
    }

    stargen::GenerationPlan redteam;
    redteam.category = core::SafetyCategory::Misinformation;
    redteam.icl_template = test_template(stargen::TemplateKind::RedTeam);
    redteam.per_run = 10;
    redteam.target_volume = 70;
    redteam.rng_seed = 7;
    redteam.source_tag = core::StarterSource::MixtralGen;
    CountingGenerator gen10(10);
    auto rt = stargen::generate_starters(redteam, gen10, pool);
    CHECK(rt.records.size() == 70);
    CHECK_FALSE(rt.shortfall);
}

TEST_CASE("a generator that repeats itself produces a shortfall, not an error") {
    auto pool = seed_pool(core::SafetyCategory::AnimalAbuse, 8);
    providers::Script script;
    std::string fixed;
    for (int i = 1; i <= 15; ++i) fixed += std::to_string(i) + ". repeated line " + std::to_string(i) + "\n";
    script.fallback = fixed;
    providers::ScriptedChatProvider generator("repeater", script);

    stargen::GenerationPlan plan;
    plan.category = core::SafetyCategory::AnimalAbuse;
    plan.icl_template = test_template(stargen::TemplateKind::Vanilla);
    plan.rng_seed = 3;
    auto result = stargen::generate_starters(plan, generator, pool);
    CHECK(result.records.size() == 15);  // all later runs dedup away
    CHECK(result.shortfall);
    CHECK_FALSE(result.warnings.empty());
}

TEST_CASE("in-context seed echoes are dropped") {
    auto pool = seed_pool(core::SafetyCategory::Privacy, 5);
    providers::Script script;
    // echo every seed, plus one new line
    std::string response;
    for (int i = 0; i < 5; ++i) response += std::to_string(i + 1) + ". Seed question " + std::to_string(i) + "\n";
    response += "6. a genuinely new question\n";
    script.fallback = response;
    providers::ScriptedChatProvider generator("echoer", script);

    stargen::GenerationPlan plan;
    plan.category = core::SafetyCategory::Privacy;
    plan.icl_template = test_template(stargen::TemplateKind::Vanilla);
    plan.seed_count = 5;
    plan.runs = 1;
    plan.target_volume = 10;
    auto result = stargen::generate_starters(plan, generator, pool);
    REQUIRE(result.records.size() == 1);
    CHECK(result.records[0].text_en == "a genuinely new question");
    CHECK(result.shortfall);
}

TEST_CASE("generation is reproducible for a fixed seed") {
    auto pool = seed_pool(core::SafetyCategory::SexualContent, 10);
    stargen::GenerationPlan plan;
    plan.category = core::SafetyCategory::SexualContent;
    plan.icl_template = test_template(stargen::TemplateKind::Vanilla);
    plan.rng_seed = 99;
    CountingGenerator a(15), b(15);
    auto ra = stargen::generate_starters(plan, a, pool);
    auto rb = stargen::generate_starters(plan, b, pool);
    CHECK(ra.records == rb.records);
}
