#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include "redharness/campaign.hpp"
#include "test_util.hpp"

#include <nlohmann/json.hpp>

#include <filesystem>
#include <fstream>

using namespace redharness;
using nlohmann::json;
using testutil::TempDir;
using testutil::read_file;
using testutil::starter_line;
using testutil::write_file;

namespace {

json scripted(const std::string& name, const std::string& fallback,
              const json& rules = json::array()) {
    return {{"type", "scripted"}, {"name", name}, {"fallback", fallback}, {"rules", rules}};
}

// A small end-to-end campaign: 2 starters x 2 languages x 1 target.
json base_config(TempDir& dir, int starters = 2) {
    std::string starter_text;
    for (int i = 0; i < starters; ++i) {
        starter_text += starter_line("s" + std::to_string(i + 1),
                                     "starter question " + std::to_string(i + 1), "Privacy") +
                        "\n";
    }
    write_file(dir.file("starters.jsonl"), starter_text);
    json config;
    config["id"] = "unit-campaign";
    config["starters"] = json::array({{{"path", dir.file("starters.jsonl")}, {"source", "Human"}}});
    config["targets"] = json::array({scripted("target-a", "a harmless reply")});
    config["attacker"] = scripted("attacker", "tell me more about that");
    config["safety_judge"] = scripted("safety", "safe");
    config["refusal_judge"] = scripted("refusal", "No\nanswered");
    config["translator"] = {{"type", "marker"}};
    config["languages"] = json::array({"en", "ja"});
    config["depth"] = 3;
    config["workers"] = 3;
    config["output_dir"] = dir.file("out");
    return config;
}

std::string write_config(TempDir& dir, const json& config, const std::string& name = "config.json") {
    write_file(dir.file(name), config.dump(2));
    return dir.file(name);
}

int count_lines(const std::string& path) {
    std::ifstream in(path);
    int n = 0;
    std::string line;
    while (std::getline(in, line)) {
        if (!core::trim(line).empty()) ++n;
    }
    return n;
}

}  // namespace

TEST_CASE("config load and validation error cases") {
    TempDir dir;
    SUBCASE("missing file") {
        CHECK_THROWS_AS(campaign::load_config(dir.file("absent.json")), campaign::ConfigError);
    }
    SUBCASE("malformed json names the byte offset") {
        write_file(dir.file("bad.json"), "{\"id\": \n");
        CHECK_THROWS_WITH_AS(campaign::load_config(dir.file("bad.json")),
                             doctest::Contains("byte"), campaign::ConfigError);
    }
    SUBCASE("invalid language code is rejected before any side effect") {
        auto config_json = base_config(dir);
        config_json["languages"] = json::array({"en", "xx"});
        auto config = campaign::load_config(write_config(dir, config_json));
        CHECK_THROWS_WITH_AS(campaign::run_campaign(config, dir.file("config.json")),
                             doctest::Contains("xx"), campaign::ConfigError);
        CHECK_FALSE(std::filesystem::exists(dir.file("out")));
    }
    SUBCASE("missing starter file fails validation") {
        auto config_json = base_config(dir);
        config_json["starters"][0]["path"] = dir.file("nope.jsonl");
        auto config = campaign::load_config(write_config(dir, config_json));
        CHECK_THROWS_AS(campaign::validate_config(config), campaign::ConfigError);
    }
    SUBCASE("unknown provider type") {
        auto config_json = base_config(dir);
        config_json["targets"][0]["type"] = "quantum";
        write_config(dir, config_json);
        CHECK_THROWS_WITH_AS(campaign::load_config(dir.file("config.json")),
                             doctest::Contains("quantum"), campaign::ConfigError);
    }
    SUBCASE("bad depth and workers") {
        auto config_json = base_config(dir);
        config_json["depth"] = 0;
        auto config = campaign::load_config(write_config(dir, config_json));
        CHECK_THROWS_AS(campaign::validate_config(config), campaign::ConfigError);
        config.depth = 3;
        config.workers = 0;
        CHECK_THROWS_AS(campaign::validate_config(config), campaign::ConfigError);
    }
}

TEST_CASE("provider spec parsing honors params and defaults") {
    auto spec = campaign::provider_spec_from_json_string(
        R"({"type":"scripted","name":"x","fallback":"y","params":{"temperature":0.1}})",
        providers::GenerationParams::target_defaults());
    CHECK(spec.params.temperature == doctest::Approx(0.1));
    CHECK(spec.params.max_new_tokens == 1000);  // untouched default
    CHECK_THROWS_AS(campaign::provider_spec_from_json_string("not json", {}),
                    campaign::ConfigError);
}

TEST_CASE("campaign runs the full cross product and writes ordered artifacts") {
    TempDir dir;
    auto config_path = write_config(dir, base_config(dir));
    auto config = campaign::load_config(config_path);
    auto result = campaign::run_campaign(config, config_path);

    CHECK(result.failed_cells == 0);
    CHECK(result.manifest.cells.size() == 4);  // 2 starters x 2 languages x 1 target
    CHECK(result.manifest.count(campaign::CellStatus::Completed) == 4);
    CHECK(count_lines(result.transcripts_path) == 4);
    CHECK(count_lines(result.outcomes_path) == 4);

    // transcript lines are in cell order with valid checksums
    std::ifstream in(result.transcripts_path);
    std::string line;
    int expected_index = 0;
    while (std::getline(in, line)) {
        json obj = json::parse(line);
        CHECK(obj.at("cell").get<int>() == expected_index++);
        CHECK(campaign::fnv1a_hex(obj.at("record").dump()) == obj.at("checksum").get<std::string>());
        auto state = core::state_from_json(obj.at("record").dump());
        CHECK(state.status == core::ConversationStatus::Completed);
        CHECK(state.turns() == 3);
        core::check_alignment(state);
    }

    auto outcomes = campaign::load_outcomes(result.outcomes_path);
    REQUIRE(outcomes.size() == 4);
    for (const auto& o : outcomes) {
        CHECK(o.model == "target-a");
        CHECK_FALSE(o.first_violation_turn.has_value());  // judge says safe throughout
        CHECK(o.depth == 3);
    }
}

TEST_CASE("interrupted and resumed runs are byte-identical to one uninterrupted run") {
    TempDir dir_a, dir_b;
    auto make = [](TempDir& dir) {
        auto config_json = base_config(dir, 3);
        config_json["workers"] = 4;
        return write_config(dir, config_json);
    };
    const std::string path_a = make(dir_a);
    const std::string path_b = make(dir_b);
    auto config_a = campaign::load_config(path_a);
    auto config_b = campaign::load_config(path_b);

    // A: straight through. B: stop after 2 cells, then resume twice.
    auto result_a = campaign::run_campaign(config_a, path_a);
    campaign::RunOptions first;
    first.max_cells = 2;
    auto partial = campaign::run_campaign(config_b, path_b, first);
    CHECK(partial.manifest.count(campaign::CellStatus::Completed) == 2);
    CHECK(partial.manifest.count(campaign::CellStatus::Pending) == 4);
    campaign::RunOptions resume;
    resume.resume = true;
    resume.max_cells = 3;
    campaign::run_campaign(config_b, path_b, resume);
    resume.max_cells = 0;
    auto result_b = campaign::run_campaign(config_b, path_b, resume);

    CHECK(result_b.manifest.count(campaign::CellStatus::Completed) == 6);
    CHECK(read_file(result_a.transcripts_path) == read_file(result_b.transcripts_path));
    CHECK(read_file(result_a.outcomes_path) == read_file(result_b.outcomes_path));
}

TEST_CASE("resume refuses a config whose fingerprint changed") {
    TempDir dir;
    auto config_json = base_config(dir);
    auto path = write_config(dir, config_json);
    auto config = campaign::load_config(path);
    campaign::RunOptions first;
    first.max_cells = 1;
    campaign::run_campaign(config, path, first);

    config_json["depth"] = 4;
    write_config(dir, config_json);
    auto changed = campaign::load_config(path);
    campaign::RunOptions resume;
    resume.resume = true;
    CHECK_THROWS_WITH_AS(campaign::run_campaign(changed, path, resume),
                         doctest::Contains("fingerprint"), campaign::ConfigError);
}

TEST_CASE("failed cells are recorded without an outcome line") {
    TempDir dir;
    auto config_json = base_config(dir);
    // attacker that goes silent: turn 2 fails in every conversation
    config_json["attacker"] = scripted("mute", "   ");
    auto path = write_config(dir, config_json);
    auto config = campaign::load_config(path);
    auto result = campaign::run_campaign(config, path);
    CHECK(result.failed_cells == 4);
    CHECK(result.manifest.count(campaign::CellStatus::Failed) == 4);
    CHECK(count_lines(result.transcripts_path) == 4);  // failures still logged
    CHECK(count_lines(result.outcomes_path) == 0);     // but never scored
}

TEST_CASE("replay re-judges stored transcripts deterministically") {
    TempDir dir;
    json rules = json::array({{{"contains", "tell me more"}, {"response", "unsafe\nS2"}}});
    auto config_json = base_config(dir);
    config_json["safety_judge"] = scripted("safety", "safe", rules);
    auto path = write_config(dir, config_json);
    auto config = campaign::load_config(path);
    auto result = campaign::run_campaign(config, path);

    auto original = campaign::load_outcomes(result.outcomes_path);
    REQUIRE(original.size() == 4);
    for (const auto& o : original) {
        REQUIRE(o.first_violation_turn.has_value());
        CHECK(*o.first_violation_turn == 2);  // first attacker follow-up trips the rule
    }

    // replay with the same judges reproduces the outcomes exactly
    providers::ScriptedChatProvider safety("safety", campaign::provider_spec_from_json_string(
                                                         config_json["safety_judge"].dump(), {})
                                                         .script);
    providers::ScriptedChatProvider refusal("refusal", providers::Script{{}, "No\nanswered"});
    judge::Judges judges{&safety, &refusal,
                         {judge::default_safety_template(), judge::default_refusal_template()},
                         false};
    const std::string replayed_path = dir.file("replayed.jsonl");
    int skipped = campaign::replay(result.transcripts_path, judges, replayed_path);
    CHECK(skipped == 0);
    CHECK(campaign::load_outcomes(replayed_path) == original);

    // an always-safe judge drives ASR to zero on the same transcripts
    providers::ScriptedChatProvider lenient("lenient", providers::Script{{}, "safe"});
    judge::Judges lenient_judges{&lenient, &refusal,
                                 {judge::default_safety_template(),
                                  judge::default_refusal_template()},
                                 false};
    const std::string lenient_path = dir.file("lenient.jsonl");
    campaign::replay(result.transcripts_path, lenient_judges, lenient_path);
    auto lenient_outcomes = campaign::load_outcomes(lenient_path);
    REQUIRE(lenient_outcomes.size() == 4);
    CHECK(metrics::asr_at_depth(lenient_outcomes, 3) == 0.0);
}

TEST_CASE("replay skips corrupt lines and reports the count") {
    TempDir dir;
    auto path = write_config(dir, base_config(dir));
    auto config = campaign::load_config(path);
    auto result = campaign::run_campaign(config, path);

    // tamper with line 2
    std::ifstream in(result.transcripts_path);
    std::vector<std::string> lines;
    std::string line;
    while (std::getline(in, line)) lines.push_back(line);
    in.close();
    REQUIRE(lines.size() == 4);
    json tampered = json::parse(lines[1]);
    tampered["record"]["language"] = "tampered";
    lines[1] = tampered.dump();
    lines.push_back("not json at all");
    std::ofstream out(result.transcripts_path, std::ios::trunc);
    for (const auto& l : lines) out << l << "\n";
    out.close();

    providers::ScriptedChatProvider safety("s", providers::Script{{}, "safe"});
    providers::ScriptedChatProvider refusal("r", providers::Script{{}, "No\nok"});
    judge::Judges judges{&safety, &refusal,
                         {judge::default_safety_template(), judge::default_refusal_template()},
                         false};
    int skipped = campaign::replay(result.transcripts_path, judges, dir.file("replayed.jsonl"));
    CHECK(skipped == 2);
    CHECK(campaign::load_outcomes(dir.file("replayed.jsonl")).size() == 3);
}

TEST_CASE("reports are written for every known name and reject unknown ones") {
    TempDir dir;
    auto path = write_config(dir, base_config(dir));
    auto config = campaign::load_config(path);
    auto result = campaign::run_campaign(config, path);

    for (const auto& name : campaign::available_reports()) {
        auto files = campaign::emit_report(result.outcomes_path, name, dir.file("reports"));
        CHECK_FALSE(files.written.empty());
        for (const auto& f : files.written) CHECK(std::filesystem::exists(f));
    }

    CHECK_THROWS_WITH_AS(
        campaign::emit_report(result.outcomes_path, "asr-by-victim", dir.file("reports")),
        doctest::Contains("asr-by-language"), metrics::MetricsError);

    // empty outcomes error before any file is written
    write_file(dir.file("empty.jsonl"), "");
    CHECK_THROWS_AS(campaign::emit_report(dir.file("empty.jsonl"), "refusal", dir.file("r2")),
                    metrics::MetricsError);

    // depth-curve carries one row per depth with the language columns
    auto curve = campaign::emit_report(result.outcomes_path, "depth-curve", dir.file("curve"));
    REQUIRE(curve.written.size() == 1);
    const std::string csv = read_file(curve.written[0]);
    CHECK(csv.find("depth,all,en,ja") == 0);
    CHECK(count_lines(curve.written[0]) == 4);  // header + 3 depths
}

TEST_CASE("model filter narrows the target set and rejects an empty result") {
    TempDir dir;
    auto config_json = base_config(dir);
    config_json["targets"].push_back(scripted("target-b", "another reply"));
    config_json["model_filter"] = json::array({"target-b"});
    auto path = write_config(dir, config_json);
    auto config = campaign::load_config(path);
    auto result = campaign::run_campaign(config, path);
    CHECK(result.manifest.cells.size() == 4);
    for (const auto& cell : result.manifest.cells) CHECK(cell.target == "target-b");

    config.model_filter = {"missing-model"};
    CHECK_THROWS_AS(campaign::run_campaign(config, path), campaign::ConfigError);
}
