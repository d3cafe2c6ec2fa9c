#include "redharness/campaign.hpp"

#include <CLI11.hpp>
#include <nlohmann/json.hpp>

#include <fstream>
#include <iostream>

using namespace redharness;
using nlohmann::json;

namespace {

constexpr int kExitOk = 0;
constexpr int kExitValidationError = 1;
constexpr int kExitPartialFailures = 2;

campaign::ProviderSpec load_provider_spec(const std::string& path,
                                          providers::GenerationParams defaults) {
    std::ifstream in(path);
    if (!in) throw campaign::ConfigError("cannot open provider config: " + path);
    std::stringstream buf;
    buf << in.rdbuf();
    return campaign::provider_spec_from_json_string(buf.str(), defaults);
}

int cmd_generate_starters(const std::string& category, const std::string& template_name,
                          const std::string& template_path, int runs, int per_run,
                          int target_volume, const std::string& seed_file, const std::string& out,
                          std::uint64_t rng_seed, const std::string& generator_config) {
    stargen::GenerationPlan plan;
    plan.category = core::category_from_string(category);
    const bool vanilla = template_name == "vanilla";
    if (!vanilla && template_name != "redteam") {
        throw campaign::ConfigError("template must be 'vanilla' or 'redteam'");
    }
    plan.icl_template = stargen::IclTemplate::load(
        vanilla ? stargen::TemplateKind::Vanilla : stargen::TemplateKind::RedTeam, template_path);
    plan.runs = runs;
    plan.per_run = per_run > 0 ? per_run : plan.icl_template.expected_batch;
    plan.target_volume = target_volume > 0 ? target_volume : (vanilla ? 100 : 70);
    plan.rng_seed = rng_seed;
    plan.source_tag = vanilla ? core::StarterSource::MistralGen : core::StarterSource::MixtralGen;

    auto seeds = core::load_starters(seed_file, core::StarterSource::Human);
    std::vector<core::StarterRecord> pool;
    for (auto& s : seeds) {
        if (s.category == plan.category) pool.push_back(std::move(s));
    }

    auto spec = load_provider_spec(generator_config, providers::GenerationParams::attacker_defaults());
    auto generator = campaign::build_chat_provider(spec);

    auto result = stargen::generate_starters(plan, *generator, pool);
    core::save_starters(out, result.records);
    for (const auto& w : result.warnings) std::cerr << "warning: " << w << "\n";
    std::cout << "wrote " << result.records.size() << " starters to " << out << "\n";
    return result.shortfall ? kExitPartialFailures : kExitOk;
}

int cmd_run(const std::string& config_path, bool resume, int max_cells) {
    auto config = campaign::load_config(config_path);
    campaign::RunOptions options;
    options.resume = resume;
    options.max_cells = max_cells;
    auto result = campaign::run_campaign(config, config_path, options);
    std::cout << "cells: " << result.manifest.cells.size()
              << " completed: " << result.manifest.count(campaign::CellStatus::Completed)
              << " failed: " << result.manifest.count(campaign::CellStatus::Failed)
              << " pending: " << result.manifest.count(campaign::CellStatus::Pending) << "\n";
    std::cout << "transcripts: " << result.transcripts_path << "\n";
    std::cout << "outcomes: " << result.outcomes_path << "\n";
    return result.failed_cells > 0 ? kExitPartialFailures : kExitOk;
}

int cmd_assess(const std::string& transcripts, const std::string& judge_config,
               const std::string& out) {
    std::ifstream in(judge_config);
    if (!in) throw campaign::ConfigError("cannot open judge config: " + judge_config);
    json obj = json::parse(in);

    auto make = [](const json& spec_json) {
        return campaign::build_chat_provider(campaign::provider_spec_from_json_string(
            spec_json.dump(), providers::GenerationParams::target_defaults()));
    };
    auto safety = make(obj.at("safety"));
    auto refusal = make(obj.at("refusal"));
    judge::Judges judges{safety.get(), refusal.get(),
                         {judge::default_safety_template(), judge::default_refusal_template()}};
    if (obj.contains("templates")) {
        judges.templates = judge::load_templates(obj.at("templates").at("safety").get<std::string>(),
                                                 obj.at("templates").at("refusal").get<std::string>());
    }
    int skipped = campaign::replay(transcripts, judges, out);
    std::cout << "wrote outcomes to " << out;
    if (skipped > 0) std::cout << " (skipped " << skipped << " corrupt lines)";
    std::cout << "\n";
    return skipped > 0 ? kExitPartialFailures : kExitOk;
}

int cmd_report(const std::string& outcomes, const std::string& name, const std::string& out_dir,
               bool all) {
    std::vector<std::string> names = all ? campaign::available_reports()
                                         : std::vector<std::string>{name};
    for (const auto& n : names) {
        auto files = campaign::emit_report(outcomes, n, out_dir);
        for (const auto& f : files.written) std::cout << f << "\n";
    }
    return kExitOk;
}

int cmd_diversity(const std::string& starters_path, int sample_k, int repeats,
                  std::uint64_t rng_seed) {
    auto records = core::load_starters(starters_path, core::StarterSource::UserProvided);
    std::map<core::SafetyCategory, std::vector<std::string>> by_category;
    for (const auto& r : records) by_category[r.category].push_back(r.text_en);
    providers::OneHotEmbedder embedder(static_cast<int>(records.size()) + 1);
    auto report = metrics::sampled_diversity(by_category, embedder, sample_k, repeats, rng_seed);
    std::cout << "category,cosine_distance,self_bleu\n";
    for (const auto& [cat, scores] : report.per_category) {
        std::printf("%s,%.4f,%.4f\n", core::to_string(cat).c_str(), scores.cosine_distance,
                    scores.self_bleu);
    }
    std::printf("dataset,%.4f,%.4f\n", report.dataset.cosine_distance, report.dataset.self_bleu);
    return kExitOk;
}

int cmd_validate(const std::string& config_path) {
    auto config = campaign::load_config(config_path);
    campaign::validate_config(config);
    std::cout << "config ok: " << config_path << "\n";
    return kExitOk;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Multi-lingual multi-turn adversarial conversation harness"};
    app.require_subcommand(1);

    // generate-starters
    auto* gen = app.add_subcommand("generate-starters", "Generate conversation starters from seeds");
    std::string category, template_name = "vanilla", template_path, seed_file, gen_out,
                generator_config;
    int runs = 7, per_run = 0, target_volume = 0;
    std::uint64_t gen_seed = 0;
    gen->add_option("--category", category)->required();
    gen->add_option("--template", template_name, "vanilla or redteam");
    gen->add_option("--template-file", template_path)->required();
    gen->add_option("--runs", runs);
    gen->add_option("--per-run", per_run);
    gen->add_option("--target-volume", target_volume);
    gen->add_option("--seed-file", seed_file)->required();
    gen->add_option("--out", gen_out)->required();
    gen->add_option("--rng-seed", gen_seed);
    gen->add_option("--generator-config", generator_config)->required();

    // run
    auto* run = app.add_subcommand("run", "Execute a campaign");
    std::string run_config;
    bool resume = false;
    int max_cells = 0;
    run->add_option("--config", run_config)->required();
    run->add_flag("--resume", resume);
    run->add_option("--max-cells", max_cells, "stop after N cells (testing)");

    // assess / replay
    auto* assess = app.add_subcommand("assess", "Re-judge stored transcripts");
    app.add_subcommand("replay", "Alias of assess")->alias("rejudge");
    std::string transcripts, judge_config, assess_out;
    assess->add_option("--transcripts", transcripts)->required();
    assess->add_option("--judge", judge_config)->required();
    assess->add_option("--out", assess_out)->required();

    // report
    auto* report = app.add_subcommand("report", "Emit metric tables from outcomes");
    std::string outcomes, report_name, report_out = ".";
    bool report_all = false;
    report->add_option("--outcomes", outcomes)->required();
    report->add_option("--name", report_name);
    report->add_option("--out", report_out);
    report->add_flag("--all", report_all);

    // diversity
    auto* diversity = app.add_subcommand("diversity", "Diversity metrics over a starter set");
    std::string div_starters;
    int sample_k = 10, repeats = 100;
    std::uint64_t div_seed = 0;
    diversity->add_option("--starters", div_starters)->required();
    diversity->add_option("--sample-k", sample_k);
    diversity->add_option("--repeats", repeats);
    diversity->add_option("--rng-seed", div_seed);

    // validate-config
    auto* validate = app.add_subcommand("validate-config", "Validate a campaign config");
    std::string validate_path;
    validate->add_option("--config", validate_path)->required();

    CLI11_PARSE(app, argc, argv);

    try {
        if (gen->parsed()) {
            return cmd_generate_starters(category, template_name, template_path, runs, per_run,
                                         target_volume, seed_file, gen_out, gen_seed,
                                         generator_config);
        }
        if (run->parsed()) return cmd_run(run_config, resume, max_cells);
        if (assess->parsed()) return cmd_assess(transcripts, judge_config, assess_out);
        if (report->parsed()) {
            if (!report_all && report_name.empty()) {
                std::cerr << "error: --name or --all is required\n";
                return kExitValidationError;
            }
            return cmd_report(outcomes, report_name, report_out, report_all);
        }
        if (diversity->parsed()) return cmd_diversity(div_starters, sample_k, repeats, div_seed);
        if (validate->parsed()) return cmd_validate(validate_path);
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return kExitValidationError;
    }
    std::cerr << "error: unknown subcommand\n";
    return kExitValidationError;
}
