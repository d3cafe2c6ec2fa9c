#include "redharness/campaign.hpp"

#include <nlohmann/json.hpp>

#include <atomic>
#include <condition_variable>
#include <filesystem>
#include <fstream>
#include <functional>
#include <mutex>
#include <set>
#include <sstream>
#include <thread>

namespace redharness::campaign {

namespace fs = std::filesystem;
using nlohmann::json;

// ---------------------------------------------------------------------------
// Config
// ---------------------------------------------------------------------------

static providers::GenerationParams params_from_json(const json& obj,
                                                    providers::GenerationParams defaults) {
    providers::GenerationParams p = defaults;
    if (obj.contains("max_new_tokens")) p.max_new_tokens = obj.at("max_new_tokens").get<int>();
    if (obj.contains("temperature")) p.temperature = obj.at("temperature").get<double>();
    if (obj.contains("top_p")) p.top_p = obj.at("top_p").get<double>();
    return p;
}

static ProviderSpec provider_from_json(const json& obj, providers::GenerationParams defaults) {
    ProviderSpec spec;
    spec.name = obj.value("name", "");
    spec.type = obj.at("type").get<std::string>();
    spec.params = obj.contains("params") ? params_from_json(obj.at("params"), defaults) : defaults;
    if (spec.type == "scripted") {
        if (obj.contains("rules")) {
            for (const auto& rule : obj.at("rules")) {
                providers::ScriptRule r;
                if (rule.contains("exact_turn")) r.exact_turn = rule.at("exact_turn").get<int>();
                if (rule.contains("min_turn")) r.min_turn = rule.at("min_turn").get<int>();
                if (rule.contains("contains")) r.last_user_contains = rule.at("contains").get<std::string>();
                r.response = rule.at("response").get<std::string>();
                spec.script.rules.push_back(std::move(r));
            }
        }
        spec.script.fallback = obj.at("fallback").get<std::string>();
    } else if (spec.type == "http") {
        spec.http.endpoint = obj.at("endpoint").get<std::string>();
        spec.http.model = obj.at("model").get<std::string>();
        spec.http.api_key_env = obj.value("api_key_env", "");
        if (obj.contains("timeout_ms")) {
            spec.http.timeout = std::chrono::milliseconds(obj.at("timeout_ms").get<long>());
        }
        if (obj.contains("max_attempts")) spec.http.retry.max_attempts = obj.at("max_attempts").get<int>();
        if (obj.contains("requests_per_second")) {
            spec.http.requests_per_second = obj.at("requests_per_second").get<double>();
        }
        if (spec.name.empty()) spec.name = spec.http.model;
    } else {
        throw ConfigError("unknown provider type '" + spec.type + "' (scripted, http)");
    }
    if (spec.name.empty()) throw ConfigError("scripted provider needs a name");
    return spec;
}

ProviderSpec provider_spec_from_json_string(const std::string& json_text,
                                            providers::GenerationParams defaults) {
    try {
        return provider_from_json(json::parse(json_text), defaults);
    } catch (const json::exception& e) {
        throw ConfigError(std::string("bad provider spec: ") + e.what());
    }
}

std::unique_ptr<providers::ChatProvider> build_chat_provider(const ProviderSpec& spec) {
    if (spec.type == "scripted") {
        return std::make_unique<providers::ScriptedChatProvider>(spec.name, spec.script);
    }
    return std::make_unique<providers::HttpChatProvider>(spec.http);
}

CampaignConfig load_config(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw ConfigError("cannot open config file: " + path);
    json obj;
    try {
        obj = json::parse(in);
    } catch (const json::parse_error& e) {
        throw ConfigError(path + ": parse error at byte " + std::to_string(e.byte) + ": " + e.what());
    }
    CampaignConfig config;
    try {
        config.id = obj.at("id").get<std::string>();
        for (const auto& s : obj.at("starters")) {
            StarterFileSpec file;
            file.path = s.at("path").get<std::string>();
            file.source = core::source_from_string(s.value("source", "UserProvided"));
            file.map_categories = s.value("map_categories", false);
            config.starter_files.push_back(std::move(file));
        }
        for (const auto& t : obj.at("targets")) {
            config.targets.push_back(provider_from_json(t, providers::GenerationParams::target_defaults()));
        }
        config.attacker =
            provider_from_json(obj.at("attacker"), providers::GenerationParams::attacker_defaults());
        config.safety_judge =
            provider_from_json(obj.at("safety_judge"), providers::GenerationParams::target_defaults());
        config.refusal_judge =
            provider_from_json(obj.at("refusal_judge"), providers::GenerationParams::target_defaults());
        if (obj.contains("translator")) {
            const auto& tr = obj.at("translator");
            config.translator.type = tr.value("type", "identity");
            if (config.translator.type == "http") {
                config.translator.http.endpoint = tr.at("endpoint").get<std::string>();
            }
        }
        config.languages = obj.at("languages").get<std::vector<std::string>>();
        config.depth = obj.value("depth", 5);
        config.workers = obj.value("workers", 4);
        config.rng_seed = obj.value("rng_seed", std::uint64_t{0});
        config.output_dir = obj.at("output_dir").get<std::string>();
        config.early_stop = obj.value("early_stop", false);
        config.use_human_translations = obj.value("use_human_translations", false);
        if (obj.contains("model_filter")) {
            config.model_filter = obj.at("model_filter").get<std::vector<std::string>>();
        }
        if (obj.contains("templates")) {
            const auto& t = obj.at("templates");
            config.attacker_template_path = t.value("attacker", "");
            config.safety_template_path = t.value("safety", "");
            config.refusal_template_path = t.value("refusal", "");
        }
    } catch (const json::exception& e) {
        throw ConfigError(path + ": " + e.what());
    }
    return config;
}

void validate_config(const CampaignConfig& config) {
    if (config.id.empty()) throw ConfigError("campaign id is empty");
    if (config.starter_files.empty()) throw ConfigError("no starter files configured");
    if (config.targets.empty()) throw ConfigError("at least one target is required");
    if (config.languages.empty()) throw ConfigError("languages list is empty");
    for (const auto& code : config.languages) {
        if (!core::language_from_code(code)) {
            throw ConfigError("invalid language code: '" + code + "'");
        }
    }
    if (config.depth < 1) throw ConfigError("depth must be >= 1");
    if (config.workers < 1) throw ConfigError("worker count must be >= 1");
    if (config.output_dir.empty()) throw ConfigError("output_dir is empty");
    const std::set<std::string> types = {"identity", "marker", "http"};
    if (!types.count(config.translator.type)) {
        throw ConfigError("unknown translator type: '" + config.translator.type + "'");
    }
    for (const auto& file : config.starter_files) {
        if (!fs::exists(file.path)) throw ConfigError("starter file not found: " + file.path);
    }
}

std::string fnv1a_hex(const std::string& data) {
    std::uint64_t hash = 0xcbf29ce484222325ULL;
    for (unsigned char c : data) {
        hash ^= c;
        hash *= 0x100000001b3ULL;
    }
    char buf[17];
    std::snprintf(buf, sizeof(buf), "%016llx", static_cast<unsigned long long>(hash));
    return buf;
}

std::string fingerprint_file(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw ConfigError("cannot open file for fingerprint: " + path);
    std::stringstream buf;
    buf << in.rdbuf();
    return fnv1a_hex(buf.str());
}

// ---------------------------------------------------------------------------
// Manifest
// ---------------------------------------------------------------------------

static std::string status_name(CellStatus s) {
    switch (s) {
        case CellStatus::Pending: return "pending";
        case CellStatus::Completed: return "completed";
        case CellStatus::Failed: return "failed";
    }
    throw std::logic_error("unreachable status");
}

static CellStatus status_from_name(const std::string& s) {
    if (s == "pending") return CellStatus::Pending;
    if (s == "completed") return CellStatus::Completed;
    if (s == "failed") return CellStatus::Failed;
    throw ConfigError("unknown cell status in manifest: " + s);
}

int RunManifest::count(CellStatus s) const {
    int n = 0;
    for (const auto& c : cells) {
        if (c.status == s) ++n;
    }
    return n;
}

std::string RunManifest::to_json() const {
    json obj;
    obj["fingerprint"] = fingerprint;
    obj["version"] = version;
    json cell_list = json::array();
    for (const auto& c : cells) {
        cell_list.push_back({{"index", c.index},
                             {"starter", c.starter_id},
                             {"language", c.language},
                             {"target", c.target},
                             {"status", status_name(c.status)}});
    }
    obj["cells"] = cell_list;
    return obj.dump(2);
}

RunManifest RunManifest::from_json_file(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw ConfigError("cannot open manifest: " + path);
    json obj = json::parse(in);
    RunManifest m;
    m.fingerprint = obj.at("fingerprint").get<std::string>();
    m.version = obj.at("version").get<std::string>();
    for (const auto& c : obj.at("cells")) {
        Cell cell;
        cell.index = c.at("index").get<int>();
        cell.starter_id = c.at("starter").get<std::string>();
        cell.language = c.at("language").get<std::string>();
        cell.target = c.at("target").get<std::string>();
        cell.status = status_from_name(c.at("status").get<std::string>());
        m.cells.push_back(std::move(cell));
    }
    return m;
}

void RunManifest::save(const std::string& path) const {
    const std::string tmp = path + ".tmp";
    {
        std::ofstream out(tmp);
        out << to_json() << "\n";
    }
    fs::rename(tmp, path);
}

// ---------------------------------------------------------------------------
// Provider construction
// ---------------------------------------------------------------------------

static std::unique_ptr<translation::Translator> make_translator(const TranslatorSpec& spec) {
    if (spec.type == "identity") return std::make_unique<translation::IdentityTranslator>();
    if (spec.type == "marker") return std::make_unique<translation::MarkerTranslator>();
    return std::make_unique<translation::HttpTranslator>(spec.http);
}

// ---------------------------------------------------------------------------
// Campaign execution
// ---------------------------------------------------------------------------

namespace {

struct CellResult {
    bool failed = false;
    std::string transcript_line;
    std::string outcome_line;  // empty for failed conversations
};

std::string transcript_line_for(const Cell& cell, const core::ConversationState& state,
                                core::StarterSource source) {
    json record = json::parse(core::state_to_json(state));
    json line;
    line["cell"] = cell.index;
    line["model"] = cell.target;
    line["source"] = core::to_string(source);
    line["record"] = record;
    line["checksum"] = fnv1a_hex(record.dump());
    return line.dump();
}

}  // namespace

RunResult run_campaign(const CampaignConfig& config, const std::string& config_path,
                       const RunOptions& options) {
    validate_config(config);

    // Load starters before touching the output directory.
    std::vector<core::StarterRecord> starters;
    std::map<std::string, core::StarterSource> source_of;
    for (const auto& file : config.starter_files) {
        for (auto& rec : core::load_starters(file.path, file.source, file.map_categories)) {
            source_of[rec.id] = rec.source;
            starters.push_back(std::move(rec));
        }
    }
    if (starters.empty()) throw ConfigError("starter files contain no records");

    std::vector<const ProviderSpec*> targets;
    for (const auto& t : config.targets) {
        if (config.model_filter.empty() ||
            std::find(config.model_filter.begin(), config.model_filter.end(), t.name) !=
                config.model_filter.end()) {
            targets.push_back(&t);
        }
    }
    if (targets.empty()) throw ConfigError("model_filter excludes every target");

    fs::create_directories(config.output_dir);
    const std::string manifest_path = config.output_dir + "/manifest.json";
    const std::string transcripts_path = config.output_dir + "/transcripts.jsonl";
    const std::string outcomes_path = config.output_dir + "/outcomes.jsonl";
    const std::string fingerprint = fingerprint_file(config_path);

    RunManifest manifest;
    if (options.resume) {
        manifest = RunManifest::from_json_file(manifest_path);
        if (manifest.fingerprint != fingerprint) {
            throw ConfigError("config fingerprint mismatch; refusing to resume a different campaign");
        }
    } else {
        manifest.fingerprint = fingerprint;
        int index = 0;
        for (const auto& starter : starters) {
            for (const auto& lang : config.languages) {
                for (const auto* target : targets) {
                    manifest.cells.push_back({index++, starter.id, lang, target->name});
                }
            }
        }
        std::ofstream(transcripts_path, std::ios::trunc);
        std::ofstream(outcomes_path, std::ios::trunc);
        manifest.save(manifest_path);
    }

    std::map<std::string, const core::StarterRecord*> starter_by_id;
    for (const auto& s : starters) starter_by_id[s.id] = &s;

    // Shared handles; conversations share no mutable state beyond these.
    std::map<std::string, std::unique_ptr<providers::ChatProvider>> target_providers;
    for (const auto* t : targets) target_providers[t->name] = build_chat_provider(*t);
    auto attacker = build_chat_provider(config.attacker);
    auto safety_judge = build_chat_provider(config.safety_judge);
    auto refusal_judge = build_chat_provider(config.refusal_judge);
    auto translator = make_translator(config.translator);

    judge::JudgeTemplates templates{
        config.safety_template_path.empty() ? judge::default_safety_template()
                                            : judge::load_templates(config.safety_template_path,
                                                                    config.safety_template_path)
                                                  .safety,
        config.refusal_template_path.empty()
            ? judge::default_refusal_template()
            : judge::load_templates(config.refusal_template_path, config.refusal_template_path)
                  .refusal};
    const std::string attacker_template = config.attacker_template_path.empty()
                                              ? engine::default_attacker_template()
                                              : engine::load_attacker_template(
                                                    config.attacker_template_path);

    std::vector<int> pending;
    for (const auto& cell : manifest.cells) {
        if (cell.status == CellStatus::Pending) pending.push_back(cell.index);
    }
    if (options.max_cells > 0 && static_cast<int>(pending.size()) > options.max_cells) {
        pending.resize(options.max_cells);
    }

    std::mutex mu;
    std::condition_variable cv;
    std::map<int, CellResult> results;
    std::atomic<size_t> next_work{0};

    auto worker = [&] {
        for (;;) {
            const size_t slot = next_work.fetch_add(1);
            if (slot >= pending.size()) return;
            const Cell& cell = manifest.cells[pending[slot]];
            CellResult result;
            try {
                const core::StarterRecord& starter = *starter_by_id.at(cell.starter_id);
                const core::Language language = *core::language_from_code(cell.language);
                engine::EngineDeps deps;
                deps.target = target_providers.at(cell.target).get();
                deps.target_params = targets.front()->params;
                for (const auto* t : targets) {
                    if (t->name == cell.target) deps.target_params = t->params;
                }
                deps.attacker = attacker.get();
                deps.attacker_params = config.attacker.params;
                deps.translator = translator.get();
                deps.attacker_template = attacker_template;
                deps.depth = config.depth;
                deps.early_stop = config.early_stop;
                deps.use_human_translations = config.use_human_translations;

                core::ConversationState state = engine::run_conversation(starter, language, deps);
                state.id = starter.id + ":" + cell.language + ":" + cell.target;
                if (state.status == core::ConversationStatus::Completed) {
                    judge::Judges judges{safety_judge.get(), refusal_judge.get(), templates};
                    core::ConversationOutcome outcome =
                        judge::assess_conversation(state, judges, cell.target, starter.source);
                    result.outcome_line = core::outcome_to_json(outcome);
                } else {
                    result.failed = true;
                }
                result.transcript_line = transcript_line_for(cell, state, starter.source);
            } catch (const std::exception& e) {
                result.failed = true;
                core::ConversationState broken;
                broken.id = cell.starter_id + ":" + cell.language + ":" + cell.target;
                broken.starter_id = cell.starter_id;
                broken.language = cell.language;
                broken.status = core::ConversationStatus::Failed;
                broken.failure_reason = std::string("worker: ") + e.what();
                result.transcript_line =
                    transcript_line_for(cell, broken, source_of[cell.starter_id]);
            }
            {
                std::scoped_lock lock(mu);
                results[pending[slot]] = std::move(result);
            }
            cv.notify_one();
        }
    };

    std::vector<std::thread> threads;
    const int worker_count = std::min(config.workers, std::max<int>(static_cast<int>(pending.size()), 1));
    for (int i = 0; i < worker_count; ++i) threads.emplace_back(worker);

    // Single writer drains results in cell order so output files are
    // byte-identical regardless of scheduling or resume boundaries.
    std::ofstream transcripts(transcripts_path, std::ios::app);
    std::ofstream outcomes(outcomes_path, std::ios::app);
    int failed_cells = 0;
    for (int index : pending) {
        CellResult result;
        {
            std::unique_lock lock(mu);
            cv.wait(lock, [&] { return results.count(index) > 0; });
            result = std::move(results.at(index));
            results.erase(index);
        }
        transcripts << result.transcript_line << "\n";
        transcripts.flush();
        if (!result.outcome_line.empty()) {
            outcomes << result.outcome_line << "\n";
            outcomes.flush();
        }
        manifest.cells[index].status = result.failed ? CellStatus::Failed : CellStatus::Completed;
        if (result.failed) ++failed_cells;
        manifest.save(manifest_path);
    }
    for (auto& t : threads) t.join();

    return {manifest, transcripts_path, outcomes_path, failed_cells};
}

// ---------------------------------------------------------------------------
// Replay and reports
// ---------------------------------------------------------------------------

int replay(const std::string& transcripts_path, judge::Judges& judges,
           const std::string& outcomes_path) {
    std::ifstream in(transcripts_path);
    if (!in) throw ConfigError("cannot open transcripts: " + transcripts_path);
    std::ofstream out(outcomes_path, std::ios::trunc);
    int skipped = 0;
    std::string line;
    while (std::getline(in, line)) {
        if (core::trim(line).empty()) continue;
        try {
            json obj = json::parse(line);
            const std::string record_dump = obj.at("record").dump();
            if (fnv1a_hex(record_dump) != obj.at("checksum").get<std::string>()) {
                throw ConfigError("checksum mismatch");
            }
            core::ConversationState state = core::state_from_json(record_dump);
            if (state.status != core::ConversationStatus::Completed) continue;
            core::ConversationOutcome outcome = judge::assess_conversation(
                state, judges, obj.at("model").get<std::string>(),
                core::source_from_string(obj.at("source").get<std::string>()));
            out << core::outcome_to_json(outcome) << "\n";
        } catch (const std::exception&) {
            ++skipped;
        }
    }
    return skipped;
}

std::vector<core::ConversationOutcome> load_outcomes(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw ConfigError("cannot open outcomes: " + path);
    std::vector<core::ConversationOutcome> outcomes;
    std::string line;
    while (std::getline(in, line)) {
        if (core::trim(line).empty()) continue;
        outcomes.push_back(core::outcome_from_json(line));
    }
    return outcomes;
}

const std::vector<std::string>& available_reports() {
    static const std::vector<std::string> names = {
        "asr-by-language", "asr-by-dataset", "refusal",
        "conditional-asr", "asr-by-category", "depth-curve",
    };
    return names;
}

namespace {

using CellFn = std::function<std::optional<double>(const std::vector<core::ConversationOutcome>&)>;

metrics::MetricsTable build_table(const std::vector<core::ConversationOutcome>& outcomes,
                                  metrics::Dimension row_dim, metrics::Dimension col_dim,
                                  const CellFn& cell_fn) {
    metrics::MetricsTable table = metrics::aggregate_table(outcomes, row_dim, col_dim, false);
    for (size_t r = 0; r < table.row_labels.size(); ++r) {
        for (size_t c = 0; c < table.col_labels.size(); ++c) {
            std::vector<core::ConversationOutcome> bucket;
            for (const auto& o : metrics::judged_only(outcomes)) {
                if (metrics::dimension_label(row_dim, o) == table.row_labels[r] &&
                    metrics::dimension_label(col_dim, o) == table.col_labels[c]) {
                    bucket.push_back(o);
                }
            }
            table.cells[r][c] = bucket.empty() ? std::nullopt : cell_fn(bucket);
        }
    }
    return table;
}

void write_table(const metrics::MetricsTable& table, const std::string& out_dir,
                 const std::string& name, ReportFiles& files) {
    const std::string csv = out_dir + "/" + name + ".csv";
    const std::string md = out_dir + "/" + name + ".md";
    std::ofstream(csv) << table.to_csv();
    std::ofstream(md) << table.to_markdown();
    files.written.push_back(csv);
    files.written.push_back(md);
}

int max_depth_of(const std::vector<core::ConversationOutcome>& outcomes) {
    int depth = 1;
    for (const auto& o : outcomes) depth = std::max(depth, o.depth);
    return depth;
}

}  // namespace

ReportFiles emit_report(const std::string& outcomes_path, const std::string& report_name,
                        const std::string& out_dir) {
    const auto all = load_outcomes(outcomes_path);
    const auto outcomes = metrics::judged_only(all);
    if (outcomes.empty()) throw metrics::MetricsError("outcomes file has no judged records");
    fs::create_directories(out_dir);
    ReportFiles files;
    const int depth = max_depth_of(outcomes);

    if (report_name == "asr-by-language") {
        auto table = metrics::aggregate_table(outcomes, metrics::Dimension::Language,
                                              metrics::Dimension::Model, true);
        write_table(table, out_dir, report_name, files);
    } else if (report_name == "asr-by-dataset") {
        auto asr1 = build_table(outcomes, metrics::Dimension::Dataset, metrics::Dimension::Language,
                                [](const auto& b) { return 100.0 * metrics::asr_at_depth(b, 1); });
        auto asrT = build_table(outcomes, metrics::Dimension::Dataset, metrics::Dimension::Language,
                                [depth](const auto& b) {
                                    return 100.0 * metrics::asr_at_depth(b, depth);
                                });
        write_table(asr1, out_dir, report_name + "-asr1", files);
        write_table(asrT, out_dir, report_name + "-asr" + std::to_string(depth), files);
    } else if (report_name == "refusal") {
        auto table = build_table(outcomes, metrics::Dimension::Dataset, metrics::Dimension::Model,
                                 [](const auto& b) {
                                     return 100.0 * metrics::refusal_rate_first_turn(b);
                                 });
        write_table(table, out_dir, report_name, files);
    } else if (report_name == "conditional-asr") {
        auto table = build_table(
            outcomes, metrics::Dimension::Language, metrics::Dimension::Model,
            [depth](const auto& b) -> std::optional<double> {
                try {
                    return 100.0 * metrics::conditional_asr_given_refusal(b, depth);
                } catch (const metrics::MetricsError&) {
                    return std::nullopt;  // no refusing subpopulation in this cell
                }
            });
        write_table(table, out_dir, report_name, files);
    } else if (report_name == "asr-by-category") {
        auto table = metrics::aggregate_table(outcomes, metrics::Dimension::Category,
                                              metrics::Dimension::Model, false);
        write_table(table, out_dir, report_name, files);
    } else if (report_name == "depth-curve") {
        std::ostringstream csv;
        csv << "depth,all";
        std::vector<std::string> langs;
        for (const auto& l : core::known_languages()) {
            for (const auto& o : outcomes) {
                if (o.language == l.code) {
                    langs.push_back(l.code);
                    csv << "," << l.code;
                    break;
                }
            }
        }
        csv << "\n";
        const auto curve = metrics::asr_curve(outcomes, depth);
        std::map<std::string, std::vector<double>> per_lang;
        for (const auto& code : langs) {
            std::vector<core::ConversationOutcome> bucket;
            for (const auto& o : outcomes) {
                if (o.language == code) bucket.push_back(o);
            }
            per_lang[code] = metrics::asr_curve(bucket, depth);
        }
        for (int t = 1; t <= depth; ++t) {
            char buf[32];
            std::snprintf(buf, sizeof(buf), "%.2f", 100.0 * curve[t - 1]);
            csv << t << "," << buf;
            for (const auto& code : langs) {
                std::snprintf(buf, sizeof(buf), "%.2f", 100.0 * per_lang[code][t - 1]);
                csv << "," << buf;
            }
            csv << "\n";
        }
        const std::string path = out_dir + "/depth-curve.csv";
        std::ofstream(path) << csv.str();
        files.written.push_back(path);
    } else {
        std::string names;
        for (const auto& n : available_reports()) names += " " + n;
        throw metrics::MetricsError("unknown report '" + report_name + "'; available:" + names);
    }
    return files;
}

}  // namespace redharness::campaign
