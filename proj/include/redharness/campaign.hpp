#pragma once

#include "redharness/core.hpp"
#include "redharness/engine.hpp"
#include "redharness/judge.hpp"
#include "redharness/metrics.hpp"
#include "redharness/providers.hpp"
#include "redharness/stargen.hpp"
#include "redharness/translation.hpp"

#include <map>
#include <memory>
#include <optional>
#include <string>
#include <vector>

namespace redharness::campaign {

class ConfigError : public std::runtime_error {
  public:
    using std::runtime_error::runtime_error;
};

/// One chat backend as declared in the campaign file: either a scripted mock
/// with inline rules or an HTTP endpoint.
struct ProviderSpec {
    std::string name;
    std::string type;  // "scripted" | "http"
    providers::Script script;
    providers::ProviderConfig http;
    providers::GenerationParams params = providers::GenerationParams::target_defaults();
};

struct TranslatorSpec {
    std::string type = "identity";  // "identity" | "marker" | "http"
    providers::ProviderConfig http;
};

struct StarterFileSpec {
    std::string path;
    core::StarterSource source = core::StarterSource::UserProvided;
    bool map_categories = false;
};

struct CampaignConfig {
    std::string id;
    std::vector<StarterFileSpec> starter_files;
    std::vector<ProviderSpec> targets;
    ProviderSpec attacker;
    ProviderSpec safety_judge;
    ProviderSpec refusal_judge;
    TranslatorSpec translator;
    std::vector<std::string> languages;
    int depth = 5;
    int workers = 4;
    std::uint64_t rng_seed = 0;
    std::string output_dir;
    bool early_stop = false;
    bool use_human_translations = false;
    std::vector<std::string> model_filter;  // empty = all targets
    std::string attacker_template_path;     // empty = built-in default
    std::string safety_template_path;
    std::string refusal_template_path;
};

CampaignConfig load_config(const std::string& path);

/// Parses one provider block (same schema as the campaign file's entries).
ProviderSpec provider_spec_from_json_string(const std::string& json_text,
                                            providers::GenerationParams defaults);

std::unique_ptr<providers::ChatProvider> build_chat_provider(const ProviderSpec& spec);

/// Validation with line-addressable messages; throws ConfigError before any
/// side effect.
void validate_config(const CampaignConfig& config);

/// Stable content fingerprint of the config file (FNV-1a hex).
std::string fingerprint_file(const std::string& path);
std::string fnv1a_hex(const std::string& data);

enum class CellStatus { Pending, Completed, Failed };

/// One (starter, language, target) work item.
struct Cell {
    int index = 0;
    std::string starter_id;
    std::string language;
    std::string target;
    CellStatus status = CellStatus::Pending;
};

struct RunManifest {
    std::string fingerprint;
    std::string version = "1";
    std::vector<Cell> cells;

    int count(CellStatus s) const;
    std::string to_json() const;
    static RunManifest from_json_file(const std::string& path);
    void save(const std::string& path) const;
};

struct RunOptions {
    bool resume = false;
    int max_cells = 0;  // 0 = no limit; >0 stops after N cells (interruption testing)
};

struct RunResult {
    RunManifest manifest;
    std::string transcripts_path;
    std::string outcomes_path;
    int failed_cells = 0;
};

RunResult run_campaign(const CampaignConfig& config, const std::string& config_path,
                       const RunOptions& options = {});

/// Re-judges stored transcripts without re-running any conversation.
/// Returns the number of corrupt lines skipped.
int replay(const std::string& transcripts_path, judge::Judges& judges,
           const std::string& outcomes_path);

std::vector<core::ConversationOutcome> load_outcomes(const std::string& path);

struct ReportFiles {
    std::vector<std::string> written;
};

const std::vector<std::string>& available_reports();

/// Emits one named report (CSV + Markdown, or CSV for curve data) from an
/// outcomes file. Pure function of the file contents.
ReportFiles emit_report(const std::string& outcomes_path, const std::string& report_name,
                        const std::string& out_dir);

}  // namespace redharness::campaign
