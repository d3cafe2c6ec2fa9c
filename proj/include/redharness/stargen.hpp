#pragma once

#include "redharness/core.hpp"
#include "redharness/providers.hpp"

#include <random>
#include <string>
#include <vector>

namespace redharness::stargen {

enum class TemplateKind { Vanilla, RedTeam };

/// Instruction text with {policy} and {seeds} placeholders, loaded from an
/// editable file. Templates are data; the shipped defaults live in templates/.
struct IclTemplate {
    TemplateKind kind = TemplateKind::Vanilla;
    std::string instruction;
    int expected_batch = 15;  // Vanilla 15, RedTeam 10

    static IclTemplate load(TemplateKind kind, const std::string& path);
};

class TemplateError : public std::runtime_error {
  public:
    using std::runtime_error::runtime_error;
};

struct GenerationPlan {
    core::SafetyCategory category = core::SafetyCategory::AnimalAbuse;
    IclTemplate icl_template;
    int runs = 7;
    int per_run = 15;
    int seed_count = 5;
    int target_volume = 100;  // Vanilla 7x15 trimmed to 100; RedTeam 7x10 = 70
    std::uint64_t rng_seed = 0;
    core::StarterSource source_tag = core::StarterSource::MistralGen;
};

struct GenerationResult {
    std::vector<core::StarterRecord> records;
    bool shortfall = false;  // final volume below target after dedup
    std::vector<std::string> warnings;
};

/// k distinct records, uniform without replacement, deterministic under a
/// fixed rng. All pool records must share one category.
std::vector<core::StarterRecord> sample_seeds(const std::vector<core::StarterRecord>& pool, int k,
                                              std::mt19937_64& rng);

std::string build_icl_prompt(const IclTemplate& icl_template, core::SafetyCategory category,
                             const std::vector<core::StarterRecord>& seeds);

/// Extracts enumerated or line-separated candidates: strips numbering,
/// bullets and surrounding quotes, drops empties and case-folded duplicates.
/// The caller treats fewer than `minimum` lines as a soft failure.
std::vector<std::string> parse_generated_starters(const std::string& raw, int minimum);

GenerationResult generate_starters(const GenerationPlan& plan, providers::ChatProvider& generator,
                                   const std::vector<core::StarterRecord>& seed_pool);

}  // namespace redharness::stargen
