#include "redharness/stargen.hpp"

#include <algorithm>
#include <fstream>
#include <numeric>
#include <set>
#include <sstream>

namespace redharness::stargen {

static void validate_template(const IclTemplate& t) {
    auto count = [&](const std::string& needle) {
        size_t n = 0, pos = 0;
        while ((pos = t.instruction.find(needle, pos)) != std::string::npos) {
            ++n;
            pos += needle.size();
        }
        return n;
    };
    if (count("{policy}") != 1) {
        throw TemplateError("template must contain {policy} exactly once");
    }
    if (count("{seeds}") != 1) {
        throw TemplateError("template must contain {seeds} exactly once");
    }
    if (t.expected_batch < 1) throw TemplateError("expected_batch must be >= 1");
}

IclTemplate IclTemplate::load(TemplateKind kind, const std::string& path) {
    std::ifstream in(path);
    if (!in) throw TemplateError("cannot open template file: " + path);
    std::stringstream buf;
    buf << in.rdbuf();
    IclTemplate t;
    t.kind = kind;
    t.instruction = buf.str();
    t.expected_batch = (kind == TemplateKind::Vanilla) ? 15 : 10;
    validate_template(t);
    return t;
}

std::vector<core::StarterRecord> sample_seeds(const std::vector<core::StarterRecord>& pool, int k,
                                              std::mt19937_64& rng) {
    if (static_cast<int>(pool.size()) < k) {
        std::string category = pool.empty() ? "<empty pool>" : core::to_string(pool.front().category);
        throw core::DatasetError("seed pool for " + category + " has " +
                                 std::to_string(pool.size()) + " records, need " +
                                 std::to_string(k));
    }
    for (const auto& rec : pool) {
        if (rec.category != pool.front().category) {
            throw core::DatasetError("seed pool mixes categories");
        }
    }
    std::vector<size_t> indices(pool.size());
    std::iota(indices.begin(), indices.end(), 0);
    // Partial Fisher-Yates: first k positions are a uniform sample.
    for (int i = 0; i < k; ++i) {
        std::uniform_int_distribution<size_t> dist(i, indices.size() - 1);
        std::swap(indices[i], indices[dist(rng)]);
    }
    std::vector<core::StarterRecord> out;
    out.reserve(k);
    for (int i = 0; i < k; ++i) out.push_back(pool[indices[i]]);
    return out;
}

std::string build_icl_prompt(const IclTemplate& icl_template, core::SafetyCategory category,
                             const std::vector<core::StarterRecord>& seeds) {
    if (seeds.empty()) throw TemplateError("build_icl_prompt needs at least one seed");
    validate_template(icl_template);
    std::string seed_block;
    for (size_t i = 0; i < seeds.size(); ++i) {
        seed_block += std::to_string(i + 1) + ". " + seeds[i].text_en;
        if (i + 1 < seeds.size()) seed_block += "\n";
    }
    std::string out = icl_template.instruction;
    out.replace(out.find("{policy}"), 8, core::category_display_phrase(category));
    out.replace(out.find("{seeds}"), 7, seed_block);
    return out;
}

static std::string strip_candidate(const std::string& line) {
    std::string s = core::trim(line);
    // leading enumeration: "12." / "3)" / "-" / "*" / "•"
    size_t i = 0;
    size_t digits = 0;
    while (i < s.size() && std::isdigit(static_cast<unsigned char>(s[i]))) {
        ++i;
        ++digits;
    }
    if (digits > 0 && i < s.size() && (s[i] == '.' || s[i] == ')')) {
        s = core::trim(s.substr(i + 1));
    } else if (!s.empty() && (s[0] == '-' || s[0] == '*')) {
        s = core::trim(s.substr(1));
    } else if (s.rfind("•", 0) == 0) {  // bullet
        s = core::trim(s.substr(3));
    }
    if (s.size() >= 2 && ((s.front() == '"' && s.back() == '"') ||
                          (s.front() == '\'' && s.back() == '\''))) {
        s = core::trim(s.substr(1, s.size() - 2));
    }
    return s;
}

std::vector<std::string> parse_generated_starters(const std::string& raw, int minimum) {
    std::vector<std::string> out;
    std::set<std::string> seen;
    std::istringstream in(raw);
    std::string line;
    while (std::getline(in, line)) {
        std::string candidate = strip_candidate(line);
        if (candidate.empty()) continue;
        if (!seen.insert(core::casefold(candidate)).second) continue;
        out.push_back(std::move(candidate));
    }
    (void)minimum;  // shortfall is the caller's signal to retry the run
    return out;
}

GenerationResult generate_starters(const GenerationPlan& plan, providers::ChatProvider& generator,
                                   const std::vector<core::StarterRecord>& seed_pool) {
    GenerationResult result;
    std::set<std::string> dedup;  // case-folded texts: seeds in context + accepted outputs
    std::vector<std::string> accepted;

    for (int run = 0; run < plan.runs; ++run) {
        std::seed_seq seq{plan.rng_seed, static_cast<std::uint64_t>(run)};
        std::mt19937_64 rng(seq);
        std::vector<core::StarterRecord> seeds;
        try {
            seeds = sample_seeds(seed_pool, plan.seed_count, rng);
        } catch (const core::DatasetError& e) {
            throw;  // too-small pool is a plan error, not a per-run failure
        }
        std::set<std::string> run_seed_keys;
        for (const auto& s : seeds) run_seed_keys.insert(core::casefold(s.text_en));

        const std::string prompt = build_icl_prompt(plan.icl_template, plan.category, seeds);
        std::vector<std::string> parsed;
        bool run_ok = false;
        for (int attempt = 0; attempt < 2 && !run_ok; ++attempt) {
            std::string raw;
            try {
                raw = generator.chat({{core::Role::User, prompt, 1}},
                                     providers::GenerationParams::attacker_defaults());
            } catch (const providers::ProviderError& e) {
                result.warnings.push_back("run " + std::to_string(run) + " failed: " + e.what());
                continue;
            }
            parsed = parse_generated_starters(raw, plan.per_run);
            run_ok = static_cast<int>(parsed.size()) >= plan.per_run;
            if (!run_ok && attempt == 1) {
                result.warnings.push_back("run " + std::to_string(run) + " parsed only " +
                                          std::to_string(parsed.size()) + " of " +
                                          std::to_string(plan.per_run) + " candidates");
            }
        }
        for (const auto& text : parsed) {
            const std::string key = core::casefold(text);
            if (run_seed_keys.count(key)) continue;  // never echo an in-context seed
            if (!dedup.insert(key).second) continue;
            accepted.push_back(text);
        }
    }

    if (static_cast<int>(accepted.size()) < plan.target_volume) {
        result.shortfall = true;
        result.warnings.push_back("volume shortfall: " + std::to_string(accepted.size()) + " of " +
                                  std::to_string(plan.target_volume) + " for " +
                                  core::to_string(plan.category));
    }
    if (static_cast<int>(accepted.size()) > plan.target_volume) {
        accepted.resize(plan.target_volume);  // trim keeps earliest-generated
    }

    const std::string prefix = core::to_string(plan.source_tag) + "-" +
                               core::to_string(plan.category) + "-";
    for (size_t i = 0; i < accepted.size(); ++i) {
        core::StarterRecord rec;
        rec.id = prefix + std::to_string(i + 1);
        rec.text_en = accepted[i];
        rec.category = plan.category;
        rec.source = plan.source_tag;
        result.records.push_back(std::move(rec));
    }
    return result;
}

}  // namespace redharness::stargen
