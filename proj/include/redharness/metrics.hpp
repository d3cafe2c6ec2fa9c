#pragma once

#include "redharness/core.hpp"
#include "redharness/providers.hpp"

#include <map>
#include <optional>
#include <string>
#include <vector>

namespace redharness::metrics {

class MetricsError : public std::runtime_error {
  public:
    using std::runtime_error::runtime_error;
};

/// Drops partially-judged outcomes; every ASR denominator is over this view.
std::vector<core::ConversationOutcome> judged_only(
    const std::vector<core::ConversationOutcome>& outcomes);

/// Fraction of outcomes with a violation at or before turn t.
double asr_at_depth(const std::vector<core::ConversationOutcome>& outcomes, int t);

/// [asr_at_depth(1) .. asr_at_depth(T)]; non-decreasing by construction.
std::vector<double> asr_curve(const std::vector<core::ConversationOutcome>& outcomes, int max_depth);

double refusal_rate_first_turn(const std::vector<core::ConversationOutcome>& outcomes);

/// ASR at depth T restricted to outcomes whose first response was a refusal.
double conditional_asr_given_refusal(const std::vector<core::ConversationOutcome>& outcomes,
                                     int max_depth);

enum class Dimension { Model, Language, Category, Dataset, Depth };

Dimension dimension_from_string(const std::string& s);
std::string dimension_label(Dimension d, const core::ConversationOutcome& o);

struct MetricsTable {
    std::vector<std::string> row_labels;
    std::vector<std::string> col_labels;
    // cells[r][c]; absent means no outcomes matched (never rendered as 0)
    std::vector<std::vector<std::optional<double>>> cells;
    // group rows appended after data rows, e.g. "Latin - Average"
    std::vector<std::string> group_row_labels;
    std::vector<std::vector<std::optional<double>>> group_cells;

    std::optional<double> cell(const std::string& row, const std::string& col) const;
    std::string to_markdown() const;
    std::string to_csv() const;
};

/// Percentages (x100) of the ASR at full depth over matching outcomes.
MetricsTable aggregate_table(const std::vector<core::ConversationOutcome>& outcomes,
                             Dimension row_dim, Dimension col_dim, bool language_group_rows);

/// Appends Latin/Non-Latin/All unweighted averages to a language-rowed table.
/// Also usable on externally supplied cells (published-table reproduction).
void add_language_group_rows(MetricsTable& table);

/// Mean over unordered pairs of (1 - cosine similarity). Range [0, 2].
double mean_pairwise_cosine_distance(const std::vector<std::vector<double>>& vectors);

/// Corpus self-similarity in [0, 100]: per-sentence BLEU-max_n against the
/// remaining sentences, uniform n-gram weights, add-one smoothing on zero-hit
/// orders, closest-length brevity penalty. Mean x 100.
double self_bleu(const std::vector<std::string>& corpus, int max_n = 4);

/// Serial reference implementations, kept for testing and benchmarking the
/// OpenMP kernels against.
double self_bleu_serial(const std::vector<std::string>& corpus, int max_n = 4);
double mean_pairwise_cosine_distance_serial(const std::vector<std::vector<double>>& vectors);

/// Single-sentence BLEU against explicit references; exposed for the oracle tests.
double sentence_bleu(const std::vector<std::string>& candidate_tokens,
                     const std::vector<std::vector<std::string>>& reference_tokens, int max_n);

std::vector<std::string> tokenize(const std::string& sentence);

struct DiversityScores {
    double cosine_distance = 0.0;
    double self_bleu = 0.0;
};

struct DiversityReport {
    std::map<core::SafetyCategory, DiversityScores> per_category;
    DiversityScores dataset;  // mean over categories
};

/// Per category: `repeats` samples of `sample_k` prompts without replacement,
/// metric per sample, mean. The rng is split per (category, repeat) so the
/// result is deterministic under parallel evaluation.
DiversityReport sampled_diversity(
    const std::map<core::SafetyCategory, std::vector<std::string>>& prompts_by_category,
    providers::Embedder& embedder, int sample_k = 10, int repeats = 100,
    std::uint64_t rng_seed = 0);

}  // namespace redharness::metrics
