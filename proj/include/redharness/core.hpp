#pragma once

#include <cstdint>
#include <map>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

namespace redharness::core {

/// Closed taxonomy shared by every module. Serialized as the enumerator names.
enum class SafetyCategory {
    AnimalAbuse,
    DangerousDevices,
    SelfInjury,
    Misinformation,
    SexualContent,
    Inclusivity,
    Privacy,
};

constexpr int kCategoryCount = 7;

const std::vector<SafetyCategory>& all_categories();
std::string to_string(SafetyCategory c);
SafetyCategory category_from_string(const std::string& s);

/// Human-readable phrase used when a category is substituted into a prompt.
std::string category_display_phrase(SafetyCategory c);

enum class ScriptClass { Latin, NonLatin };

struct Language {
    std::string code;        // BCP-47-style, e.g. "en", "ja"
    ScriptClass script_class;
    std::string display_name;

    bool is_english() const { return code == "en"; }
};

/// The seven studied languages. Unknown codes are rejected at config validation.
const std::vector<Language>& known_languages();
std::optional<Language> language_from_code(const std::string& code);

enum class Role { User, Assistant };

std::string to_string(Role r);
Role role_from_string(const std::string& s);

struct Message {
    Role role = Role::User;
    std::string text;
    int turn_index = 1;           // 1-based
    bool empty_response = false;  // sentinel: provider returned an empty string

    bool operator==(const Message&) const = default;
};

enum class StarterSource { Human, MultiJail, MistralGen, MixtralGen, UserProvided };

std::string to_string(StarterSource s);
StarterSource source_from_string(const std::string& s);

struct StarterRecord {
    std::string id;
    std::string text_en;
    SafetyCategory category = SafetyCategory::AnimalAbuse;
    StarterSource source = StarterSource::UserProvided;
    std::map<std::string, std::string> human_translations;  // language code -> text

    bool operator==(const StarterRecord&) const = default;
};

struct SafetyVerdict {
    enum class Label { Safe, Unsafe };
    std::optional<Label> label;  // absent when parse failed (Unjudged)
    std::vector<std::string> violated_categories;
    std::string raw;
    bool parse_ok = false;

    bool unsafe() const { return label && *label == Label::Unsafe; }
    bool unjudged() const { return !parse_ok; }
    bool operator==(const SafetyVerdict&) const = default;
};

struct RefusalVerdict {
    enum class Label { Refusal, NonRefusal };
    std::optional<Label> label;
    std::string reason;
    std::string raw;
    bool parse_ok = false;

    bool refused() const { return label && *label == Label::Refusal; }
    bool operator==(const RefusalVerdict&) const = default;
};

enum class ConversationStatus { InProgress, Completed, Failed };

struct ConversationState {
    std::string id;
    std::string starter_id;
    SafetyCategory category = SafetyCategory::AnimalAbuse;
    std::string language;  // code
    std::vector<Message> english_track;
    std::vector<Message> target_track;
    std::map<int, SafetyVerdict> safety_verdicts;  // keyed by turn index
    std::optional<RefusalVerdict> first_turn_refusal;
    ConversationStatus status = ConversationStatus::InProgress;
    std::string failure_reason;  // non-empty iff status == Failed

    int turns() const { return static_cast<int>(english_track.size()) / 2; }
};

/// Throws std::logic_error unless both tracks have equal length, roles align
/// position-wise, and messages strictly alternate user/assistant from user.
void check_alignment(const ConversationState& state);

/// Flattened analytics record; one per completed, judged conversation.
struct ConversationOutcome {
    std::string model;
    std::string language;
    SafetyCategory category = SafetyCategory::AnimalAbuse;
    StarterSource source = StarterSource::UserProvided;
    std::optional<int> first_violation_turn;  // in [1, depth] when present
    bool first_turn_refusal = false;
    int depth = 5;
    bool partially_judged = false;  // an Unjudged turn preceded the first Unsafe

    bool operator==(const ConversationOutcome&) const = default;
};

struct VolumeTable {
    std::map<std::pair<SafetyCategory, StarterSource>, int> counts;
    std::map<StarterSource, int> source_totals;

    int count(SafetyCategory c, StarterSource s) const {
        auto it = counts.find({c, s});
        return it == counts.end() ? 0 : it->second;
    }
    int total(StarterSource s) const {
        auto it = source_totals.find(s);
        return it == source_totals.end() ? 0 : it->second;
    }
};

class DatasetError : public std::runtime_error {
  public:
    using std::runtime_error::runtime_error;
};

/// Reads a JSONL starter file: one record per line with fields
/// {id, text, category, source?, translations?}. When map_categories is set,
/// labels outside the taxonomy are run through map_multijail_category.
std::vector<StarterRecord> load_starters(const std::string& path, StarterSource source,
                                         bool map_categories = false);

void save_starters(const std::string& path, const std::vector<StarterRecord>& records);

/// Maps one of the ten Multi-Jail labels (case-insensitive, trimmed) onto the
/// harness taxonomy. Unlisted labels throw DatasetError carrying the raw label.
SafetyCategory map_multijail_category(const std::string& raw_label);

VolumeTable tabulate_volumes(const std::vector<StarterRecord>& records);

// JSON (de)serialization for persistence; formats are stable wire contracts.
std::string starter_to_json(const StarterRecord& r);
StarterRecord starter_from_json(const std::string& line);
std::string state_to_json(const ConversationState& s);
ConversationState state_from_json(const std::string& line);
std::string outcome_to_json(const ConversationOutcome& o);
ConversationOutcome outcome_from_json(const std::string& line);

// Small shared string helpers.
std::string trim(const std::string& s);
std::string casefold(const std::string& s);  // ASCII lower + whitespace collapse

}  // namespace redharness::core
