#include "redharness/core.hpp"

#include <nlohmann/json.hpp>

#include <algorithm>
#include <cctype>
#include <fstream>
#include <sstream>

namespace redharness::core {

using nlohmann::json;

const std::vector<SafetyCategory>& all_categories() {
    static const std::vector<SafetyCategory> cats = {
        SafetyCategory::AnimalAbuse,    SafetyCategory::DangerousDevices,
        SafetyCategory::SelfInjury,     SafetyCategory::Misinformation,
        SafetyCategory::SexualContent,  SafetyCategory::Inclusivity,
        SafetyCategory::Privacy,
    };
    return cats;
}

std::string to_string(SafetyCategory c) {
    switch (c) {
        case SafetyCategory::AnimalAbuse: return "AnimalAbuse";
        case SafetyCategory::DangerousDevices: return "DangerousDevices";
        case SafetyCategory::SelfInjury: return "SelfInjury";
        case SafetyCategory::Misinformation: return "Misinformation";
        case SafetyCategory::SexualContent: return "SexualContent";
        case SafetyCategory::Inclusivity: return "Inclusivity";
        case SafetyCategory::Privacy: return "Privacy";
    }
    throw std::logic_error("unreachable category");
}

SafetyCategory category_from_string(const std::string& s) {
    for (auto c : all_categories()) {
        if (to_string(c) == s) return c;
    }
    throw DatasetError("unknown category label: '" + s + "'");
}

std::string category_display_phrase(SafetyCategory c) {
    switch (c) {
        case SafetyCategory::AnimalAbuse: return "Animal Abuse";
        case SafetyCategory::DangerousDevices: return "Dangerous Devices and Substances";
        case SafetyCategory::SelfInjury: return "Self Injury and Harmful Dieting";
        case SafetyCategory::Misinformation: return "Harmful Misinformation";
        case SafetyCategory::SexualContent: return "Sexual Content";
        case SafetyCategory::Inclusivity: return "Inclusivity";
        case SafetyCategory::Privacy: return "Private Information and Personal Details";
    }
    throw std::logic_error("unreachable category");
}

const std::vector<Language>& known_languages() {
    static const std::vector<Language> langs = {
        {"en", ScriptClass::Latin, "English"},
        {"es", ScriptClass::Latin, "Spanish"},
        {"fr", ScriptClass::Latin, "French"},
        {"de", ScriptClass::Latin, "German"},
        {"ar", ScriptClass::NonLatin, "Arabic"},
        {"hi", ScriptClass::NonLatin, "Hindi"},
        {"ja", ScriptClass::NonLatin, "Japanese"},
    };
    return langs;
}

std::optional<Language> language_from_code(const std::string& code) {
    for (const auto& l : known_languages()) {
        if (l.code == code) return l;
    }
    return std::nullopt;
}

std::string to_string(Role r) { return r == Role::User ? "user" : "assistant"; }

Role role_from_string(const std::string& s) {
    if (s == "user") return Role::User;
    if (s == "assistant") return Role::Assistant;
    throw DatasetError("unknown role: '" + s + "'");
}

std::string to_string(StarterSource s) {
    switch (s) {
        case StarterSource::Human: return "Human";
        case StarterSource::MultiJail: return "MultiJail";
        case StarterSource::MistralGen: return "MistralGen";
        case StarterSource::MixtralGen: return "MixtralGen";
        case StarterSource::UserProvided: return "UserProvided";
    }
    throw std::logic_error("unreachable source");
}

StarterSource source_from_string(const std::string& s) {
    for (auto src : {StarterSource::Human, StarterSource::MultiJail, StarterSource::MistralGen,
                     StarterSource::MixtralGen, StarterSource::UserProvided}) {
        if (to_string(src) == s) return src;
    }
    throw DatasetError("unknown starter source: '" + s + "'");
}

std::string trim(const std::string& s) {
    auto begin = s.find_first_not_of(" \t\r\n");
    if (begin == std::string::npos) return "";
    auto end = s.find_last_not_of(" \t\r\n");
    return s.substr(begin, end - begin + 1);
}

std::string casefold(const std::string& s) {
    std::string out;
    out.reserve(s.size());
    bool pending_space = false;
    for (unsigned char ch : trim(s)) {
        if (std::isspace(ch)) {
            pending_space = true;
            continue;
        }
        if (pending_space && !out.empty()) out.push_back(' ');
        pending_space = false;
        out.push_back(static_cast<char>(std::tolower(ch)));
    }
    return out;
}

void check_alignment(const ConversationState& state) {
    const auto& en = state.english_track;
    const auto& tg = state.target_track;
    if (en.size() != tg.size()) {
        throw std::logic_error("track length mismatch in conversation " + state.id);
    }
    for (size_t i = 0; i < en.size(); ++i) {
        if (en[i].role != tg[i].role) {
            throw std::logic_error("role misalignment at position " + std::to_string(i));
        }
        Role expected = (i % 2 == 0) ? Role::User : Role::Assistant;
        if (en[i].role != expected) {
            throw std::logic_error("broken user/assistant alternation at position " +
                                   std::to_string(i));
        }
        int expected_turn = static_cast<int>(i / 2) + 1;
        if (en[i].turn_index != expected_turn || tg[i].turn_index != expected_turn) {
            throw std::logic_error("bad turn_index at position " + std::to_string(i));
        }
    }
}

SafetyCategory map_multijail_category(const std::string& raw_label) {
    static const std::vector<std::pair<std::string, SafetyCategory>> table = {
        {"animal abuse", SafetyCategory::AnimalAbuse},
        {"self-harm", SafetyCategory::SelfInjury},
        {"adult content", SafetyCategory::SexualContent},
        {"sexual exploitation & human trafficking", SafetyCategory::SexualContent},
        {"discrimination & injustice", SafetyCategory::Inclusivity},
        {"misinformation regarding ethics, laws and safety", SafetyCategory::Misinformation},
        {"conspiracy theories & misinformation", SafetyCategory::Misinformation},
        {"soliciting personally identifiable information", SafetyCategory::Privacy},
        {"substance abuse & banned substances", SafetyCategory::DangerousDevices},
        {"weapons", SafetyCategory::DangerousDevices},
    };
    const std::string key = casefold(raw_label);
    for (const auto& [label, cat] : table) {
        if (label == key) return cat;
    }
    throw DatasetError("unmapped category label: '" + raw_label + "'");
}

static StarterRecord record_from_json_obj(const json& obj) {
    StarterRecord rec;
    rec.id = obj.at("id").get<std::string>();
    rec.text_en = obj.at("text").get<std::string>();
    if (trim(rec.text_en).empty()) throw DatasetError("empty text field");
    if (obj.contains("source")) rec.source = source_from_string(obj.at("source").get<std::string>());
    if (obj.contains("translations")) {
        for (const auto& [code, text] : obj.at("translations").items()) {
            if (!language_from_code(code)) {
                throw DatasetError("unknown language code in translations: '" + code + "'");
            }
            rec.human_translations[code] = text.get<std::string>();
        }
    }
    return rec;
}

std::vector<StarterRecord> load_starters(const std::string& path, StarterSource source,
                                         bool map_categories) {
    std::ifstream in(path);
    if (!in) throw DatasetError("cannot open starter file: " + path);
    std::vector<StarterRecord> records;
    std::string line;
    int line_no = 0;
    std::vector<std::string> seen_ids;
    while (std::getline(in, line)) {
        ++line_no;
        if (trim(line).empty()) continue;
        StarterRecord rec;
        std::string raw_category;
        try {
            json obj = json::parse(line);
            rec = record_from_json_obj(obj);
            raw_category = obj.at("category").get<std::string>();
        } catch (const DatasetError& e) {
            throw DatasetError(path + ":" + std::to_string(line_no) + ": " + e.what());
        } catch (const json::exception& e) {
            throw DatasetError(path + ":" + std::to_string(line_no) + ": malformed record: " +
                              e.what());
        }
        try {
            rec.category = category_from_string(raw_category);
        } catch (const DatasetError&) {
            if (!map_categories) {
                throw DatasetError(path + ":" + std::to_string(line_no) +
                                   ": unknown category label: '" + raw_category + "'");
            }
            rec.category = map_multijail_category(raw_category);
        }
        if (std::find(seen_ids.begin(), seen_ids.end(), rec.id) != seen_ids.end()) {
            throw DatasetError(path + ":" + std::to_string(line_no) + ": duplicate id: " + rec.id);
        }
        seen_ids.push_back(rec.id);
        rec.source = source;
        records.push_back(std::move(rec));
    }
    return records;
}

void save_starters(const std::string& path, const std::vector<StarterRecord>& records) {
    std::ofstream out(path);
    if (!out) throw DatasetError("cannot write starter file: " + path);
    for (const auto& rec : records) {
        out << starter_to_json(rec) << "\n";
    }
}

VolumeTable tabulate_volumes(const std::vector<StarterRecord>& records) {
    VolumeTable table;
    for (const auto& rec : records) {
        table.counts[{rec.category, rec.source}] += 1;
        table.source_totals[rec.source] += 1;
    }
    return table;
}

std::string starter_to_json(const StarterRecord& r) {
    json obj;
    obj["id"] = r.id;
    obj["text"] = r.text_en;
    obj["category"] = to_string(r.category);
    obj["source"] = to_string(r.source);
    if (!r.human_translations.empty()) {
        json tr = json::object();
        for (const auto& [code, text] : r.human_translations) tr[code] = text;
        obj["translations"] = tr;
    }
    return obj.dump();
}

StarterRecord starter_from_json(const std::string& line) {
    json obj = json::parse(line);
    StarterRecord rec = record_from_json_obj(obj);
    rec.category = category_from_string(obj.at("category").get<std::string>());
    return rec;
}

static json message_to_json(const Message& m) {
    json obj;
    obj["role"] = to_string(m.role);
    obj["text"] = m.text;
    obj["turn"] = m.turn_index;
    if (m.empty_response) obj["empty_response"] = true;
    return obj;
}

static Message message_from_json(const json& obj) {
    Message m;
    m.role = role_from_string(obj.at("role").get<std::string>());
    m.text = obj.at("text").get<std::string>();
    m.turn_index = obj.at("turn").get<int>();
    m.empty_response = obj.value("empty_response", false);
    return m;
}

static json safety_verdict_to_json(const SafetyVerdict& v) {
    json obj;
    obj["parse_ok"] = v.parse_ok;
    obj["raw"] = v.raw;
    if (v.label) obj["label"] = (*v.label == SafetyVerdict::Label::Unsafe) ? "unsafe" : "safe";
    if (!v.violated_categories.empty()) obj["categories"] = v.violated_categories;
    return obj;
}

static SafetyVerdict safety_verdict_from_json(const json& obj) {
    SafetyVerdict v;
    v.parse_ok = obj.at("parse_ok").get<bool>();
    v.raw = obj.at("raw").get<std::string>();
    if (obj.contains("label")) {
        v.label = obj.at("label").get<std::string>() == "unsafe" ? SafetyVerdict::Label::Unsafe
                                                                 : SafetyVerdict::Label::Safe;
    }
    if (obj.contains("categories")) {
        v.violated_categories = obj.at("categories").get<std::vector<std::string>>();
    }
    return v;
}

static json refusal_verdict_to_json(const RefusalVerdict& v) {
    json obj;
    obj["parse_ok"] = v.parse_ok;
    obj["raw"] = v.raw;
    obj["reason"] = v.reason;
    if (v.label) obj["label"] = (*v.label == RefusalVerdict::Label::Refusal) ? "refusal" : "non-refusal";
    return obj;
}

static RefusalVerdict refusal_verdict_from_json(const json& obj) {
    RefusalVerdict v;
    v.parse_ok = obj.at("parse_ok").get<bool>();
    v.raw = obj.at("raw").get<std::string>();
    v.reason = obj.at("reason").get<std::string>();
    if (obj.contains("label")) {
        v.label = obj.at("label").get<std::string>() == "refusal" ? RefusalVerdict::Label::Refusal
                                                                  : RefusalVerdict::Label::NonRefusal;
    }
    return v;
}

std::string state_to_json(const ConversationState& s) {
    json obj;
    obj["id"] = s.id;
    obj["starter_id"] = s.starter_id;
    obj["category"] = to_string(s.category);
    obj["language"] = s.language;
    json en = json::array();
    for (const auto& m : s.english_track) en.push_back(message_to_json(m));
    json tg = json::array();
    for (const auto& m : s.target_track) tg.push_back(message_to_json(m));
    obj["english_track"] = en;
    obj["target_track"] = tg;
    json verdicts = json::object();
    for (const auto& [turn, v] : s.safety_verdicts) {
        verdicts[std::to_string(turn)] = safety_verdict_to_json(v);
    }
    obj["safety_verdicts"] = verdicts;
    if (s.first_turn_refusal) obj["first_turn_refusal"] = refusal_verdict_to_json(*s.first_turn_refusal);
    switch (s.status) {
        case ConversationStatus::InProgress: obj["status"] = "in_progress"; break;
        case ConversationStatus::Completed: obj["status"] = "completed"; break;
        case ConversationStatus::Failed: obj["status"] = "failed"; break;
    }
    if (!s.failure_reason.empty()) obj["failure_reason"] = s.failure_reason;
    return obj.dump();
}

ConversationState state_from_json(const std::string& line) {
    json obj = json::parse(line);
    ConversationState s;
    s.id = obj.at("id").get<std::string>();
    s.starter_id = obj.at("starter_id").get<std::string>();
    s.category = category_from_string(obj.at("category").get<std::string>());
    s.language = obj.at("language").get<std::string>();
    for (const auto& m : obj.at("english_track")) s.english_track.push_back(message_from_json(m));
    for (const auto& m : obj.at("target_track")) s.target_track.push_back(message_from_json(m));
    for (const auto& [turn, v] : obj.at("safety_verdicts").items()) {
        s.safety_verdicts[std::stoi(turn)] = safety_verdict_from_json(v);
    }
    if (obj.contains("first_turn_refusal")) {
        s.first_turn_refusal = refusal_verdict_from_json(obj.at("first_turn_refusal"));
    }
    const std::string status = obj.at("status").get<std::string>();
    if (status == "in_progress") s.status = ConversationStatus::InProgress;
    else if (status == "completed") s.status = ConversationStatus::Completed;
    else s.status = ConversationStatus::Failed;
    s.failure_reason = obj.value("failure_reason", "");
    return s;
}

std::string outcome_to_json(const ConversationOutcome& o) {
    json obj;
    obj["model"] = o.model;
    obj["language"] = o.language;
    obj["category"] = to_string(o.category);
    obj["source"] = to_string(o.source);
    if (o.first_violation_turn) obj["first_violation_turn"] = *o.first_violation_turn;
    obj["first_turn_refusal"] = o.first_turn_refusal;
    obj["depth"] = o.depth;
    if (o.partially_judged) obj["partially_judged"] = true;
    return obj.dump();
}

ConversationOutcome outcome_from_json(const std::string& line) {
    json obj = json::parse(line);
    ConversationOutcome o;
    o.model = obj.at("model").get<std::string>();
    o.language = obj.at("language").get<std::string>();
    o.category = category_from_string(obj.at("category").get<std::string>());
    o.source = source_from_string(obj.at("source").get<std::string>());
    if (obj.contains("first_violation_turn")) o.first_violation_turn = obj.at("first_violation_turn").get<int>();
    o.first_turn_refusal = obj.at("first_turn_refusal").get<bool>();
    o.depth = obj.at("depth").get<int>();
    o.partially_judged = obj.value("partially_judged", false);
    return o;
}

}  // namespace redharness::core
