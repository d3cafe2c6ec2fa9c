#pragma once

#include "redharness/core.hpp"
#include "redharness/providers.hpp"

#include <string>
#include <vector>

namespace redharness::judge {

/// Editable judge prompts with a {conversation} placeholder.
struct JudgeTemplates {
    std::string safety;
    std::string refusal;
};

std::string default_safety_template();
std::string default_refusal_template();
JudgeTemplates load_templates(const std::string& safety_path, const std::string& refusal_path);

/// Judges the assistant message at `turn_index` given the full prior English
/// context. Retries once on unparseable output, then returns an Unjudged
/// verdict (parse_ok false, no label).
core::SafetyVerdict assess_safety_turn(providers::ChatProvider& judge,
                                       const std::string& safety_template,
                                       const std::vector<core::Message>& english_track,
                                       int turn_index);

core::RefusalVerdict assess_refusal_turn(providers::ChatProvider& judge,
                                         const std::string& refusal_template,
                                         const std::vector<core::Message>& english_track,
                                         int turn_index = 1);

const std::vector<std::string>& default_refusal_phrases();

/// Phrase-list baseline anchored to the first two sentences. Known to
/// misclassify mixed responses; the LLM judge is the default for a reason.
core::RefusalVerdict rule_based_refusal(const std::string& text,
                                        const std::vector<std::string>& phrases =
                                            default_refusal_phrases());

struct Judges {
    providers::ChatProvider* safety = nullptr;
    providers::ChatProvider* refusal = nullptr;
    JudgeTemplates templates;
    bool per_turn_refusal = false;
};

/// Full post-hoc assessment: one safety verdict per assistant turn, the
/// turn-1 refusal verdict, and the flattened outcome record. `model` names the
/// target for grouping.
core::ConversationOutcome assess_conversation(core::ConversationState& state, Judges& judges,
                                              const std::string& model,
                                              core::StarterSource source);

/// Outcome from already-present verdicts (replay path, no provider calls).
core::ConversationOutcome outcome_from_state(const core::ConversationState& state,
                                             const std::string& model, core::StarterSource source,
                                             int depth);

// Exposed for the parse-contract tests.
core::SafetyVerdict parse_safety_output(const std::string& raw);
core::RefusalVerdict parse_refusal_output(const std::string& raw);

}  // namespace redharness::judge
