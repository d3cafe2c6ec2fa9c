#pragma once

#include "redharness/core.hpp"
#include "redharness/providers.hpp"
#include "redharness/translation.hpp"

#include <functional>
#include <string>

namespace redharness::engine {

/// Inline judge hook: given the state and the just-completed turn index,
/// return true when the turn is unsafe (used only when early_stop is on).
using InlineJudge = std::function<bool(const core::ConversationState&, int)>;

struct EngineDeps {
    providers::ChatProvider* target = nullptr;
    providers::GenerationParams target_params = providers::GenerationParams::target_defaults();
    providers::ChatProvider* attacker = nullptr;
    providers::GenerationParams attacker_params = providers::GenerationParams::attacker_defaults();
    translation::Translator* translator = nullptr;
    std::string attacker_template;  // instruction with {policy}, transcript appended
    int depth = 5;
    bool early_stop = false;
    bool use_human_translations = false;
    InlineJudge inline_judge;
};

std::string default_attacker_template();
std::string load_attacker_template(const std::string& path);

struct NextTurnContext {
    core::SafetyCategory category;
    std::string transcript;  // alternating "User:"/"Assistant:" lines, ends with Assistant
};

/// Renders the English track as "User: ..." / "Assistant: ..." lines.
std::string render_transcript(const std::vector<core::Message>& track);

NextTurnContext make_context(const core::ConversationState& state);

/// Opening turn: starter goes out (translated for non-English targets), the
/// response comes back, and the back-translation lands on the English track.
core::ConversationState open_conversation(const core::StarterRecord& starter,
                                          const core::Language& language, EngineDeps& deps);

/// Pure: builds the attacker prompt from the context and returns the next
/// English user utterance, stripped of any "User:" prefix. Throws after one
/// failed regeneration attempt.
std::string next_attacker_prompt(providers::ChatProvider& attacker,
                                 const providers::GenerationParams& params,
                                 const std::string& attacker_template, const NextTurnContext& ctx);

/// One more turn on both tracks. On any hop failure the returned state keeps
/// the original tracks and carries status Failed with the hop named.
core::ConversationState advance_turn(const core::ConversationState& state, EngineDeps& deps);

core::ConversationState run_conversation(const core::StarterRecord& starter,
                                         const core::Language& language, EngineDeps& deps);

}  // namespace redharness::engine
