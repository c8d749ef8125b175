#pragma once

#include <chrono>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "ecoecho/scenario.hpp"
#include "ecoecho/session.hpp"

namespace ecoecho::llm {

/// Character prompt assembled in three phases: a generated background block
/// from the profile, a role/objectives summary with response guidelines, and
/// the closing response instructions.
struct PromptBundle {
    std::string npc_id;
    std::string background;    // generation phase
    std::string system_prompt; // summarization phase: role + objectives
    std::vector<std::string> guidelines;
    std::vector<std::string> example_openers;
    std::string instruction_epilogue;

    bool operator==(const PromptBundle&) const = default;
};

PromptBundle build_character_prompt(const NpcProfile& profile);

/// The full system message sent to the provider.
std::string render_system_prompt(const PromptBundle& bundle);

struct ChatMessage {
    enum class Role { System, User, Assistant };
    Role role = Role::User;
    std::string content;
};

std::string_view to_string(ChatMessage::Role r) noexcept;

struct ProviderRequest {
    enum class Purpose { Reply, Classify };
    Purpose purpose = Purpose::Reply;
    std::string npc_id;
    std::vector<ChatMessage> messages;  // system, conversational memory, current input
    std::string player_input;
    std::vector<std::string> allowed_intents;  // Classify only
};

struct ProviderResponse {
    std::string text;
};

/// Text-generation backend. Implementations throw Error{ProviderTimeout} or
/// Error{ProviderError}; they must not touch session state.
class TextProvider {
public:
    virtual ~TextProvider() = default;
    virtual ProviderResponse complete(const ProviderRequest& request) = 0;
};

struct RetryPolicy {
    int max_retries = 1;
    std::chrono::milliseconds backoff{200};
};

struct NpcUtterance {
    std::string text;
    int attempts = 1;
};

/// The transcript is filtered to this NPC's conversation and passed as memory.
/// Retries per policy, then rethrows the last provider failure.
NpcUtterance generate_reply(const PromptBundle& bundle, std::span<const DialogueTurn> transcript,
                            std::string_view player_input, TextProvider& provider,
                            const RetryPolicy& retry = {});

/// Asks the provider for `{"intent": <id|null>, "confidence": <0..1>}`. Any
/// answer that does not parse, or names an id outside `specs`, is "none".
/// Provider failures propagate so the caller can fall back to keywords.
IntentResult classify_intent(std::string_view player_input, std::span<const DialogueTurn> transcript,
                             std::span<const IntentSpec> specs, std::string_view npc_id,
                             TextProvider& provider, const RetryPolicy& retry = {});

/// Builds the classification request; exposed for provider tests.
ProviderRequest make_classify_request(std::string_view player_input,
                                      std::span<const DialogueTurn> transcript,
                                      std::span<const IntentSpec> specs, std::string_view npc_id);

/// Interprets a classification answer against the allowed intents.
IntentResult parse_classification(std::string_view answer, std::span<const IntentSpec> specs);

} // namespace ecoecho::llm
