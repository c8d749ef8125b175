#include "ecoecho/llm_gateway.hpp"

#include <algorithm>
#include <thread>

#include <json.hpp>

#include "ecoecho/error.hpp"
#include "ecoecho/text.hpp"

namespace ecoecho::llm {

namespace {

constexpr const char* kEpilogue =
    "Base every judgment on all remembered interactions with the player. Stay in character, "
    "keep replies short, do not reveal more than the player has earned, and steer the "
    "conversation back toward your objective when it drifts.";

std::string join(const std::vector<std::string>& parts, std::string_view sep) {
    std::string out;
    for (const auto& p : parts) {
        if (!out.empty()) out += sep;
        out += p;
    }
    return out;
}

std::vector<ChatMessage> memory_for(std::span<const DialogueTurn> transcript, std::string_view npc_id) {
    std::vector<ChatMessage> out;
    for (const auto& t : transcript) {
        if (t.npc != npc_id) continue;
        out.push_back({t.speaker == kPlayerSpeaker ? ChatMessage::Role::User
                                                   : ChatMessage::Role::Assistant,
                       t.text});
    }
    return out;
}

template <typename Fn>
auto with_retries(const RetryPolicy& retry, int& attempts, Fn&& call) {
    const int max_attempts = 1 + std::max(0, retry.max_retries);
    for (attempts = 1;; ++attempts) {
        try {
            return call();
        } catch (const Error& e) {
            const bool provider_failure =
                e.code() == ErrorCode::ProviderError || e.code() == ErrorCode::ProviderTimeout;
            if (!provider_failure || attempts >= max_attempts) throw;
        }
        if (retry.backoff.count() > 0) std::this_thread::sleep_for(retry.backoff);
    }
}

} // namespace

std::string_view to_string(ChatMessage::Role r) noexcept {
    switch (r) {
    case ChatMessage::Role::System: return "system";
    case ChatMessage::Role::User: return "user";
    case ChatMessage::Role::Assistant: return "assistant";
    }
    return "user";
}

PromptBundle build_character_prompt(const NpcProfile& p) {
    PromptBundle b;
    b.npc_id = p.id;

    std::string bg = "Name: " + p.name + "\n";
    if (!p.occupation.empty()) bg += "Occupation: " + p.occupation + "\n";
    if (!p.backstory.empty()) bg += "Background: " + p.backstory + "\n";
    if (!p.personality_traits.empty()) bg += "Personality: " + join(p.personality_traits, ", ") + "\n";
    if (!p.motivation.empty()) bg += "Motivation: " + p.motivation + "\n";
    for (const auto& [k, v] : p.knowledge_bank) bg += k + ": " + v + "\n";
    b.background = std::move(bg);

    std::string header = "You are " + p.name;
    if (!p.occupation.empty()) header += ", " + p.occupation;
    header += ".";
    if (!p.backstory.empty()) header += " " + p.backstory;
    if (!p.objective.empty()) header += "\nObjective: " + p.objective;
    b.system_prompt = std::move(header);

    b.guidelines = p.dialogue_guidelines;
    b.example_openers = p.example_openers;
    b.instruction_epilogue = kEpilogue;
    return b;
}

std::string render_system_prompt(const PromptBundle& b) {
    std::string out = "Role and Objectives:\n" + b.system_prompt + "\n\nCharacter:\n" + b.background;
    if (!b.guidelines.empty()) {
        out += "\nResponse Guidelines:\n";
        for (std::size_t i = 0; i < b.guidelines.size(); ++i)
            out += std::to_string(i + 1) + ". " + b.guidelines[i] + "\n";
    }
    out += "\nInstructions:\n" + b.instruction_epilogue + "\n";
    if (!b.example_openers.empty()) {
        out += "\nExample dialogue starters:\n";
        for (const auto& o : b.example_openers) out += "- " + o + "\n";
    }
    return out;
}

NpcUtterance generate_reply(const PromptBundle& bundle, std::span<const DialogueTurn> transcript,
                            std::string_view player_input, TextProvider& provider,
                            const RetryPolicy& retry) {
    ProviderRequest req;
    req.purpose = ProviderRequest::Purpose::Reply;
    req.npc_id = bundle.npc_id;
    req.player_input = std::string(player_input);
    req.messages.push_back({ChatMessage::Role::System, render_system_prompt(bundle)});
    auto memory = memory_for(transcript, bundle.npc_id);
    req.messages.insert(req.messages.end(), memory.begin(), memory.end());
    req.messages.push_back({ChatMessage::Role::User, std::string(player_input)});

    NpcUtterance out;
    out.text = with_retries(retry, out.attempts, [&] {
        ProviderResponse resp = provider.complete(req);
        std::string t = text::trim(resp.text);
        if (t.empty()) fail(ErrorCode::ProviderError, "provider returned an empty reply");
        return t;
    });
    return out;
}

ProviderRequest make_classify_request(std::string_view player_input,
                                      std::span<const DialogueTurn> transcript,
                                      std::span<const IntentSpec> specs, std::string_view npc_id) {
    ProviderRequest req;
    req.purpose = ProviderRequest::Purpose::Classify;
    req.npc_id = std::string(npc_id);
    req.player_input = std::string(player_input);

    std::string sys =
        "You are an intent detection agent for a role-playing game. Decide which one of the "
        "intents below the player's latest message expresses, using the conversation so far "
        "as context. If none applies, answer null.\nIntents:\n";
    for (const auto& s : specs) {
        req.allowed_intents.push_back(s.id);
        sys += "- " + s.id + ": " + s.task_label;
        if (!s.description.empty()) sys += " (" + s.description + ")";
        sys += "\n";
    }
    sys += "Answer with JSON only: {\"intent\": <intent id or null>, \"confidence\": <number between 0 and 1>}";
    req.messages.push_back({ChatMessage::Role::System, std::move(sys)});
    auto memory = memory_for(transcript, npc_id);
    req.messages.insert(req.messages.end(), memory.begin(), memory.end());
    req.messages.push_back({ChatMessage::Role::User, std::string(player_input)});
    return req;
}

IntentResult parse_classification(std::string_view answer, std::span<const IntentSpec> specs) {
    const auto open = answer.find('{');
    const auto close = answer.rfind('}');
    if (open == std::string_view::npos || close == std::string_view::npos || close < open)
        return IntentResult::none();
    const auto j = nlohmann::json::parse(answer.substr(open, close - open + 1), nullptr, false);
    if (j.is_discarded() || !j.is_object()) return IntentResult::none();
    auto it = j.find("intent");
    if (it == j.end() || !it->is_string()) return IntentResult::none();
    const std::string id = it->get<std::string>();
    const bool known = std::any_of(specs.begin(), specs.end(), [&](const IntentSpec& s) { return s.id == id; });
    if (!known) return IntentResult::none();
    double confidence = 0.0;
    if (auto c = j.find("confidence"); c != j.end() && c->is_number()) confidence = c->get<double>();
    return {id, std::clamp(confidence, 0.0, 1.0), DecidedLayer::Agent};
}

IntentResult classify_intent(std::string_view player_input, std::span<const DialogueTurn> transcript,
                             std::span<const IntentSpec> specs, std::string_view npc_id,
                             TextProvider& provider, const RetryPolicy& retry) {
    if (specs.empty() || text::trim(player_input).empty()) return IntentResult::none();
    const ProviderRequest req = make_classify_request(player_input, transcript, specs, npc_id);
    int attempts = 0;
    const std::string answer = with_retries(retry, attempts, [&] { return provider.complete(req).text; });
    return parse_classification(answer, specs);
}

} // namespace ecoecho::llm
