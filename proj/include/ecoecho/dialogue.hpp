#pragma once

#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "ecoecho/llm_gateway.hpp"
#include "ecoecho/scenario.hpp"
#include "ecoecho/session.hpp"
#include "ecoecho/text.hpp"

namespace ecoecho::dialogue {

inline constexpr std::size_t kMaxInputLength = 2000;

enum class Strategy { GeneratedReply, PredefinedAnswer, ItemOrAction };

std::string_view to_string(Strategy s) noexcept;
std::optional<Strategy> strategy_from_string(std::string_view s) noexcept;

struct Highlight {
    text::Span span;
    std::string item;

    bool operator==(const Highlight&) const = default;
};

struct ExtractionResult {
    std::vector<Highlight> highlights;  // non-overlapping, by span start
    std::vector<std::string> granted;   // newly granted, by first span start
};

struct TurnOutcome {
    std::string npc_utterance;
    Strategy strategy = Strategy::GeneratedReply;
    std::vector<GameAction> actions;
    std::vector<Highlight> highlights;
    std::vector<std::string> granted_items;
    IntentResult intent;
    DecidedLayer decided_layer = DecidedLayer::None;
    bool agent_failed = false;
    std::optional<int> predefined_cursor;  // new cursor value when the predefined list advanced
    int player_turn_index = 0;
    int npc_turn_index = 0;
};

/// Fallback layer: case-insensitive phrase containment after whitespace
/// normalization. Most matched phrases wins, ties by declaration order.
IntentResult keyword_match(std::string_view text, std::span<const IntentSpec> specs);

/// Leftmost-longest, non-overlapping trigger-phrase spans. Items already in
/// `inventory` are highlighted but not granted again.
ExtractionResult extract_items(std::string_view utterance, std::span<const ItemDef> item_defs,
                               std::span<const std::string> inventory);

/// The intent's effects iff all its required items are held, else empty.
/// Throws UnknownIntent.
std::vector<GameAction> evaluate_triggers(const ScenarioDefinition& scenario, std::string_view intent_id,
                                          std::span<const std::string> inventory);

/// Runs the layered pipeline for one player utterance: agent classification,
/// keyword fallback, trigger evaluation, predefined takeover after the turn
/// limit, otherwise a generated reply with item extraction.
///
/// Mutates the session's turn counter, predefined cursor, transcript and
/// inventory (extracted items). Returned actions are for the caller to apply.
/// One engine per session at a time; it holds no per-session state itself.
class DialogueEngine {
public:
    DialogueEngine(const ScenarioDefinition& scenario, llm::TextProvider& provider,
                   llm::RetryPolicy retry = {});

    /// Throws WrongStage (NPC not reachable now) and EmptyInput (blank or
    /// longer than kMaxInputLength characters).
    TurnOutcome process_player_input(SessionState& session, std::string_view npc_id,
                                     std::string_view text);

private:
    TurnOutcome gate_turn(SessionState& session, const NpcProfile& npc, const std::string& input);
    std::string predefined(SessionState& session, const NpcProfile& npc, TurnOutcome& out);

    const ScenarioDefinition& scenario_;
    llm::TextProvider& provider_;
    llm::RetryPolicy retry_;
};

} // namespace ecoecho::dialogue
