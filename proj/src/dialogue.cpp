#include "ecoecho/dialogue.hpp"

#include <algorithm>
#include <array>

#include "ecoecho/error.hpp"
#include "ecoecho/game_state.hpp"

namespace ecoecho::dialogue {

namespace {

constexpr std::array<std::string_view, 3> kStrategyNames{"generated_reply", "predefined_answer",
                                                         "item_or_action"};

bool is_provider_failure(const Error& e) {
    return e.code() == ErrorCode::ProviderError || e.code() == ErrorCode::ProviderTimeout;
}

bool holds(std::span<const std::string> inventory, std::string_view item) {
    return std::find(inventory.begin(), inventory.end(), item) != inventory.end();
}

} // namespace

std::string_view to_string(Strategy s) noexcept { return kStrategyNames[static_cast<int>(s)]; }

std::optional<Strategy> strategy_from_string(std::string_view s) noexcept {
    for (std::size_t i = 0; i < kStrategyNames.size(); ++i)
        if (kStrategyNames[i] == s) return static_cast<Strategy>(i);
    return std::nullopt;
}

IntentResult keyword_match(std::string_view input, std::span<const IntentSpec> specs) {
    const std::string normalized = text::normalize(input);
    const IntentSpec* best = nullptr;
    int best_hits = 0;
    for (const auto& spec : specs) {
        int hits = 0;
        for (const auto& kw : spec.keywords)
            if (text::contains_phrase(normalized, kw)) ++hits;
        if (hits > best_hits) {
            best = &spec;
            best_hits = hits;
        }
    }
    if (!best) return IntentResult::none();
    return {best->id, 1.0, DecidedLayer::Keyword};
}

ExtractionResult extract_items(std::string_view utterance, std::span<const ItemDef> item_defs,
                               std::span<const std::string> inventory) {
    std::vector<Highlight> candidates;
    for (const auto& item : item_defs) {
        for (const auto& phrase : item.trigger_phrases) {
            std::size_t from = 0;
            while (auto span = text::find_phrase(utterance, phrase, from)) {
                candidates.push_back({*span, item.id});
                from = span->begin + 1;
            }
        }
    }
    std::stable_sort(candidates.begin(), candidates.end(), [](const Highlight& a, const Highlight& b) {
        if (a.span.begin != b.span.begin) return a.span.begin < b.span.begin;
        return a.span.length() > b.span.length();
    });

    ExtractionResult out;
    for (const auto& c : candidates) {
        if (!out.highlights.empty() && out.highlights.back().span.overlaps(c.span)) continue;
        out.highlights.push_back(c);
        if (!holds(inventory, c.item) &&
            std::find(out.granted.begin(), out.granted.end(), c.item) == out.granted.end())
            out.granted.push_back(c.item);
    }
    return out;
}

std::vector<GameAction> evaluate_triggers(const ScenarioDefinition& scenario, std::string_view intent_id,
                                          std::span<const std::string> inventory) {
    const IntentSpec* spec = scenario.find_intent(intent_id);
    if (!spec) fail(ErrorCode::UnknownIntent, "unknown intent '" + std::string(intent_id) + "'");
    for (const auto& item : spec->required_items)
        if (!holds(inventory, item)) return {};
    return spec->effects;
}

DialogueEngine::DialogueEngine(const ScenarioDefinition& scenario, llm::TextProvider& provider,
                               llm::RetryPolicy retry)
    : scenario_(scenario), provider_(provider), retry_(retry) {}

std::string DialogueEngine::predefined(SessionState& session, const NpcProfile& npc, TurnOutcome& out) {
    if (npc.predefined_responses.empty())
        return scenario_.fallback_line.empty() ? "..." : scenario_.fallback_line;
    int& cursor = session.predefined_cursor[npc.id];
    const auto idx = static_cast<std::size_t>(cursor) % npc.predefined_responses.size();
    ++cursor;
    out.predefined_cursor = cursor;
    return npc.predefined_responses[idx];
}

TurnOutcome DialogueEngine::gate_turn(SessionState& session, const NpcProfile& npc,
                                      const std::string& input) {
    const auto& rules = scenario_.security_gate;
    auto mentions_subject = [&](std::string_view t) {
        return std::any_of(rules.subject_phrases.begin(), rules.subject_phrases.end(),
                           [&](const std::string& p) { return text::contains_phrase(t, p); });
    };
    bool mentioned = mentions_subject(input);
    for (const auto& t : session.transcript)
        if (t.npc == npc.id && t.speaker == kPlayerSpeaker && mentions_subject(t.text)) mentioned = true;

    std::optional<std::string> presented;
    const bool shows_credential =
        std::any_of(rules.credential_phrases.begin(), rules.credential_phrases.end(),
                    [&](const std::string& p) { return text::contains_phrase(input, p); });
    if (shows_credential && !rules.credential_items.empty()) {
        presented = rules.credential_items.front();
        for (const auto& item : rules.credential_items)
            if (session.holds(item)) {
                presented = item;
                break;
            }
    }

    const GateDecision decision = security_gate(session, scenario_, mentioned, presented);
    TurnOutcome out;
    out.npc_utterance = decision.line;
    if (decision.kind == GateDecision::Kind::Allow) {
        out.strategy = Strategy::ItemOrAction;
        out.actions = {GameAction::advance()};
        out.decided_layer = DecidedLayer::Keyword;
        if (out.npc_utterance.empty()) out.npc_utterance = "Go ahead.";
    } else {
        out.strategy = Strategy::PredefinedAnswer;
        out.decided_layer = DecidedLayer::Predefined;
    }
    return out;
}

TurnOutcome DialogueEngine::process_player_input(SessionState& session, std::string_view npc_id,
                                                 std::string_view raw_text) {
    const NpcProfile* npc = scenario_.find_npc(npc_id);
    if (!npc || !npc_reachable(session, scenario_, npc_id))
        fail(ErrorCode::WrongStage, "NPC '" + std::string(npc_id) + "' is not reachable at stage '" +
                                        std::string(to_string(session.stage)) + "'");
    const std::string input = text::trim(raw_text);
    if (input.empty()) fail(ErrorCode::EmptyInput, "player input is empty");
    if (input.size() > kMaxInputLength)
        fail(ErrorCode::EmptyInput, "player input exceeds " + std::to_string(kMaxInputLength) + " characters");

    const int counter_before = session.turns_with(npc->id);
    int turn_index = 0;
    for (const auto& t : session.transcript)
        if (t.npc == npc->id) ++turn_index;

    TurnOutcome out;
    if (npc->level == 2 && session.stage == Stage::Level2_SecurityGate) {
        out = gate_turn(session, *npc, input);
    } else {
        const auto specs = scenario_.intents_for(npc->id);
        IntentResult res;
        if (!specs.empty()) {
            try {
                res = llm::classify_intent(input, session.transcript, specs, npc->id, provider_, retry_);
            } catch (const Error& e) {
                if (!is_provider_failure(e)) throw;
                out.agent_failed = true;
            }
            if (out.agent_failed || !res.matched() || res.confidence < scenario_.confidence_threshold)
                res = keyword_match(input, specs);
        }
        out.intent = res;

        const llm::PromptBundle bundle = llm::build_character_prompt(*npc);
        auto generated_or_fallback = [&](Strategy on_success) {
            try {
                out.npc_utterance =
                    llm::generate_reply(bundle, session.transcript, input, provider_, retry_).text;
                out.strategy = on_success;
                return true;
            } catch (const Error& e) {
                if (!is_provider_failure(e)) throw;
                out.npc_utterance = predefined(session, *npc, out);
                return false;
            }
        };

        std::vector<GameAction> actions;
        if (res.matched()) actions = evaluate_triggers(scenario_, *res.intent, session.inventory);

        if (!actions.empty()) {
            out.strategy = Strategy::ItemOrAction;
            out.actions = actions;
            out.decided_layer = res.layer;
            const IntentSpec* spec = scenario_.find_intent(*res.intent);
            auto canned = std::find_if(actions.begin(), actions.end(), [](const GameAction& a) {
                return a.kind == GameAction::Kind::ReturnPredefined;
            });
            if (canned != actions.end()) {
                out.npc_utterance = npc->predefined_responses.at(static_cast<std::size_t>(canned->value));
            } else if (!spec->success_reply.empty()) {
                out.npc_utterance = spec->success_reply;
            } else {
                generated_or_fallback(Strategy::ItemOrAction);
            }
        } else if (counter_before >= scenario_.turn_limit) {
            out.strategy = Strategy::PredefinedAnswer;
            out.decided_layer = DecidedLayer::Predefined;
            out.npc_utterance = predefined(session, *npc, out);
        } else if (generated_or_fallback(Strategy::GeneratedReply)) {
            out.decided_layer = res.layer;
        } else {
            out.strategy = Strategy::PredefinedAnswer;
            out.decided_layer = DecidedLayer::Predefined;
        }
    }

    std::vector<ItemDef> grantable;
    for (const auto& item : scenario_.items)
        if (item.grantor_npc.empty() || item.grantor_npc == npc->id) grantable.push_back(item);
    ExtractionResult extracted = extract_items(out.npc_utterance, grantable, session.inventory);
    out.highlights = std::move(extracted.highlights);
    out.granted_items = std::move(extracted.granted);

    session.turn_counters[npc->id] = counter_before + 1;
    for (const auto& item : out.granted_items) session.inventory.push_back(item);

    out.player_turn_index = turn_index;
    out.npc_turn_index = turn_index + 1;
    session.transcript.push_back({kPlayerSpeaker, npc->id, input, turn_index, std::nullopt,
                                  DecidedLayer::None, {}});
    session.transcript.push_back({npc->id, npc->id, out.npc_utterance, turn_index + 1, out.intent.intent,
                                  out.decided_layer, out.granted_items});
    return out;
}

} // namespace ecoecho::dialogue
