#include "ecoecho/session_runtime.hpp"

#include <atomic>
#include <chrono>
#include <memory>

#include "ecoecho/assessment.hpp"
#include "ecoecho/error.hpp"

namespace ecoecho {

using nlohmann::json;
using store::EventKind;

Clock system_clock() {
    return [] {
        return std::chrono::duration_cast<std::chrono::milliseconds>(
                   std::chrono::system_clock::now().time_since_epoch())
            .count();
    };
}

Clock fixed_step_clock(Timestamp start, Timestamp step) {
    auto next = std::make_shared<std::atomic<Timestamp>>(start);
    return [next, step] { return next->fetch_add(step); };
}

SessionRuntime::SessionRuntime(ScenarioPtr scenario, llm::TextProvider& provider, store::EventSink& sink,
                               Clock clock, llm::RetryPolicy retry)
    : scenario_(std::move(scenario)), provider_(&provider), sink_(&sink), clock_(std::move(clock)),
      retry_(retry) {}

SessionRuntime SessionRuntime::create(ScenarioPtr scenario, llm::TextProvider& provider,
                                      store::EventSink& sink, Clock clock, std::string session_id,
                                      llm::RetryPolicy retry) {
    if (!store::valid_session_id(session_id))
        fail(ErrorCode::BadInput, "invalid session id '" + session_id + "'");
    SessionRuntime rt(std::move(scenario), provider, sink, std::move(clock), retry);
    const Timestamp now = rt.clock_();
    rt.state_ = new_session(*rt.scenario_, std::move(session_id), now);
    rt.emit(EventKind::StageChanged,
            {{"from", nullptr},
             {"to", to_string(Stage::Opening)},
             {"scenario_id", rt.scenario_->id},
             {"degradation", rt.state_.world.degradation},
             {"scene", world_scene_index(rt.state_)}},
            now);
    for (const auto& item : rt.state_.inventory)
        rt.emit(EventKind::ItemGranted, {{"item", item}, {"source", "start"}}, now);
    return rt;
}

SessionRuntime SessionRuntime::resume(ScenarioPtr scenario, llm::TextProvider& provider,
                                      store::EventSink& sink, Clock clock,
                                      std::span<const store::SessionEvent> events, llm::RetryPolicy retry) {
    if (events.empty()) fail(ErrorCode::NotFound, "cannot resume a session without events");
    SessionRuntime rt(std::move(scenario), provider, sink, std::move(clock), retry);
    rt.state_ = store::replay_events(events);
    if (rt.state_.scenario_id != rt.scenario_->id)
        fail(ErrorCode::NotFound, "session belongs to scenario '" + rt.state_.scenario_id + "'");
    rt.next_seq_ = events.back().sequence + 1;
    return rt;
}

void SessionRuntime::emit(EventKind kind, json payload, Timestamp at) {
    store::SessionEvent e{state_.session_id, next_seq_, kind, std::move(payload), at};
    sink_->append(e);
    ++next_seq_;
}

void SessionRuntime::emit_stage_change(const StageChange& c) {
    emit(EventKind::StageChanged, {{"from", to_string(c.from)},
                                   {"to", to_string(c.to)},
                                   {"degradation", state_.world.degradation},
                                   {"scene", world_scene_index(state_)}});
}

std::vector<StageChange> SessionRuntime::advance() {
    std::vector<StageChange> changes;
    do {
        const Stage from = state_.stage;
        const Stage to = advance_stage(state_);
        changes.push_back({from, to});
        emit_stage_change(changes.back());
    } while (canonical_guard(state_.stage) == StageGuard::None);
    return changes;
}

TurnResult SessionRuntime::say(std::string_view npc_id, std::string_view text) {
    dialogue::DialogueEngine engine(*scenario_, *provider_, retry_);
    TurnResult result;
    result.outcome = engine.process_player_input(state_, npc_id, text);
    const auto& out = result.outcome;
    const std::string npc(npc_id);

    const DialogueTurn& player_turn = state_.transcript[state_.transcript.size() - 2];
    emit(EventKind::PlayerInput, {{"npc", npc}, {"text", player_turn.text}, {"turn_index", out.player_turn_index}});
    emit(EventKind::IntentDecided, {{"npc", npc},
                                    {"intent", out.intent.intent ? json(*out.intent.intent) : json(nullptr)},
                                    {"confidence", out.intent.confidence},
                                    {"layer", to_string(out.intent.layer)},
                                    {"agent_failed", out.agent_failed}});
    for (const auto& item : out.granted_items) emit(EventKind::ItemGranted, {{"item", item}, {"source", npc}});

    json highlights = json::array();
    for (const auto& h : out.highlights)
        highlights.push_back({{"begin", h.span.begin}, {"end", h.span.end}, {"item", h.item}});
    json actions = json::array();
    for (const auto& a : out.actions) actions.push_back(to_json(a));
    json reply{{"npc", npc},
               {"text", out.npc_utterance},
               {"turn_index", out.npc_turn_index},
               {"strategy", dialogue::to_string(out.strategy)},
               {"decided_layer", to_string(out.decided_layer)},
               {"intent", out.intent.intent ? json(*out.intent.intent) : json(nullptr)},
               {"granted_items", out.granted_items},
               {"highlights", highlights},
               {"actions", actions}};
    if (out.predefined_cursor) reply["predefined_cursor"] = *out.predefined_cursor;

    // Side effects first, in the same order the fold applies them.
    for (const auto& a : out.actions) apply_side_effect(state_, a);
    emit(EventKind::NpcReply, std::move(reply));

    for (const auto& a : out.actions) {
        switch (a.kind) {
        case GameAction::Kind::GrantItem:
            if (!state_.holds(a.item)) {
                state_.inventory.push_back(a.item);
                result.action_grants.push_back(a.item);
                emit(EventKind::ItemGranted, {{"item", a.item}, {"source", npc}});
            }
            break;
        case GameAction::Kind::AdvanceStage: {
            auto changes = advance();
            result.stage_changes.insert(result.stage_changes.end(), changes.begin(), changes.end());
            break;
        }
        case GameAction::Kind::OfferFinalDecision:
            while (state_.stage == Stage::Level4_Government || state_.stage == Stage::Return3) {
                auto changes = advance();
                result.stage_changes.insert(result.stage_changes.end(), changes.begin(), changes.end());
            }
            break;
        default:
            break;
        }
    }
    return result;
}

VoteResult SessionRuntime::vote(int round, int votes) {
    const Timestamp now = clock_();
    VoteResult result;
    result.record = assessment::record_vote(state_, round, votes, now);
    emit(EventKind::VoteCast,
         {{"round", round}, {"votes", votes}, {"stage", to_string(result.record.stage_at_vote)}}, now);
    if (state_.stage != Stage::Ended && vote_round_at(state_.stage) == round) result.stage_changes = advance();
    return result;
}

DecisionResult SessionRuntime::decide(bool support_repeal) {
    const Stage from = state_.stage;
    DecisionResult result{final_decision(state_, support_repeal), {}};
    emit(EventKind::DecisionMade, {{"support_repeal", support_repeal}});
    result.stage_changes.push_back({from, state_.stage});
    emit_stage_change(result.stage_changes.back());
    emit(EventKind::EndingReached, {{"ending", to_string(result.ending)}, {"scene", world_scene_index(state_)}});
    return result;
}

} // namespace ecoecho
