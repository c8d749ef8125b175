#pragma once

#include <functional>
#include <span>
#include <string>
#include <vector>

#include "ecoecho/dialogue.hpp"
#include "ecoecho/game_state.hpp"
#include "ecoecho/llm_gateway.hpp"
#include "ecoecho/scenario.hpp"
#include "ecoecho/session_store.hpp"

namespace ecoecho {

using Clock = std::function<Timestamp()>;

Clock system_clock();
/// Starts at `start` and advances by `step` per call; for reproducible runs.
Clock fixed_step_clock(Timestamp start = 0, Timestamp step = 1);

struct StageChange {
    Stage from;
    Stage to;
};

struct TurnResult {
    dialogue::TurnOutcome outcome;
    std::vector<std::string> action_grants;  // items granted by GrantItem effects
    std::vector<StageChange> stage_changes;
};

struct VoteResult {
    VoteRecord record;
    std::vector<StageChange> stage_changes;
};

struct DecisionResult {
    Ending ending;
    std::vector<StageChange> stage_changes;
};

/// One live session: runs the dialogue pipeline, applies game actions and
/// writes every state change to the event sink. State only changes after the
/// request has been validated, so failed requests leave no events.
/// Not thread-safe; callers serialize access per session.
class SessionRuntime {
public:
    static SessionRuntime create(ScenarioPtr scenario, llm::TextProvider& provider, store::EventSink& sink,
                                 Clock clock, std::string session_id, llm::RetryPolicy retry = {});

    /// Rebuilds a runtime from a stored log; new events continue its sequence.
    static SessionRuntime resume(ScenarioPtr scenario, llm::TextProvider& provider, store::EventSink& sink,
                                 Clock clock, std::span<const store::SessionEvent> events,
                                 llm::RetryPolicy retry = {});

    TurnResult say(std::string_view npc_id, std::string_view text);
    VoteResult vote(int round, int votes);
    DecisionResult decide(bool support_repeal);

    const SessionState& state() const { return state_; }
    const ScenarioDefinition& scenario() const { return *scenario_; }
    std::uint64_t next_sequence() const { return next_seq_; }

private:
    SessionRuntime(ScenarioPtr scenario, llm::TextProvider& provider, store::EventSink& sink, Clock clock,
                   llm::RetryPolicy retry);

    void emit(store::EventKind kind, nlohmann::json payload, Timestamp at);
    void emit(store::EventKind kind, nlohmann::json payload) { emit(kind, std::move(payload), clock_()); }
    /// Advances once, then through any stage that has no guard of its own.
    std::vector<StageChange> advance();
    void emit_stage_change(const StageChange& c);

    ScenarioPtr scenario_;
    llm::TextProvider* provider_;
    store::EventSink* sink_;
    Clock clock_;
    llm::RetryPolicy retry_;
    SessionState state_;
    std::uint64_t next_seq_ = 0;
};

} // namespace ecoecho
