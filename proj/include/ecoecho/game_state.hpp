#pragma once

#include <optional>
#include <string>

#include "ecoecho/scenario.hpp"
#include "ecoecho/session.hpp"

namespace ecoecho {

/// Starts a session at Opening with the scenario's starting items and round 1 pending.
SessionState new_session(const ScenarioDefinition& scenario, std::string session_id,
                         Timestamp created_at);

/// Same, with a freshly generated random session id.
SessionState new_session(const ScenarioDefinition& scenario, Timestamp created_at = 0);

std::string generate_session_id();

/// Moves to the unique successor stage. Throws IllegalTransition when the
/// current stage's vote is still pending, at FinalDecision (only final_decision
/// leaves it) and at Ended.
Stage advance_stage(SessionState& session);

/// Sets the stage and applies its entry effects: world degradation on Return
/// stages, the attached vote round becomes pending. Shared with event replay.
void enter_stage(SessionState& session, Stage stage);

/// Raises degradation to the current Return stage's index (Return1 0, Return2 1,
/// Return3 2). Never lowers it; a no-op outside Return stages.
WorldState apply_world_degradation(SessionState& session);

struct GateDecision {
    enum class Kind { Deny, RequestId, Allow };
    Kind kind = Kind::Deny;
    std::string line;

    bool operator==(const GateDecision&) const = default;
};

/// Level-2 access rules. `presented_item` only counts when it is an accepted
/// credential that the player actually holds. Throws WrongStage outside
/// Level2_SecurityGate.
GateDecision security_gate(const SessionState& session, const ScenarioDefinition& scenario,
                           bool mentioned_subject, const std::optional<std::string>& presented_item);

/// support_repeal = true is the bad ending. Moves to Ended and opens round 4.
Ending final_decision(SessionState& session, bool support_repeal);

/// World-window scene: the alternate ending shows the restored future (scene 0).
int world_scene_index(const SessionState& session);

/// NPCs the player may talk to in the current stage.
bool npc_reachable(const SessionState& session, const ScenarioDefinition& scenario,
                   std::string_view npc_id);

/// Applies the actions that do not change the stage or inventory:
/// SetWorldDegradation (monotone) and OpenVote. Other kinds are ignored.
void apply_side_effect(SessionState& session, const GameAction& action);

} // namespace ecoecho
