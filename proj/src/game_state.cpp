#include "ecoecho/game_state.hpp"

#include <algorithm>
#include <array>
#include <cstdio>
#include <random>

#include "ecoecho/error.hpp"

namespace ecoecho {

namespace {

constexpr std::array<std::string_view, 4> kLayerNames{"agent", "keyword", "predefined", "none"};

} // namespace

std::string_view to_string(DecidedLayer l) noexcept { return kLayerNames[static_cast<int>(l)]; }

std::optional<DecidedLayer> layer_from_string(std::string_view s) noexcept {
    for (std::size_t i = 0; i < kLayerNames.size(); ++i)
        if (kLayerNames[i] == s) return static_cast<DecidedLayer>(i);
    return std::nullopt;
}

std::string_view to_string(Ending e) noexcept { return e == Ending::Bad ? "bad" : "alternate"; }

std::optional<Ending> ending_from_string(std::string_view s) noexcept {
    if (s == "bad") return Ending::Bad;
    if (s == "alternate") return Ending::Alternate;
    return std::nullopt;
}

bool SessionState::holds(std::string_view item) const {
    return std::find(inventory.begin(), inventory.end(), item) != inventory.end();
}

int SessionState::turns_with(std::string_view npc) const {
    auto it = turn_counters.find(std::string(npc));
    return it == turn_counters.end() ? 0 : it->second;
}

const VoteRecord* SessionState::vote_for(int round) const {
    for (const auto& v : votes)
        if (v.round == round) return &v;
    return nullptr;
}

std::string generate_session_id() {
    static thread_local std::mt19937_64 rng{std::random_device{}()};
    char buf[17];
    std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(rng()));
    return buf;
}

SessionState new_session(const ScenarioDefinition& scenario, std::string session_id,
                         Timestamp created_at) {
    SessionState s;
    s.session_id = std::move(session_id);
    s.scenario_id = scenario.id;
    s.created_at = created_at;
    s.inventory = scenario.starting_items;
    enter_stage(s, Stage::Opening);
    return s;
}

SessionState new_session(const ScenarioDefinition& scenario, Timestamp created_at) {
    return new_session(scenario, generate_session_id(), created_at);
}

void enter_stage(SessionState& session, Stage stage) {
    session.stage = stage;
    if (return_index(stage)) apply_world_degradation(session);
    if (auto round = vote_round_at(stage); round && !session.vote_for(*round))
        session.pending_vote = *round;
}

Stage advance_stage(SessionState& session) {
    const Stage from = session.stage;
    if (from == Stage::Ended)
        fail(ErrorCode::IllegalTransition, "session has ended; no further stages");
    if (from == Stage::FinalDecision)
        fail(ErrorCode::IllegalTransition, "final_decision must be made to leave the final stage");
    if (auto round = vote_round_at(from); round && !session.vote_for(*round))
        fail(ErrorCode::IllegalTransition, "cannot leave stage '" + std::string(to_string(from)) +
                                               "' before round " + std::to_string(*round) +
                                               " vote is recorded");
    const Stage to = *successor(from);
    enter_stage(session, to);
    return to;
}

WorldState apply_world_degradation(SessionState& session) {
    if (auto idx = return_index(session.stage))
        session.world.degradation = std::max(session.world.degradation, std::min(*idx, 2));
    return session.world;
}

GateDecision security_gate(const SessionState& session, const ScenarioDefinition& scenario,
                           bool mentioned_subject, const std::optional<std::string>& presented_item) {
    if (session.stage != Stage::Level2_SecurityGate)
        fail(ErrorCode::WrongStage, "security gate is only active at level2_security_gate");
    const auto& rules = scenario.security_gate;
    if (!mentioned_subject) return {GateDecision::Kind::Deny, rules.deny_line};
    const bool valid_id =
        presented_item && session.holds(*presented_item) &&
        std::find(rules.credential_items.begin(), rules.credential_items.end(), *presented_item) !=
            rules.credential_items.end();
    if (!valid_id) return {GateDecision::Kind::RequestId, rules.request_id_line};
    return {GateDecision::Kind::Allow, rules.allow_line};
}

Ending final_decision(SessionState& session, bool support_repeal) {
    if (session.stage != Stage::FinalDecision)
        fail(ErrorCode::WrongStage, "final decision is only available at final_decision, not '" +
                                        std::string(to_string(session.stage)) + "'");
    const Ending ending = support_repeal ? Ending::Bad : Ending::Alternate;
    session.ending = ending;
    enter_stage(session, Stage::Ended);
    return ending;
}

int world_scene_index(const SessionState& session) {
    if (session.ending == Ending::Alternate) return 0;
    return session.world.degradation;
}

bool npc_reachable(const SessionState& session, const ScenarioDefinition& scenario,
                   std::string_view npc_id) {
    const NpcProfile* npc = scenario.find_npc(npc_id);
    if (!npc) return false;
    if (npc->level == 0) return vote_round_at(session.stage).has_value();
    auto level = npc_level_at(session.stage);
    return level && *level == npc->level;
}

void apply_side_effect(SessionState& session, const GameAction& action) {
    switch (action.kind) {
    case GameAction::Kind::SetWorldDegradation:
        session.world.degradation =
            std::max(session.world.degradation, std::clamp(action.value, 0, 2));
        break;
    case GameAction::Kind::OpenVote:
        if (action.value >= 1 && action.value <= 4 && !session.vote_for(action.value))
            session.pending_vote = action.value;
        break;
    default:
        break;
    }
}

} // namespace ecoecho
