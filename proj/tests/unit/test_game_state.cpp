#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <random>

#include "ecoecho/assessment.hpp"
#include "ecoecho/error.hpp"
#include "ecoecho/game_state.hpp"
#include "support.hpp"

using namespace ecoecho;

namespace {

const ScenarioDefinition& eco() { return *testing::ecoecho_scenario(); }

template <typename Fn>
ErrorCode code_of(Fn&& fn) {
    try {
        fn();
    } catch (const Error& e) {
        return e.code();
    }
    FAIL("expected an ecoecho::Error");
    return ErrorCode::BadInput;
}

// Walks a fresh session forward to `target`, voting whenever a round blocks.
SessionState at_stage(Stage target) {
    auto s = new_session(eco(), "walk", 0);
    while (s.stage != target) {
        if (s.pending_vote) assessment::record_vote(s, *s.pending_vote, 3, 0);
        if (s.stage == Stage::FinalDecision) {
            final_decision(s, true);
            continue;
        }
        advance_stage(s);
    }
    return s;
}

} // namespace

TEST_CASE("stage metadata") {
    CHECK(to_string(Stage::Level2_SecurityGate) == "level2_security_gate");
    for (Stage s : kStageOrder) CHECK(stage_from_string(to_string(s)) == s);
    CHECK(vote_round_at(Stage::Opening) == 1);
    CHECK(vote_round_at(Stage::Return1) == 2);
    CHECK(vote_round_at(Stage::Return2) == 3);
    CHECK(vote_round_at(Stage::Ended) == 4);
    CHECK_FALSE(vote_round_at(Stage::Return3));
    for (int r = 1; r <= 4; ++r) CHECK(vote_round_at(stage_for_round(r)) == r);
    CHECK_FALSE(successor(Stage::Ended));
}

TEST_CASE("new_session") {
    const auto s = new_session(eco(), 5);
    CHECK(s.stage == Stage::Opening);
    CHECK(s.inventory == std::vector<std::string>{"gasoline_quest_key"});
    CHECK(s.world.degradation == 0);
    CHECK(s.votes.empty());
    CHECK(s.pending_vote == 1);
    CHECK_FALSE(s.ending);
    CHECK(s.created_at == 5);
    CHECK(new_session(eco()).session_id != new_session(eco()).session_id);
}

TEST_CASE("advance_stage") {
    SUBCASE("Level1_Media advances to Return1") {
        auto s = at_stage(Stage::Level1_Media);
        CHECK(advance_stage(s) == Stage::Return1);
        CHECK(s.pending_vote == 2);
    }
    SUBCASE("Opening before the round-1 vote") {
        auto s = new_session(eco(), "x", 0);
        CHECK(code_of([&] { advance_stage(s); }) == ErrorCode::IllegalTransition);
        CHECK(s.stage == Stage::Opening);
    }
    SUBCASE("Ended is terminal") {
        auto s = at_stage(Stage::Ended);
        CHECK(code_of([&] { advance_stage(s); }) == ErrorCode::IllegalTransition);
        assessment::record_vote(s, 4, 5, 0);
        CHECK(code_of([&] { advance_stage(s); }) == ErrorCode::IllegalTransition);
    }
    SUBCASE("FinalDecision only leaves through the decision") {
        auto s = at_stage(Stage::FinalDecision);
        CHECK(code_of([&] { advance_stage(s); }) == ErrorCode::IllegalTransition);
    }
}

TEST_CASE("world degradation schedule") {
    CHECK(at_stage(Stage::Return1).world.degradation == 0);
    CHECK(at_stage(Stage::Return2).world.degradation == 1);
    auto s = at_stage(Stage::Return3);
    CHECK(s.world.degradation == 2);
    CHECK(apply_world_degradation(s).degradation == 2);
    CHECK(apply_world_degradation(s).degradation == 2);

    // Outside a Return stage it is a no-op, and it never lowers the level.
    auto l = at_stage(Stage::Level4_Government);
    CHECK(l.world.degradation == 1);
    CHECK(apply_world_degradation(l).degradation == 1);
    apply_side_effect(l, GameAction::degrade(0));
    CHECK(l.world.degradation == 1);
    apply_side_effect(l, GameAction::degrade(2));
    CHECK(l.world.degradation == 2);
}

TEST_CASE("security gate rules") {
    const auto& g = eco().security_gate;
    auto s = at_stage(Stage::Level2_SecurityGate);

    const auto deny = security_gate(s, eco(), false, std::nullopt);
    CHECK(deny.kind == GateDecision::Kind::Deny);
    CHECK(deny.line == "Sorry, I can't let you in without knowing who you're looking for.");
    CHECK(deny.line == g.deny_line);

    const auto req = security_gate(s, eco(), true, std::nullopt);
    CHECK(req.kind == GateDecision::Kind::RequestId);
    CHECK(req.line == "Please show your identification.");

    // Naming the press card without holding it is not enough.
    CHECK(security_gate(s, eco(), true, std::string("press_card")).kind == GateDecision::Kind::RequestId);
    s.inventory.push_back("press_card");
    CHECK(security_gate(s, eco(), true, std::string("press_card")).kind == GateDecision::Kind::Allow);
    // Any other held item is not identification.
    CHECK(security_gate(s, eco(), true, std::string("gasoline_quest_key")).kind == GateDecision::Kind::RequestId);
    // Mentioning Bob is still required.
    CHECK(security_gate(s, eco(), false, std::string("press_card")).kind == GateDecision::Kind::Deny);

    auto early = at_stage(Stage::Level1_Media);
    CHECK(code_of([&] { security_gate(early, eco(), true, std::nullopt); }) == ErrorCode::WrongStage);
}

TEST_CASE("final_decision") {
    auto bad = at_stage(Stage::FinalDecision);
    CHECK(final_decision(bad, true) == Ending::Bad);
    CHECK(bad.stage == Stage::Ended);
    CHECK(bad.pending_vote == 4);
    CHECK(world_scene_index(bad) == 2);

    auto alt = at_stage(Stage::FinalDecision);
    CHECK(final_decision(alt, false) == Ending::Alternate);
    CHECK(world_scene_index(alt) == 0);

    auto mid = at_stage(Stage::Level3_Union);
    CHECK(code_of([&] { final_decision(mid, true); }) == ErrorCode::WrongStage);
    CHECK_FALSE(mid.ending);
}

TEST_CASE("npc reachability follows the level graph") {
    auto s = at_stage(Stage::Level1_Media);
    CHECK(npc_reachable(s, eco(), "lisa"));
    CHECK_FALSE(npc_reachable(s, eco(), "jonathan"));
    CHECK_FALSE(npc_reachable(s, eco(), "emilia"));
    CHECK_FALSE(npc_reachable(s, eco(), "nobody"));

    auto later = at_stage(Stage::Level3_Union);
    CHECK(npc_reachable(later, eco(), "bob"));
    CHECK_FALSE(npc_reachable(later, eco(), "lisa"));

    CHECK(npc_reachable(at_stage(Stage::Return1), eco(), "emilia"));
}

TEST_CASE("random action sequences visit a prefix of the canonical order") {
    std::mt19937 rng(2024);
    std::uniform_int_distribution<int> pick(0, 3);
    std::uniform_int_distribution<int> round(1, 4);
    std::uniform_int_distribution<int> votes(-1, 6);
    for (int trial = 0; trial < 300; ++trial) {
        auto s = new_session(eco(), "p" + std::to_string(trial), 0);
        std::vector<Stage> visited{s.stage};
        int vote_count = 0;
        int last_degradation = 0;
        for (int step = 0; step < 60; ++step) {
            const SessionState before = s;
            try {
                switch (pick(rng)) {
                case 0:
                    advance_stage(s);
                    break;
                case 1:
                    assessment::record_vote(s, round(rng), votes(rng), step);
                    ++vote_count;
                    break;
                case 2:
                    if (s.pending_vote) {
                        assessment::record_vote(s, *s.pending_vote, 3, step);
                        ++vote_count;
                    }
                    break;
                default:
                    final_decision(s, trial % 2 == 0);
                    break;
                }
            } catch (const Error&) {
                CHECK(s == before);  // rejected actions leave no trace
            }
            if (s.stage != visited.back()) {
                CHECK(stage_index(s.stage) == stage_index(visited.back()) + 1);
                visited.push_back(s.stage);
            }
            CHECK(s.world.degradation >= last_degradation);
            last_degradation = s.world.degradation;
            CHECK(s.ending.has_value() == (s.stage == Stage::Ended));
        }
        for (std::size_t i = 0; i < visited.size(); ++i) CHECK(visited[i] == kStageOrder[i]);
        CHECK(vote_count <= 4);
        CHECK(s.votes.size() <= 4);
        if (s.ending == Ending::Bad) CHECK(world_scene_index(s) == 2);
    }
}
