#include "ecoecho/stage.hpp"

namespace ecoecho {

namespace {

constexpr std::array<std::string_view, 10> kStageNames{
    "opening", "level1_media",      "return1", "level2_security_gate", "level3_union",
    "return2", "level4_government", "return3", "final_decision",       "ended",
};

constexpr std::array<std::string_view, 5> kGuardNames{
    "vote", "intent", "security_gate", "none", "decision",
};

} // namespace

std::string_view to_string(Stage s) noexcept { return kStageNames[stage_index(s)]; }

std::optional<Stage> stage_from_string(std::string_view s) noexcept {
    for (std::size_t i = 0; i < kStageNames.size(); ++i) {
        if (kStageNames[i] == s) return kStageOrder[i];
    }
    return std::nullopt;
}

std::string_view to_string(StageGuard g) noexcept { return kGuardNames[static_cast<int>(g)]; }

std::optional<StageGuard> guard_from_string(std::string_view s) noexcept {
    for (std::size_t i = 0; i < kGuardNames.size(); ++i) {
        if (kGuardNames[i] == s) return static_cast<StageGuard>(i);
    }
    return std::nullopt;
}

std::optional<Stage> successor(Stage s) noexcept {
    if (s == Stage::Ended) return std::nullopt;
    return kStageOrder[stage_index(s) + 1];
}

StageGuard canonical_guard(Stage s) noexcept {
    switch (s) {
    case Stage::Opening:
    case Stage::Return1:
    case Stage::Return2:
    case Stage::Ended:
        return StageGuard::Vote;
    case Stage::Level1_Media:
    case Stage::Level3_Union:
    case Stage::Level4_Government:
        return StageGuard::Intent;
    case Stage::Level2_SecurityGate:
        return StageGuard::SecurityGate;
    case Stage::Return3:
        return StageGuard::None;
    case Stage::FinalDecision:
        return StageGuard::Decision;
    }
    return StageGuard::None;
}

std::optional<int> vote_round_at(Stage s) noexcept {
    switch (s) {
    case Stage::Opening: return 1;
    case Stage::Return1: return 2;
    case Stage::Return2: return 3;
    case Stage::Ended: return 4;
    default: return std::nullopt;
    }
}

Stage stage_for_round(int round) noexcept {
    switch (round) {
    case 1: return Stage::Opening;
    case 2: return Stage::Return1;
    case 3: return Stage::Return2;
    default: return Stage::Ended;
    }
}

std::optional<int> npc_level_at(Stage s) noexcept {
    switch (s) {
    case Stage::Level1_Media: return 1;
    case Stage::Level2_SecurityGate: return 2;
    case Stage::Level3_Union: return 3;
    case Stage::Level4_Government: return 4;
    default: return std::nullopt;
    }
}

std::optional<int> return_index(Stage s) noexcept {
    switch (s) {
    case Stage::Return1: return 0;
    case Stage::Return2: return 1;
    case Stage::Return3: return 2;
    default: return std::nullopt;
    }
}

} // namespace ecoecho
