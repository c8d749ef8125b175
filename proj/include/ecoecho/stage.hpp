#pragma once

#include <array>
#include <optional>
#include <string_view>

namespace ecoecho {

/// Canonical linear narrative order. Levels 1-4 are the gated NPC levels; the
/// Return stages are the time-travel visits to the future world.
enum class Stage {
    Opening,
    Level1_Media,
    Return1,
    Level2_SecurityGate,
    Level3_Union,
    Return2,
    Level4_Government,
    Return3,
    FinalDecision,
    Ended,
};

inline constexpr std::array<Stage, 10> kStageOrder{
    Stage::Opening,           Stage::Level1_Media, Stage::Return1,
    Stage::Level2_SecurityGate, Stage::Level3_Union, Stage::Return2,
    Stage::Level4_Government, Stage::Return3,      Stage::FinalDecision,
    Stage::Ended,
};

/// What must happen before a stage can be left.
enum class StageGuard { Vote, Intent, SecurityGate, None, Decision };

std::string_view to_string(Stage s) noexcept;
std::optional<Stage> stage_from_string(std::string_view s) noexcept;
std::string_view to_string(StageGuard g) noexcept;
std::optional<StageGuard> guard_from_string(std::string_view s) noexcept;

constexpr int stage_index(Stage s) noexcept { return static_cast<int>(s); }

std::optional<Stage> successor(Stage s) noexcept;
StageGuard canonical_guard(Stage s) noexcept;

/// Assessment round attached to a stage: Opening 1, Return1 2, Return2 3, Ended 4.
std::optional<int> vote_round_at(Stage s) noexcept;

/// The stage a given assessment round is attached to.
Stage stage_for_round(int round) noexcept;

/// NPC level that is playable in a stage (1-4), if any.
std::optional<int> npc_level_at(Stage s) noexcept;

/// 0, 1, 2 for Return1..Return3.
std::optional<int> return_index(Stage s) noexcept;

} // namespace ecoecho
