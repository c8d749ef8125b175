#pragma once

#include <cstdint>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "ecoecho/stage.hpp"

namespace ecoecho {

using Timestamp = std::int64_t;  // milliseconds since the Unix epoch

inline constexpr const char* kPlayerSpeaker = "player";

/// Which layer decided a turn. IntentResult only ever uses Agent, Keyword or None.
enum class DecidedLayer { Agent, Keyword, Predefined, None };

std::string_view to_string(DecidedLayer l) noexcept;
std::optional<DecidedLayer> layer_from_string(std::string_view s) noexcept;

struct IntentResult {
    std::optional<std::string> intent;
    double confidence = 0.0;
    DecidedLayer layer = DecidedLayer::None;

    static IntentResult none() { return {}; }
    bool matched() const { return intent.has_value(); }
    bool operator==(const IntentResult&) const = default;
};

struct DialogueTurn {
    std::string speaker;  // kPlayerSpeaker or an NPC id
    std::string npc;      // conversation partner; turn_index counts per npc
    std::string text;
    int turn_index = 0;
    std::optional<std::string> detected_intent;
    DecidedLayer decided_layer = DecidedLayer::None;
    std::vector<std::string> granted_items;

    bool operator==(const DialogueTurn&) const = default;
};

struct VoteRecord {
    int round = 1;
    int votes = 0;
    Stage stage_at_vote = Stage::Opening;
    Timestamp timestamp = 0;

    bool operator==(const VoteRecord&) const = default;
};

enum class Ending { Bad, Alternate };

std::string_view to_string(Ending e) noexcept;
std::optional<Ending> ending_from_string(std::string_view s) noexcept;

struct WorldState {
    int degradation = 0;  // 0 clean-energy future, 1 factories persist, 2 uninhabitable

    bool operator==(const WorldState&) const = default;
};

struct SessionState {
    std::string session_id;
    std::string scenario_id;
    Stage stage = Stage::Opening;
    std::vector<std::string> inventory;  // grant order
    std::map<std::string, int> turn_counters;
    std::map<std::string, int> predefined_cursor;
    std::vector<DialogueTurn> transcript;
    std::vector<VoteRecord> votes;
    WorldState world;
    std::optional<Ending> ending;
    std::optional<int> pending_vote;
    Timestamp created_at = 0;

    bool holds(std::string_view item) const;
    int turns_with(std::string_view npc) const;
    const VoteRecord* vote_for(int round) const;

    bool operator==(const SessionState&) const = default;
};

} // namespace ecoecho
