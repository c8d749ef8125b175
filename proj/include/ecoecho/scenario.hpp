#pragma once

#include <filesystem>
#include <iosfwd>
#include <memory>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include <json.hpp>

#include "ecoecho/stage.hpp"

namespace ecoecho {

inline constexpr int kScenarioFormatVersion = 1;

struct GameAction {
    enum class Kind {
        AdvanceStage,
        GrantItem,           // item
        SetWorldDegradation, // value: 0-2
        OpenVote,            // value: round 1-4
        OfferFinalDecision,
        ReturnPredefined,    // value: index into the owning NPC's predefined list
    };

    Kind kind = Kind::AdvanceStage;
    std::string item;
    int value = 0;

    static GameAction advance() { return {Kind::AdvanceStage, {}, 0}; }
    static GameAction grant(std::string id) { return {Kind::GrantItem, std::move(id), 0}; }
    static GameAction degrade(int level) { return {Kind::SetWorldDegradation, {}, level}; }
    static GameAction open_vote(int round) { return {Kind::OpenVote, {}, round}; }
    static GameAction offer_final_decision() { return {Kind::OfferFinalDecision, {}, 0}; }
    static GameAction predefined(int index) { return {Kind::ReturnPredefined, {}, index}; }

    bool operator==(const GameAction&) const = default;
};

std::string_view to_string(GameAction::Kind k) noexcept;

struct NpcProfile {
    std::string id;
    std::string name;
    std::string occupation;
    std::string backstory;
    std::vector<std::string> personality_traits;
    std::string motivation;
    std::string objective;
    std::vector<std::string> dialogue_guidelines;
    std::vector<std::string> example_openers;
    int level = 0;  // 0 = evaluator, 1-4 = gated levels
    std::vector<std::string> predefined_responses;
    std::vector<std::pair<std::string, std::string>> knowledge_bank;
    std::string portrait;  // opaque asset path

    bool operator==(const NpcProfile&) const = default;
};

struct IntentSpec {
    std::string id;
    std::string owning_npc;
    std::string task_label;
    std::string description;
    std::vector<std::string> keywords;
    std::vector<std::string> required_items;
    std::vector<GameAction> effects;
    // Spoken when the intent fires; when empty the reply is generated.
    std::string success_reply;

    bool operator==(const IntentSpec&) const = default;
};

struct ItemDef {
    std::string id;
    std::string display_name;
    std::string grantor_npc;
    std::vector<std::string> trigger_phrases;
    std::string description;

    bool operator==(const ItemDef&) const = default;
};

struct StageDef {
    Stage stage = Stage::Opening;
    StageGuard guard = StageGuard::None;
    std::string npc;  // empty when the stage has no conversational NPC
    std::string narration;

    bool operator==(const StageDef&) const = default;
};

struct AssessmentRound {
    int round = 1;
    std::string prompt;
    Stage after_stage = Stage::Opening;

    bool operator==(const AssessmentRound&) const = default;
};

struct EndingDef {
    std::string text;
    std::string asset;

    bool operator==(const EndingDef&) const = default;
};

/// Rules for the level-2 gate NPC. Lines are spoken verbatim.
struct SecurityGateRules {
    std::vector<std::string> subject_phrases;     // who the visitor must ask for
    std::vector<std::string> credential_items;    // items accepted as identification
    std::vector<std::string> credential_phrases;  // how the player presents them
    std::string deny_line;
    std::string request_id_line;
    std::string allow_line;

    bool operator==(const SecurityGateRules&) const = default;
};

struct ScenarioDefinition {
    int format_version = kScenarioFormatVersion;
    std::string id;
    std::string title;
    std::string opening_narration;
    std::vector<NpcProfile> npcs;
    std::vector<IntentSpec> intents;
    std::vector<ItemDef> items;
    std::vector<std::string> starting_items;
    std::vector<StageDef> stage_graph;
    std::vector<AssessmentRound> assessment_rounds;
    std::optional<EndingDef> bad_ending;
    std::optional<EndingDef> alternate_ending;
    std::vector<std::string> world_scenes;
    SecurityGateRules security_gate;
    std::string final_question;
    std::string fallback_line;
    int turn_limit = 6;
    double confidence_threshold = 0.5;

    const NpcProfile* find_npc(std::string_view id) const;
    const NpcProfile* npc_at_level(int level) const;
    const IntentSpec* find_intent(std::string_view id) const;
    const ItemDef* find_item(std::string_view id) const;
    const StageDef* find_stage(Stage s) const;
    const AssessmentRound* find_round(int round) const;
    /// Intents owned by `npc_id`, in declaration order.
    std::vector<IntentSpec> intents_for(std::string_view npc_id) const;

    bool operator==(const ScenarioDefinition&) const = default;
};

using ScenarioPtr = std::shared_ptr<const ScenarioDefinition>;

struct Diagnostic {
    enum class Severity { Error, Warning };
    Severity severity = Severity::Error;
    std::string location;  // e.g. "intents[truth_kane_death].required_items"
    std::string message;

    bool operator==(const Diagnostic&) const = default;
};

std::string format_diagnostic(const Diagnostic& d);

/// Empty iff every scenario invariant holds.
std::vector<Diagnostic> validate_scenario(const ScenarioDefinition& s);

/// Parses and validates. Throws Error{SchemaError} on malformed input and
/// Error{ValidationError} (naming the first offending id) on invariant violations.
ScenarioDefinition load_scenario(std::istream& source);
ScenarioDefinition load_scenario_file(const std::filesystem::path& path);

/// Structural parse only; no cross-reference validation.
ScenarioDefinition parse_scenario(const nlohmann::json& j);
nlohmann::json to_json(const ScenarioDefinition& s);
nlohmann::json to_json(const GameAction& a);
GameAction action_from_json(const nlohmann::json& j);

} // namespace ecoecho
