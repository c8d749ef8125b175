#include "ecoecho/scenario.hpp"

#include <algorithm>
#include <array>
#include <fstream>
#include <istream>
#include <set>

#include "ecoecho/error.hpp"

namespace ecoecho {

using nlohmann::json;

namespace {

constexpr std::array<std::string_view, 6> kActionNames{
    "advance_stage", "grant_item",           "set_world_degradation",
    "open_vote",     "offer_final_decision", "return_predefined",
};

[[noreturn]] void schema_error(const std::string& path, const std::string& what) {
    fail(ErrorCode::SchemaError, "scenario schema error at " + path + ": " + what);
}

const json& field(const json& j, const char* key, const std::string& path) {
    if (!j.is_object()) schema_error(path, "expected an object");
    auto it = j.find(key);
    if (it == j.end()) schema_error(path, std::string("missing field '") + key + "'");
    return *it;
}

std::string str(const json& j, const char* key, const std::string& path) {
    const json& v = field(j, key, path);
    if (!v.is_string()) schema_error(path + "." + key, "expected a string");
    return v.get<std::string>();
}

std::string opt_str(const json& j, const char* key, const std::string& path) {
    if (!j.contains(key)) return {};
    return str(j, key, path);
}

int integer(const json& j, const char* key, const std::string& path) {
    const json& v = field(j, key, path);
    if (!v.is_number_integer()) schema_error(path + "." + key, "expected an integer");
    return v.get<int>();
}

std::vector<std::string> str_list(const json& j, const char* key, const std::string& path,
                                  bool required = false) {
    if (!j.contains(key)) {
        if (required) schema_error(path, std::string("missing field '") + key + "'");
        return {};
    }
    const json& v = j.at(key);
    if (!v.is_array()) schema_error(path + "." + key, "expected an array of strings");
    std::vector<std::string> out;
    for (const auto& e : v) {
        if (!e.is_string()) schema_error(path + "." + key, "expected an array of strings");
        out.push_back(e.get<std::string>());
    }
    return out;
}

const json& array_field(const json& j, const char* key, const std::string& path) {
    const json& v = field(j, key, path);
    if (!v.is_array()) schema_error(path + "." + key, "expected an array");
    return v;
}

Stage parse_stage(const std::string& name, const std::string& path) {
    auto s = stage_from_string(name);
    if (!s) schema_error(path, "unknown stage '" + name + "'");
    return *s;
}

NpcProfile parse_npc(const json& j, const std::string& path) {
    NpcProfile n;
    n.id = str(j, "id", path);
    n.name = str(j, "name", path);
    n.occupation = opt_str(j, "occupation", path);
    n.backstory = opt_str(j, "backstory", path);
    n.personality_traits = str_list(j, "personality_traits", path);
    n.motivation = opt_str(j, "motivation", path);
    n.objective = opt_str(j, "objective", path);
    n.dialogue_guidelines = str_list(j, "dialogue_guidelines", path);
    n.example_openers = str_list(j, "example_openers", path);
    n.level = integer(j, "level", path);
    n.predefined_responses = str_list(j, "predefined_responses", path);
    n.portrait = opt_str(j, "portrait", path);
    if (j.contains("knowledge_bank")) {
        const json& kb = j.at("knowledge_bank");
        if (!kb.is_array()) schema_error(path + ".knowledge_bank", "expected an array");
        for (const auto& fact : kb) {
            n.knowledge_bank.emplace_back(str(fact, "key", path + ".knowledge_bank"),
                                          str(fact, "value", path + ".knowledge_bank"));
        }
    }
    return n;
}

IntentSpec parse_intent(const json& j, const std::string& path) {
    IntentSpec i;
    i.id = str(j, "id", path);
    i.owning_npc = str(j, "npc", path);
    i.task_label = opt_str(j, "task", path);
    i.description = opt_str(j, "description", path);
    i.keywords = str_list(j, "keywords", path, true);
    i.required_items = str_list(j, "required_items", path);
    i.success_reply = opt_str(j, "success_reply", path);
    for (const auto& e : array_field(j, "effects", path)) i.effects.push_back(action_from_json(e));
    return i;
}

ItemDef parse_item(const json& j, const std::string& path) {
    ItemDef it;
    it.id = str(j, "id", path);
    it.display_name = str(j, "name", path);
    it.grantor_npc = opt_str(j, "grantor", path);
    it.trigger_phrases = str_list(j, "trigger_phrases", path, true);
    it.description = opt_str(j, "description", path);
    return it;
}

EndingDef parse_ending(const json& j, const std::string& path) {
    return {str(j, "text", path), opt_str(j, "asset", path)};
}

json ending_json(const EndingDef& e) { return {{"text", e.text}, {"asset", e.asset}}; }

} // namespace

std::string_view to_string(GameAction::Kind k) noexcept { return kActionNames[static_cast<int>(k)]; }

json to_json(const GameAction& a) {
    json j{{"kind", to_string(a.kind)}};
    switch (a.kind) {
    case GameAction::Kind::GrantItem: j["item"] = a.item; break;
    case GameAction::Kind::SetWorldDegradation: j["level"] = a.value; break;
    case GameAction::Kind::OpenVote: j["round"] = a.value; break;
    case GameAction::Kind::ReturnPredefined: j["index"] = a.value; break;
    default: break;
    }
    return j;
}

GameAction action_from_json(const json& j) {
    const std::string path = "effects";
    const std::string kind = str(j, "kind", path);
    for (std::size_t i = 0; i < kActionNames.size(); ++i) {
        if (kActionNames[i] != kind) continue;
        GameAction a;
        a.kind = static_cast<GameAction::Kind>(i);
        switch (a.kind) {
        case GameAction::Kind::GrantItem: a.item = str(j, "item", path); break;
        case GameAction::Kind::SetWorldDegradation: a.value = integer(j, "level", path); break;
        case GameAction::Kind::OpenVote: a.value = integer(j, "round", path); break;
        case GameAction::Kind::ReturnPredefined: a.value = integer(j, "index", path); break;
        default: break;
        }
        return a;
    }
    schema_error(path, "unknown action kind '" + kind + "'");
}

ScenarioDefinition parse_scenario(const json& j) {
    if (!j.is_object()) schema_error("$", "expected an object at top level");
    ScenarioDefinition s;
    s.format_version = integer(j, "format_version", "$");
    s.id = str(j, "id", "$");
    s.title = opt_str(j, "title", "$");
    s.opening_narration = opt_str(j, "opening_narration", "$");
    s.final_question = opt_str(j, "final_question", "$");
    s.fallback_line = opt_str(j, "fallback_line", "$");
    if (j.contains("turn_limit")) s.turn_limit = integer(j, "turn_limit", "$");
    if (j.contains("confidence_threshold")) {
        const json& v = j.at("confidence_threshold");
        if (!v.is_number()) schema_error("$.confidence_threshold", "expected a number");
        s.confidence_threshold = v.get<double>();
    }

    const json& npcs = array_field(j, "npcs", "$");
    for (std::size_t i = 0; i < npcs.size(); ++i)
        s.npcs.push_back(parse_npc(npcs[i], "npcs[" + std::to_string(i) + "]"));

    const json& intents = array_field(j, "intents", "$");
    for (std::size_t i = 0; i < intents.size(); ++i)
        s.intents.push_back(parse_intent(intents[i], "intents[" + std::to_string(i) + "]"));

    const json& items = array_field(j, "items", "$");
    for (std::size_t i = 0; i < items.size(); ++i)
        s.items.push_back(parse_item(items[i], "items[" + std::to_string(i) + "]"));

    s.starting_items = str_list(j, "starting_items", "$");

    const json& stages = array_field(j, "stages", "$");
    for (std::size_t i = 0; i < stages.size(); ++i) {
        const std::string path = "stages[" + std::to_string(i) + "]";
        StageDef d;
        d.stage = parse_stage(str(stages[i], "stage", path), path);
        const std::string guard = str(stages[i], "guard", path);
        auto g = guard_from_string(guard);
        if (!g) schema_error(path, "unknown guard '" + guard + "'");
        d.guard = *g;
        d.npc = opt_str(stages[i], "npc", path);
        d.narration = opt_str(stages[i], "narration", path);
        s.stage_graph.push_back(std::move(d));
    }

    const json& rounds = array_field(j, "assessment_rounds", "$");
    for (std::size_t i = 0; i < rounds.size(); ++i) {
        const std::string path = "assessment_rounds[" + std::to_string(i) + "]";
        AssessmentRound r;
        r.round = integer(rounds[i], "round", path);
        r.prompt = str(rounds[i], "prompt", path);
        r.after_stage = parse_stage(str(rounds[i], "after_stage", path), path);
        s.assessment_rounds.push_back(std::move(r));
    }

    const json& endings = field(j, "endings", "$");
    if (!endings.is_object()) schema_error("$.endings", "expected an object");
    if (endings.contains("bad")) s.bad_ending = parse_ending(endings.at("bad"), "endings.bad");
    if (endings.contains("alternate"))
        s.alternate_ending = parse_ending(endings.at("alternate"), "endings.alternate");

    s.world_scenes = str_list(j, "world_scenes", "$", true);

    if (j.contains("security_gate")) {
        const json& g = j.at("security_gate");
        const std::string path = "security_gate";
        s.security_gate.subject_phrases = str_list(g, "subject_phrases", path);
        s.security_gate.credential_items = str_list(g, "credential_items", path);
        s.security_gate.credential_phrases = str_list(g, "credential_phrases", path);
        s.security_gate.deny_line = opt_str(g, "deny_line", path);
        s.security_gate.request_id_line = opt_str(g, "request_id_line", path);
        s.security_gate.allow_line = opt_str(g, "allow_line", path);
    }
    return s;
}

json to_json(const ScenarioDefinition& s) {
    json j;
    j["format_version"] = s.format_version;
    j["id"] = s.id;
    j["title"] = s.title;
    j["opening_narration"] = s.opening_narration;
    j["final_question"] = s.final_question;
    j["fallback_line"] = s.fallback_line;
    j["turn_limit"] = s.turn_limit;
    j["confidence_threshold"] = s.confidence_threshold;

    j["npcs"] = json::array();
    for (const auto& n : s.npcs) {
        json kb = json::array();
        for (const auto& [k, v] : n.knowledge_bank) kb.push_back({{"key", k}, {"value", v}});
        j["npcs"].push_back({{"id", n.id},
                             {"name", n.name},
                             {"occupation", n.occupation},
                             {"backstory", n.backstory},
                             {"personality_traits", n.personality_traits},
                             {"motivation", n.motivation},
                             {"objective", n.objective},
                             {"dialogue_guidelines", n.dialogue_guidelines},
                             {"example_openers", n.example_openers},
                             {"level", n.level},
                             {"predefined_responses", n.predefined_responses},
                             {"knowledge_bank", kb},
                             {"portrait", n.portrait}});
    }

    j["intents"] = json::array();
    for (const auto& i : s.intents) {
        json effects = json::array();
        for (const auto& a : i.effects) effects.push_back(to_json(a));
        j["intents"].push_back({{"id", i.id},
                                {"npc", i.owning_npc},
                                {"task", i.task_label},
                                {"description", i.description},
                                {"keywords", i.keywords},
                                {"required_items", i.required_items},
                                {"effects", effects},
                                {"success_reply", i.success_reply}});
    }

    j["items"] = json::array();
    for (const auto& it : s.items) {
        j["items"].push_back({{"id", it.id},
                              {"name", it.display_name},
                              {"grantor", it.grantor_npc},
                              {"trigger_phrases", it.trigger_phrases},
                              {"description", it.description}});
    }
    j["starting_items"] = s.starting_items;

    j["stages"] = json::array();
    for (const auto& d : s.stage_graph) {
        j["stages"].push_back({{"stage", to_string(d.stage)},
                               {"guard", to_string(d.guard)},
                               {"npc", d.npc},
                               {"narration", d.narration}});
    }

    j["assessment_rounds"] = json::array();
    for (const auto& r : s.assessment_rounds) {
        j["assessment_rounds"].push_back(
            {{"round", r.round}, {"prompt", r.prompt}, {"after_stage", to_string(r.after_stage)}});
    }

    j["endings"] = json::object();
    if (s.bad_ending) j["endings"]["bad"] = ending_json(*s.bad_ending);
    if (s.alternate_ending) j["endings"]["alternate"] = ending_json(*s.alternate_ending);
    j["world_scenes"] = s.world_scenes;

    const auto& g = s.security_gate;
    j["security_gate"] = {{"subject_phrases", g.subject_phrases},
                          {"credential_items", g.credential_items},
                          {"credential_phrases", g.credential_phrases},
                          {"deny_line", g.deny_line},
                          {"request_id_line", g.request_id_line},
                          {"allow_line", g.allow_line}};
    return j;
}

// --- lookups ---------------------------------------------------------------

const NpcProfile* ScenarioDefinition::find_npc(std::string_view npc_id) const {
    for (const auto& n : npcs)
        if (n.id == npc_id) return &n;
    return nullptr;
}

const NpcProfile* ScenarioDefinition::npc_at_level(int level) const {
    for (const auto& n : npcs)
        if (n.level == level) return &n;
    return nullptr;
}

const IntentSpec* ScenarioDefinition::find_intent(std::string_view intent_id) const {
    for (const auto& i : intents)
        if (i.id == intent_id) return &i;
    return nullptr;
}

const ItemDef* ScenarioDefinition::find_item(std::string_view item_id) const {
    for (const auto& i : items)
        if (i.id == item_id) return &i;
    return nullptr;
}

const StageDef* ScenarioDefinition::find_stage(Stage st) const {
    for (const auto& d : stage_graph)
        if (d.stage == st) return &d;
    return nullptr;
}

const AssessmentRound* ScenarioDefinition::find_round(int round) const {
    for (const auto& r : assessment_rounds)
        if (r.round == round) return &r;
    return nullptr;
}

std::vector<IntentSpec> ScenarioDefinition::intents_for(std::string_view npc_id) const {
    std::vector<IntentSpec> out;
    for (const auto& i : intents)
        if (i.owning_npc == npc_id) out.push_back(i);
    return out;
}

// --- validation ------------------------------------------------------------

std::string format_diagnostic(const Diagnostic& d) {
    return std::string(d.severity == Diagnostic::Severity::Error ? "error" : "warning") + ": " +
           d.location + ": " + d.message;
}

std::vector<Diagnostic> validate_scenario(const ScenarioDefinition& s) {
    std::vector<Diagnostic> out;
    auto error = [&](std::string location, std::string message) {
        out.push_back({Diagnostic::Severity::Error, std::move(location), std::move(message)});
    };

    if (s.format_version != kScenarioFormatVersion)
        error("format_version", "unsupported format_version " + std::to_string(s.format_version));
    if (s.id.empty()) error("id", "scenario id is empty");
    if (s.turn_limit <= 0) error("turn_limit", "turn_limit must be positive");
    if (!(s.confidence_threshold > 0.0 && s.confidence_threshold <= 1.0))
        error("confidence_threshold", "confidence_threshold must lie in (0, 1]");

    // NPC roster
    std::set<std::string> npc_ids;
    std::array<std::vector<std::string>, 5> by_level;
    for (const auto& n : s.npcs) {
        const std::string loc = "npcs[" + n.id + "]";
        if (n.id.empty()) error("npcs", "NPC with empty id");
        if (!npc_ids.insert(n.id).second) error(loc, "duplicate NPC id '" + n.id + "'");
        if (n.level < 0 || n.level > 4) {
            error(loc + ".level", "level " + std::to_string(n.level) + " outside 0-4");
            continue;
        }
        by_level[n.level].push_back(n.id);
        if (n.level >= 1 && n.predefined_responses.empty())
            error(loc + ".predefined_responses", "level " + std::to_string(n.level) + " NPC '" +
                                                     n.id + "' has no predefined responses");
    }
    for (int level = 0; level <= 4; ++level) {
        const auto& ids = by_level[level];
        if (ids.empty()) {
            error("npcs", "no NPC assigned to level " + std::to_string(level));
        } else if (ids.size() > 1) {
            std::string names;
            for (const auto& id : ids) names += (names.empty() ? "" : ", ") + id;
            error("npcs[" + ids[1] + "].level",
                  "level " + std::to_string(level) + " assigned to more than one NPC: " + names);
        }
    }

    // Items
    std::set<std::string> item_ids;
    for (const auto& it : s.items) {
        const std::string loc = "items[" + it.id + "]";
        if (it.id.empty()) error("items", "item with empty id");
        if (!item_ids.insert(it.id).second) error(loc, "duplicate item id '" + it.id + "'");
        if (it.trigger_phrases.empty())
            error(loc + ".trigger_phrases", "item '" + it.id + "' has no trigger phrases");
        if (!it.grantor_npc.empty() && !npc_ids.count(it.grantor_npc))
            error(loc + ".grantor", "undeclared NPC '" + it.grantor_npc + "'");
    }
    for (const auto& id : s.starting_items)
        if (!item_ids.count(id)) error("starting_items", "undeclared item '" + id + "'");

    // Intents
    std::set<std::string> intent_ids;
    for (const auto& in : s.intents) {
        const std::string loc = "intents[" + in.id + "]";
        if (!intent_ids.insert(in.id).second) error(loc, "duplicate intent id '" + in.id + "'");
        const NpcProfile* owner = s.find_npc(in.owning_npc);
        if (!owner) error(loc + ".npc", "undeclared NPC '" + in.owning_npc + "'");
        if (in.keywords.empty()) error(loc + ".keywords", "intent '" + in.id + "' has no keywords");
        for (const auto& item : in.required_items)
            if (!item_ids.count(item))
                error(loc + ".required_items", "intent '" + in.id + "' requires undeclared item '" +
                                                   item + "'");
        for (const auto& a : in.effects) {
            const std::string aloc = loc + ".effects";
            switch (a.kind) {
            case GameAction::Kind::AdvanceStage:
                if (owner && owner->level != 1 && owner->level != 3 && owner->level != 4)
                    error(aloc, "advance_stage not permitted for level " +
                                    std::to_string(owner->level) + " NPC '" + owner->id + "'");
                break;
            case GameAction::Kind::GrantItem:
                if (!item_ids.count(a.item)) error(aloc, "grant of undeclared item '" + a.item + "'");
                break;
            case GameAction::Kind::SetWorldDegradation:
                if (a.value < 0 || a.value > 2)
                    error(aloc, "world degradation " + std::to_string(a.value) + " outside 0-2");
                break;
            case GameAction::Kind::OpenVote:
                if (a.value < 1 || a.value > 4)
                    error(aloc, "vote round " + std::to_string(a.value) + " outside 1-4");
                break;
            case GameAction::Kind::OfferFinalDecision:
                if (owner && owner->level != 4)
                    error(aloc, "offer_final_decision only permitted for the level 4 NPC");
                break;
            case GameAction::Kind::ReturnPredefined:
                if (owner && (a.value < 0 ||
                              a.value >= static_cast<int>(owner->predefined_responses.size())))
                    error(aloc, "predefined index " + std::to_string(a.value) + " out of range for '" +
                                    owner->id + "'");
                break;
            }
        }
    }

    // Stage graph
    if (s.stage_graph.size() != kStageOrder.size()) {
        error("stages", "expected " + std::to_string(kStageOrder.size()) + " stages, found " +
                            std::to_string(s.stage_graph.size()));
    } else {
        for (std::size_t i = 0; i < kStageOrder.size(); ++i) {
            const StageDef& d = s.stage_graph[i];
            const std::string loc = "stages[" + std::to_string(i) + "]";
            if (d.stage != kStageOrder[i]) {
                error(loc, "expected stage '" + std::string(to_string(kStageOrder[i])) + "', found '" +
                               std::string(to_string(d.stage)) + "'");
                continue;
            }
            if (d.guard != canonical_guard(d.stage))
                error(loc + ".guard", "stage '" + std::string(to_string(d.stage)) + "' requires guard '" +
                                          std::string(to_string(canonical_guard(d.stage))) + "'");
            if (!d.npc.empty() && !npc_ids.count(d.npc))
                error(loc + ".npc", "undeclared NPC '" + d.npc + "'");
            if (auto level = npc_level_at(d.stage)) {
                const NpcProfile* expected = s.npc_at_level(*level);
                if (expected && d.npc != expected->id)
                    error(loc + ".npc", "stage '" + std::string(to_string(d.stage)) +
                                            "' must be bound to level " + std::to_string(*level) +
                                            " NPC '" + expected->id + "'");
            }
        }
    }

    // Assessment rounds
    if (s.assessment_rounds.size() != 4) {
        error("assessment_rounds",
              "expected 4 assessment rounds, found " + std::to_string(s.assessment_rounds.size()));
    }
    std::set<int> seen_rounds;
    for (const auto& r : s.assessment_rounds) {
        const std::string loc = "assessment_rounds[" + std::to_string(r.round) + "]";
        if (r.round < 1 || r.round > 4) {
            error(loc, "round outside 1-4");
            continue;
        }
        if (!seen_rounds.insert(r.round).second) error(loc, "duplicate round");
        if (r.after_stage != stage_for_round(r.round))
            error(loc + ".after_stage", "round " + std::to_string(r.round) + " must follow stage '" +
                                            std::string(to_string(stage_for_round(r.round))) + "'");
        if (r.prompt.empty()) error(loc + ".prompt", "empty prompt");
    }

    if (!s.bad_ending) error("endings.bad", "missing bad ending");
    if (!s.alternate_ending) error("endings.alternate", "missing alternate ending");
    if (s.world_scenes.size() != 3)
        error("world_scenes", "expected 3 world scenes, found " + std::to_string(s.world_scenes.size()));

    if (!by_level[2].empty()) {
        const auto& g = s.security_gate;
        if (g.subject_phrases.empty()) error("security_gate.subject_phrases", "empty");
        if (g.credential_phrases.empty()) error("security_gate.credential_phrases", "empty");
        if (g.credential_items.empty()) error("security_gate.credential_items", "empty");
        for (const auto& item : g.credential_items)
            if (!item_ids.count(item))
                error("security_gate.credential_items", "undeclared item '" + item + "'");
        if (g.deny_line.empty() || g.request_id_line.empty())
            error("security_gate", "deny_line and request_id_line are required");
    }
    return out;
}

ScenarioDefinition load_scenario(std::istream& source) {
    json j;
    try {
        j = json::parse(source);
    } catch (const json::parse_error& e) {
        fail(ErrorCode::SchemaError, std::string("scenario is not well-formed: ") + e.what());
    }
    ScenarioDefinition s = parse_scenario(j);
    for (const auto& d : validate_scenario(s)) {
        if (d.severity == Diagnostic::Severity::Error)
            fail(ErrorCode::ValidationError, format_diagnostic(d));
    }
    return s;
}

ScenarioDefinition load_scenario_file(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) fail(ErrorCode::IoError, "cannot open scenario file " + path.string());
    return load_scenario(in);
}

} // namespace ecoecho
