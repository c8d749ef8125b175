#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <functional>
#include <set>
#include <sstream>

#include "ecoecho/error.hpp"
#include "ecoecho/scenario.hpp"
#include "support.hpp"

using namespace ecoecho;
using nlohmann::json;

namespace {

Error load_error(const json& j) {
    std::istringstream in(j.dump());
    try {
        load_scenario(in);
    } catch (const Error& e) {
        return e;
    }
    FAIL("scenario loaded without error");
    return Error(ErrorCode::BadInput, "");
}

std::vector<Diagnostic> errors_of(const json& j) {
    std::vector<Diagnostic> out;
    for (const auto& d : validate_scenario(parse_scenario(j)))
        if (d.severity == Diagnostic::Severity::Error) out.push_back(d);
    return out;
}

} // namespace

TEST_CASE("bundled scenario shape") {
    const auto& s = *testing::ecoecho_scenario();
    CHECK(s.id == "ecoecho");
    CHECK(s.npcs.size() == 5);
    std::set<std::string> ids;
    for (const auto& n : s.npcs) ids.insert(n.id);
    CHECK(ids == std::set<std::string>{"emilia", "lisa", "security", "bob", "jonathan"});
    for (int level = 1; level <= 4; ++level) CHECK(s.npc_at_level(level) != nullptr);
    CHECK(s.npc_at_level(0)->id == "emilia");
    CHECK(s.assessment_rounds.size() == 4);
    CHECK(s.bad_ending);
    CHECK(s.alternate_ending);
    CHECK(s.world_scenes.size() == 3);
    CHECK(s.turn_limit == 6);
    CHECK(s.confidence_threshold == 0.5);
    CHECK(s.starting_items == std::vector<std::string>{"gasoline_quest_key"});
    CHECK(s.find_round(1)->prompt.find("(0-5)") != std::string::npos);
}

TEST_CASE("bundled scenario validates cleanly") {
    CHECK(validate_scenario(*testing::ecoecho_scenario()).empty());
}

TEST_CASE("serialize then parse round-trips") {
    const auto& s = *testing::ecoecho_scenario();
    const json j = to_json(s);
    const auto again = parse_scenario(json::parse(j.dump()));
    CHECK(again == s);
    CHECK(to_json(again) == j);
}

TEST_CASE("two level-1 NPCs") {
    auto j = testing::ecoecho_scenario_json();
    for (auto& n : j["npcs"])
        if (n["id"] == "bob") n["level"] = 1;
    const auto e = load_error(j);
    CHECK(e.code() == ErrorCode::ValidationError);
    bool named = false;
    for (const auto& d : errors_of(j))
        if (d.message.find("level 1 assigned to more than one NPC") != std::string::npos) named = true;
    CHECK(named);
}

TEST_CASE("intent requiring an undeclared item names the item") {
    auto j = testing::ecoecho_scenario_json();
    j["intents"][1]["required_items"] = {"secret_dossier"};
    const auto e = load_error(j);
    CHECK(e.code() == ErrorCode::ValidationError);
    CHECK(std::string(e.what()).find("secret_dossier") != std::string::npos);
}

TEST_CASE("missing alternate ending gives one diagnostic") {
    auto j = testing::ecoecho_scenario_json();
    j["endings"].erase("alternate");
    const auto errs = errors_of(j);
    REQUIRE(errs.size() == 1);
    CHECK(errs[0].location == "endings.alternate");
}

TEST_CASE("empty keyword set gives one diagnostic") {
    auto j = testing::ecoecho_scenario_json();
    j["intents"][0]["keywords"] = json::array();
    const auto errs = errors_of(j);
    REQUIRE(errs.size() == 1);
    CHECK(errs[0].location == "intents[share_scoop].keywords");
    CHECK(format_diagnostic(errs[0]).rfind("error: intents[share_scoop].keywords: ", 0) == 0);
}

TEST_CASE("effects reference only declared targets") {
    auto j = testing::ecoecho_scenario_json();
    j["intents"][0]["effects"] = {{{"kind", "grant_item"}, {"item", "ghost"}}};
    CHECK(errors_of(j).size() == 1);

    j = testing::ecoecho_scenario_json();
    j["intents"][0]["effects"] = {{{"kind", "open_vote"}, {"round", 5}}};
    CHECK(errors_of(j).size() == 1);

    j = testing::ecoecho_scenario_json();
    j["intents"][0]["effects"] = {{{"kind", "set_world_degradation"}, {"level", 3}}};
    CHECK(errors_of(j).size() == 1);
}

TEST_CASE("stage graph must follow the canonical order and guards") {
    auto j = testing::ecoecho_scenario_json();
    std::swap(j["stages"][1], j["stages"][2]);
    CHECK_FALSE(errors_of(j).empty());

    j = testing::ecoecho_scenario_json();
    j["stages"][0]["guard"] = "none";
    const auto errs = errors_of(j);
    REQUIRE(errs.size() == 1);
    CHECK(errs[0].location == "stages[0].guard");
}

TEST_CASE("malformed input is a schema error") {
    std::istringstream bad("{ not json");
    try {
        load_scenario(bad);
        FAIL("expected SchemaError");
    } catch (const Error& e) {
        CHECK(e.code() == ErrorCode::SchemaError);
    }

    auto j = testing::ecoecho_scenario_json();
    j["npcs"][0]["level"] = "one";
    CHECK(load_error(j).code() == ErrorCode::SchemaError);

    j = testing::ecoecho_scenario_json();
    j["stages"][0]["stage"] = "prologue";
    CHECK(load_error(j).code() == ErrorCode::SchemaError);
}

TEST_CASE("missing file is an io error") {
    try {
        load_scenario_file("/nonexistent/scenario.json");
        FAIL("expected IoError");
    } catch (const Error& e) {
        CHECK(e.code() == ErrorCode::IoError);
    }
}

TEST_CASE("lookups") {
    const auto& s = *testing::ecoecho_scenario();
    CHECK(s.find_intent("truth_kane_death")->owning_npc == "lisa");
    CHECK(s.find_item("press_card")->grantor_npc == "lisa");
    CHECK(s.find_stage(Stage::Level2_SecurityGate)->npc == "security");
    CHECK(s.find_npc("nobody") == nullptr);
    const auto lisa = s.intents_for("lisa");
    REQUIRE(lisa.size() == 2);
    CHECK(lisa[0].id == "share_scoop");
    CHECK(lisa[1].id == "truth_kane_death");
}

TEST_CASE("game action JSON round-trip") {
    for (const auto& a : {GameAction::advance(), GameAction::grant("press_card"), GameAction::degrade(2),
                          GameAction::open_vote(3), GameAction::offer_final_decision(), GameAction::predefined(1)})
        CHECK(action_from_json(to_json(a)) == a);
}

TEST_CASE("every asset the bundled scenario names exists") {
    std::vector<std::string> paths;
    const std::function<void(const json&)> walk = [&](const json& j) {
        if (j.is_string() && j.get<std::string>().rfind("assets/", 0) == 0) paths.push_back(j);
        if (j.is_structured())
            for (const auto& v : j) walk(v);
    };
    walk(testing::ecoecho_scenario_json());
    CHECK(paths.size() >= 10);
    for (const auto& p : paths) {
        CAPTURE(p);
        CHECK(std::filesystem::exists(testing::source_dir() / p));
    }
}
