#include "ecoecho/playthrough.hpp"

#include <fstream>

namespace ecoecho {

using nlohmann::json;

namespace {

[[noreturn]] void script_error(std::size_t i, const std::string& what) {
    fail(ErrorCode::BadInput, "player script step " + std::to_string(i) + ": " + what);
}

} // namespace

PlayerScript parse_player_script(const json& j) {
    if (!j.is_object() || !j.contains("steps") || !j.at("steps").is_array())
        fail(ErrorCode::BadInput, "player script must be an object with a 'steps' array");
    PlayerScript script;
    script.name = j.value("name", std::string{});
    const json& steps = j.at("steps");
    for (std::size_t i = 0; i < steps.size(); ++i) {
        const json& s = steps[i];
        if (!s.is_object() || !s.contains("op") || !s.at("op").is_string()) script_error(i, "missing 'op'");
        PlayerStep step;
        const std::string op = s.at("op").get<std::string>();
        try {
            if (op == "say") {
                step.op = PlayerStep::Op::Say;
                step.npc = s.at("npc").get<std::string>();
                step.text = s.at("text").get<std::string>();
            } else if (op == "vote") {
                step.op = PlayerStep::Op::Vote;
                step.round = s.at("round").get<int>();
                step.votes = s.at("votes").get<int>();
            } else if (op == "decide") {
                step.op = PlayerStep::Op::Decide;
                step.support_repeal = s.at("support_repeal").get<bool>();
            } else {
                script_error(i, "unknown op '" + op + "'");
            }
        } catch (const json::exception& e) {
            script_error(i, e.what());
        }
        script.steps.push_back(std::move(step));
    }
    return script;
}

PlayerScript load_player_script_file(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) fail(ErrorCode::IoError, "cannot open player script " + path.string());
    const json j = json::parse(in, nullptr, false);
    if (j.is_discarded()) fail(ErrorCode::BadInput, "player script " + path.string() + " is not valid JSON");
    PlayerScript s = parse_player_script(j);
    if (s.name.empty()) s.name = path.stem().string();
    return s;
}

StepError::StepError(std::size_t step, const Error& cause)
    : Error(cause.code(), "step " + std::to_string(step) + ": " + std::string(to_string(cause.code())) + ": " +
                              cause.what()),
      step_(step) {}

json PlaythroughSummary::to_json() const {
    json votes_j = json::array();
    for (const auto& v : votes) votes_j.push_back(v ? json(*v) : json(nullptr));
    json stages = json::array();
    for (Stage s : stages_visited) stages.push_back(to_string(s));
    return {{"session_id", session_id},
            {"script", script},
            {"final_stage", to_string(final_stage)},
            {"ending", ending ? json(to_string(*ending)) : json(nullptr)},
            {"world_scene", world_scene},
            {"votes", votes_j},
            {"inventory", inventory},
            {"stages_visited", stages},
            {"events", events}};
}

PlaythroughSummary summarize(const SessionState& state, std::vector<Stage> stages_visited) {
    PlaythroughSummary s;
    s.session_id = state.session_id;
    s.final_stage = state.stage;
    s.ending = state.ending;
    s.world_scene = world_scene_index(state);
    for (const auto& v : state.votes)
        if (v.round >= 1 && v.round <= 4) s.votes[static_cast<std::size_t>(v.round - 1)] = v.votes;
    s.inventory = state.inventory;
    s.stages_visited = std::move(stages_visited);
    return s;
}

PlaythroughSummary run_playthrough(ScenarioPtr scenario, const PlayerScript& script, llm::TextProvider& provider,
                                   store::EventSink& sink, Clock clock, const std::string& session_id,
                                   llm::RetryPolicy retry) {
    auto rt = SessionRuntime::create(std::move(scenario), provider, sink, std::move(clock), session_id, retry);
    std::vector<Stage> visited{rt.state().stage};
    auto track = [&](const std::vector<StageChange>& changes) {
        for (const auto& c : changes) visited.push_back(c.to);
    };
    for (std::size_t i = 0; i < script.steps.size(); ++i) {
        const PlayerStep& step = script.steps[i];
        try {
            switch (step.op) {
            case PlayerStep::Op::Say: track(rt.say(step.npc, step.text).stage_changes); break;
            case PlayerStep::Op::Vote: track(rt.vote(step.round, step.votes).stage_changes); break;
            case PlayerStep::Op::Decide: track(rt.decide(step.support_repeal).stage_changes); break;
            }
        } catch (const StepError&) {
            throw;
        } catch (const Error& e) {
            throw StepError(i, e);
        }
    }
    PlaythroughSummary out = summarize(rt.state(), std::move(visited));
    out.script = script.name;
    out.events = rt.next_sequence();
    return out;
}

} // namespace ecoecho
