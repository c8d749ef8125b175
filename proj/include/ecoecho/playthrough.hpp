#pragma once

#include <array>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "ecoecho/error.hpp"
#include "ecoecho/session_runtime.hpp"

namespace ecoecho {

/// One step of a scripted player: say something, vote, or decide.
struct PlayerStep {
    enum class Op { Say, Vote, Decide };
    Op op = Op::Say;
    std::string npc;
    std::string text;
    int round = 0;
    int votes = 0;
    bool support_repeal = false;
};

struct PlayerScript {
    std::string name;
    std::vector<PlayerStep> steps;
};

/// `{"name": ..., "steps": [{"op": "say", "npc", "text"} | {"op": "vote", "round",
/// "votes"} | {"op": "decide", "support_repeal"}]}`. Throws BadInput.
PlayerScript parse_player_script(const nlohmann::json& j);
PlayerScript load_player_script_file(const std::filesystem::path& path);

struct PlaythroughSummary {
    std::string session_id;
    std::string script;
    Stage final_stage = Stage::Opening;
    std::optional<Ending> ending;
    int world_scene = 0;
    std::array<std::optional<int>, 4> votes{};
    std::vector<std::string> inventory;
    std::vector<Stage> stages_visited;
    std::size_t events = 0;

    nlohmann::json to_json() const;
};

/// Raised when a script step fails; carries the step index and the engine error.
class StepError : public Error {
public:
    StepError(std::size_t step, const Error& cause);
    std::size_t step() const noexcept { return step_; }

private:
    std::size_t step_;
};

/// Runs every step through a fresh session. Stops at the first failing step
/// with StepError; events written so far stay in the sink.
PlaythroughSummary run_playthrough(ScenarioPtr scenario, const PlayerScript& script,
                                   llm::TextProvider& provider, store::EventSink& sink, Clock clock,
                                   const std::string& session_id, llm::RetryPolicy retry = {});

/// Summary of any (possibly unfinished) session state.
PlaythroughSummary summarize(const SessionState& state, std::vector<Stage> stages_visited = {});

} // namespace ecoecho
