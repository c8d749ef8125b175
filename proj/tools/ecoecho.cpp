// ecoecho: headless driver for scenarios, scripted playthroughs, analysis and the HTTP server.

#include <algorithm>
#include <cctype>
#include <csignal>
#include <cstdlib>
#include <fstream>
#include <iostream>
#include <sstream>

#include <CLI11.hpp>

#include "ecoecho/analysis.hpp"
#include "ecoecho/error.hpp"
#include "ecoecho/playthrough.hpp"
#include "ecoecho/server.hpp"
#include "ecoecho/stub_provider.hpp"

namespace fs = std::filesystem;
using namespace ecoecho;

namespace {

fs::path data_dir_default() {
    if (const char* d = std::getenv("ECOECHO_DATA_DIR")) return d;
    return "runtime";
}

std::string session_id_for(const std::string& script_name) {
    std::string id = "playthrough-";
    for (char c : script_name) id += (std::isalnum(static_cast<unsigned char>(c)) || c == '-' || c == '_') ? c : '_';
    return id;
}

std::vector<bool> parse_mask(const std::string& spec, int items) {
    std::vector<bool> mask(static_cast<std::size_t>(items), false);
    if (spec.empty() || spec == "none") return mask;
    std::stringstream ss(spec);
    std::string part;
    while (std::getline(ss, part, ',')) {
        const int i = std::stoi(part);
        if (i < 1 || i > items) fail(ErrorCode::BadInput, "reverse item " + part + " is out of range");
        mask[static_cast<std::size_t>(i - 1)] = true;
    }
    return mask;
}

int cmd_validate(const fs::path& scenario_path) {
    std::ifstream in(scenario_path);
    if (!in) {
        std::cerr << "error: cannot open " << scenario_path << "\n";
        return 2;
    }
    const auto j = nlohmann::json::parse(in, nullptr, false);
    if (j.is_discarded()) {
        std::cerr << "error: " << scenario_path.string() << " is not valid JSON\n";
        return 2;
    }
    ScenarioDefinition s;
    try {
        s = parse_scenario(j);
    } catch (const Error& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 2;
    }
    const auto diags = validate_scenario(s);
    for (const auto& d : diags) std::cout << format_diagnostic(d) << "\n";
    const bool clean = std::none_of(diags.begin(), diags.end(),
                                    [](const Diagnostic& d) { return d.severity == Diagnostic::Severity::Error; });
    if (clean) std::cout << s.id << ": ok (" << s.npcs.size() << " NPCs, " << s.intents.size() << " intents, "
                         << s.items.size() << " items)\n";
    return clean ? 0 : 1;
}

int cmd_playthrough(const fs::path& scenario_path, const fs::path& script_path, const fs::path& stub_path,
                    const fs::path& out_dir, std::optional<std::uint64_t> seed, std::string session_id) {
    auto scenario = std::make_shared<const ScenarioDefinition>(load_scenario_file(scenario_path));
    const PlayerScript script = load_player_script_file(script_path);
    llm::StubScript stub = llm::load_stub_script_file(stub_path);
    if (seed) stub.seed = *seed;
    llm::StubProvider provider(std::move(stub));

    store::SessionStore store(out_dir);
    if (session_id.empty()) session_id = session_id_for(script.name);
    // Each run rewrites its own log so repeated runs stay comparable.
    fs::remove(store.log_path(session_id));

    const llm::RetryPolicy retry{1, std::chrono::milliseconds(0)};
    try {
        const auto summary = run_playthrough(scenario, script, provider, store, system_clock(), session_id, retry);
        const auto j = summary.to_json();
        std::ofstream(out_dir / (session_id + ".summary.json")) << j.dump(2) << "\n";
        std::cout << j.dump(2) << "\n";
        return 0;
    } catch (const StepError& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    }
}

int cmd_analyze(const fs::path& sessions_dir, const fs::path& surveys, const fs::path& out_dir,
                const std::string& nep_reverse) {
    std::ifstream in(surveys);
    if (!in) fail(ErrorCode::IoError, "cannot open " + surveys.string());
    const auto nep = nep_reverse.empty() ? assessment::default_reverse_mask(assessment::Scale::NEP)
                                         : parse_mask(nep_reverse, assessment::item_count(assessment::Scale::NEP));
    const auto geb = assessment::default_reverse_mask(assessment::Scale::GEB);
    const auto table = assessment::parse_survey_csv(in, nep, geb);
    for (const auto& e : table.errors) std::cerr << surveys.string() << ":" << e.line << ": " << e.message << "\n";

    std::vector<std::vector<store::SessionEvent>> logs;
    if (fs::exists(sessions_dir)) logs = store::read_session_logs(sessions_dir);
    const auto report = analysis::analyze(logs, table);
    analysis::write_report(report, out_dir);
    std::cout << report.to_text();
    return 0;
}

server::GameServer* g_server = nullptr;

int cmd_serve(const std::optional<fs::path>& config, std::optional<int> port) {
    auto cfg = server::load_config(config);
    if (port) cfg.port = *port;
    server::GameServer srv(cfg);
    const int bound = srv.bind();
    std::cerr << "ecoecho listening on " << cfg.host << ":" << bound << " (data dir " << cfg.data_dir.string()
              << (cfg.use_stub ? ", stub provider" : ", HTTP provider") << ")\n";
    g_server = &srv;
    std::signal(SIGINT, [](int) {
        if (g_server) g_server->stop();
    });
    std::signal(SIGTERM, [](int) {
        if (g_server) g_server->stop();
    });
    srv.listen();
    g_server = nullptr;
    return 0;
}

} // namespace

int main(int argc, char** argv) {
    CLI::App app{"EcoEcho engine: scenario validation, scripted playthroughs, analysis, HTTP server"};
    app.require_subcommand(1);

    fs::path scenario = "data/scenarios/ecoecho.json";
    fs::path script;
    fs::path stub = "data/stubs/ecoecho_stub.json";
    fs::path out;
    std::optional<std::uint64_t> seed;
    std::string session_id;
    fs::path surveys;
    fs::path sessions;
    std::string nep_reverse;
    std::optional<fs::path> config;
    std::optional<int> port;

    auto* validate = app.add_subcommand("validate", "Check a scenario file; exit 0 iff it has no errors");
    validate->add_option("--scenario", scenario, "Scenario file")->capture_default_str();

    auto* play = app.add_subcommand("run-playthrough", "Run a scripted player through the engine with the stub provider");
    play->add_option("--scenario", scenario, "Scenario file")->capture_default_str();
    play->add_option("--script", script, "Player script (JSON steps)")->required();
    play->add_option("--stub", stub, "Stub provider script")->capture_default_str();
    play->add_option("--out", out, "Output data dir (default $ECOECHO_DATA_DIR or ./runtime)");
    play->add_option("--seed", seed, "Override the stub seed");
    play->add_option("--session-id", session_id, "Session id (default derived from the script name)");

    auto* analyze = app.add_subcommand("analyze", "Pre/post survey statistics and the vote heatmap");
    analyze->add_option("--surveys", surveys, "Survey CSV")->required();
    analyze->add_option("--sessions", sessions, "Session log dir (default <data dir>/sessions)");
    analyze->add_option("--out", out, "Report dir (default <data dir>/report)");
    analyze->add_option("--nep-reverse", nep_reverse, "Reverse-coded NEP items, e.g. 2,4,6,8,10 or none");

    auto* serve = app.add_subcommand("serve", "Run the HTTP game server");
    serve->add_option("--config", config, "Server config JSON");
    serve->add_option("--port", port, "Port (overrides config and ECOECHO_PORT)");

    CLI11_PARSE(app, argc, argv);

    try {
        if (*validate) return cmd_validate(scenario);
        if (*play) return cmd_playthrough(scenario, script, stub, out.empty() ? data_dir_default() : out, seed, session_id);
        if (*analyze)
            return cmd_analyze(sessions.empty() ? data_dir_default() / "sessions" : sessions, surveys,
                               out.empty() ? data_dir_default() / "report" : out, nep_reverse);
        if (*serve) return cmd_serve(config, port);
    } catch (const Error& e) {
        std::cerr << "error: " << to_string(e.code()) << ": " << e.what() << "\n";
        return 1;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    }
    return 0;
}
