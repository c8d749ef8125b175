#pragma once

#include <filesystem>
#include <functional>
#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <string>

#include <json.hpp>

#include "ecoecho/error.hpp"
#include "ecoecho/http_provider.hpp"
#include "ecoecho/session_runtime.hpp"
#include "ecoecho/session_store.hpp"

namespace httplib {
class Server;
}

namespace ecoecho::server {

struct ServerConfig {
    std::string host = "0.0.0.0";
    int port = 8080;
    std::filesystem::path data_dir = "runtime";
    std::vector<std::filesystem::path> scenarios{"data/scenarios/ecoecho.json"};
    std::string default_scenario = "ecoecho";
    bool use_stub = true;
    std::filesystem::path stub_script = "data/stubs/ecoecho_stub.json";
    llm::ProviderConfig provider;
    std::string cors_origin = "*";
    std::size_t max_body_bytes = 64 * 1024;
    int worker_threads = 8;
};

using EnvLookup = std::function<std::optional<std::string>(const std::string&)>;
EnvLookup process_env();

/// Reads the JSON config file (missing keys keep defaults), then applies
/// ECOECHO_PORT, ECOECHO_HOST, ECOECHO_DATA_DIR, ECOECHO_SCENARIO,
/// ECOECHO_USE_STUB, ECOECHO_STUB_SCRIPT, ECOECHO_PROVIDER_ENDPOINT,
/// ECOECHO_PROVIDER_MODEL, ECOECHO_PROVIDER_TIMEOUT_MS,
/// ECOECHO_PROVIDER_MAX_RETRIES and ECOECHO_API_KEY. Relative paths in the
/// file resolve against the file's directory.
ServerConfig load_config(const std::optional<std::filesystem::path>& file, const EnvLookup& env = process_env());
ServerConfig parse_config(const nlohmann::json& j, const std::filesystem::path& base_dir);
void apply_env_overrides(ServerConfig& c, const EnvLookup& env);

/// Closed set of client-facing error codes.
struct ApiError {
    int status = 400;
    std::string code;
    std::string message;
    bool retriable = false;

    nlohmann::json to_json() const;
};

ApiError to_api_error(const Error& e);

struct ApiResponse {
    int status = 200;
    nlohmann::json body;
};

/// Everything the HTTP routes do, minus the transport. Safe for concurrent
/// use: sessions are serialized individually, different sessions run in
/// parallel, scenarios are shared read-only.
class GameService {
public:
    GameService(std::map<std::string, ScenarioPtr> scenarios, std::string default_scenario,
                llm::TextProvider& provider, store::SessionStore& store, Clock clock = system_clock(),
                llm::RetryPolicy retry = {}, std::function<std::string()> id_source = generate_session_id);

    ApiResponse create_session(const nlohmann::json& body);
    ApiResponse post_message(const std::string& session_id, const std::string& npc_id, const nlohmann::json& body);
    ApiResponse post_vote(const std::string& session_id, const nlohmann::json& body);
    ApiResponse post_final_decision(const std::string& session_id, const nlohmann::json& body);
    ApiResponse get_state(const std::string& session_id);
    ApiResponse get_heatmap();
    /// Runs the pre/post analysis on `csv`, or on every CSV under surveys/ when empty.
    ApiResponse prepost(const std::string& csv);

    store::SessionStore& store() { return store_; }

private:
    struct Slot {
        std::mutex mu;
        std::optional<SessionRuntime> runtime;
    };

    template <typename Fn>
    ApiResponse guarded(Fn&& fn);
    template <typename Fn>
    ApiResponse with_session(const std::string& session_id, Fn&& fn);
    std::shared_ptr<Slot> slot(const std::string& session_id);
    const ScenarioPtr& scenario_for(const std::string& id) const;

    std::map<std::string, ScenarioPtr> scenarios_;
    std::string default_scenario_;
    llm::TextProvider& provider_;
    store::SessionStore& store_;
    Clock clock_;
    llm::RetryPolicy retry_;
    std::function<std::string()> id_source_;

    std::mutex slots_mu_;
    std::map<std::string, std::shared_ptr<Slot>> slots_;
};

/// JSON views shared by the HTTP API and the CLI.
nlohmann::json state_view(const SessionState& s, const ScenarioDefinition& scenario);

/// Registers every route (and CORS handling) on an httplib server.
void mount_routes(httplib::Server& http, GameService& service, const ServerConfig& config);

/// Owns the provider, store, service and listener for `ecoecho serve`.
class GameServer {
public:
    explicit GameServer(ServerConfig config);
    ~GameServer();

    /// Binds; returns the bound port (useful with port 0).
    int bind();
    /// Blocks until stop().
    void listen();
    void stop();
    GameService& service() { return *service_; }

private:
    ServerConfig config_;
    std::unique_ptr<llm::TextProvider> provider_;
    std::unique_ptr<store::SessionStore> store_;
    std::unique_ptr<GameService> service_;
    std::unique_ptr<httplib::Server> http_;
};

} // namespace ecoecho::server
