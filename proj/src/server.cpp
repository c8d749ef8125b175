#include "ecoecho/server.hpp"

#include <cstdlib>
#include <fstream>
#include <sstream>

#include <httplib.h>

#include "ecoecho/analysis.hpp"
#include "ecoecho/assessment.hpp"
#include "ecoecho/dialogue.hpp"
#include "ecoecho/error.hpp"
#include "ecoecho/stub_provider.hpp"

namespace ecoecho::server {

using nlohmann::json;
namespace fs = std::filesystem;

namespace {

constexpr std::size_t kTranscriptTail = 20;

json stage_changes_json(const std::vector<StageChange>& changes) {
    json out = json::array();
    for (const auto& c : changes) out.push_back({{"from", to_string(c.from)}, {"to", to_string(c.to)}});
    return out;
}

json pending_vote_json(const SessionState& s, const ScenarioDefinition& scenario) {
    if (!s.pending_vote) return nullptr;
    const AssessmentRound* r = scenario.find_round(*s.pending_vote);
    return {{"round", *s.pending_vote}, {"prompt", r ? r->prompt : ""}, {"min", 0}, {"max", 5}};
}

json highlights_json(const std::vector<dialogue::Highlight>& hs) {
    json out = json::array();
    for (const auto& h : hs) out.push_back({{"begin", h.span.begin}, {"end", h.span.end}, {"item", h.item}});
    return out;
}

json items_json(const std::vector<std::string>& ids, const ScenarioDefinition& scenario) {
    json out = json::array();
    for (const auto& id : ids) {
        const ItemDef* def = scenario.find_item(id);
        out.push_back({{"id", id}, {"name", def ? def->display_name : id}});
    }
    return out;
}

json parse_body(const std::string& body) {
    if (body.empty()) return json::object();
    json j = json::parse(body, nullptr, false);
    if (j.is_discarded() || !j.is_object()) fail(ErrorCode::BadInput, "request body must be a JSON object");
    return j;
}

template <typename T>
T body_field(const json& body, const char* key) {
    auto it = body.find(key);
    if (it == body.end()) fail(ErrorCode::BadInput, std::string("missing field '") + key + "'");
    try {
        return it->get<T>();
    } catch (const json::exception&) {
        fail(ErrorCode::BadInput, std::string("field '") + key + "' has the wrong type");
    }
}

int int_field(const json& body, const char* key) {
    auto it = body.find(key);
    if (it == body.end()) fail(ErrorCode::BadInput, std::string("missing field '") + key + "'");
    if (!it->is_number_integer()) fail(ErrorCode::BadInput, std::string("field '") + key + "' must be an integer");
    const auto v = it->get<std::int64_t>();
    // Out-of-int values are still out of the vote range; let record_vote say so.
    if (v > 1000000 || v < -1000000) return v > 0 ? 1000000 : -1000000;
    return static_cast<int>(v);
}

fs::path resolve(const fs::path& base, const fs::path& p) { return p.is_absolute() || base.empty() ? p : base / p; }

} // namespace

// --- configuration --------------------------------------------------------------

EnvLookup process_env() {
    return [](const std::string& name) -> std::optional<std::string> {
        if (const char* v = std::getenv(name.c_str())) return std::string(v);
        return std::nullopt;
    };
}

ServerConfig parse_config(const json& j, const fs::path& base_dir) {
    ServerConfig c;
    if (!j.is_object()) fail(ErrorCode::BadInput, "config must be a JSON object");
    try {
        c.host = j.value("host", c.host);
        c.port = j.value("port", c.port);
        if (j.contains("data_dir")) c.data_dir = resolve(base_dir, j.at("data_dir").get<std::string>());
        if (j.contains("scenarios")) {
            c.scenarios.clear();
            for (const auto& p : j.at("scenarios")) c.scenarios.push_back(resolve(base_dir, p.get<std::string>()));
        }
        c.default_scenario = j.value("default_scenario", c.default_scenario);
        c.use_stub = j.value("use_stub", c.use_stub);
        if (j.contains("stub_script")) c.stub_script = resolve(base_dir, j.at("stub_script").get<std::string>());
        c.cors_origin = j.value("cors_origin", c.cors_origin);
        c.max_body_bytes = j.value("max_body_bytes", c.max_body_bytes);
        c.worker_threads = j.value("worker_threads", c.worker_threads);
        if (j.contains("provider")) {
            const json& p = j.at("provider");
            if (p.contains("api_key")) fail(ErrorCode::BadInput, "provider.api_key is not allowed in files; use ECOECHO_API_KEY");
            c.provider.endpoint = p.value("endpoint", c.provider.endpoint);
            c.provider.model_name = p.value("model", c.provider.model_name);
            c.provider.timeout = std::chrono::milliseconds(p.value("timeout_ms", c.provider.timeout.count()));
            c.provider.max_retries = p.value("max_retries", c.provider.max_retries);
        }
    } catch (const json::exception& e) {
        fail(ErrorCode::BadInput, std::string("config: ") + e.what());
    }
    return c;
}

void apply_env_overrides(ServerConfig& c, const EnvLookup& env) {
    auto num = [](const std::string& name, const std::string& v) {
        try {
            std::size_t used = 0;
            const long long n = std::stoll(v, &used);
            if (used != v.size()) throw std::invalid_argument(v);
            return n;
        } catch (const std::exception&) {
            fail(ErrorCode::BadInput, name + " must be an integer, got '" + v + "'");
        }
    };
    if (auto v = env("ECOECHO_HOST")) c.host = *v;
    if (auto v = env("ECOECHO_PORT")) c.port = static_cast<int>(num("ECOECHO_PORT", *v));
    if (auto v = env("ECOECHO_DATA_DIR")) c.data_dir = *v;
    if (auto v = env("ECOECHO_SCENARIO")) c.scenarios = {fs::path(*v)};
    if (auto v = env("ECOECHO_USE_STUB")) c.use_stub = !(*v == "0" || *v == "false" || *v == "no");
    if (auto v = env("ECOECHO_STUB_SCRIPT")) c.stub_script = *v;
    if (auto v = env("ECOECHO_PROVIDER_ENDPOINT")) c.provider.endpoint = *v;
    if (auto v = env("ECOECHO_PROVIDER_MODEL")) c.provider.model_name = *v;
    if (auto v = env("ECOECHO_PROVIDER_TIMEOUT_MS"))
        c.provider.timeout = std::chrono::milliseconds(num("ECOECHO_PROVIDER_TIMEOUT_MS", *v));
    if (auto v = env("ECOECHO_PROVIDER_MAX_RETRIES"))
        c.provider.max_retries = static_cast<int>(num("ECOECHO_PROVIDER_MAX_RETRIES", *v));
    if (auto v = env(llm::kApiKeyEnv)) c.provider.api_key = *v;
}

ServerConfig load_config(const std::optional<fs::path>& file, const EnvLookup& env) {
    ServerConfig c;
    if (file) {
        std::ifstream in(*file);
        if (!in) fail(ErrorCode::IoError, "cannot open config " + file->string());
        const json j = json::parse(in, nullptr, false);
        if (j.is_discarded()) fail(ErrorCode::BadInput, "config " + file->string() + " is not valid JSON");
        c = parse_config(j, file->parent_path());
    }
    apply_env_overrides(c, env);
    if (c.provider.timeout.count() <= 0) fail(ErrorCode::BadInput, "provider timeout must be positive");
    if (c.provider.max_retries < 0) fail(ErrorCode::BadInput, "provider max_retries must be >= 0");
    return c;
}

// --- errors -------------------------------------------------------------------------

json ApiError::to_json() const {
    return {{"error", {{"code", code}, {"message", message}, {"retriable", retriable}}}};
}

ApiError to_api_error(const Error& e) {
    switch (e.code()) {
    case ErrorCode::WrongStage:
    case ErrorCode::IllegalTransition: return {409, "wrong_stage", e.what(), false};
    case ErrorCode::OutOfRange: return {422, "out_of_range", e.what(), false};
    case ErrorCode::WrongRound: return {409, "wrong_round", e.what(), false};
    case ErrorCode::ProviderError:
    case ErrorCode::ProviderTimeout: return {503, "provider_unavailable", "the dialogue provider is unavailable", true};
    case ErrorCode::NotFound: return {404, "not_found", e.what(), false};
    case ErrorCode::IoError:
    case ErrorCode::SequenceConflict: return {500, "bad_request", "internal storage error", true};
    default: return {400, "bad_request", e.what(), false};
    }
}

// --- views -------------------------------------------------------------------------

json state_view(const SessionState& s, const ScenarioDefinition& scenario) {
    const int scene = world_scene_index(s);
    const StageDef* stage_def = scenario.find_stage(s.stage);
    json reachable = json::array();
    for (const auto& n : scenario.npcs)
        if (npc_reachable(s, scenario, n.id)) reachable.push_back(n.id);

    json transcript = json::array();
    const std::size_t first = s.transcript.size() > kTranscriptTail ? s.transcript.size() - kTranscriptTail : 0;
    for (std::size_t i = first; i < s.transcript.size(); ++i) {
        const auto& t = s.transcript[i];
        json turn{{"speaker", t.speaker},
                  {"npc", t.npc},
                  {"text", t.text},
                  {"turn_index", t.turn_index},
                  {"detected_intent", t.detected_intent ? json(*t.detected_intent) : json(nullptr)},
                  {"decided_layer", to_string(t.decided_layer)},
                  {"granted_items", t.granted_items}};
        if (t.speaker != kPlayerSpeaker) {
            std::vector<ItemDef> grantable;
            for (const auto& item : scenario.items)
                if (item.grantor_npc.empty() || item.grantor_npc == t.npc) grantable.push_back(item);
            turn["highlights"] = highlights_json(dialogue::extract_items(t.text, grantable, {}).highlights);
        }
        transcript.push_back(std::move(turn));
    }

    json votes = json::array();
    for (const auto& v : s.votes)
        votes.push_back({{"round", v.round}, {"votes", v.votes}, {"stage", to_string(v.stage_at_vote)}});

    json ending = nullptr;
    if (s.ending) {
        const auto& def = *s.ending == Ending::Bad ? scenario.bad_ending : scenario.alternate_ending;
        ending = {{"kind", to_string(*s.ending)},
                  {"text", def ? def->text : ""},
                  {"asset", def ? def->asset : ""}};
    }

    json view{{"session_id", s.session_id},
              {"scenario_id", s.scenario_id},
              {"stage", to_string(s.stage)},
              {"narration", stage_def ? stage_def->narration : ""},
              {"inventory", items_json(s.inventory, scenario)},
              {"world_scene", scene},
              {"world_scene_asset",
               scene >= 0 && static_cast<std::size_t>(scene) < scenario.world_scenes.size()
                   ? scenario.world_scenes[static_cast<std::size_t>(scene)]
                   : ""},
              {"degradation", s.world.degradation},
              {"reachable_npcs", reachable},
              {"pending_vote", pending_vote_json(s, scenario)},
              {"votes", votes},
              {"ending", ending},
              {"transcript_tail", transcript},
              {"created_at", s.created_at}};
    if (s.stage == Stage::FinalDecision) view["final_question"] = scenario.final_question;
    return view;
}

// --- service -------------------------------------------------------------------------

GameService::GameService(std::map<std::string, ScenarioPtr> scenarios, std::string default_scenario,
                         llm::TextProvider& provider, store::SessionStore& store, Clock clock,
                         llm::RetryPolicy retry, std::function<std::string()> id_source)
    : scenarios_(std::move(scenarios)), default_scenario_(std::move(default_scenario)), provider_(provider),
      store_(store), clock_(std::move(clock)), retry_(retry), id_source_(std::move(id_source)) {}

template <typename Fn>
ApiResponse GameService::guarded(Fn&& fn) {
    try {
        return fn();
    } catch (const Error& e) {
        const ApiError err = to_api_error(e);
        return {err.status, err.to_json()};
    } catch (const std::exception&) {
        const ApiError err{500, "bad_request", "internal error", true};
        return {err.status, err.to_json()};
    }
}

std::shared_ptr<GameService::Slot> GameService::slot(const std::string& session_id) {
    std::lock_guard lock(slots_mu_);
    auto& s = slots_[session_id];
    if (!s) s = std::make_shared<Slot>();
    return s;
}

const ScenarioPtr& GameService::scenario_for(const std::string& id) const {
    auto it = scenarios_.find(id);
    if (it == scenarios_.end()) fail(ErrorCode::NotFound, "unknown scenario '" + id + "'");
    return it->second;
}

template <typename Fn>
ApiResponse GameService::with_session(const std::string& session_id, Fn&& fn) {
    return guarded([&] {
        if (!store::valid_session_id(session_id) || !store_.exists(session_id))
            fail(ErrorCode::NotFound, "unknown session '" + session_id + "'");
        auto s = slot(session_id);
        std::lock_guard lock(s->mu);
        if (!s->runtime) {
            const auto events = store_.load_session_events(session_id);
            if (events.empty()) fail(ErrorCode::NotFound, "session '" + session_id + "' has no events");
            const std::string scenario_id = events.front().payload.value("scenario_id", std::string{});
            s->runtime.emplace(
                SessionRuntime::resume(scenario_for(scenario_id), provider_, store_, clock_, events, retry_));
        }
        return fn(*s->runtime);
    });
}

ApiResponse GameService::create_session(const json& body) {
    return guarded([&] {
        std::string scenario_id = default_scenario_;
        if (body.contains("scenario_id")) scenario_id = body_field<std::string>(body, "scenario_id");
        const ScenarioPtr& scenario = scenario_for(scenario_id);
        const std::string id = id_source_();
        auto s = slot(id);
        std::lock_guard lock(s->mu);
        if (s->runtime || store_.exists(id)) fail(ErrorCode::BadInput, "session id collision");
        s->runtime.emplace(SessionRuntime::create(scenario, provider_, store_, clock_, id, retry_));
        const SessionState& st = s->runtime->state();
        json view = state_view(st, *scenario);
        view["opening_narration"] = scenario->opening_narration;
        view["title"] = scenario->title;
        return ApiResponse{201, std::move(view)};
    });
}

ApiResponse GameService::post_message(const std::string& session_id, const std::string& npc_id, const json& body) {
    return with_session(session_id, [&](SessionRuntime& rt) {
        const auto text = body_field<std::string>(body, "text");
        if (!rt.scenario().find_npc(npc_id)) fail(ErrorCode::NotFound, "unknown NPC '" + npc_id + "'");
        const TurnResult r = rt.say(npc_id, text);
        const auto& out = r.outcome;
        const SessionState& st = rt.state();
        json actions = json::array();
        for (const auto& a : out.actions) actions.push_back(to_json(a));
        std::vector<std::string> granted = out.granted_items;
        granted.insert(granted.end(), r.action_grants.begin(), r.action_grants.end());
        const int scene = world_scene_index(st);
        json view{{"npc", npc_id},
                  {"utterance", out.npc_utterance},
                  {"strategy", dialogue::to_string(out.strategy)},
                  {"decided_layer", to_string(out.decided_layer)},
                  {"intent", out.intent.intent ? json(*out.intent.intent) : json(nullptr)},
                  {"agent_failed", out.agent_failed},
                  {"granted_items", items_json(granted, rt.scenario())},
                  {"highlights", highlights_json(out.highlights)},
                  {"actions", actions},
                  {"stage_changes", stage_changes_json(r.stage_changes)},
                  {"stage", to_string(st.stage)},
                  {"world_scene", scene},
                  {"pending_vote", pending_vote_json(st, rt.scenario())},
                  {"inventory", items_json(st.inventory, rt.scenario())},
                  {"turn_index", out.npc_turn_index}};
        if (st.stage == Stage::FinalDecision) view["final_question"] = rt.scenario().final_question;
        return ApiResponse{200, std::move(view)};
    });
}

ApiResponse GameService::post_vote(const std::string& session_id, const json& body) {
    return with_session(session_id, [&](SessionRuntime& rt) {
        const int round = int_field(body, "round");
        const int votes = int_field(body, "votes");
        const VoteResult r = rt.vote(round, votes);
        json view = state_view(rt.state(), rt.scenario());
        view["vote"] = {{"round", r.record.round}, {"votes", r.record.votes}, {"stage", to_string(r.record.stage_at_vote)}};
        view["stage_changes"] = stage_changes_json(r.stage_changes);
        return ApiResponse{200, std::move(view)};
    });
}

ApiResponse GameService::post_final_decision(const std::string& session_id, const json& body) {
    return with_session(session_id, [&](SessionRuntime& rt) {
        const bool support = body.contains("support") ? body_field<bool>(body, "support")
                                                      : body_field<bool>(body, "support_repeal");
        const DecisionResult r = rt.decide(support);
        json view = state_view(rt.state(), rt.scenario());
        view["stage_changes"] = stage_changes_json(r.stage_changes);
        return ApiResponse{200, std::move(view)};
    });
}

ApiResponse GameService::get_state(const std::string& session_id) {
    return with_session(session_id, [&](SessionRuntime& rt) {
        return ApiResponse{200, state_view(rt.state(), rt.scenario())};
    });
}

ApiResponse GameService::get_heatmap() {
    return guarded([&] {
        std::vector<SessionState> states;
        for (const auto& id : store_.list_sessions()) {
            auto events = store_.load_session_events(id);
            if (events.empty()) continue;
            SessionState s = store::replay_events(events);
            if (!s.votes.empty()) states.push_back(std::move(s));
        }
        const auto m = assessment::voting_heatmap(states);
        json rows = json::array();
        for (std::size_t i = 0; i < m.rows(); ++i) {
            json cells = json::array();
            for (const auto& c : m.cells[i]) cells.push_back(c ? json(*c) : json(nullptr));
            rows.push_back({{"session_id", m.row_ids[i]}, {"votes", cells}});
        }
        return ApiResponse{200, {{"rounds", assessment::kRounds}, {"rows", rows}, {"csv", m.to_csv()}}};
    });
}

ApiResponse GameService::prepost(const std::string& csv) {
    return guarded([&] {
        const auto nep = assessment::default_reverse_mask(assessment::Scale::NEP);
        const auto geb = assessment::default_reverse_mask(assessment::Scale::GEB);
        assessment::SurveyTable table;
        auto merge = [&](std::istream& in) {
            auto t = assessment::parse_survey_csv(in, nep, geb);
            table.responses.insert(table.responses.end(), t.responses.begin(), t.responses.end());
            table.errors.insert(table.errors.end(), t.errors.begin(), t.errors.end());
        };
        if (!csv.empty()) {
            std::istringstream in(csv);
            merge(in);
        } else {
            std::vector<fs::path> files;
            if (fs::exists(store_.surveys_dir()))
                for (const auto& e : fs::directory_iterator(store_.surveys_dir()))
                    if (e.path().extension() == ".csv") files.push_back(e.path());
            std::sort(files.begin(), files.end());
            for (const auto& f : files) {
                std::ifstream in(f);
                merge(in);
            }
        }
        const auto logs = store::read_session_logs(store_.sessions_dir());
        return ApiResponse{200, analysis::analyze(logs, table).body};
    });
}

// --- HTTP ------------------------------------------------------------------------------

void mount_routes(httplib::Server& http, GameService& service, const ServerConfig& config) {
    const std::string origin = config.cors_origin;
    http.set_payload_max_length(config.max_body_bytes);

    auto reply = [](httplib::Response& res, const ApiResponse& r) {
        res.status = r.status;
        res.set_content(r.body.dump(), "application/json");
    };
    auto parsed = [reply](const httplib::Request& req, httplib::Response& res, auto&& fn) {
        json body;
        try {
            body = parse_body(req.body);
        } catch (const Error& e) {
            const ApiError err = to_api_error(e);
            reply(res, {err.status, err.to_json()});
            return;
        }
        reply(res, fn(body));
    };

    http.set_post_routing_handler([origin](const httplib::Request&, httplib::Response& res) {
        res.set_header("Access-Control-Allow-Origin", origin);
    });
    http.Options(R"(.*)", [](const httplib::Request&, httplib::Response& res) {
        res.set_header("Access-Control-Allow-Methods", "GET, POST, OPTIONS");
        res.set_header("Access-Control-Allow-Headers", "Content-Type");
        res.set_header("Access-Control-Max-Age", "600");
        res.status = 204;
    });
    http.set_error_handler([](const httplib::Request&, httplib::Response& res) {
        if (!res.body.empty()) return;
        ApiError err{res.status, "bad_request", "request rejected", false};
        if (res.status == 404) err = {404, "not_found", "no such route", false};
        if (res.status == 413) err.message = "request body too large";
        res.set_content(err.to_json().dump(), "application/json");
    });

    http.Get("/healthz", [](const httplib::Request&, httplib::Response& res) {
        res.set_content(R"({"status":"ok"})", "application/json");
    });
    http.Post("/sessions", [&service, parsed](const httplib::Request& req, httplib::Response& res) {
        parsed(req, res, [&](const json& body) { return service.create_session(body); });
    });
    http.Post(R"(/sessions/([^/]+)/npcs/([^/]+)/message)",
              [&service, parsed](const httplib::Request& req, httplib::Response& res) {
                  parsed(req, res, [&](const json& body) {
                      return service.post_message(req.matches[1], req.matches[2], body);
                  });
              });
    http.Post(R"(/sessions/([^/]+)/vote)", [&service, parsed](const httplib::Request& req, httplib::Response& res) {
        parsed(req, res, [&](const json& body) { return service.post_vote(req.matches[1], body); });
    });
    http.Post(R"(/sessions/([^/]+)/final-decision)",
              [&service, parsed](const httplib::Request& req, httplib::Response& res) {
                  parsed(req, res, [&](const json& body) { return service.post_final_decision(req.matches[1], body); });
              });
    http.Get(R"(/sessions/([^/]+)/state)", [&service, reply](const httplib::Request& req, httplib::Response& res) {
        reply(res, service.get_state(req.matches[1]));
    });
    http.Get("/analytics/heatmap", [&service, reply](const httplib::Request&, httplib::Response& res) {
        reply(res, service.get_heatmap());
    });
    http.Get("/analytics/prepost", [&service, reply](const httplib::Request&, httplib::Response& res) {
        reply(res, service.prepost(""));
    });
    http.Post("/analytics/prepost", [&service, reply](const httplib::Request& req, httplib::Response& res) {
        if (req.body.empty()) {
            reply(res, {400, ApiError{400, "bad_request", "expected survey CSV in the request body", false}.to_json()});
            return;
        }
        reply(res, service.prepost(req.body));
    });
}

GameServer::GameServer(ServerConfig config) : config_(std::move(config)) {
    std::map<std::string, ScenarioPtr> scenarios;
    for (const auto& path : config_.scenarios) {
        auto s = std::make_shared<const ScenarioDefinition>(load_scenario_file(path));
        const std::string id = s->id;
        scenarios.emplace(id, std::move(s));
    }
    if (!scenarios.count(config_.default_scenario) && !scenarios.empty())
        config_.default_scenario = scenarios.begin()->first;

    llm::RetryPolicy retry;
    if (config_.use_stub) {
        provider_ = std::make_unique<llm::StubProvider>(llm::load_stub_script_file(config_.stub_script));
        retry = {config_.provider.max_retries, std::chrono::milliseconds(0)};
    } else {
        const auto pc = llm::finalize_provider_config(config_.provider);
        provider_ = std::make_unique<llm::HttpProvider>(pc);
        retry = pc.retry_policy();
    }
    store_ = std::make_unique<store::SessionStore>(config_.data_dir);
    service_ = std::make_unique<GameService>(std::move(scenarios), config_.default_scenario, *provider_, *store_,
                                             system_clock(), retry);
    http_ = std::make_unique<httplib::Server>();
    const int threads = std::max(1, config_.worker_threads);
    http_->new_task_queue = [threads] { return new httplib::ThreadPool(static_cast<std::size_t>(threads)); };
    mount_routes(*http_, *service_, config_);
}

GameServer::~GameServer() { stop(); }

int GameServer::bind() {
    if (config_.port == 0) return http_->bind_to_any_port(config_.host);
    if (!http_->bind_to_port(config_.host, config_.port))
        fail(ErrorCode::IoError, "cannot bind " + config_.host + ":" + std::to_string(config_.port));
    return config_.port;
}

void GameServer::listen() { http_->listen_after_bind(); }

void GameServer::stop() {
    if (http_ && http_->is_running()) http_->stop();
}

} // namespace ecoecho::server
