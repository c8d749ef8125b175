#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <atomic>
#include <fstream>
#include <map>
#include <thread>

#include <httplib.h>

#include "ecoecho/error.hpp"
#include "ecoecho/http_provider.hpp"
#include "ecoecho/playthrough.hpp"
#include "ecoecho/server.hpp"
#include "support.hpp"

using namespace ecoecho;
using namespace ecoecho::server;
using nlohmann::json;
namespace fs = std::filesystem;

namespace {

EnvLookup env_of(std::map<std::string, std::string> vars) {
    return [vars = std::move(vars)](const std::string& k) -> std::optional<std::string> {
        auto it = vars.find(k);
        if (it == vars.end()) return std::nullopt;
        return it->second;
    };
}

ServerConfig test_config(const fs::path& data_dir) {
    ServerConfig c;
    c.host = "127.0.0.1";
    c.port = 0;
    c.data_dir = data_dir;
    c.scenarios = {testing::data_path("scenarios/ecoecho.json")};
    c.stub_script = testing::data_path("stubs/ecoecho_stub.json");
    c.cors_origin = "http://localhost:5173";
    c.max_body_bytes = 4096;
    return c;
}

// A running GameServer on an ephemeral port.
struct LiveServer {
    explicit LiveServer(const fs::path& data_dir) : server(test_config(data_dir)) {
        port = server.bind();
        thread = std::thread([this] { server.listen(); });
        httplib::Client probe("127.0.0.1", port);
        for (int i = 0; i < 200 && !probe.Get("/healthz"); ++i) std::this_thread::sleep_for(std::chrono::milliseconds(10));
    }
    ~LiveServer() {
        server.stop();
        thread.join();
    }
    httplib::Client client() const {
        httplib::Client c("127.0.0.1", port);
        c.set_read_timeout(10, 0);
        return c;
    }

    GameServer server;
    int port = 0;
    std::thread thread;
};

json post(httplib::Client& c, const std::string& path, const json& body, int expect) {
    const auto res = c.Post(path, body.dump(), "application/json");
    REQUIRE(res);
    CHECK(res->status == expect);
    return json::parse(res->body);
}

json get(httplib::Client& c, const std::string& path, int expect = 200) {
    const auto res = c.Get(path);
    REQUIRE(res);
    CHECK(res->status == expect);
    return json::parse(res->body);
}

void check_error_schema(const json& j, const std::string& code) {
    REQUIRE(j.contains("error"));
    CHECK(j["error"]["code"] == code);
    CHECK(j["error"]["message"].is_string());
    CHECK(j["error"]["retriable"].is_boolean());
}

// Drives a session through the HTTP API using a player script.
json play_script(httplib::Client& c, const std::string& id, const PlayerScript& sc) {
    json last;
    for (const auto& st : sc.steps) {
        if (st.op == PlayerStep::Op::Say)
            last = post(c, "/sessions/" + id + "/npcs/" + st.npc + "/message", {{"text", st.text}}, 200);
        else if (st.op == PlayerStep::Op::Vote)
            last = post(c, "/sessions/" + id + "/vote", {{"round", st.round}, {"votes", st.votes}}, 200);
        else
            last = post(c, "/sessions/" + id + "/final-decision", {{"support", st.support_repeal}}, 200);
    }
    return last;
}

} // namespace

TEST_CASE("config file and environment overrides") {
    testing::TempDir dir("cfg");
    const auto file = dir.path() / "server.json";
    std::ofstream(file) << R"({"port": 9000, "data_dir": "state", "use_stub": false,
                             "provider": {"endpoint": "http://gpu:8000/v1", "model": "m", "timeout_ms": 1500}})";
    const auto c = load_config(file, env_of({}));
    CHECK(c.port == 9000);
    CHECK(c.data_dir == dir.path() / "state");
    CHECK_FALSE(c.use_stub);
    CHECK(c.provider.endpoint == "http://gpu:8000/v1");
    CHECK(c.provider.timeout == std::chrono::milliseconds(1500));

    const auto o = load_config(file, env_of({{"ECOECHO_PORT", "7001"},
                                             {"ECOECHO_USE_STUB", "1"},
                                             {"ECOECHO_PROVIDER_MAX_RETRIES", "3"},
                                             {"ECOECHO_API_KEY", "sekret"}}));
    CHECK(o.port == 7001);
    CHECK(o.use_stub);
    CHECK(o.provider.max_retries == 3);
    CHECK(o.provider.api_key == "sekret");

    CHECK_THROWS_AS(load_config(file, env_of({{"ECOECHO_PORT", "80x"}})), Error);
    CHECK_THROWS_AS(load_config(file, env_of({{"ECOECHO_PROVIDER_TIMEOUT_MS", "0"}})), Error);
    CHECK_THROWS_AS(parse_config(json::parse(R"({"provider": {"api_key": "k"}})"), {}), Error);
    CHECK(load_config(std::nullopt, env_of({})).port == 8080);
}

TEST_CASE("error mapping") {
    CHECK(to_api_error(Error(ErrorCode::WrongStage, "x")).status == 409);
    CHECK(to_api_error(Error(ErrorCode::OutOfRange, "x")).code == "out_of_range");
    CHECK(to_api_error(Error(ErrorCode::OutOfRange, "x")).status == 422);
    CHECK(to_api_error(Error(ErrorCode::WrongRound, "x")).code == "wrong_round");
    const auto p = to_api_error(Error(ErrorCode::ProviderTimeout, "x"));
    CHECK(p.status == 503);
    CHECK(p.code == "provider_unavailable");
    CHECK(p.retriable);
    CHECK(to_api_error(Error(ErrorCode::NotFound, "x")).status == 404);
    CHECK(to_api_error(Error(ErrorCode::SchemaError, "x")).code == "bad_request");
}

TEST_CASE("HttpProvider against a local endpoint") {
    httplib::Server mock;
    std::atomic<int> hits{0};
    std::string last_auth;
    mock.Post("/v1/chat/completions", [&](const httplib::Request& req, httplib::Response& res) {
        ++hits;
        last_auth = req.get_header_value("Authorization");
        const auto body = json::parse(req.body);
        const std::string input = body["messages"].back()["content"];
        if (input == "slow") std::this_thread::sleep_for(std::chrono::milliseconds(600));
        if (input == "boom") {
            res.status = 500;
            return;
        }
        if (input == "garbage") {
            res.set_content("{}", "application/json");
            return;
        }
        res.set_content(json{{"choices", {{{"message", {{"role", "assistant"}, {"content", "echo " + input}}}}}}}.dump(),
                        "application/json");
    });
    const int port = mock.bind_to_any_port("127.0.0.1");
    std::thread t([&] { mock.listen_after_bind(); });
    mock.wait_until_ready();

    llm::ProviderConfig pc;
    pc.endpoint = "http://127.0.0.1:" + std::to_string(port) + "/v1";
    pc.timeout = std::chrono::milliseconds(200);
    pc.api_key = "k1";
    llm::HttpProvider provider(pc);
    auto request = [](const std::string& input) {
        llm::ProviderRequest r;
        r.npc_id = "lisa";
        r.player_input = input;
        r.messages = {{llm::ChatMessage::Role::System, "sys"}, {llm::ChatMessage::Role::User, input}};
        return r;
    };
    auto code = [&](const std::string& input) {
        try {
            provider.complete(request(input));
        } catch (const Error& e) {
            return e.code();
        }
        return ErrorCode::BadInput;
    };

    CHECK(provider.complete(request("hi")).text == "echo hi");
    CHECK(last_auth == "Bearer k1");
    CHECK(code("slow") == ErrorCode::ProviderTimeout);
    CHECK(code("boom") == ErrorCode::ProviderError);
    CHECK(code("garbage") == ErrorCode::ProviderError);

    llm::ProviderConfig dead = pc;
    dead.endpoint = "http://127.0.0.1:1/v1";
    llm::HttpProvider unreachable(dead);
    CHECK_THROWS_AS(unreachable.complete(request("hi")), Error);

    mock.stop();
    t.join();
}

TEST_CASE("HTTP routes") {
    testing::TempDir dir("http");
    LiveServer live(dir.path());
    auto c = live.client();

    CHECK(get(c, "/healthz")["status"] == "ok");

    const auto created = post(c, "/sessions", json::object(), 201);
    const std::string id = created["session_id"];
    CHECK(created["stage"] == "opening");
    CHECK(created["pending_vote"]["round"] == 1);
    CHECK(created["world_scene"] == 0);
    CHECK_FALSE(created["opening_narration"].get<std::string>().empty());
    const std::string other = post(c, "/sessions", json::object(), 201)["session_id"];
    CHECK(other != id);

    check_error_schema(post(c, "/sessions", {{"scenario_id", "nope"}}, 404), "not_found");
    check_error_schema(get(c, "/sessions/ghost/state", 404), "not_found");
    check_error_schema(get(c, "/no/such/route", 404), "not_found");

    post(c, "/sessions/" + id + "/vote", {{"round", 1}, {"votes", 4}}, 200);
    const auto lisa = post(c, "/sessions/" + id + "/npcs/lisa/message", {{"text", "I have a scoop about T energy"}}, 200);
    CHECK_FALSE(lisa["utterance"].get<std::string>().empty());
    CHECK(lisa["stage"] == "level1_media");
    CHECK(lisa["granted_items"][0]["id"] == "strike_evidence");
    REQUIRE(lisa["highlights"].size() == 1);

    check_error_schema(post(c, "/sessions/" + id + "/npcs/jonathan/message", {{"text", "hi"}}, 409), "wrong_stage");
    check_error_schema(post(c, "/sessions/" + id + "/npcs/nobody/message", {{"text", "hi"}}, 404), "not_found");
    check_error_schema(post(c, "/sessions/" + id + "/npcs/lisa/message", json::object(), 400), "bad_request");
    check_error_schema(post(c, "/sessions/" + id + "/vote", {{"round", 2}, {"votes", 6}}, 422), "out_of_range");
    check_error_schema(post(c, "/sessions/" + id + "/final-decision", {{"support", true}}, 409), "wrong_stage");

    const auto bad_json = c.Post("/sessions/" + id + "/vote", "{nope", "application/json");
    REQUIRE(bad_json);
    CHECK(bad_json->status == 400);
    check_error_schema(json::parse(bad_json->body), "bad_request");

    const auto huge = c.Post("/sessions/" + id + "/npcs/lisa/message",
                             json{{"text", std::string(10000, 'a')}}.dump(), "application/json");
    REQUIRE(huge);
    CHECK(huge->status == 413);
    check_error_schema(json::parse(huge->body), "bad_request");

    const auto state = get(c, "/sessions/" + id + "/state");
    CHECK(state["inventory"].size() == 2);
    CHECK(state["transcript_tail"].size() == 2);
    CHECK(state["votes"].size() == 1);

    const auto preflight = c.Options("/sessions");
    REQUIRE(preflight);
    CHECK(preflight->status == 204);
    CHECK(preflight->get_header_value("Access-Control-Allow-Origin") == "http://localhost:5173");
    CHECK(preflight->get_header_value("Access-Control-Allow-Methods").find("POST") != std::string::npos);
    CHECK(c.Get("/healthz")->get_header_value("Access-Control-Allow-Origin") == "http://localhost:5173");
}

TEST_CASE("full playthrough over HTTP and analytics") {
    testing::TempDir dir("play");
    LiveServer live(dir.path());
    auto c = live.client();

    const std::string bad = post(c, "/sessions", json::object(), 201)["session_id"];
    const auto last = play_script(c, bad, load_player_script_file(testing::data_path("scripts/bad_ending.json")));
    CHECK(last["stage"] == "ended");
    CHECK(last["ending"]["kind"] == "bad");
    CHECK(last["world_scene"] == 2);
    CHECK(last["pending_vote"].is_null());

    const std::string alt = post(c, "/sessions", json::object(), 201)["session_id"];
    const auto alt_last = play_script(c, alt, load_player_script_file(testing::data_path("scripts/alternate_ending.json")));
    CHECK(alt_last["ending"]["kind"] == "alternate");
    CHECK(alt_last["world_scene"] == 0);

    // A session with no votes is left out of the heatmap.
    post(c, "/sessions", json::object(), 201);
    const auto heat = get(c, "/analytics/heatmap");
    REQUIRE(heat["rows"].size() == 2);
    for (const auto& row : heat["rows"]) {
        REQUIRE(row["votes"].size() == 4);
        for (const auto& v : row["votes"]) CHECK((v.get<int>() >= 0 && v.get<int>() <= 5));
    }

    std::ifstream csv(testing::data_path("surveys/sample_surveys.csv"));
    const std::string body((std::istreambuf_iterator<char>(csv)), std::istreambuf_iterator<char>());
    const auto pp = c.Post("/analytics/prepost", body, "text/csv");
    REQUIRE(pp);
    CHECK(pp->status == 200);
    const auto report = json::parse(pp->body);
    CHECK(report["paired_tests"]["NEP"]["test"] == "paired_t");
    CHECK(report["paired_tests"]["GEB"]["test"] == "wilcoxon_signed_rank");
    CHECK(report["heatmap"]["rows"] == 2);
    CHECK(report["sessions"] == 3);

    const auto empty = c.Post("/analytics/prepost", "", "text/csv");
    REQUIRE(empty);
    CHECK(empty->status == 400);
    // No survey files in the data dir yet.
    check_error_schema(get(c, "/analytics/prepost", 400), "bad_request");

    fs::create_directories(dir.path() / "surveys");
    fs::copy_file(testing::data_path("surveys/sample_surveys.csv"), dir.path() / "surveys/s.csv");
    CHECK(get(c, "/analytics/prepost")["surveys"]["responses"] == 92);
}

TEST_CASE("a restarted server resumes sessions from disk") {
    testing::TempDir dir("restart");
    std::string id;
    {
        LiveServer live(dir.path());
        auto c = live.client();
        id = post(c, "/sessions", json::object(), 201)["session_id"];
        post(c, "/sessions/" + id + "/vote", {{"round", 1}, {"votes", 2}}, 200);
        post(c, "/sessions/" + id + "/npcs/lisa/message", {{"text", "hello"}}, 200);
    }
    LiveServer live(dir.path());
    auto c = live.client();
    const auto state = get(c, "/sessions/" + id + "/state");
    CHECK(state["stage"] == "level1_media");
    CHECK(state["transcript_tail"].size() == 2);
    post(c, "/sessions/" + id + "/npcs/lisa/message", {{"text", "hello again"}}, 200);
    const auto events = store::read_log_file(dir.path() / "sessions" / (id + ".log"));
    for (std::size_t i = 0; i < events.size(); ++i) CHECK(events[i].sequence == i);
}

TEST_CASE("concurrent requests keep every log gapless") {
    testing::TempDir dir("hammer");
    LiveServer live(dir.path());
    std::vector<std::string> ids;
    {
        auto c = live.client();
        for (int i = 0; i < 4; ++i) {
            ids.push_back(post(c, "/sessions", json::object(), 201)["session_id"]);
            post(c, "/sessions/" + ids.back() + "/vote", {{"round", 1}, {"votes", 3}}, 200);
        }
    }
    std::atomic<int> ok{0}, failed{0};
    std::vector<std::thread> workers;
    for (int w = 0; w < 8; ++w) {
        workers.emplace_back([&, w] {
            auto c = live.client();
            for (int i = 0; i < 15; ++i) {
                const auto& id = ids[static_cast<std::size_t>((w + i) % 4)];
                const auto res = c.Post("/sessions/" + id + "/npcs/lisa/message",
                                        json{{"text", "message " + std::to_string(i)}}.dump(), "application/json");
                (res && res->status == 200 ? ok : failed)++;
                if (i % 5 == 0) c.Get("/sessions/" + id + "/state");
            }
        });
    }
    for (auto& t : workers) t.join();
    CHECK(failed == 0);
    CHECK(ok == 120);

    std::size_t player_inputs = 0;
    for (const auto& id : ids) {
        const auto events = live.server.service().store().load_session_events(id);
        for (std::size_t i = 0; i < events.size(); ++i) CHECK(events[i].sequence == i);
        for (const auto& e : events) player_inputs += e.kind == store::EventKind::PlayerInput;
        CHECK(store::replay_events(events).turns_with("lisa") > 0);
    }
    CHECK(player_inputs == 120);
}

TEST_CASE("sample config loads and points at bundled files") {
    const auto c = load_config(testing::source_dir() / "config/server.json", env_of({}));
    CHECK(c.use_stub);
    REQUIRE(c.scenarios.size() == 1);
    CHECK(fs::exists(c.scenarios[0]));
    CHECK(fs::exists(c.stub_script));
    CHECK(c.data_dir.lexically_normal() == (testing::source_dir() / "runtime").lexically_normal());
}
