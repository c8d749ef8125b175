// Shared helpers for the unit and acceptance tests.
#pragma once

#include <atomic>
#include <filesystem>
#include <fstream>
#include <random>
#include <string>

#include <json.hpp>

#include "ecoecho/scenario.hpp"
#include "ecoecho/stub_provider.hpp"

#ifndef ECOECHO_SOURCE_DIR
#error "ECOECHO_SOURCE_DIR must point at the repository root"
#endif

namespace ecoecho::testing {

inline std::filesystem::path source_dir() { return ECOECHO_SOURCE_DIR; }
inline std::filesystem::path data_path(const std::string& rel) { return source_dir() / "data" / rel; }

inline ScenarioPtr ecoecho_scenario() {
    static const ScenarioPtr s =
        std::make_shared<const ScenarioDefinition>(load_scenario_file(data_path("scenarios/ecoecho.json")));
    return s;
}

inline nlohmann::json ecoecho_scenario_json() {
    std::ifstream in(data_path("scenarios/ecoecho.json"));
    return nlohmann::json::parse(in);
}

inline llm::StubScript ecoecho_stub() { return llm::load_stub_script_file(data_path("stubs/ecoecho_stub.json")); }

inline nlohmann::json load_json(const std::filesystem::path& p) {
    std::ifstream in(p);
    return nlohmann::json::parse(in);
}

/// Fresh directory under the system temp dir, removed on destruction.
class TempDir {
public:
    explicit TempDir(const std::string& tag = "ecoecho") {
        static std::atomic<int> counter{0};
        std::random_device rd;
        path_ = std::filesystem::temp_directory_path() /
                (tag + "-" + std::to_string(rd()) + "-" + std::to_string(counter++));
        std::filesystem::create_directories(path_);
    }
    ~TempDir() {
        std::error_code ec;
        std::filesystem::remove_all(path_, ec);
    }
    TempDir(const TempDir&) = delete;
    TempDir& operator=(const TempDir&) = delete;

    const std::filesystem::path& path() const { return path_; }

private:
    std::filesystem::path path_;
};

} // namespace ecoecho::testing
