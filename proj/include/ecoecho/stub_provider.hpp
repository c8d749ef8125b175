#pragma once

#include <atomic>
#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "ecoecho/llm_gateway.hpp"

namespace ecoecho::llm {

/// Scripted stand-in for the language model.
struct StubRule {
    enum class Failure { None, Error, Timeout };
    enum class AppliesTo { Both, Reply, Classify };

    std::string npc;      // empty matches every NPC
    std::string pattern;  // case-insensitive phrase in the player input
    std::string reply;
    std::optional<std::string> intent;
    double confidence = 0.0;
    Failure failure = Failure::None;
    AppliesTo applies_to = AppliesTo::Both;
};

struct StubScript {
    std::uint64_t seed = 0;
    std::vector<StubRule> rules;
    // Keyed by NPC id; "*" is the fallback list.
    std::map<std::string, std::vector<std::string>> default_replies;
    std::string empty_input_reply = "Go on, I'm listening. What did you want to tell me?";
    bool outage = false;
};

StubScript parse_stub_script(const nlohmann::json& j);
StubScript load_stub_script(std::istream& in);
StubScript load_stub_script_file(const std::filesystem::path& path);

/// Deterministic provider: first matching rule wins; otherwise a default reply
/// chosen by hashing (seed, npc, input, memory length). No hidden state besides
/// the outage switch, so the same request always yields the same response.
class StubProvider final : public TextProvider {
public:
    explicit StubProvider(StubScript script);

    ProviderResponse complete(const ProviderRequest& request) override;

    void set_outage(bool down) { outage_.store(down); }
    std::size_t calls() const { return calls_.load(); }
    const StubScript& script() const { return script_; }

private:
    const StubRule* match(const ProviderRequest& request, bool classify) const;
    std::string default_reply(const ProviderRequest& request) const;

    StubScript script_;
    std::atomic<bool> outage_;
    std::atomic<std::size_t> calls_{0};
};

} // namespace ecoecho::llm
