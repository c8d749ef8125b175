#include "ecoecho/stub_provider.hpp"

#include <algorithm>
#include <fstream>
#include <random>

#include "ecoecho/error.hpp"
#include "ecoecho/text.hpp"

namespace ecoecho::llm {

using nlohmann::json;

namespace {

std::uint64_t fnv1a(std::string_view s, std::uint64_t h = 1469598103934665603ULL) {
    for (unsigned char c : s) {
        h ^= c;
        h *= 1099511628211ULL;
    }
    return h;
}

[[noreturn]] void stub_schema_error(const std::string& what) {
    fail(ErrorCode::SchemaError, "stub script: " + what);
}

} // namespace

StubScript parse_stub_script(const json& j) {
    if (!j.is_object()) stub_schema_error("expected an object");
    StubScript s;
    s.seed = j.value("seed", std::uint64_t{0});
    s.outage = j.value("outage", false);
    if (j.contains("empty_input_reply")) s.empty_input_reply = j.at("empty_input_reply").get<std::string>();
    if (j.contains("default_replies")) {
        const json& d = j.at("default_replies");
        if (d.is_array()) {
            s.default_replies["*"] = d.get<std::vector<std::string>>();
        } else if (d.is_object()) {
            for (const auto& [k, v] : d.items()) s.default_replies[k] = v.get<std::vector<std::string>>();
        } else {
            stub_schema_error("default_replies must be an array or an object");
        }
    }
    for (const auto& r : j.value("rules", json::array())) {
        StubRule rule;
        if (!r.contains("pattern") || !r.at("pattern").is_string()) stub_schema_error("rule without pattern");
        rule.pattern = r.at("pattern").get<std::string>();
        rule.npc = r.value("npc", std::string{});
        rule.reply = r.value("reply", std::string{});
        if (r.contains("intent") && r.at("intent").is_string()) rule.intent = r.at("intent").get<std::string>();
        rule.confidence = r.value("confidence", rule.intent ? 1.0 : 0.0);
        const std::string failure = r.value("fail", std::string{"none"});
        if (failure == "error") rule.failure = StubRule::Failure::Error;
        else if (failure == "timeout") rule.failure = StubRule::Failure::Timeout;
        else if (failure != "none") stub_schema_error("unknown fail mode '" + failure + "'");
        const std::string applies = r.value("applies_to", std::string{"both"});
        if (applies == "reply") rule.applies_to = StubRule::AppliesTo::Reply;
        else if (applies == "classify") rule.applies_to = StubRule::AppliesTo::Classify;
        else if (applies != "both") stub_schema_error("unknown applies_to '" + applies + "'");
        s.rules.push_back(std::move(rule));
    }
    return s;
}

StubScript load_stub_script(std::istream& in) {
    const json j = json::parse(in, nullptr, false);
    if (j.is_discarded()) stub_schema_error("not well-formed JSON");
    return parse_stub_script(j);
}

StubScript load_stub_script_file(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) fail(ErrorCode::IoError, "cannot open stub script " + path.string());
    return load_stub_script(in);
}

StubProvider::StubProvider(StubScript script) : script_(std::move(script)), outage_(script_.outage) {}

const StubRule* StubProvider::match(const ProviderRequest& request, bool classify) const {
    for (const auto& r : script_.rules) {
        if (!r.npc.empty() && r.npc != request.npc_id) continue;
        if (classify && r.applies_to == StubRule::AppliesTo::Reply) continue;
        if (!classify && r.applies_to == StubRule::AppliesTo::Classify) continue;
        if (!text::contains_phrase(request.player_input, r.pattern)) continue;
        if (r.failure != StubRule::Failure::None) return &r;
        if (classify) {
            if (!r.intent) continue;
            const auto& allowed = request.allowed_intents;
            if (std::find(allowed.begin(), allowed.end(), *r.intent) == allowed.end()) continue;
        } else if (r.reply.empty()) {
            continue;
        }
        return &r;
    }
    return nullptr;
}

std::string StubProvider::default_reply(const ProviderRequest& request) const {
    if (text::trim(request.player_input).empty()) return script_.empty_input_reply;
    auto it = script_.default_replies.find(request.npc_id);
    if (it == script_.default_replies.end() || it->second.empty()) it = script_.default_replies.find("*");
    if (it == script_.default_replies.end() || it->second.empty())
        return "I see. Tell me more about that.";
    std::uint64_t h = fnv1a(request.npc_id, script_.seed ^ 0x9e3779b97f4a7c15ULL);
    h = fnv1a(text::normalize(request.player_input), h);
    h ^= request.messages.size();
    std::mt19937_64 rng(h);
    std::uniform_int_distribution<std::size_t> pick(0, it->second.size() - 1);
    return it->second[pick(rng)];
}

ProviderResponse StubProvider::complete(const ProviderRequest& request) {
    ++calls_;
    if (outage_.load()) fail(ErrorCode::ProviderError, "stub provider outage");
    const bool classify = request.purpose == ProviderRequest::Purpose::Classify;
    const StubRule* rule = match(request, classify);
    if (rule && rule->failure == StubRule::Failure::Error)
        fail(ErrorCode::ProviderError, "stub rule '" + rule->pattern + "' forces a provider error");
    if (rule && rule->failure == StubRule::Failure::Timeout)
        fail(ErrorCode::ProviderTimeout, "stub rule '" + rule->pattern + "' forces a timeout");

    if (classify) {
        json answer{{"intent", nullptr}, {"confidence", 0.0}};
        if (rule) answer = {{"intent", *rule->intent}, {"confidence", rule->confidence}};
        return {answer.dump()};
    }
    return {rule ? rule->reply : default_reply(request)};
}

} // namespace ecoecho::llm
