#include "ecoecho/http_provider.hpp"

#include <cstdlib>

#include <httplib.h>
#include <json.hpp>

#include "ecoecho/error.hpp"

namespace ecoecho::llm {

using nlohmann::json;

ProviderConfig finalize_provider_config(ProviderConfig c) {
    if (c.timeout.count() <= 0) fail(ErrorCode::BadInput, "provider timeout must be positive");
    if (c.max_retries < 0) fail(ErrorCode::BadInput, "provider max_retries must be >= 0");
    if (const char* key = std::getenv(kApiKeyEnv)) c.api_key = key;
    return c;
}

HttpProvider::HttpProvider(ProviderConfig config) : config_(std::move(config)) {
    const auto scheme_end = config_.endpoint.find("://");
    if (scheme_end == std::string::npos)
        fail(ErrorCode::BadInput, "provider endpoint needs a scheme: " + config_.endpoint);
    const auto path_start = config_.endpoint.find('/', scheme_end + 3);
    origin_ = config_.endpoint.substr(0, path_start);
    std::string base = path_start == std::string::npos ? "" : config_.endpoint.substr(path_start);
    while (!base.empty() && base.back() == '/') base.pop_back();
    path_ = base + "/chat/completions";
}

ProviderResponse HttpProvider::complete(const ProviderRequest& request) {
    json messages = json::array();
    for (const auto& m : request.messages) messages.push_back({{"role", to_string(m.role)}, {"content", m.content}});
    json body{{"model", config_.model_name}, {"messages", messages}, {"stream", false}};
    if (request.purpose == ProviderRequest::Purpose::Classify) body["temperature"] = 0;

    httplib::Client client(origin_);
    const auto secs = std::chrono::duration_cast<std::chrono::seconds>(config_.timeout);
    const auto usecs = std::chrono::duration_cast<std::chrono::microseconds>(config_.timeout - secs);
    client.set_connection_timeout(secs.count(), usecs.count());
    client.set_read_timeout(secs.count(), usecs.count());
    client.set_write_timeout(secs.count(), usecs.count());
    httplib::Headers headers;
    if (!config_.api_key.empty()) headers.emplace("Authorization", "Bearer " + config_.api_key);

    auto res = client.Post(path_, headers, body.dump(), "application/json");
    if (!res) {
        const auto err = res.error();
        if (err == httplib::Error::ConnectionTimeout || err == httplib::Error::Read)
            fail(ErrorCode::ProviderTimeout, "provider did not answer within " +
                                                 std::to_string(config_.timeout.count()) + " ms");
        fail(ErrorCode::ProviderError, "provider request failed: " + httplib::to_string(err));
    }
    if (res->status != 200)
        fail(ErrorCode::ProviderError, "provider returned HTTP " + std::to_string(res->status));
    const json j = json::parse(res->body, nullptr, false);
    try {
        if (j.is_discarded()) throw std::runtime_error("not JSON");
        return {j.at("choices").at(0).at("message").at("content").get<std::string>()};
    } catch (const std::exception&) {
        fail(ErrorCode::ProviderError, "provider response has no choices[0].message.content");
    }
}

} // namespace ecoecho::llm
