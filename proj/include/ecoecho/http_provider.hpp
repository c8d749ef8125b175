#pragma once

#include <chrono>
#include <string>

#include "ecoecho/llm_gateway.hpp"

namespace ecoecho::llm {

inline constexpr const char* kApiKeyEnv = "ECOECHO_API_KEY";

struct ProviderConfig {
    std::string endpoint = "http://127.0.0.1:11434/v1";  // base URL; "/chat/completions" is appended
    std::string model_name = "llama3.1:70b";
    std::chrono::milliseconds timeout{20000};
    int max_retries = 1;
    std::string api_key;  // filled from the environment, never from files

    RetryPolicy retry_policy() const { return {max_retries, std::chrono::milliseconds(200)}; }
};

/// Reads the API key from ECOECHO_API_KEY. Throws BadInput on a non-positive
/// timeout or negative max_retries.
ProviderConfig finalize_provider_config(ProviderConfig c);

/// OpenAI-compatible chat-completions client (works with vLLM, Ollama, etc.).
/// A timeout surfaces as ProviderTimeout; transport or HTTP failures and
/// malformed bodies as ProviderError. Retries are left to the gateway.
class HttpProvider final : public TextProvider {
public:
    explicit HttpProvider(ProviderConfig config);

    ProviderResponse complete(const ProviderRequest& request) override;

    const ProviderConfig& config() const { return config_; }

private:
    ProviderConfig config_;
    std::string origin_;  // scheme://host[:port]
    std::string path_;    // base path + /chat/completions
};

} // namespace ecoecho::llm
