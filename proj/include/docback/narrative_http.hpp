#pragma once

#include <string>

#include <json.hpp>

#include "docback/narrative.hpp"

namespace docback::narrative {

/// OpenAI-compatible chat-completions endpoint configuration. The API
/// key is never stored here; it is read from `api_key_env` when the
/// provider is constructed.
struct HttpProviderConfig {
    std::string endpoint_url;  // e.g. "https://api.openai.com/v1"
    std::string model;
    double temperature = 0.2;
    double timeout_s = 30.0;
    int max_retries = 3;
    double retry_backoff_s = 0.5;  // doubles per attempt
    std::string api_key_env = "DOCBACK_API_KEY";

    static HttpProviderConfig from_json(const nlohmann::json& doc);
    static HttpProviderConfig load_file(const std::string& path);
};

/// Chat-completions client with bounded retry on transient failures
/// (connection errors, 429, 5xx).
class HttpChatProvider : public TextProvider {
public:
    explicit HttpChatProvider(HttpProviderConfig config);

    std::string complete(const std::string& system_prompt,
                         const std::string& user_payload) const override;
    std::string id() const override { return "http:" + config_.model; }

private:
    HttpProviderConfig config_;
    std::string origin_;       // scheme://host[:port]
    std::string path_prefix_;  // path portion of endpoint_url
    std::string api_key_;
};

}  // namespace docback::narrative
