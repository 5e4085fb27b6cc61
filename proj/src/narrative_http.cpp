#define CPPHTTPLIB_OPENSSL_SUPPORT
#include <httplib.h>

#include "docback/narrative_http.hpp"

#include <chrono>
#include <cmath>
#include <cstdlib>
#include <fstream>
#include <thread>

#include "docback/errors.hpp"

namespace docback::narrative {

namespace {

bool retriable_status(int status) {
    return status == 429 || (status >= 500 && status < 600);
}

}  // namespace

HttpProviderConfig HttpProviderConfig::from_json(const nlohmann::json& doc) {
    if (!doc.is_object()) throw ValidationError("provider config: expected an object");
    HttpProviderConfig config;
    if (!doc.contains("endpoint_url") || !doc["endpoint_url"].is_string()) {
        throw ValidationError("provider config: missing endpoint_url");
    }
    config.endpoint_url = doc["endpoint_url"].get<std::string>();
    if (!doc.contains("model") || !doc["model"].is_string()) {
        throw ValidationError("provider config: missing model");
    }
    config.model = doc["model"].get<std::string>();
    config.temperature = doc.value("temperature", config.temperature);
    config.timeout_s = doc.value("timeout_s", config.timeout_s);
    config.max_retries = doc.value("max_retries", config.max_retries);
    config.retry_backoff_s = doc.value("retry_backoff_s", config.retry_backoff_s);
    config.api_key_env = doc.value("api_key_env", config.api_key_env);
    if (doc.contains("api_key")) {
        throw ValidationError("provider config: api keys belong in the environment, not in files");
    }
    if (config.max_retries < 0) throw ValidationError("provider config: max_retries must be >= 0");
    if (config.timeout_s <= 0.0) throw ValidationError("provider config: timeout_s must be > 0");
    return config;
}

HttpProviderConfig HttpProviderConfig::load_file(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw ValidationError("provider config: cannot open '" + path + "'");
    nlohmann::json doc;
    try {
        doc = nlohmann::json::parse(in);
    } catch (const nlohmann::json::parse_error& e) {
        throw ValidationError("provider config '" + path + "': " + e.what());
    }
    return from_json(doc);
}

HttpChatProvider::HttpChatProvider(HttpProviderConfig config) : config_(std::move(config)) {
    const std::string& url = config_.endpoint_url;
    const auto scheme_end = url.find("://");
    if (scheme_end == std::string::npos) {
        throw ValidationError("provider config: endpoint_url needs a scheme, got '" + url + "'");
    }
    const auto path_start = url.find('/', scheme_end + 3);
    if (path_start == std::string::npos) {
        origin_ = url;
    } else {
        origin_ = url.substr(0, path_start);
        path_prefix_ = url.substr(path_start);
        while (!path_prefix_.empty() && path_prefix_.back() == '/') path_prefix_.pop_back();
    }

    const char* key = std::getenv(config_.api_key_env.c_str());
    if (key == nullptr || *key == '\0') {
        throw ProviderError(id(), "environment variable " + config_.api_key_env + " is not set");
    }
    api_key_ = key;
}

std::string HttpChatProvider::complete(const std::string& system_prompt,
                                       const std::string& user_payload) const {
    nlohmann::json body;
    body["model"] = config_.model;
    body["temperature"] = config_.temperature;
    body["messages"] = nlohmann::json::array(
        {{{"role", "system"}, {"content", system_prompt}},
         {{"role", "user"}, {"content", user_payload}}});
    const std::string body_text = body.dump();

    const auto timeout_sec = static_cast<time_t>(config_.timeout_s);
    const auto timeout_usec =
        static_cast<time_t>((config_.timeout_s - static_cast<double>(timeout_sec)) * 1e6);

    std::string last_error;
    for (int attempt = 0; attempt <= config_.max_retries; ++attempt) {
        if (attempt > 0) {
            const double backoff =
                std::min(8.0, config_.retry_backoff_s * std::pow(2.0, attempt - 1));
            std::this_thread::sleep_for(std::chrono::duration<double>(backoff));
        }

        httplib::Client client(origin_);
        client.set_connection_timeout(timeout_sec, timeout_usec);
        client.set_read_timeout(timeout_sec, timeout_usec);
        client.set_write_timeout(timeout_sec, timeout_usec);
        client.set_bearer_token_auth(api_key_);

        auto res = client.Post(path_prefix_ + "/chat/completions", body_text, "application/json");
        if (!res) {
            last_error = "connection failed: " + httplib::to_string(res.error());
            continue;
        }
        if (res->status == 200) {
            nlohmann::json reply;
            try {
                reply = nlohmann::json::parse(res->body);
            } catch (const nlohmann::json::parse_error& e) {
                throw ProviderError(id(), std::string("malformed response body: ") + e.what());
            }
            if (!reply.contains("choices") || reply["choices"].empty() ||
                !reply["choices"][0].contains("message") ||
                !reply["choices"][0]["message"].contains("content")) {
                throw ProviderError(id(), "response missing choices[0].message.content");
            }
            return reply["choices"][0]["message"]["content"].get<std::string>();
        }
        if (!retriable_status(res->status)) {
            throw ProviderError(id(), "HTTP " + std::to_string(res->status) + ": " + res->body);
        }
        last_error = "HTTP " + std::to_string(res->status);
    }
    throw ProviderError(id(), "gave up after " + std::to_string(config_.max_retries + 1) +
                                  " attempts; last error: " + last_error);
}

}  // namespace docback::narrative
