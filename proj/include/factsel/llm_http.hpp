#pragma once

// HTTP chat-completions backend. Kept out of llm_gateway.hpp so tests that
// only need the mock do not pull in the HTTP client.

#include <cstdlib>
#include <string>

#include <httplib.h>
#include <json.hpp>

#include "factsel/llm_gateway.hpp"

namespace factsel {

/// Talks the common chat-completions JSON shape: POST {messages, model, n,
/// temperature, seed} and read choices[*].message.content. Any compatible
/// endpoint works; the bearer token comes from an environment variable.
class HttpChatBackend final : public ChatBackend {
public:
    explicit HttpChatBackend(std::string api_key_env = "FACTSEL_API_KEY")
        : api_key_env_(std::move(api_key_env)) {}

    std::string complete(const std::string& prompt_text, const QueryConfig& cfg,
                         int response_index) override {
        auto [host, path] = split_url(cfg.endpoint_url);
        httplib::Client client(host);
        client.set_read_timeout(std::chrono::duration_cast<std::chrono::seconds>(cfg.timeout));
        client.set_connection_timeout(std::chrono::seconds(10));
        httplib::Headers headers;
        if (const char* key = std::getenv(api_key_env_.c_str()))
            headers.emplace("Authorization", std::string("Bearer ") + key);

        nlohmann::json req;
        req["model"] = cfg.model_id;
        req["messages"] = {{{"role", "user"}, {"content", prompt_text}}};
        req["n"] = 1;
        req["temperature"] = cfg.temperature;
        if (cfg.seed) req["seed"] = *cfg.seed + response_index;

        auto res = client.Post(path, headers, req.dump(), "application/json");
        if (!res)
            throw Error("chat endpoint unreachable: " + cfg.endpoint_url + " (" +
                        httplib::to_string(res.error()) + ")");
        if (res->status != 200)
            throw Error("chat endpoint returned HTTP " + std::to_string(res->status) + ": " +
                        res->body.substr(0, 200));
        nlohmann::json body = nlohmann::json::parse(res->body);
        const auto& choices = body.at("choices");
        if (choices.empty()) throw Error("chat endpoint returned no choices");
        return choices.at(0).at("message").at("content").get<std::string>();
    }

private:
    static std::pair<std::string, std::string> split_url(const std::string& url) {
        if (url.empty()) throw Error("no endpoint_url configured");
        std::string rest = url;
        std::string scheme = "http://";
        if (rest.rfind("https://", 0) == 0) scheme = "https://", rest = rest.substr(8);
        else if (rest.rfind("http://", 0) == 0) rest = rest.substr(7);
        std::size_t slash = rest.find('/');
        std::string host = scheme + rest.substr(0, slash);
        std::string path = slash == std::string::npos ? "/v1/chat/completions" : rest.substr(slash);
        return {host, path};
    }

    std::string api_key_env_;
};

} // namespace factsel
