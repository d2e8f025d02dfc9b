#include <cstdlib>
#include <thread>

#include "httplib.h"
#include "reveca/errors.hpp"
#include "reveca/reasoner.hpp"

namespace reveca {

using nlohmann::json;

EndpointConfig EndpointConfig::from_json(const json& j) {
    EndpointConfig c;
    c.url = j.value("url", c.url);
    c.model = j.value("model", c.model);
    c.temperature = j.value("temperature", c.temperature);
    c.top_p = j.value("top_p", c.top_p);
    c.max_tokens = j.value("max_tokens", c.max_tokens);
    c.api_key_env = j.value("api_key_env", c.api_key_env);
    c.retries = j.value("retries", c.retries);
    c.backoff = std::chrono::milliseconds(j.value("backoff_ms", static_cast<int>(c.backoff.count())));
    c.timeout = std::chrono::seconds(j.value("timeout_s", static_cast<int>(c.timeout.count())));
    if (c.retries < 0 || c.max_tokens <= 0) throw ConfigError("invalid endpoint settings");
    return c;
}

json EndpointConfig::to_json() const {
    return {{"url", url},
            {"model", model},
            {"temperature", temperature},
            {"top_p", top_p},
            {"max_tokens", max_tokens},
            {"api_key_env", api_key_env},
            {"retries", retries},
            {"backoff_ms", backoff.count()},
            {"timeout_s", timeout.count()}};
}

RemoteReasoner::RemoteReasoner(EndpointConfig config) : config_(std::move(config)) {}

json RemoteReasoner::request_body(const json& messages) const {
    return {{"model", config_.model},
            {"messages", messages},
            {"temperature", config_.temperature},
            {"top_p", config_.top_p},
            {"max_tokens", config_.max_tokens}};
}

namespace {

struct SplitUrl {
    std::string origin;  // scheme://host:port
    std::string path;
};

SplitUrl split_url(const std::string& url) {
    const auto scheme_end = url.find("://");
    if (scheme_end == std::string::npos) throw ConfigError("endpoint url needs a scheme: " + url);
    const auto path_start = url.find('/', scheme_end + 3);
    if (path_start == std::string::npos) return {url, "/"};
    return {url.substr(0, path_start), url.substr(path_start)};
}

}  // namespace

std::string RemoteReasoner::complete(const json& messages) {
    const auto [origin, path] = split_url(config_.url);
    httplib::Client client(origin);
    client.set_connection_timeout(config_.timeout);
    client.set_read_timeout(config_.timeout);
    httplib::Headers headers;
    if (const char* key = std::getenv(config_.api_key_env.c_str()); key && *key)
        headers.emplace("Authorization", std::string("Bearer ") + key);
    const auto body = request_body(messages).dump();

    std::string last_error;
    for (int attempt = 0; attempt <= config_.retries; ++attempt) {
        if (attempt > 0) std::this_thread::sleep_for(config_.backoff * (1 << (attempt - 1)));
        ++live_calls_;
        auto res = client.Post(path, headers, body, "application/json");
        if (!res) {
            last_error = "transport error: " + httplib::to_string(res.error());
            continue;
        }
        if (res->status != 200) {
            last_error = "HTTP " + std::to_string(res->status);
            continue;
        }
        try {
            auto j = json::parse(res->body);
            return j.at("choices").at(0).at("message").at("content").get<std::string>();
        } catch (const json::exception& e) {
            last_error = std::string("malformed completion body: ") + e.what();
        }
    }
    throw ReasonerUnavailable(config_.url + ": " + last_error);
}

ReasonerReply RemoteReasoner::answer(const ReasonerRequest& request) {
    const auto started = std::chrono::steady_clock::now();
    json messages = json::array({
        {{"role", "system"}, {"content", "You are a cooperative household agent. Follow the answer format exactly."}},
        {{"role", "user"}, {"content", request.rendered_prompt}},
    });
    ReasonerReply reply;
    reply.kind = request.kind;
    reply.raw_text = complete(messages);
    try {
        reply.parsed = parse_reply(request, reply.raw_text);
    } catch (const ParseFailure&) {
        messages.push_back({{"role", "assistant"}, {"content", reply.raw_text}});
        messages.push_back({{"role", "user"}, {"content", format_reminder(request.kind)}});
        reply.raw_text = complete(messages);
        reply.parsed = parse_reply(request, reply.raw_text);
    }
    reply.latency = std::chrono::steady_clock::now() - started;
    return reply;
}

}  // namespace reveca
