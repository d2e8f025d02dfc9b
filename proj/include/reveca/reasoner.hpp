#pragma once

#include <atomic>
#include <chrono>
#include <filesystem>
#include <map>
#include <memory>
#include <mutex>
#include <string>

#include "json.hpp"

namespace reveca {

enum class RequestKind { Relevance, Plan, Trajectory, Refine };

std::string_view to_string(RequestKind k);
std::optional<RequestKind> parse_request_kind(std::string_view s);

struct ReasonerRequest {
    RequestKind kind = RequestKind::Relevance;
    std::string rendered_prompt;
    nlohmann::json context;  // structured input the prompt was rendered from
    bool cot_enabled = true;
};

struct ReasonerReply {
    RequestKind kind = RequestKind::Relevance;
    nlohmann::json parsed;  // {"choice": "..."} plus kind-specific fields
    std::string raw_text;
    std::chrono::duration<double, std::milli> latency{0};
};

// Builds a request with its prompt rendered from the context.
ReasonerRequest make_request(RequestKind kind, nlohmann::json context, bool cot_enabled);

// Prompt templates. Pure functions of (kind, context, cot).
std::string render_prompt(RequestKind kind, const nlohmann::json& context, bool cot_enabled);
inline constexpr std::string_view kCotInstruction = "Let's think step by step.";
// Appended to the conversation when a reply did not follow the answer grammar.
std::string format_reminder(RequestKind kind);

// Reply grammar: the last line "Answer: [TOKEN]" for choice kinds, "Message: TEXT" for Refine.
// Throws ParseFailure when the reply does not fit the grammar for this request.
nlohmann::json parse_reply(const ReasonerRequest& request, const std::string& raw_text);

class Reasoner {
public:
    virtual ~Reasoner() = default;
    // Throws ParseFailure or ReasonerUnavailable.
    virtual ReasonerReply answer(const ReasonerRequest& request) = 0;
    virtual std::string backend() const = 0;
};

// Deterministic rubric standing in for model judgment.
class OracleReasoner : public Reasoner {
public:
    ReasonerReply answer(const ReasonerRequest& request) override;
    std::string backend() const override { return "oracle"; }

    // The reply text the rubric produces, before parsing.
    static std::string reply_text(const ReasonerRequest& request);
};

// Rubric pieces, exposed for the planner's fallback path and for tests.
std::string oracle_relevance(const nlohmann::json& context);
std::string oracle_plan_choice(const nlohmann::json& context);
std::string oracle_likelihood(const nlohmann::json& context);

struct EndpointConfig {
    std::string url = "http://127.0.0.1:8000/v1/chat/completions";
    std::string model = "gpt-4o-mini";
    double temperature = 0.7;
    double top_p = 1.0;
    int max_tokens = 1024;
    std::string api_key_env = "REVECA_API_KEY";
    int retries = 2;
    std::chrono::milliseconds backoff{250};
    std::chrono::seconds timeout{60};

    static EndpointConfig from_json(const nlohmann::json& j);
    nlohmann::json to_json() const;
};

// OpenAI-compatible chat-completions client.
class RemoteReasoner : public Reasoner {
public:
    explicit RemoteReasoner(EndpointConfig config);
    ReasonerReply answer(const ReasonerRequest& request) override;
    std::string backend() const override { return "remote"; }

    // Request body for a conversation; exposed for contract tests.
    nlohmann::json request_body(const nlohmann::json& messages) const;
    int live_calls() const { return live_calls_.load(); }

private:
    std::string complete(const nlohmann::json& messages);

    EndpointConfig config_;
    std::atomic<int> live_calls_{0};
};

std::string prompt_hash(std::string_view rendered_prompt);

// Record/replay layer keyed by a hash of the rendered prompt.
class FixtureReasoner : public Reasoner {
public:
    enum class Mode { Record, Replay };

    // Record mode wraps `inner` and appends every exchange to `path`.
    FixtureReasoner(std::filesystem::path path, std::shared_ptr<Reasoner> inner);
    // Replay mode answers only from `path`; misses raise FixtureMiss.
    explicit FixtureReasoner(std::filesystem::path path);

    ReasonerReply answer(const ReasonerRequest& request) override;
    std::string backend() const override { return mode_ == Mode::Record ? "fixture-record" : "fixture-replay"; }
    Mode mode() const { return mode_; }
    std::size_t size() const;

private:
    void append(const std::string& hash, const ReasonerRequest& request, const std::string& raw);

    std::filesystem::path path_;
    std::shared_ptr<Reasoner> inner_;
    Mode mode_;
    mutable std::mutex mu_;
    std::map<std::string, std::string> entries_;  // prompt hash -> raw_text
};

}  // namespace reveca
