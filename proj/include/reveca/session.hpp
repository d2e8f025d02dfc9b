#pragma once

#include <functional>
#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <set>
#include <string>
#include <vector>

#include "json.hpp"
#include "reveca/harness.hpp"

namespace reveca {

enum class SessionMode { Reveca, AlwaysAsk, NoComm };
enum class SessionPhase { AwaitingHumanAction, Advancing, Ended };

std::string_view to_string(SessionMode m);
std::optional<SessionMode> parse_session_mode(std::string_view s);
std::string_view to_string(SessionPhase p);

struct SessionConfig {
    RunConfig run;
    std::string task = "prepare_afternoon_tea";
    unsigned long long seed = 1;
    AgentId human_agent_id = 0;
    SessionMode mode = SessionMode::Reveca;

    // {"task", "seed", "human_agent_id", "mode", "run": RunConfig}. Throws ConfigError.
    static SessionConfig from_json(const nlohmann::json& j);
};

struct SubmitResult {
    bool accepted = false;
    std::string error;
    nlohmann::json legal_actions = nlohmann::json::array();  // filled on rejection
    nlohmann::json broadcast;                                // the step result on success
};

// One live episode with a human-driven agent. The kernel only steps inside submit_*.
class Session {
public:
    Session(std::string id, SessionConfig config);

    const std::string& id() const { return id_; }
    SessionPhase phase() const;
    int step_index() const;

    // Human-view snapshot: only what the human agent could know.
    nlohmann::json snapshot() const;

    // `action_id` is a legal primitive id ("move:E", "grasp:21", ...) or "noop".
    SubmitResult submit_action(const std::string& action_id);
    // Chat becomes the human's message for this step.
    SubmitResult submit_chat(const std::string& text);

    // Fan-out of step results and snapshots to connected clients.
    int subscribe(std::function<void(const std::string&)> sink);
    void unsubscribe(int token);
    std::size_t client_count() const;

    // Object ids the human has legitimately learned about so far (observed, held, goal, chat).
    std::set<ObjectId> known_object_ids() const;
    const WorldState& ground_truth() const { return runner_->state(); }

private:
    nlohmann::json snapshot_locked() const;
    nlohmann::json legal_locked() const;
    SubmitResult advance_locked(const ActionRequest& action);
    void learn_locked();
    void broadcast(const std::string& text);

    std::string id_;
    SessionConfig config_;
    std::unique_ptr<EpisodeRunner> runner_;
    SessionPhase phase_ = SessionPhase::AwaitingHumanAction;
    std::set<RoomId> visited_rooms_;
    std::set<ObjectId> known_ids_;
    std::map<ObjectId, std::string> seen_names_;
    std::vector<nlohmann::json> chat_;
    std::optional<nlohmann::json> open_query_;  // last query addressed to the human
    mutable std::mutex mu_;

    mutable std::mutex sinks_mu_;
    std::map<int, std::function<void(const std::string&)>> sinks_;
    int next_token_ = 1;
};

class SessionManager {
public:
    // Returns the new session id. Throws ConfigError.
    std::string create(const nlohmann::json& config);
    std::shared_ptr<Session> find(const std::string& id) const;
    std::size_t size() const;

private:
    mutable std::mutex mu_;
    std::map<std::string, std::shared_ptr<Session>> sessions_;
    int next_id_ = 1;
};

// HTTP + WebSocket front end.
//   POST /sessions                      -> {"session_id"}
//   GET  /sessions/{id}/state           -> snapshot
//   POST /sessions/{id}/action          {"action": id} | {"chat": text} -> step result
//   WS   /sessions/{id}/stream          pushes {"type": "snapshot"|"step_result", ...}
class SessionServer {
public:
    explicit SessionServer(SessionManager& manager);
    ~SessionServer();

    // Binds and serves on a background thread. Port 0 picks a free port.
    void start(const std::string& address, unsigned short port);
    unsigned short port() const { return port_; }
    void stop();
    // Serves on the calling thread until stop().
    void run_blocking(const std::string& address, unsigned short port);

private:
    struct Impl;
    SessionManager& manager_;
    std::unique_ptr<Impl> impl_;
    unsigned short port_ = 0;
};

}  // namespace reveca
