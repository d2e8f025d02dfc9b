#pragma once

#include <deque>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "json.hpp"
#include "reveca/comms.hpp"
#include "reveca/executor.hpp"
#include "reveca/memory.hpp"
#include "reveca/planning.hpp"
#include "reveca/reasoner.hpp"
#include "reveca/validation.hpp"

namespace reveca {

struct AgentConfig {
    int top_k = 3;  // kTopKAll passes every live record
    int ladder = 4;
    PlanningFlags planning;
    bool no_validation = false;
    bool full_observation = false;
    bool refine_messages = false;
    bool communicate = true;   // false for the no-communication session mode
    bool always_ask = false;   // query the collaborators before every skill
    bool log_prompts = false;
    bool dump_memory = false;
};

struct TurnInput {
    int step = 0;
    GridPos position;
    std::vector<ObjectId> held;
    Observation observation;
    std::vector<Message> inbox;
};

// One planning call, as seen by the noise audit.
struct PlanningAudit {
    int step = 0;
    AgentId agent = -1;
    int k = 0;
    int live_non_none = 0;
    std::vector<std::pair<ObjectId, Relevance>> top_k;
};

struct Decision {
    ActionRequest action;
    std::vector<nlohmann::json> events;
    std::vector<nlohmann::json> validation;
    std::vector<nlohmann::json> prompts;
    std::optional<nlohmann::json> memory_dump;
    std::vector<PlanningAudit> audits;
    std::vector<int> session_queries;  // queries_sent of sessions that finished this turn
};

class Agent {
public:
    virtual ~Agent() = default;
    virtual AgentId id() const = 0;
    virtual Decision decide(const TurnInput& input) = 0;
};

struct Teammate {
    AgentId id = -1;
    std::string name;
};

class RevecaAgent : public Agent {
public:
    RevecaAgent(AgentId id, std::string name, Goal goal, MapKnowledge map, std::vector<Teammate> teammates,
                AgentConfig config, std::shared_ptr<Reasoner> reasoner);

    AgentId id() const override { return id_; }
    Decision decide(const TurnInput& input) override;

    // Scripted mode: plans are taken from this queue instead of the planner. By default they
    // skip validation and the agent idles once the queue is empty. With `then_plan` the
    // scripted plans are validated like planner output and the planner takes over afterwards.
    void set_script(std::vector<Plan> plans, bool then_plan = false);

    const AgentMemory& memory() const { return memory_; }
    const std::optional<SkillExecution>& execution() const { return exec_; }
    const std::optional<ValidationSession>& session() const { return session_; }

private:
    struct PendingAnswer {
        AgentId to = -1;
        std::optional<ObjectId> object_id;
        std::string object_name;
    };

    void handle_message(const Message& m, int step, Decision& out);
    void ingest_observation(const TurnInput& in, Decision& out);
    void store_snapshot(const ObjectSnapshot& s, int step, Decision& out);
    void refresh_stale(int step, Decision& out);
    Relevance estimate_relevance(const ObjectSnapshot& s, Decision& out);
    std::vector<std::pair<ObjectId, std::string>> held_named(const std::vector<ObjectId>& held) const;

    ActionRequest choose_action(const TurnInput& in, Decision& out);
    std::optional<Message> next_message(const TurnInput& in, Decision& out);
    void make_plan(const TurnInput& in, Decision& out);
    void begin_validation(const Plan& plan, const TurnInput& in, Decision& out);
    void settle_validation(const TurnInput& in, Decision& out);
    void finish_skill(const TurnInput& in, Decision& out);
    void log_requests(const std::vector<ReasonerRequest>& requests, Decision& out) const;
    Message outgoing(MessageKind kind, nlohmann::json payload, std::optional<AgentId> to, Decision& out);
    nlohmann::json observation_payload(const TurnInput& in) const;

    AgentId id_;
    std::string name_;
    std::vector<Teammate> teammates_;
    AgentConfig config_;
    std::shared_ptr<Reasoner> reasoner_;
    AgentMemory memory_;

    std::optional<SkillExecution> exec_;
    std::optional<ValidationSession> session_;
    std::optional<AgentId> query_to_;
    std::deque<PendingAnswer> answers_;
    std::optional<nlohmann::json> announcement_;
    std::vector<std::pair<ObjectId, std::string>> carrying_at_put_;
    std::map<ObjectId, std::string> held_names_;
    bool init_sent_ = false;
    std::string last_sync_;
    std::optional<std::vector<Plan>> script_;
    bool script_then_plan_ = false;
};

}  // namespace reveca
