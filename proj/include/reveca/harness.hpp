#pragma once

#include <filesystem>
#include <map>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "json.hpp"
#include "reveca/agent.hpp"
#include "reveca/reasoner.hpp"
#include "reveca/scenario.hpp"
#include "reveca/world.hpp"

namespace reveca {

inline constexpr int kTranscriptSchemaVersion = 1;

enum class Backend { Oracle, Remote, FixtureRecord, FixtureReplay };
std::string_view to_string(Backend b);
std::optional<Backend> parse_backend(std::string_view s);

struct RunConfig {
    std::string label = "default";
    std::vector<std::string> tasks;  // empty means every built-in task
    std::vector<unsigned long long> seeds = {1};
    int agent_count = 2;
    int horizon = kDefaultHorizon;
    int top_k = 3;  // kTopKAll for "Inf"
    int ladder = 4;
    int dummy_count = 0;
    PlanningFlags planning;
    bool no_validation = false;
    bool full_observation = false;
    bool refine_messages = false;
    bool log_prompts = false;
    bool dump_memory = false;
    Backend backend = Backend::Oracle;
    std::string fixture_path;
    EndpointConfig endpoint;
    std::string map_path;  // empty uses the built-in house
    std::string transcript_dir;
    std::string report_path;
    int workers = 1;

    // Throws ConfigError on out-of-range values.
    void validate() const;
    std::vector<std::string> task_list() const;
    AgentConfig agent_config() const;

    static RunConfig from_json(const nlohmann::json& j);
    nlohmann::json to_json() const;
};

std::shared_ptr<Reasoner> make_reasoner(const RunConfig& config);
MapSpec map_for(const RunConfig& config);

struct EpisodeResult {
    std::string task;
    unsigned long long seed = 0;
    Termination termination;
    EpisodeMetrics metrics;
    std::string transcript;  // JSON lines
    std::vector<PlanningAudit> audits;
    std::vector<int> session_queries;
    int noise_violations = 0;
    int planning_calls = 0;
    std::optional<std::string> error;
};

// Steps one episode round by round. Agents without a controller (the human in a session)
// supply their action through `external`.
class EpisodeRunner {
public:
    EpisodeRunner(RunConfig config, Scenario scenario, std::map<AgentId, std::unique_ptr<Agent>> agents,
                  unsigned long long seed);

    // One round: every controlled agent decides, the kernel steps once.
    void step_round(const JointAction& external = {});
    bool done() const { return termination_.done(); }
    const Termination& termination() const { return termination_; }
    EpisodeMetrics metrics() const { return current_metrics(scenario_.state, termination_); }

    const WorldState& state() const { return scenario_.state; }
    const Goal& goal() const { return scenario_.goal; }
    const std::string& task() const { return scenario_.task_name; }
    Agent* agent(AgentId id);

    // Kernel and agent events of the last round.
    const nlohmann::json& last_step() const { return last_step_; }

    // Closes the transcript with the result line and returns everything.
    EpisodeResult finish(std::optional<std::string> error = std::nullopt);

private:
    void write(const nlohmann::json& line);
    void audit(const PlanningAudit& a);

    RunConfig config_;
    Scenario scenario_;
    std::map<AgentId, std::unique_ptr<Agent>> agents_;
    unsigned long long seed_;
    Termination termination_;
    std::string transcript_;
    nlohmann::json last_step_;
    std::vector<PlanningAudit> audits_;
    std::vector<int> session_queries_;
    int noise_violations_ = 0;
};

Scenario make_scenario(const RunConfig& config, const std::string& task, unsigned long long seed);

// One RevecaAgent per body, all sharing `reasoner`.
std::map<AgentId, std::unique_ptr<Agent>> make_agents(const RunConfig& config, const Scenario& scenario,
                                                      std::shared_ptr<Reasoner> reasoner,
                                                      const AgentConfig& agent_config);

// Runs to termination. A ReasonerUnavailable is caught and reported in `error` with the
// partial transcript.
EpisodeResult run_episode(const RunConfig& config, const std::string& task, unsigned long long seed,
                          std::shared_ptr<Reasoner> reasoner = nullptr);

EpisodeResult run_to_end(EpisodeRunner& runner);

}  // namespace reveca
