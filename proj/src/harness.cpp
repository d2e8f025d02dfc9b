#include "reveca/harness.hpp"

#include <algorithm>

#include "reveca/errors.hpp"
#include "reveca/serialize.hpp"

namespace reveca {

using nlohmann::json;

std::string_view to_string(Backend b) {
    switch (b) {
        case Backend::Oracle: return "oracle";
        case Backend::Remote: return "remote";
        case Backend::FixtureRecord: return "fixture-record";
        case Backend::FixtureReplay: return "fixture-replay";
    }
    return "oracle";
}

std::optional<Backend> parse_backend(std::string_view s) {
    for (auto b : {Backend::Oracle, Backend::Remote, Backend::FixtureRecord, Backend::FixtureReplay})
        if (to_string(b) == s) return b;
    return std::nullopt;
}

void RunConfig::validate() const {
    if (seeds.empty()) throw ConfigError("at least one seed is required");
    if (agent_count < 1 || agent_count > static_cast<int>(agent_names().size()))
        throw ConfigError("agent count must be in 1.." + std::to_string(agent_names().size()));
    if (horizon < 1) throw ConfigError("H must be >= 1");
    if (top_k != kTopKAll && top_k < 1) throw ConfigError("K must be >= 1 or Inf");
    if (ladder < 3 || ladder > 5) throw ConfigError("R must be 3, 4 or 5");
    if (dummy_count < 0) throw ConfigError("dummy_count must be >= 0");
    if (workers < 1) throw ConfigError("workers must be >= 1");
    if ((backend == Backend::FixtureRecord || backend == Backend::FixtureReplay) && fixture_path.empty())
        throw ConfigError("fixture backends need fixture_path");
    const auto& catalog = TaskCatalog::builtin();
    for (const auto& t : task_list())
        if (!catalog.find(t)) throw ConfigError("unknown task: " + t);
}

std::vector<std::string> RunConfig::task_list() const {
    return tasks.empty() ? TaskCatalog::builtin().names() : tasks;
}

AgentConfig RunConfig::agent_config() const {
    AgentConfig a;
    a.top_k = top_k;
    a.ladder = ladder;
    a.planning = planning;
    a.no_validation = no_validation;
    a.full_observation = full_observation;
    a.refine_messages = refine_messages;
    a.log_prompts = log_prompts;
    a.dump_memory = dump_memory;
    return a;
}

RunConfig RunConfig::from_json(const json& j) {
    RunConfig c;
    try {
        c.label = j.value("label", c.label);
        c.tasks = j.value("tasks", c.tasks);
        c.seeds = j.value("seeds", c.seeds);
        c.agent_count = j.value("agent_count", c.agent_count);
        c.horizon = j.value("horizon", c.horizon);
        if (j.contains("top_k")) {
            const auto& k = j.at("top_k");
            if (k.is_string()) {
                if (k.get<std::string>() != "Inf") throw ConfigError("K must be an integer or \"Inf\"");
                c.top_k = kTopKAll;
            } else {
                c.top_k = k.get<int>();
            }
        }
        c.ladder = j.value("ladder", c.ladder);
        c.dummy_count = j.value("dummy_count", c.dummy_count);
        if (j.contains("flags")) {
            const auto& f = j.at("flags");
            c.planning.no_cot = f.value("no_cot", false);
            c.planning.no_proximity = f.value("no_proximity", false);
            c.planning.no_other_info = f.value("no_other_info", false);
            c.planning.no_relevance = f.value("no_relevance", false);
            c.no_validation = f.value("no_validation", false);
            c.full_observation = f.value("full_observation", false);
        }
        c.refine_messages = j.value("refine_messages", c.refine_messages);
        c.log_prompts = j.value("log_prompts", c.log_prompts);
        c.dump_memory = j.value("dump_memory", c.dump_memory);
        if (j.contains("backend")) {
            auto b = parse_backend(j.at("backend").get<std::string>());
            if (!b) throw ConfigError("unknown backend: " + j.at("backend").get<std::string>());
            c.backend = *b;
        }
        c.fixture_path = j.value("fixture_path", c.fixture_path);
        if (j.contains("endpoint")) c.endpoint = EndpointConfig::from_json(j.at("endpoint"));
        c.map_path = j.value("map_path", c.map_path);
        c.transcript_dir = j.value("transcript_dir", c.transcript_dir);
        c.report_path = j.value("report_path", c.report_path);
        c.workers = j.value("workers", c.workers);
    } catch (const json::exception& e) {
        throw ConfigError(std::string("bad config: ") + e.what());
    }
    return c;
}

json RunConfig::to_json() const {
    return {{"label", label},
            {"tasks", tasks},
            {"seeds", seeds},
            {"agent_count", agent_count},
            {"horizon", horizon},
            {"top_k", top_k == kTopKAll ? json("Inf") : json(top_k)},
            {"ladder", ladder},
            {"dummy_count", dummy_count},
            {"flags",
             {{"no_cot", planning.no_cot},
              {"no_proximity", planning.no_proximity},
              {"no_other_info", planning.no_other_info},
              {"no_relevance", planning.no_relevance},
              {"no_validation", no_validation},
              {"full_observation", full_observation}}},
            {"refine_messages", refine_messages},
            {"log_prompts", log_prompts},
            {"dump_memory", dump_memory},
            {"backend", to_string(backend)},
            {"fixture_path", fixture_path},
            {"endpoint", endpoint.to_json()},
            {"map_path", map_path},
            {"transcript_dir", transcript_dir},
            {"report_path", report_path},
            {"workers", workers}};
}

std::shared_ptr<Reasoner> make_reasoner(const RunConfig& config) {
    switch (config.backend) {
        case Backend::Oracle: return std::make_shared<OracleReasoner>();
        case Backend::Remote: return std::make_shared<RemoteReasoner>(config.endpoint);
        case Backend::FixtureRecord:
            return std::make_shared<FixtureReasoner>(config.fixture_path, std::make_shared<RemoteReasoner>(config.endpoint));
        case Backend::FixtureReplay: return std::make_shared<FixtureReasoner>(config.fixture_path);
    }
    return std::make_shared<OracleReasoner>();
}

MapSpec map_for(const RunConfig& config) {
    if (config.map_path.empty()) return MapSpec::builtin_house();
    return MapSpec::load(config.map_path);
}

Scenario make_scenario(const RunConfig& config, const std::string& task, unsigned long long seed) {
    ScenarioOptions opts;
    opts.agent_count = config.agent_count;
    opts.horizon = config.horizon;
    return spawn_scenario(TaskCatalog::builtin(), task, seed, config.dummy_count, map_for(config), opts);
}

std::map<AgentId, std::unique_ptr<Agent>> make_agents(const RunConfig& config, const Scenario& scenario,
                                                      std::shared_ptr<Reasoner> reasoner,
                                                      const AgentConfig& agent_config) {
    (void)config;
    const auto map = MapKnowledge::from_world(scenario.state);
    std::map<AgentId, std::unique_ptr<Agent>> agents;
    for (const auto& body : scenario.state.agents) {
        std::vector<Teammate> mates;
        for (const auto& other : scenario.state.agents)
            if (other.agent_id != body.agent_id) mates.push_back({other.agent_id, other.name});
        agents.emplace(body.agent_id, std::make_unique<RevecaAgent>(body.agent_id, body.name, scenario.goal, map,
                                                                    std::move(mates), agent_config, reasoner));
    }
    return agents;
}

EpisodeRunner::EpisodeRunner(RunConfig config, Scenario scenario, std::map<AgentId, std::unique_ptr<Agent>> agents,
                             unsigned long long seed)
    : config_(std::move(config)), scenario_(std::move(scenario)), agents_(std::move(agents)), seed_(seed) {
    write({{"type", "header"},
           {"schema_version", kTranscriptSchemaVersion},
           {"config", config_.to_json()},
           {"task", scenario_.task_name},
           {"seed", seed_},
           {"initial_state", to_json(scenario_.state)},
           {"goal", to_json(scenario_.goal)}});
    termination_ = check_termination(scenario_.state, scenario_.goal);
}

Agent* EpisodeRunner::agent(AgentId id) {
    auto it = agents_.find(id);
    return it == agents_.end() ? nullptr : it->second.get();
}

void EpisodeRunner::write(const json& line) {
    transcript_ += line.dump();
    transcript_ += '\n';
}

void EpisodeRunner::audit(const PlanningAudit& a) {
    // With at least K non-None records available, a None dummy must never make the cut.
    if (a.k != kTopKAll && a.live_non_none >= a.k) {
        for (const auto& [id, rel] : a.top_k) {
            const auto* obj = scenario_.state.find_object(id);
            if (rel == Relevance::None && obj && obj->is_dummy) ++noise_violations_;
        }
    }
    audits_.push_back(a);
}

void EpisodeRunner::step_round(const JointAction& external) {
    if (done()) throw KernelError("episode already terminated");
    WorldState& state = scenario_.state;
    const int step_index = state.step_index;

    JointAction joint = external;
    json agent_events = json::object();
    json validation = json::object();
    json prompts = json::object();
    json dumps = json::object();
    for (auto& [id, agent] : agents_) {
        const AgentBody* body = state.find_agent(id);
        if (!body) continue;
        TurnInput in{step_index, body->position, body->held_object_ids, observe(state, id), inbox_for(state, id)};
        Decision d = agent->decide(in);
        joint[id] = d.action;
        const auto key = std::to_string(id);
        if (!d.events.empty()) agent_events[key] = d.events;
        if (!d.validation.empty()) validation[key] = d.validation;
        if (!d.prompts.empty()) prompts[key] = d.prompts;
        if (d.memory_dump) dumps[key] = *d.memory_dump;
        for (const auto& a : d.audits) audit(a);
        session_queries_.insert(session_queries_.end(), d.session_queries.begin(), d.session_queries.end());
    }

    json actions = json::object();
    for (const auto& [id, a] : joint) actions[std::to_string(id)] = to_json(a);

    const auto kernel = step(state, joint);
    json kernel_events = json::array();
    for (const auto& e : kernel) kernel_events.push_back(to_json(e));
    json messages = json::array();
    for (const auto& m : state.delivered) messages.push_back(m);
    json positions = json::object();
    for (const auto& a : state.agents) positions[std::to_string(a.agent_id)] = to_json(a.position);

    termination_ = check_termination(state, scenario_.goal);
    last_step_ = {{"type", "step"},
                  {"step", step_index},
                  {"actions", actions},
                  {"events", {{"kernel", kernel_events}, {"agent", agent_events}, {"validation", validation}}},
                  {"positions", positions},
                  {"messages", messages},
                  {"metrics", to_json(metrics())}};
    if (config_.log_prompts) last_step_["prompts"] = prompts;
    if (config_.dump_memory) last_step_["memory"] = dumps;
    write(last_step_);
}

EpisodeResult EpisodeRunner::finish(std::optional<std::string> error) {
    EpisodeResult r;
    r.task = scenario_.task_name;
    r.seed = seed_;
    r.termination = termination_;
    r.metrics = metrics();
    r.error = std::move(error);
    json result{{"type", "result"},
                {"termination", to_string(termination_.reason)},
                {"metrics", to_json(r.metrics)},
                {"noise_violations", noise_violations_}};
    if (r.error) result["error"] = *r.error;
    write(result);
    r.transcript = transcript_;
    r.audits = audits_;
    r.session_queries = session_queries_;
    r.noise_violations = noise_violations_;
    r.planning_calls = static_cast<int>(audits_.size());
    return r;
}

EpisodeResult run_to_end(EpisodeRunner& runner) {
    try {
        while (!runner.done()) runner.step_round();
    } catch (const ReasonerUnavailable& e) {
        return runner.finish(std::string("reasoner unavailable: ") + e.what());
    } catch (const FixtureMiss& e) {
        return runner.finish(std::string("fixture miss: ") + e.what());
    }
    return runner.finish();
}

EpisodeResult run_episode(const RunConfig& config, const std::string& task, unsigned long long seed,
                          std::shared_ptr<Reasoner> reasoner) {
    if (!reasoner) reasoner = make_reasoner(config);
    auto scenario = make_scenario(config, task, seed);
    auto agents = make_agents(config, scenario, reasoner, config.agent_config());
    EpisodeRunner runner(config, std::move(scenario), std::move(agents), seed);
    return run_to_end(runner);
}

}  // namespace reveca
