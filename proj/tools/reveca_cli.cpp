#include <atomic>
#include <csignal>
#include <thread>
#include <fstream>
#include <iostream>
#include <sstream>

#include "CLI11.hpp"
#include "reveca/errors.hpp"
#include "reveca/harness.hpp"
#include "reveca/matrix.hpp"
#include "reveca/replay.hpp"
#include "reveca/serialize.hpp"
#include "reveca/session.hpp"

using namespace reveca;

namespace {

constexpr int kExitConfig = 2;
constexpr int kExitReasoner = 3;

struct CommonOptions {
    std::string config_file;
    std::vector<std::string> tasks;
    std::vector<unsigned long long> seeds;
    int agents = 0, horizon = 0, ladder = 0, dummies = -1, workers = 0;
    std::string k;
    bool no_cot = false, no_proximity = false, no_other_info = false, no_relevance = false;
    bool no_validation = false, full_observation = false, refine = false, log_prompts = false, dump_memory = false;
    std::string backend, fixture, endpoint_url, model, map, transcript_dir, report;
};

void add_common(CLI::App* app, CommonOptions& o) {
    app->add_option("--config", o.config_file, "JSON RunConfig file; flags override it");
    app->add_option("--tasks", o.tasks, "Task names (default: all built-in)")->delimiter(',');
    app->add_option("--seeds", o.seeds, "Seeds, space or comma separated")->delimiter(',');
    app->add_option("--agents", o.agents, "Agent count N");
    app->add_option("--horizon", o.horizon, "Horizon H");
    app->add_option("-k,--top-k", o.k, "Retrieval K, or Inf");
    app->add_option("--ladder", o.ladder, "Relevance ladder size R (3, 4 or 5)");
    app->add_option("--dummies", o.dummies, "Distractor objects per episode");
    app->add_option("--workers", o.workers, "Parallel episodes");
    app->add_flag("--no-cot", o.no_cot);
    app->add_flag("--no-proximity", o.no_proximity);
    app->add_flag("--no-other-info", o.no_other_info);
    app->add_flag("--no-relevance", o.no_relevance);
    app->add_flag("--no-validation", o.no_validation);
    app->add_flag("--full-observation", o.full_observation);
    app->add_flag("--refine", o.refine, "Refine message prose through the reasoner");
    app->add_flag("--log-prompts", o.log_prompts);
    app->add_flag("--dump-memory", o.dump_memory);
    app->add_option("--backend", o.backend, "oracle | remote | fixture-record | fixture-replay");
    app->add_option("--fixture", o.fixture, "Fixture JSONL path");
    app->add_option("--endpoint-url", o.endpoint_url, "Chat-completions URL");
    app->add_option("--model", o.model);
    app->add_option("--map", o.map, "Map JSON (default: built-in house)");
    app->add_option("--transcript-dir", o.transcript_dir);
    app->add_option("--report", o.report, "Write the JSON report here");
}

nlohmann::json read_json(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw ConfigError("cannot read " + path);
    try {
        return nlohmann::json::parse(in);
    } catch (const nlohmann::json::exception& e) {
        throw ConfigError(path + ": " + e.what());
    }
}

RunConfig build_config(const CommonOptions& o, const nlohmann::json* base = nullptr) {
    RunConfig c;
    if (base) c = RunConfig::from_json(*base);
    else if (!o.config_file.empty()) c = RunConfig::from_json(read_json(o.config_file));
    if (!o.tasks.empty()) c.tasks = o.tasks;
    if (!o.seeds.empty()) c.seeds = o.seeds;
    if (o.agents) c.agent_count = o.agents;
    if (o.horizon) c.horizon = o.horizon;
    if (o.ladder) c.ladder = o.ladder;
    if (o.dummies >= 0) c.dummy_count = o.dummies;
    if (o.workers) c.workers = o.workers;
    if (!o.k.empty()) {
        if (o.k == "Inf" || o.k == "inf") {
            c.top_k = kTopKAll;
        } else {
            try {
                c.top_k = std::stoi(o.k);
            } catch (const std::exception&) {
                throw ConfigError("K must be an integer or Inf");
            }
        }
    }
    c.planning.no_cot |= o.no_cot;
    c.planning.no_proximity |= o.no_proximity;
    c.planning.no_other_info |= o.no_other_info;
    c.planning.no_relevance |= o.no_relevance;
    c.no_validation |= o.no_validation;
    c.full_observation |= o.full_observation;
    c.refine_messages |= o.refine;
    c.log_prompts |= o.log_prompts;
    c.dump_memory |= o.dump_memory;
    if (!o.backend.empty()) {
        auto b = parse_backend(o.backend);
        if (!b) throw ConfigError("unknown backend: " + o.backend);
        c.backend = *b;
    }
    if (!o.fixture.empty()) c.fixture_path = o.fixture;
    if (!o.endpoint_url.empty()) c.endpoint.url = o.endpoint_url;
    if (!o.model.empty()) c.endpoint.model = o.model;
    if (!o.map.empty()) c.map_path = o.map;
    if (!o.transcript_dir.empty()) c.transcript_dir = o.transcript_dir;
    if (!o.report.empty()) c.report_path = o.report;
    c.validate();
    return c;
}

int cmd_run(const CommonOptions& o, const std::string& transcript) {
    auto c = build_config(o);
    int worst = 0;
    for (const auto& task : c.task_list()) {
        for (auto seed : c.seeds) {
            auto r = run_episode(c, task, seed);
            nlohmann::json line{{"task", task},
                                {"seed", seed},
                                {"termination", to_string(r.termination.reason)},
                                {"metrics", to_json(r.metrics)}};
            if (r.error) line["error"] = *r.error;
            std::cout << line.dump() << "\n";
            if (!transcript.empty()) {
                std::ofstream(transcript, std::ios::binary | std::ios::app) << r.transcript;
            }
            if (!c.transcript_dir.empty()) {
                std::filesystem::create_directories(c.transcript_dir);
                std::ofstream(std::filesystem::path(c.transcript_dir) / (c.label + "_" + task + "_" + std::to_string(seed) + ".jsonl"),
                              std::ios::binary)
                    << r.transcript;
            }
            if (r.error) worst = kExitReasoner;
        }
    }
    if (worst) std::cerr << "episode aborted: reasoner error\n";
    return worst;
}

int cmd_matrix(const CommonOptions& o, const std::vector<std::string>& ablations) {
    std::vector<RunConfig> configs;
    int workers = o.workers;
    if (!o.config_file.empty()) {
        auto doc = read_json(o.config_file);
        if (doc.contains("configs")) {
            if (!doc["configs"].is_array()) throw ConfigError("configs must be an array");
            for (const auto& j : doc["configs"]) {
                CommonOptions local = o;
                local.config_file.clear();
                configs.push_back(build_config(local, &j));
            }
            if (!workers) workers = doc.value("workers", 1);
        }
    }
    if (configs.empty()) {
        const auto base = build_config(o);
        configs.push_back(base);
        for (const auto& a : ablations) {
            RunConfig c = base;
            c.label = a;
            if (a == "no_cot") c.planning.no_cot = true;
            else if (a == "no_proximity") c.planning.no_proximity = true;
            else if (a == "no_other_info") c.planning.no_other_info = true;
            else if (a == "no_relevance") c.planning.no_relevance = true;
            else if (a == "no_validation") c.no_validation = true;
            else if (a == "full_observation") c.full_observation = true;
            else throw ConfigError("unknown ablation: " + a);
            configs.push_back(c);
        }
        if (!workers) workers = base.workers;
    }
    if (configs.empty()) throw ConfigError("matrix needs at least one config");
    auto report = run_matrix(configs, std::max(workers, 1));
    std::cout << report.render_table();
    const auto& out = o.report.empty() ? configs.front().report_path : o.report;
    if (!out.empty()) std::ofstream(out) << report.to_json().dump(2) << "\n";
    for (const auto& r : report.rows)
        if (!r.errors.empty()) return kExitReasoner;
    return 0;
}

int cmd_replay(const std::string& file) {
    std::ifstream in(file, std::ios::binary);
    if (!in) throw ConfigError("cannot read " + file);
    std::stringstream ss;
    ss << in.rdbuf();
    auto report = replay_transcript(ss.str());
    std::cout << report.to_json().dump(2) << "\n";
    return report.clean() ? 0 : 1;
}

std::atomic<bool> g_stop{false};

int cmd_serve(SessionManager& manager, const std::string& address, unsigned short port) {
    SessionServer server(manager);
    std::signal(SIGINT, [](int) { g_stop = true; });
    std::signal(SIGTERM, [](int) { g_stop = true; });
    server.start(address, port);
    std::cout << "listening on " << address << ":" << server.port() << std::endl;
    while (!g_stop) std::this_thread::sleep_for(std::chrono::milliseconds(200));
    server.stop();
    return 0;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Cooperative household-task simulator"};
    app.require_subcommand(1);

    CommonOptions run_opts, matrix_opts;
    std::string transcript;
    auto* run = app.add_subcommand("run", "Run single episodes (every task x seed in the config)");
    add_common(run, run_opts);
    run->add_option("--transcript", transcript, "Append transcripts to this JSONL file");

    std::vector<std::string> ablations;
    auto* matrix = app.add_subcommand("matrix", "Run an ablation grid");
    add_common(matrix, matrix_opts);
    matrix->add_option("--ablate", ablations, "Extra rows, one flag each (no_proximity, no_relevance, ...)")->delimiter(',');

    std::string replay_file;
    auto* replay = app.add_subcommand("replay", "Re-simulate a transcript and report divergences");
    replay->add_option("transcript", replay_file)->required();

    std::string address = "127.0.0.1";
    unsigned short port = 8080;
    auto* serve = app.add_subcommand("serve", "Host human sessions over HTTP and WebSocket");
    serve->add_option("--address", address);
    serve->add_option("--port", port);

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int rc = app.exit(e);
        return rc == 0 ? 0 : kExitConfig;
    }

    try {
        if (*run) return cmd_run(run_opts, transcript);
        if (*matrix) return cmd_matrix(matrix_opts, ablations);
        if (*replay) return cmd_replay(replay_file);
        if (*serve) {
            SessionManager manager;
            return cmd_serve(manager, address, port);
        }
    } catch (const ConfigError& e) {
        std::cerr << "config error: " << e.what() << "\n";
        return kExitConfig;
    } catch (const ScenarioError& e) {
        std::cerr << "config error: " << e.what() << "\n";
        return kExitConfig;
    } catch (const ReasonerUnavailable& e) {
        std::cerr << "reasoner error: " << e.what() << "\n";
        return kExitReasoner;
    } catch (const FixtureMiss& e) {
        std::cerr << "reasoner error: " << e.what() << "\n";
        return kExitReasoner;
    } catch (const SchemaMismatch& e) {
        std::cerr << "schema mismatch: " << e.what() << "\n";
        return kExitConfig;
    }
    return 0;
}
