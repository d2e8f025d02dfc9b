// Acceptance gate: one PASS/FAIL line per criterion, nonzero exit when any fails.
#include <chrono>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <set>
#include <sstream>

#include "reveca/comms.hpp"
#include "reveca/errors.hpp"
#include "reveca/executor.hpp"
#include "reveca/matrix.hpp"
#include "reveca/replay.hpp"
#include "reveca/serialize.hpp"
#include "support.hpp"

using namespace reveca;
using namespace testsupport;
using Clock = std::chrono::steady_clock;

namespace {

int failures = 0;

double seconds_since(Clock::time_point t0) {
    return std::chrono::duration<double>(Clock::now() - t0).count();
}

void report(const std::string& name, bool ok, const std::string& detail) {
    std::printf("%s  %-28s %s\n", ok ? "PASS" : "FAIL", name.c_str(), detail.c_str());
    std::fflush(stdout);
    if (!ok) ++failures;
}

std::string fmt(const char* f, double a) {
    char buf[128];
    std::snprintf(buf, sizeof buf, f, a);
    return buf;
}

// Transcripts collected across criteria for the protocol checks.
std::vector<const EpisodeResult*> all_episodes;

void retrieval_equivalence() {
    const auto t0 = Clock::now();
    std::mt19937_64 rng(20240611);
    int cases = 0, mismatches = 0;
    for (int i = 0; i < 1200; ++i) {
        const int ladder = 3 + i % 3;
        const int k = 1 + (i / 3) % 4;
        const int size = static_cast<int>(rng() % 201);
        auto m = random_memory(rng, size, RelevanceLadder::make(ladder));
        const auto got = retrieve_top_k(m.records, m.prox, k);
        std::vector<int> ids;
        for (const auto* r : got) ids.push_back(r->record_id);
        if (ids != brute_force_top_k(m.records, m.prox, k)) ++mismatches;
        ++cases;
    }
    const double dt = seconds_since(t0);
    report("retrieval_equivalence", mismatches == 0 && dt < 5.0,
           std::to_string(cases) + " memories, " + std::to_string(mismatches) + " mismatches, " + fmt("%.2fs", dt));
}

void astar_optimality() {
    const auto t0 = Clock::now();
    std::mt19937_64 rng(7);
    int checked = 0, bad = 0;
    for (int m = 0; m < 100; ++m) {
        GridMap grid(20, 20);
        const double density = 0.40 * m / 99.0;
        for (int y = 0; y < 20; ++y)
            for (int x = 0; x < 20; ++x) grid.set_walkable({x, y}, (rng() % 10000) >= density * 10000);
        std::vector<GridPos> open;
        for (int y = 0; y < 20; ++y)
            for (int x = 0; x < 20; ++x)
                if (grid.walkable({x, y})) open.push_back({x, y});
        if (open.size() < 2) continue;
        for (int q = 0; q < 20; ++q) {
            GridPos from = open[rng() % open.size()];
            std::vector<GridPos> goals{open[rng() % open.size()]};
            if (q % 4 == 0) goals.push_back(open[rng() % open.size()]);
            const int want = bfs_length(grid, from, goals);
            const auto path = a_star(grid, from, goals);
            ++checked;
            if (want < 0 ? path.has_value() : (!path || static_cast<int>(path->size()) - 1 != want || !valid_path(grid, *path, from, goals)))
                ++bad;
        }
    }
    // Every 5x5 wall pattern with the corners open, corner to corner.
    int exhaustive = 0;
    // The 21 non-corner cells index the bits of `mask`.
    std::vector<int> inner;
    for (int i = 0; i < 25; ++i)
        if (i != 0 && i != 4 && i != 20 && i != 24) inner.push_back(i);
    for (unsigned mask = 0; mask < (1u << 21); ++mask) {
        GridMap grid(5, 5);
        for (int i = 0; i < 25; ++i) grid.set_walkable({i % 5, i / 5}, true);
        for (int b = 0; b < 21; ++b)
            if (mask & (1u << b)) grid.set_walkable({inner[b] % 5, inner[b] / 5}, false);
        const GridPos from{0, 0};
        const std::vector<GridPos> goals{{4, 4}};
        const int want = bfs_length(grid, from, goals);
        const auto path = a_star(grid, from, goals);
        ++exhaustive;
        if (want < 0 ? path.has_value() : (!path || static_cast<int>(path->size()) - 1 != want || !valid_path(grid, *path, from, goals)))
            ++bad;
    }
    const double dt = seconds_since(t0);
    report("astar_optimality", bad == 0 && dt < 10.0,
           std::to_string(checked) + " random queries on 100 maps + " + std::to_string(exhaustive) + " exhaustive 5x5 maps, " +
               std::to_string(bad) + " wrong, " + fmt("%.2fs", dt));
}

std::vector<SoundnessCase> soundness_with, soundness_without;

void validation_soundness() {
    const auto t0 = Clock::now();
    int qualifying = 0, wrong = 0, agent_wrong = 0;
    double ss_with = 0, ss_without = 0;
    for (unsigned long long seed = 1; seed <= 50; ++seed) {
        soundness_with.push_back(run_soundness_case(seed, false));
        soundness_without.push_back(run_soundness_case(seed, true));
        const auto& c = soundness_with.back();
        ss_with += c.result.metrics.simulation_steps;
        ss_without += soundness_without.back().result.metrics.simulation_steps;
        if (c.removed_in_window && c.evidence_in_target_room) {
            ++qualifying;
            if (c.run_outcome != ValidationOutcome::FalsePlan) ++wrong;
            if (c.agent_state != std::string("confirmed")) ++agent_wrong;
        }
    }
    for (const auto& c : soundness_with) all_episodes.push_back(&c.result);
    for (const auto& c : soundness_without) all_episodes.push_back(&c.result);
    ss_with /= 50;
    ss_without /= 50;
    const double dt = seconds_since(t0);
    const bool ok = qualifying > 0 && wrong == 0 && agent_wrong == 0 && ss_without > ss_with && dt < 60.0;
    report("validation_soundness", ok,
           std::to_string(qualifying) + "/50 cases with in-room evidence, " + std::to_string(wrong) + " not FalsePlan (" +
               std::to_string(agent_wrong) + " in-episode); mean SS " + fmt("%.2f", ss_with) + " vs no_validation " +
               fmt("%.2f", ss_without) + ", " + fmt("%.2fs", dt));
}

std::vector<RunConfig> ablation_configs(int workers) {
    RunConfig base;
    base.seeds = {1, 2, 3, 4, 5, 6, 7, 8, 9, 10};
    base.dummy_count = 20;
    base.workers = workers;
    RunConfig no_prox = base, no_rel = base;
    no_prox.label = "no_proximity";
    no_prox.planning.no_proximity = true;
    no_rel.label = "no_relevance";
    no_rel.planning.no_relevance = true;
    return {base, no_prox, no_rel};
}

MatrixReport ablation_first, ablation_second;

void ablation_directionality() {
    const auto t0 = Clock::now();
    ablation_first = run_matrix(ablation_configs(1), 1);
    const double dt = seconds_since(t0);
    const auto& rows = ablation_first.rows;
    bool ok = rows.size() == 3 && rows[0].mean_ss && rows[1].mean_ss && rows[2].mean_ss;
    std::string detail;
    if (ok) {
        ok = *rows[0].mean_ss < *rows[1].mean_ss && *rows[0].mean_ss < *rows[2].mean_ss && dt < 300.0;
        detail = "mean SS default " + fmt("%.2f", *rows[0].mean_ss) + " < no_proximity " + fmt("%.2f", *rows[1].mean_ss) +
                 ", < no_relevance " + fmt("%.2f", *rows[2].mean_ss) + " (5 tasks x 10 seeds, 20 dummies), " + fmt("%.2fs", dt);
    } else {
        detail = "aborted episodes in the matrix";
    }
    report("ablation_directionality", ok, detail);
    for (const auto& row : ablation_first.episodes)
        for (const auto& e : row) all_episodes.push_back(&e);
}

void noise_immunity() {
    // Independent recount from the audits: the library's own counter is not trusted.
    long calls = 0, eligible = 0, violations = 0, reported = 0;
    for (std::size_t r = 0; r < ablation_first.episodes.size(); ++r) {
        for (const auto& e : ablation_first.episodes[r]) {
            reported += e.noise_violations;
            const auto header = json::parse(e.transcript.substr(0, e.transcript.find('\n')));
            const auto initial = world_from_json(header.at("initial_state"));
            for (const auto& a : e.audits) {
                ++calls;
                if (a.k < 0 || a.live_non_none < a.k) continue;
                ++eligible;
                for (const auto& [id, rel] : a.top_k) {
                    const auto* obj = initial.find_object(id);
                    if (obj && obj->is_dummy && rel == Relevance::None) ++violations;
                }
            }
        }
    }
    report("noise_immunity", violations == 0 && reported == 0 && eligible > 0,
           std::to_string(calls) + " planning calls, " + std::to_string(eligible) + " with >=K non-None records, " +
               std::to_string(violations) + " None dummies in top-K");
}

MatrixReport regression;

void success_regression() {
    const auto t0 = Clock::now();
    RunConfig c;
    c.seeds = {1, 2, 3, 4, 5, 6, 7, 8, 9, 10};
    regression = run_matrix({c}, 1);
    const double dt = seconds_since(t0);
    int ok_eps = 0, total = 0, max_ss = 0;
    for (const auto& e : regression.episodes[0]) {
        ++total;
        max_ss = std::max(max_ss, e.metrics.simulation_steps);
        if (!e.error && e.metrics.success && e.metrics.simulation_steps <= 250) ++ok_eps;
    }
    report("success_regression", ok_eps == total && total == 50 && dt < 180.0,
           std::to_string(ok_eps) + "/" + std::to_string(total) + " succeeded, max SS " + std::to_string(max_ss) +
               ", mean SS " + fmt("%.2f", regression.rows[0].mean_ss.value_or(-1)) + ", " + fmt("%.2fs", dt));
    for (const auto& e : regression.episodes[0]) all_episodes.push_back(&e);
}

std::vector<EpisodeResult> three_agent;

void protocol_termination() {
    const auto t0 = Clock::now();
    // Three-agent runs exercise multi-step query chains.
    RunConfig c3;
    c3.agent_count = 3;
    c3.dummy_count = 10;
    for (const auto& task : TaskCatalog::builtin().names())
        for (unsigned long long s : {1ULL, 2ULL, 3ULL}) three_agent.push_back(run_episode(c3, task, s));
    for (const auto& e : three_agent) all_episodes.push_back(&e);

    int sessions = 0, over_limit = 0, bad_termination = 0, long_messages = 0, messages = 0, replay_bad = 0;
    std::set<std::string> kinds;
    for (const auto* e : all_episodes) {
        std::istringstream in(e->transcript);
        std::string line;
        json header, result;
        int n_agents = 0;
        while (std::getline(in, line)) {
            auto j = json::parse(line);
            const auto type = j.at("type").get<std::string>();
            if (type == "header") {
                header = j;
                n_agents = static_cast<int>(j.at("initial_state").at("agents").size());
            } else if (type == "step") {
                for (const auto& m : j.at("messages")) {
                    ++messages;
                    if (m.at("text").get<std::string>().size() > kMessageBudget) ++long_messages;
                    kinds.insert(m.at("kind").get<std::string>());
                }
            } else {
                result = j;
            }
        }
        for (int q : e->session_queries) {
            ++sessions;
            if (q > n_agents - 1) ++over_limit;
        }
        // Exactly one termination condition, checked against ground truth.
        const auto reason = result.at("termination").get<std::string>();
        const int ss = result.at("metrics").at("simulation_steps").get<int>();
        const bool success = result.at("metrics").at("success").get<bool>();
        const int horizon = header.at("initial_state").at("horizon").get<int>();
        int conditions = 0;
        if (success) ++conditions;
        if (!success && ss >= horizon) ++conditions;
        if (!success && ss < horizon && reason == "stuck") ++conditions;
        const bool consistent = (reason == "success") == success && (reason == "horizon") == (!success && ss >= horizon);
        if (conditions != 1 || !consistent) ++bad_termination;

        const auto rep = replay_transcript(e->transcript);
        if (!rep.clean() || rep.replayed.simulation_steps != e->metrics.simulation_steps ||
            std::abs(rep.replayed.travel_distance - e->metrics.travel_distance) > 1e-9)
            ++replay_bad;
    }
    const std::set<std::string> expected{"init_broadcast", "validation_query", "validation_response", "subgoal_announcement"};
    const double dt = seconds_since(t0);
    const bool ok = over_limit == 0 && sessions > 0 && bad_termination == 0 && long_messages == 0 && kinds == expected &&
                    replay_bad == 0;
    std::string kind_list;
    for (const auto& k : kinds) kind_list += (kind_list.empty() ? "" : ",") + k;
    report("protocol_termination", ok,
           std::to_string(all_episodes.size()) + " episodes: " + std::to_string(sessions) + " validation sessions, " +
               std::to_string(over_limit) + " over N-1 queries; " + std::to_string(bad_termination) +
               " bad terminations; " + std::to_string(messages) + " messages, " + std::to_string(long_messages) +
               " over 500 chars; kinds {" + kind_list + "}; " + std::to_string(replay_bad) + " replay mismatches, " +
               fmt("%.2fs", dt));
}

void determinism() {
    const auto t0 = Clock::now();
    // Second run on a two-thread pool: scheduling must not leak into transcripts.
    ablation_second = run_matrix(ablation_configs(1), 2);
    int compared = 0, differing = 0;
    for (std::size_t r = 0; r < ablation_first.episodes.size(); ++r)
        for (std::size_t i = 0; i < ablation_first.episodes[r].size(); ++i) {
            ++compared;
            if (ablation_first.episodes[r][i].transcript != ablation_second.episodes[r][i].transcript) ++differing;
        }
    const bool reports_equal = ablation_first.to_json().dump() == ablation_second.to_json().dump();
    report("determinism", differing == 0 && compared == 150 && reports_equal,
           std::to_string(compared) + " transcripts compared byte-for-byte, " + std::to_string(differing) + " differ, " +
               fmt("%.2fs", seconds_since(t0)));
}

void remote_contract() {
    std::vector<std::string> problems;
    StubServer stub;
    EndpointConfig cfg;
    cfg.url = stub.url();
    cfg.backoff = std::chrono::milliseconds(1);

    // Request defaults and template rendering.
    {
        RemoteReasoner remote(cfg);
        json ctx{{"goal", "Find and put target objects 1 pudding onto the goal location <coffeetable> (268)."},
                 {"goal_location_id", 268},
                 {"ladder", 4},
                 {"levels", {"None", "Low", "Medium", "Strong"}},
                 {"object", {{"object_id", 21}, {"object_name", "pudding"}, {"kind", "item"}, {"room", "kitchen"},
                             {"container_state", "n/a"}, {"available_action", "gograb"}}},
                 {"goal_target", true},
                 {"remaining", 1},
                 {"goal_open", true},
                 {"strong_in_room", false}};
        auto req = make_request(RequestKind::Relevance, ctx, true);
        auto reply = remote.answer(req);
        const auto body = stub.body(0);
        if (body.at("temperature").get<double>() != 0.7) problems.push_back("temperature");
        if (body.at("top_p").get<double>() != 1.0) problems.push_back("top_p");
        if (body.at("max_tokens").get<int>() != 1024) problems.push_back("max_tokens");
        if (body.at("model").get<std::string>() != "gpt-4o-mini") problems.push_back("model");
        const auto content = body.at("messages").back().at("content").get<std::string>();
        if (content != req.rendered_prompt) problems.push_back("prompt not sent verbatim");
        if (content.find("<pudding> (21)") == std::string::npos || content.find(kCotInstruction) == std::string::npos)
            problems.push_back("template fields");
        if (reply.parsed.at("choice") != "Strong") problems.push_back("reply parse");
    }
    // Malformed replies: one reprompt with the reminder, then the planner falls back to the rule.
    {
        const int before = stub.calls();
        stub.set_handler([](const json&, int) { return StubServer::text(200, "I would rather not say."); });
        RemoteReasoner remote(cfg);
        RunConfig rc;
        const auto sc = make_scenario(rc, "prepare_afternoon_tea", 1);
        AgentMemory mem(0, "Alice", sc.goal, MapKnowledge::from_world(sc.state), RelevanceLadder::make(4));
        const GridPos at = sc.state.agents[0].position;
        const auto ctx = build_plan_context(mem, {}, {}, SelfState{at, *sc.state.room_at(at), {}}, PlanningFlags{}, 5);
        auto outcome = plan(ctx, remote, 5);
        const int used = stub.calls() - before;
        bool reminded = false;
        for (int i = before; i < stub.calls(); ++i) {
            const auto msgs = stub.body(i).at("messages");
            if (msgs.size() >= 3 && msgs.back().at("content").get<std::string>() == format_reminder(RequestKind::Plan)) reminded = true;
        }
        if (!reminded) problems.push_back("no reprompt reminder");
        if (used != 4) problems.push_back("expected 4 calls (2 attempts x reprompt), got " + std::to_string(used));
        const auto rule = oracle_plan_choice(ctx.structured);
        const Plan* rule_plan = nullptr;
        for (const auto& o : ctx.options)
            if (o.letter == rule) rule_plan = &o.plan;
        if (!outcome.plan.fallback || !rule_plan || outcome.plan.describe() != rule_plan->describe())
            problems.push_back("fallback plan differs from the rule");

    }
    // Transport failure: two retries, then ReasonerUnavailable.
    {
        const int before = stub.calls();
        stub.set_handler([](const json&, int) { return StubServer::text(503, "busy"); });
        RemoteReasoner remote(cfg);
        bool threw = false;
        try {
            remote.answer(make_request(RequestKind::Refine, {{"kind", "init_broadcast"}, {"draft", "hi"}, {"sender", "A"},
                                                               {"recipient", "B"}, {"limit", 100}},
                                       false));
        } catch (const ReasonerUnavailable&) {
            threw = true;
        }
        if (!threw || stub.calls() - before != 3) problems.push_back("retry/unavailable path");
    }
    // Record through the stub, then replay with no live calls.
    {
        stub.set_handler({});
        const auto dir = std::filesystem::temp_directory_path() / "reveca_acceptance";
        std::filesystem::create_directories(dir);
        const auto path = dir / "fixture.jsonl";
        std::filesystem::remove(path);
        RunConfig rc;
        rc.horizon = 60;
        auto remote = std::make_shared<RemoteReasoner>(cfg);
        auto recorder = std::make_shared<FixtureReasoner>(path, remote);
        auto recorded = run_episode(rc, "prepare_afternoon_tea", 3, recorder);
        const int live_after_record = stub.calls();
        auto player = std::make_shared<FixtureReasoner>(path);
        auto replayed = run_episode(rc, "prepare_afternoon_tea", 3, player);
        const int live_during_replay = stub.calls() - live_after_record;
        if (recorded.error || replayed.error) problems.push_back("episode error");
        if (live_during_replay != 0) problems.push_back(std::to_string(live_during_replay) + " live calls on replay");
        if (recorded.transcript != replayed.transcript) problems.push_back("replayed transcript differs");
        if (recorder->size() == 0) problems.push_back("nothing recorded");
    }
    std::string detail = problems.empty() ? "defaults 0.7/1/1024, reprompt then fallback, retries, record/replay with 0 live calls"
                                          : "";
    for (const auto& p : problems) detail += (detail.empty() ? "" : "; ") + p;
    report("remote_contract", problems.empty(), detail);
}

}  // namespace

int main() {
    const auto t0 = Clock::now();
    retrieval_equivalence();
    astar_optimality();
    validation_soundness();
    ablation_directionality();
    noise_immunity();
    success_regression();
    protocol_termination();
    determinism();
    remote_contract();
    std::printf("%d criteria failed, %.1fs total\n", failures, seconds_since(t0));
    return failures == 0 ? 0 : 1;
}
