#include <gtest/gtest.h>

#include <filesystem>
#include <sstream>

#include "reveca/errors.hpp"
#include "reveca/matrix.hpp"
#include "reveca/replay.hpp"
#include "support.hpp"

using namespace reveca;
using nlohmann::json;

namespace {

RunConfig small_config() {
    RunConfig c;
    c.tasks = {"prepare_afternoon_tea"};
    c.seeds = {1, 2};
    c.horizon = 120;
    return c;
}

std::vector<json> lines_of(const std::string& jsonl) {
    std::vector<json> out;
    std::istringstream in(jsonl);
    std::string line;
    while (std::getline(in, line))
        if (!line.empty()) out.push_back(json::parse(line));
    return out;
}

std::string join_lines(const std::vector<json>& lines) {
    std::string s;
    for (const auto& l : lines) s += l.dump() + "\n";
    return s;
}

}  // namespace

TEST(Config, JsonRoundTrip) {
    auto c = small_config();
    c.top_k = kTopKAll;
    c.ladder = 5;
    c.dummy_count = 7;
    c.planning.no_cot = true;
    c.planning.no_other_info = true;
    c.full_observation = true;
    c.workers = 3;
    const auto j = c.to_json();
    EXPECT_EQ(j["top_k"], "Inf");
    EXPECT_EQ(RunConfig::from_json(j).to_json(), j);
}

TEST(Config, RejectsOutOfRangeValues) {
    auto bad = [](auto mutate) {
        auto c = small_config();
        mutate(c);
        return c;
    };
    EXPECT_NO_THROW(small_config().validate());
    EXPECT_THROW(bad([](RunConfig& c) { c.top_k = 0; }).validate(), ConfigError);
    EXPECT_THROW(bad([](RunConfig& c) { c.ladder = 2; }).validate(), ConfigError);
    EXPECT_THROW(bad([](RunConfig& c) { c.ladder = 6; }).validate(), ConfigError);
    EXPECT_THROW(bad([](RunConfig& c) { c.seeds.clear(); }).validate(), ConfigError);
    EXPECT_THROW(bad([](RunConfig& c) { c.tasks = {"bake_bread"}; }).validate(), ConfigError);
    EXPECT_THROW(bad([](RunConfig& c) { c.backend = Backend::FixtureReplay; }).validate(), ConfigError);
    EXPECT_THROW(RunConfig::from_json({{"top_k", "lots"}}), ConfigError);
    EXPECT_THROW(RunConfig::from_json({{"backend", "psychic"}}), ConfigError);
    EXPECT_THROW(RunConfig::from_json({{"horizon", "long"}}), ConfigError);
}

TEST(Scenario, SpawnIsDeterministicAndWellFormed) {
    const auto& catalog = TaskCatalog::builtin();
    EXPECT_EQ(catalog.names().size(), 5u);
    auto a = spawn_scenario(catalog, "prepare_afternoon_tea", 3, 10, MapSpec::builtin_house());
    auto b = spawn_scenario(catalog, "prepare_afternoon_tea", 3, 10, MapSpec::builtin_house());
    EXPECT_EQ(a.state, b.state);
    EXPECT_EQ(a.goal, b.goal);
    EXPECT_GE(a.goal.total_count(), 3);
    EXPECT_LE(a.goal.total_count(), 5);
    int dummies = 0;
    bool hidden_target = false;
    for (const auto& o : a.state.objects) {
        dummies += o.is_dummy;
        if (o.kind == ObjectKind::Item && a.goal.is_target_name(o.object_name) &&
            o.placement.kind == Placement::Kind::InContainer) {
            const auto* c = a.state.find_object(o.placement.container);
            hidden_target = hidden_target || c->container_state == ContainerState::Closed;
        }
    }
    EXPECT_EQ(dummies, 10);
    EXPECT_TRUE(hidden_target);
    for (const auto& agent : a.state.agents) EXPECT_TRUE(a.state.grid.walkable(agent.position));
    auto c = spawn_scenario(catalog, "prepare_afternoon_tea", 4, 10, MapSpec::builtin_house());
    EXPECT_NE(a.state, c.state);
    EXPECT_THROW(spawn_scenario(catalog, "nope", 1, 0, MapSpec::builtin_house()), ScenarioError);
}

TEST(Episode, TranscriptShape) {
    auto r = run_episode(small_config(), "prepare_afternoon_tea", 1);
    ASSERT_FALSE(r.error);
    const auto lines = lines_of(r.transcript);
    ASSERT_GE(lines.size(), 3u);
    EXPECT_EQ(lines.front()["type"], "header");
    EXPECT_EQ(lines.front()["schema_version"], kTranscriptSchemaVersion);
    EXPECT_EQ(lines.back()["type"], "result");
    EXPECT_EQ(lines.back()["termination"], to_string(r.termination.reason));
    EXPECT_EQ(static_cast<int>(lines.size()) - 2, r.metrics.simulation_steps - 1);
    for (std::size_t i = 1; i + 1 < lines.size(); ++i) {
        EXPECT_EQ(lines[i]["type"], "step");
        EXPECT_EQ(lines[i]["step"], static_cast<int>(i));
        EXPECT_FALSE(lines[i].contains("prompts"));
    }
}

TEST(Replay, CleanOnUntouchedTranscript) {
    auto r = run_episode(small_config(), "prepare_afternoon_tea", 2);
    auto report = replay_transcript(r.transcript);
    EXPECT_TRUE(report.clean());
    EXPECT_EQ(report.replayed, r.metrics);
    EXPECT_EQ(report.replayed_termination, to_string(r.termination.reason));
}

TEST(Replay, DetectsTampering) {
    auto r = run_episode(small_config(), "prepare_afternoon_tea", 2);
    auto lines = lines_of(r.transcript);
    ASSERT_GT(lines.size(), 6u);
    // Swap a recorded position at step 3.
    auto tampered = lines;
    tampered[3]["positions"]["0"] = json::array({0, 0});
    auto report = replay_transcript(join_lines(tampered));
    ASSERT_FALSE(report.clean());
    EXPECT_EQ(report.first_divergence->step, 3);
    EXPECT_EQ(report.first_divergence->field, "positions");

    tampered = lines;
    tampered.back()["metrics"]["simulation_steps"] = 9999;
    EXPECT_FALSE(replay_transcript(join_lines(tampered)).clean());
}

TEST(Replay, SchemaErrors) {
    auto r = run_episode(small_config(), "prepare_afternoon_tea", 1);
    auto lines = lines_of(r.transcript);
    lines.front()["schema_version"] = 99;
    EXPECT_THROW(replay_transcript(join_lines(lines)), SchemaMismatch);
    EXPECT_THROW(replay_transcript(""), SchemaMismatch);
    EXPECT_THROW(replay_transcript("not json\n"), SchemaMismatch);
    lines = lines_of(r.transcript);
    lines.pop_back();
    EXPECT_THROW(replay_transcript(join_lines(lines)), SchemaMismatch);
}

TEST(Matrix, ReportRoundTripAndMeans) {
    auto c = small_config();
    c.label = "base";
    auto report = run_matrix({c}, 2);
    ASSERT_EQ(report.rows.size(), 1u);
    const auto& row = report.rows[0];
    EXPECT_EQ(row.episodes, 2);
    ASSERT_EQ(report.episodes[0].size(), 2u);
    double ss = 0;
    int wins = 0;
    for (const auto& e : report.episodes[0]) {
        ss += e.metrics.simulation_steps;
        wins += e.metrics.success;
    }
    ASSERT_TRUE(row.mean_ss);
    EXPECT_DOUBLE_EQ(*row.mean_ss, ss / 2.0);
    EXPECT_EQ(row.successes, wins);

    const auto back = MatrixReport::from_json(report.to_json());
    EXPECT_EQ(back.rows, report.rows);
    EXPECT_NE(report.render_table().find("TD is the mean per-agent travel distance"), std::string::npos);
    EXPECT_THROW(MatrixReport::from_json({{"rows", {{{"label", "x"}}}}}), SchemaMismatch);
}

TEST(Matrix, EmptyConfigListIsAnError) {
    EXPECT_THROW(run_matrix({}, 1), ConfigError);
    EXPECT_THROW(run_matrix({small_config()}, 0), ConfigError);
}

TEST(Matrix, AbortedEpisodeLeavesMeansUnset) {
    testsupport::StubServer stub;
    stub.set_handler([](const json&, int) { return testsupport::StubServer::text(503, "down"); });
    auto c = small_config();
    c.seeds = {1};
    c.backend = Backend::Remote;
    c.endpoint.url = stub.url();
    c.endpoint.retries = 0;
    c.endpoint.backoff = std::chrono::milliseconds(1);
    auto report = run_matrix({c}, 1);
    ASSERT_EQ(report.rows.size(), 1u);
    EXPECT_FALSE(report.rows[0].mean_ss);
    EXPECT_FALSE(report.rows[0].errors.empty());
    EXPECT_TRUE(report.episodes[0][0].error);
}

TEST(Matrix, TranscriptsWritten) {
    const auto dir = std::filesystem::temp_directory_path() / ("reveca_tx_" + std::to_string(::getpid()));
    std::filesystem::remove_all(dir);
    auto c = small_config();
    c.transcript_dir = dir.string();
    run_matrix({c}, 1);
    int files = 0;
    for (const auto& e : std::filesystem::directory_iterator(dir)) files += e.path().extension() == ".jsonl";
    EXPECT_EQ(files, 2);
    std::filesystem::remove_all(dir);
}
