#include "reveca/replay.hpp"

#include <cmath>
#include <sstream>

#include "reveca/errors.hpp"
#include "reveca/harness.hpp"
#include "reveca/serialize.hpp"

namespace reveca {

json ReplayReport::to_json() const {
    json j{{"steps", steps},
           {"recorded", reveca::to_json(recorded)},
           {"replayed", reveca::to_json(replayed)},
           {"recorded_termination", recorded_termination},
           {"replayed_termination", replayed_termination},
           {"divergences", first_divergence ? 1 : 0}};
    if (first_divergence)
        j["first_divergence"] = {{"step", first_divergence->step},
                                 {"field", first_divergence->field},
                                 {"recorded", first_divergence->recorded},
                                 {"replayed", first_divergence->replayed}};
    return j;
}

namespace {

EpisodeMetrics metrics_from_json(const json& j) {
    EpisodeMetrics m;
    m.simulation_steps = j.at("simulation_steps").get<int>();
    m.travel_distance = j.at("travel_distance").get<double>();
    m.success = j.at("success").get<bool>();
    m.messages_sent = j.at("messages_sent").get<int>();
    return m;
}

bool same_metrics(const EpisodeMetrics& a, const EpisodeMetrics& b) {
    return a.simulation_steps == b.simulation_steps && std::abs(a.travel_distance - b.travel_distance) <= 1e-9 &&
           a.success == b.success && a.messages_sent == b.messages_sent;
}

}  // namespace

ReplayReport replay_transcript(const std::string& jsonl) {
    std::istringstream in(jsonl);
    std::string line;
    std::vector<json> lines;
    try {
        while (std::getline(in, line))
            if (!line.empty()) lines.push_back(json::parse(line));
    } catch (const json::exception& e) {
        throw SchemaMismatch(std::string("transcript is not JSON lines: ") + e.what());
    }
    if (lines.empty() || lines.front().value("type", "") != "header") throw SchemaMismatch("transcript has no header");
    const json& header = lines.front();
    if (header.value("schema_version", -1) != kTranscriptSchemaVersion)
        throw SchemaMismatch("transcript schema version " + header.value("schema_version", json(-1)).dump() +
                             " does not match " + std::to_string(kTranscriptSchemaVersion));

    ReplayReport report;
    WorldState state;
    Goal goal;
    try {
        state = world_from_json(header.at("initial_state"));
        goal = goal_from_json(header.at("goal"));
    } catch (const json::exception& e) {
        throw SchemaMismatch(std::string("bad header: ") + e.what());
    }

    auto diverge = [&](int step, std::string field, std::string rec, std::string rep) {
        if (!report.first_divergence) report.first_divergence = Divergence{step, std::move(field), std::move(rec), std::move(rep)};
    };

    Termination term = check_termination(state, goal);
    bool have_result = false;
    for (std::size_t i = 1; i < lines.size(); ++i) {
        const json& l = lines[i];
        const auto type = l.value("type", "");
        try {
            if (type == "step") {
                const int s = l.at("step").get<int>();
                if (s != state.step_index) diverge(s, "step", std::to_string(s), std::to_string(state.step_index));
                JointAction joint;
                for (const auto& [id, a] : l.at("actions").items()) joint[std::stoi(id)] = action_from_json(a);
                step(state, joint);
                ++report.steps;
                term = check_termination(state, goal);
                json positions = json::object();
                for (const auto& a : state.agents) positions[std::to_string(a.agent_id)] = to_json(a.position);
                if (positions != l.at("positions")) diverge(s, "positions", l.at("positions").dump(), positions.dump());
                const auto rec = metrics_from_json(l.at("metrics"));
                const auto rep = current_metrics(state, term);
                if (!same_metrics(rec, rep))
                    diverge(s, "metrics", to_json(rec).dump(), to_json(rep).dump());
            } else if (type == "result") {
                have_result = true;
                report.recorded = metrics_from_json(l.at("metrics"));
                report.recorded_termination = l.at("termination").get<std::string>();
            } else {
                throw SchemaMismatch("unknown line type '" + type + "'");
            }
        } catch (const json::exception& e) {
            throw SchemaMismatch("line " + std::to_string(i + 1) + ": " + e.what());
        }
    }
    if (!have_result) throw SchemaMismatch("transcript has no result line");
    report.replayed = current_metrics(state, term);
    report.replayed_termination = std::string(to_string(term.reason));
    if (report.recorded_termination != report.replayed_termination)
        diverge(state.step_index, "termination", report.recorded_termination, report.replayed_termination);
    if (!same_metrics(report.recorded, report.replayed))
        diverge(state.step_index, "result", to_json(report.recorded).dump(), to_json(report.replayed).dump());
    return report;
}

}  // namespace reveca
