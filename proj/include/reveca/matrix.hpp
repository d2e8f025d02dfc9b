#pragma once

#include <functional>
#include <optional>
#include <string>
#include <vector>

#include "json.hpp"
#include "reveca/harness.hpp"

namespace reveca {

struct MatrixRow {
    std::string label;
    nlohmann::json settings;  // flags, K, R, dummy_count, agent_count, horizon
    int episodes = 0;
    int successes = 0;
    std::optional<double> mean_ss;  // unset when any episode aborted
    std::optional<double> mean_td;
    std::optional<double> success_rate;
    std::vector<std::string> errors;

    bool operator==(const MatrixRow&) const = default;
};

struct MatrixReport {
    std::vector<MatrixRow> rows;
    // Full per-episode results in row order, then task, then seed. Not serialized.
    std::vector<std::vector<EpisodeResult>> episodes;

    std::string render_table() const;
    nlohmann::json to_json() const;
    static MatrixReport from_json(const nlohmann::json& j);
};

// Runs every (config, task, seed) episode on a pool of `workers` threads. Each config gets
// its own reasoner from make_reasoner unless `reasoner_for` supplies one.
MatrixReport run_matrix(const std::vector<RunConfig>& configs, int workers,
                        std::function<std::shared_ptr<Reasoner>(const RunConfig&)> reasoner_for = {});

}  // namespace reveca
