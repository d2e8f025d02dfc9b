#pragma once

#include <optional>
#include <string>

#include "json.hpp"
#include "reveca/world.hpp"

namespace reveca {

struct Divergence {
    int step = 0;
    std::string field;  // "positions", "metrics", "termination", ...
    std::string recorded;
    std::string replayed;
};

struct ReplayReport {
    EpisodeMetrics recorded;
    EpisodeMetrics replayed;
    std::string recorded_termination;
    std::string replayed_termination;
    int steps = 0;
    std::optional<Divergence> first_divergence;

    bool clean() const { return !first_divergence; }
    nlohmann::json to_json() const;
};

// Re-simulates the recorded joint actions through the kernel and compares positions, per-step
// metrics and the final result. Throws SchemaMismatch on a version or structure mismatch.
ReplayReport replay_transcript(const std::string& jsonl);

}  // namespace reveca
