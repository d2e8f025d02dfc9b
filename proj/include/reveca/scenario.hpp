#pragma once

#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "json.hpp"
#include "reveca/world.hpp"

namespace reveca {

// Household task: a list of candidate target object names and a goal location.
struct TaskSpec {
    std::string name;
    std::string display_name;
    std::vector<std::string> objects;
    std::string location;
    std::string relation = "on";
};

class TaskCatalog {
public:
    static TaskCatalog load(const std::filesystem::path& dir);
    // Loads the shipped task files from the data directory.
    static const TaskCatalog& builtin();

    void add(TaskSpec spec);
    const TaskSpec* find(std::string_view name) const;
    std::vector<std::string> names() const;

private:
    std::map<std::string, TaskSpec, std::less<>> tasks_;
};

// Layout descriptor: {rooms:[{name,rect}], doors:[...], placements:[...], agents:[...]}.
// Kept as JSON; validated when a world is built from it.
struct MapSpec {
    nlohmann::json doc;

    static MapSpec load(const std::filesystem::path& file);
    static const MapSpec& builtin_house();
    std::string name() const;
};

struct ScenarioOptions {
    int agent_count = 2;
    int horizon = kDefaultHorizon;
};

struct Scenario {
    std::string task_name;
    WorldState state;
    Goal goal;
};

std::filesystem::path data_dir();

inline const std::vector<std::string>& agent_names() {
    static const std::vector<std::string> names = {"Alice", "Bob", "Carol", "Dave", "Eve", "Frank"};
    return names;
}

// Rooms, furniture, explicit item placements and explicit agent starts from the map.
// Agents without an "at" entry are left at (-1,-1) for the caller to place.
WorldState build_world(const MapSpec& map, int agent_count, int horizon);

Goal make_goal(const WorldState& state, const TaskSpec& task,
               const std::vector<std::pair<std::string, int>>& counts);

// Deterministic C-WAH-style scenario: 3..5 target objects (at least one inside a closed
// container), dummy_count distractors, seeded agent starts.
Scenario spawn_scenario(const TaskCatalog& catalog, std::string_view task_name,
                        unsigned long long seed, int dummy_count, const MapSpec& map,
                        const ScenarioOptions& options = {});

// Names used for distractor objects; disjoint from every task object name.
const std::vector<std::string>& dummy_object_names();

}  // namespace reveca
