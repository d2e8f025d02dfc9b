#pragma once

#include <optional>
#include <string>
#include <vector>

#include "reveca/memory.hpp"
#include "reveca/planning.hpp"
#include "reveca/world.hpp"

namespace reveca {

// Shortest 4-connected path from `from` to any cell of `to_region`, both ends included.
// Unit step cost with a Manhattan heuristic to the nearest region cell.
std::optional<std::vector<GridPos>> a_star(const GridMap& grid, GridPos from, const std::vector<GridPos>& to_region);

// Walkable cells 4-adjacent to `target` that share its room.
std::vector<GridPos> interaction_cells(const MapKnowledge& map, GridPos target);

enum class SkillPhase { Navigating, Interacting, Done, Failed };
enum class FailReason { None, TargetMissing, PathBlocked, NothingHeld, NoPath };

std::string_view to_string(SkillPhase p);
std::string_view to_string(FailReason r);

struct SkillExecution {
    Plan plan;
    std::vector<GridPos> region;
    std::vector<GridPos> path;
    std::size_t cursor = 0;
    SkillPhase phase = SkillPhase::Navigating;
    FailReason reason = FailReason::None;
    int repairs = 0;
    int ticks = 0;

    bool finished() const { return phase == SkillPhase::Done || phase == SkillPhase::Failed; }
};

struct AgentView {
    GridPos position;
    std::vector<ObjectId> held;
    const Observation* observation = nullptr;
};

SkillExecution start_skill(const Plan& plan, const MapKnowledge& map, GridPos from);

// Advances the skill by one decision. Returns the primitive to emit, or nullopt when the skill
// finished (Done or Failed) without needing an action this step.
std::optional<ActionRequest> tick_skill(SkillExecution& exec, const AgentView& view, const MapKnowledge& map);

}  // namespace reveca
