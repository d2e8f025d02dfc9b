#include "reveca/executor.hpp"

#include <algorithm>
#include <queue>
#include <tuple>

namespace reveca {

std::optional<std::vector<GridPos>> a_star(const GridMap& grid, GridPos from, const std::vector<GridPos>& to_region) {
    if (!grid.walkable(from)) return std::nullopt;
    const std::size_t n = static_cast<std::size_t>(grid.width()) * static_cast<std::size_t>(grid.height());
    std::vector<char> goal(n, 0);
    std::vector<GridPos> goals;
    for (GridPos g : to_region)
        if (grid.walkable(g) && !goal[grid.index(g)]) {
            goal[grid.index(g)] = 1;
            goals.push_back(g);
        }
    if (goals.empty()) return std::nullopt;

    auto h = [&](GridPos p) {
        int best = manhattan(p, goals.front());
        for (GridPos g : goals) best = std::min(best, manhattan(p, g));
        return best;
    };

    std::vector<int> g_cost(n, -1);
    std::vector<GridPos> parent(n, GridPos{-1, -1});
    std::vector<char> closed(n, 0);
    // (f, h, y, x): ties broken toward the goal, then by position, so results are reproducible.
    using Entry = std::tuple<int, int, int, int>;
    std::priority_queue<Entry, std::vector<Entry>, std::greater<>> open;
    g_cost[grid.index(from)] = 0;
    open.emplace(h(from), h(from), from.y, from.x);

    while (!open.empty()) {
        auto [f, hv, y, x] = open.top();
        open.pop();
        GridPos p{x, y};
        const auto pi = grid.index(p);
        if (closed[pi]) continue;
        closed[pi] = 1;
        if (goal[pi]) {
            std::vector<GridPos> path{p};
            while (path.back() != from) path.push_back(parent[grid.index(path.back())]);
            std::reverse(path.begin(), path.end());
            return path;
        }
        for (GridPos q : grid.walkable_neighbors(p)) {
            const auto qi = grid.index(q);
            if (closed[qi]) continue;
            const int g = g_cost[pi] + 1;
            if (g_cost[qi] >= 0 && g_cost[qi] <= g) continue;
            g_cost[qi] = g;
            parent[qi] = p;
            const int hq = h(q);
            open.emplace(g + hq, hq, q.y, q.x);
        }
    }
    return std::nullopt;
}

std::vector<GridPos> interaction_cells(const MapKnowledge& map, GridPos target) {
    std::vector<GridPos> out;
    const auto room = map.room_at(target);
    for (Direction d : kAllDirections) {
        GridPos c = neighbor(target, d);
        if (map.grid.walkable(c) && map.room_at(c) == room) out.push_back(c);
    }
    if (out.empty() && map.grid.walkable(target)) out.push_back(target);
    return out;
}

std::string_view to_string(SkillPhase p) {
    switch (p) {
        case SkillPhase::Navigating: return "navigating";
        case SkillPhase::Interacting: return "interacting";
        case SkillPhase::Done: return "done";
        case SkillPhase::Failed: return "failed";
    }
    return "navigating";
}

std::string_view to_string(FailReason r) {
    switch (r) {
        case FailReason::None: return "none";
        case FailReason::TargetMissing: return "target_missing";
        case FailReason::PathBlocked: return "path_blocked";
        case FailReason::NothingHeld: return "nothing_held";
        case FailReason::NoPath: return "no_path";
    }
    return "none";
}

namespace {

std::vector<GridPos> region_for(const Plan& plan, const MapKnowledge& map) {
    if (plan.skill == Skill::GoExplore) {
        std::vector<GridPos> cells;
        if (const Room* room = map.find_room(plan.target_room))
            for (GridPos c : room->cells)
                if (map.grid.walkable(c)) cells.push_back(c);
        return cells;
    }
    return interaction_cells(map, plan.target_position);
}

void fail(SkillExecution& exec, FailReason reason) {
    exec.phase = SkillPhase::Failed;
    exec.reason = reason;
}

bool reroute(SkillExecution& exec, const MapKnowledge& map, GridPos from) {
    auto path = a_star(map.grid, from, exec.region);
    if (!path) return false;
    exec.path = std::move(*path);
    exec.cursor = 0;
    return true;
}

Direction direction_to(GridPos from, GridPos to) {
    if (to.x > from.x) return Direction::East;
    if (to.x < from.x) return Direction::West;
    if (to.y > from.y) return Direction::South;
    return Direction::North;
}

bool holds(const AgentView& view, ObjectId id) {
    return std::find(view.held.begin(), view.held.end(), id) != view.held.end();
}

}  // namespace

SkillExecution start_skill(const Plan& plan, const MapKnowledge& map, GridPos from) {
    SkillExecution exec;
    exec.plan = plan;
    exec.region = region_for(plan, map);
    if (!reroute(exec, map, from)) fail(exec, FailReason::NoPath);
    return exec;
}

std::optional<ActionRequest> tick_skill(SkillExecution& exec, const AgentView& view, const MapKnowledge& map) {
    if (exec.finished()) return std::nullopt;
    ++exec.ticks;
    const Observation* obs = view.observation;
    Plan& plan = exec.plan;

    // Skill-level completion and target checks.
    switch (plan.skill) {
        case Skill::GoExplore:
            if (map.room_at(view.position) == plan.target_room) {
                exec.phase = SkillPhase::Done;
                return std::nullopt;
            }
            break;
        case Skill::GoGrab: {
            if (holds(view, plan.target_object)) {
                exec.phase = SkillPhase::Done;
                return std::nullopt;
            }
            if (!obs || obs->room_id != plan.target_room) break;
            if (const auto* seen = obs->find(plan.target_object)) {
                plan.target_container = seen->container_id;
                if (seen->position != plan.target_position) {
                    plan.target_position = seen->position;
                    exec.region = region_for(plan, map);
                    exec.path.clear();
                }
                break;
            }
            // Not visible: only acceptable when it may sit in a container we can see closed.
            const ObjectSnapshot* box = plan.target_container ? obs->find(*plan.target_container) : nullptr;
            if (!box || box->container_state != ContainerState::Closed) {
                fail(exec, FailReason::TargetMissing);
                return std::nullopt;
            }
            break;
        }
        case Skill::GoPut:
            if (view.held.empty()) {
                if (exec.ticks == 1) fail(exec, FailReason::NothingHeld);
                else exec.phase = SkillPhase::Done;
                return std::nullopt;
            }
            break;
        case Skill::GoCheck:
            if (obs) {
                const auto* c = obs->find(plan.target_object);
                if (c && c->container_state != ContainerState::Closed) {
                    exec.phase = SkillPhase::Done;
                    return std::nullopt;
                }
            }
            break;
    }

    const bool arrived = std::find(exec.region.begin(), exec.region.end(), view.position) != exec.region.end();
    if (!arrived) {
        exec.phase = SkillPhase::Navigating;
        if (exec.path.empty() || exec.cursor >= exec.path.size() || exec.path[exec.cursor] != view.position) {
            // Off the planned route (a move was refused, or the target moved).
            if (!reroute(exec, map, view.position)) {
                fail(exec, FailReason::NoPath);
                return std::nullopt;
            }
        }
        if (exec.cursor + 1 >= exec.path.size() || !map.grid.walkable(exec.path[exec.cursor + 1])) {
            if (++exec.repairs > 1 || !reroute(exec, map, view.position) || exec.path.size() < 2) {
                fail(exec, FailReason::PathBlocked);
                return std::nullopt;
            }
        }
        const GridPos next = exec.path[exec.cursor + 1];
        ++exec.cursor;
        return ActionRequest::move(direction_to(view.position, next));
    }

    exec.phase = SkillPhase::Interacting;
    switch (plan.skill) {
        case Skill::GoExplore:
            exec.phase = SkillPhase::Done;
            return std::nullopt;
        case Skill::GoCheck:
            return ActionRequest::open(plan.target_object);
        case Skill::GoGrab: {
            if (plan.target_container && obs) {
                const auto* box = obs->find(*plan.target_container);
                if (box && box->container_state == ContainerState::Closed) return ActionRequest::open(box->object_id);
            }
            return ActionRequest::grasp(plan.target_object);
        }
        case Skill::GoPut: {
            if (obs) {
                const auto* loc = obs->find(plan.target_object);
                if (loc && loc->container_state == ContainerState::Closed) return ActionRequest::open(plan.target_object);
            }
            return ActionRequest::put(view.held.front(), plan.target_object);
        }
    }
    return std::nullopt;
}

}  // namespace reveca
