#include "reveca/world.hpp"

#include <algorithm>
#include <charconv>
#include <numeric>

#include "reveca/errors.hpp"

namespace reveca {

namespace {

template <typename Vec, typename Id>
auto* find_by_id(Vec& items, Id id, Id (*key)(const typename Vec::value_type&)) {
    auto it = std::lower_bound(items.begin(), items.end(), id,
                               [&](const auto& item, Id v) { return key(item) < v; });
    return (it != items.end() && key(*it) == id) ? &*it : nullptr;
}

ObjectId object_key(const ObjectEntity& o) { return o.object_id; }
AgentId agent_key(const AgentBody& a) { return a.agent_id; }

std::optional<int> parse_int(std::string_view s) {
    int value = 0;
    auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), value);
    if (ec != std::errc() || ptr != s.data() + s.size()) return std::nullopt;
    return value;
}

bool within_reach(GridPos agent, GridPos target) { return manhattan(agent, target) <= 1; }

}  // namespace

bool Room::contains(GridPos p) const { return std::binary_search(cells.begin(), cells.end(), p); }

std::string_view to_string(ObjectKind k) {
    switch (k) {
        case ObjectKind::Item: return "item";
        case ObjectKind::Container: return "container";
        case ObjectKind::Surface: return "surface";
        case ObjectKind::Decor: return "decor";
    }
    return "item";
}

std::string_view to_string(ContainerState s) {
    switch (s) {
        case ContainerState::NotApplicable: return "n/a";
        case ContainerState::Open: return "open";
        case ContainerState::Closed: return "closed";
    }
    return "n/a";
}

void refresh_states(ObjectEntity& obj) {
    obj.states.clear();
    switch (obj.kind) {
        case ObjectKind::Item: obj.states.push_back("GRABBABLE"); break;
        case ObjectKind::Container:
            obj.states.push_back("CONTAINER");
            obj.states.push_back(obj.container_state == ContainerState::Closed ? "CLOSED" : "OPEN");
            break;
        case ObjectKind::Surface: obj.states.push_back("SURFACE"); break;
        case ObjectKind::Decor: break;
    }
}

int Goal::total_count() const {
    return std::accumulate(sub_goals.begin(), sub_goals.end(), 0,
                           [](int acc, const SubGoal& g) { return acc + g.count; });
}

bool Goal::is_target_name(std::string_view name) const { return required(name) > 0; }

int Goal::required(std::string_view name) const {
    for (const auto& g : sub_goals)
        if (g.object_name == name) return g.count;
    return 0;
}

std::string render_goal_text(const Goal& goal) {
    std::string text = "Find and put target objects ";
    for (std::size_t i = 0; i < goal.sub_goals.size(); ++i) {
        const auto& g = goal.sub_goals[i];
        if (i > 0) text += ", ";
        text += std::to_string(g.count) + " " + g.object_name;
        if (g.count > 1) text += "s";
    }
    text += goal.relation == "inside" ? " into" : " onto";
    text += " the goal location <" + goal.location_name + "> (" +
            std::to_string(goal.location_id) + ").";
    return text;
}

const ObjectSnapshot* Observation::find(ObjectId id) const {
    for (const auto& o : visible_objects)
        if (o.object_id == id) return &o;
    return nullptr;
}

std::string_view to_string(ActionType t) {
    switch (t) {
        case ActionType::NoOp: return "noop";
        case ActionType::Move: return "move";
        case ActionType::Open: return "open";
        case ActionType::Close: return "close";
        case ActionType::Grasp: return "grasp";
        case ActionType::Put: return "put";
        case ActionType::SendMessage: return "send";
    }
    return "noop";
}

ActionRequest ActionRequest::move(Direction d) {
    ActionRequest a;
    a.type = ActionType::Move;
    a.direction = d;
    return a;
}

ActionRequest ActionRequest::open(ObjectId container) {
    ActionRequest a;
    a.type = ActionType::Open;
    a.object = container;
    return a;
}

ActionRequest ActionRequest::close(ObjectId container) {
    ActionRequest a;
    a.type = ActionType::Close;
    a.object = container;
    return a;
}

ActionRequest ActionRequest::grasp(ObjectId object) {
    ActionRequest a;
    a.type = ActionType::Grasp;
    a.object = object;
    return a;
}

ActionRequest ActionRequest::put(ObjectId object, ObjectId destination) {
    ActionRequest a;
    a.type = ActionType::Put;
    a.object = object;
    a.target = destination;
    return a;
}

ActionRequest ActionRequest::send(Message m) {
    ActionRequest a;
    a.type = ActionType::SendMessage;
    a.message = std::move(m);
    return a;
}

std::string ActionRequest::id() const {
    switch (type) {
        case ActionType::NoOp: return "noop";
        case ActionType::Move: return "move:" + std::string(to_string(direction));
        case ActionType::Open: return "open:" + std::to_string(object);
        case ActionType::Close: return "close:" + std::to_string(object);
        case ActionType::Grasp: return "grasp:" + std::to_string(object);
        case ActionType::Put:
            return "put:" + std::to_string(object) + ":" + std::to_string(target);
        case ActionType::SendMessage: return "send";
    }
    return "noop";
}

std::optional<ActionRequest> parse_action_id(std::string_view id) {
    std::vector<std::string_view> parts;
    std::size_t start = 0;
    while (true) {
        auto pos = id.find(':', start);
        parts.push_back(id.substr(start, pos - start));
        if (pos == std::string_view::npos) break;
        start = pos + 1;
    }
    const auto verb = parts[0];
    if (verb == "noop" && parts.size() == 1) return ActionRequest::noop();
    if (verb == "move" && parts.size() == 2) {
        if (auto d = parse_direction(parts[1])) return ActionRequest::move(*d);
        return std::nullopt;
    }
    if (parts.size() == 2) {
        auto obj = parse_int(parts[1]);
        if (!obj) return std::nullopt;
        if (verb == "open") return ActionRequest::open(*obj);
        if (verb == "close") return ActionRequest::close(*obj);
        if (verb == "grasp") return ActionRequest::grasp(*obj);
    }
    if (verb == "put" && parts.size() == 3) {
        auto obj = parse_int(parts[1]);
        auto dst = parse_int(parts[2]);
        if (obj && dst) return ActionRequest::put(*obj, *dst);
    }
    return std::nullopt;
}

const ObjectEntity* WorldState::find_object(ObjectId id) const {
    return find_by_id(objects, id, &object_key);
}
ObjectEntity* WorldState::find_object(ObjectId id) { return find_by_id(objects, id, &object_key); }
const AgentBody* WorldState::find_agent(AgentId id) const {
    return find_by_id(agents, id, &agent_key);
}
AgentBody* WorldState::find_agent(AgentId id) { return find_by_id(agents, id, &agent_key); }

const Room* WorldState::find_room(RoomId id) const {
    for (const auto& r : rooms)
        if (r.room_id == id) return &r;
    return nullptr;
}

const Room* WorldState::find_room(std::string_view name) const {
    for (const auto& r : rooms)
        if (r.room_name == name) return &r;
    return nullptr;
}

std::optional<RoomId> WorldState::room_at(GridPos p) const {
    if (!grid.in_bounds(p)) return std::nullopt;
    RoomId id = cell_room[grid.index(p)];
    if (id < 0) return std::nullopt;
    return id;
}

void rebuild_room_index(WorldState& state) {
    state.cell_room.assign(static_cast<std::size_t>(state.grid.width()) *
                               static_cast<std::size_t>(state.grid.height()),
                           -1);
    for (const auto& room : state.rooms)
        for (GridPos c : room.cells)
            if (state.grid.in_bounds(c)) state.cell_room[state.grid.index(c)] = room.room_id;
}

namespace {

// Room the object is physically in, following container placement.
std::optional<RoomId> object_room(const WorldState& state, const ObjectEntity& obj) {
    switch (obj.placement.kind) {
        case Placement::Kind::Cell: return state.room_at(obj.position);
        case Placement::Kind::InContainer: {
            const auto* c = state.find_object(obj.placement.container);
            return c ? state.room_at(c->position) : std::nullopt;
        }
        case Placement::Kind::Held: return std::nullopt;
    }
    return std::nullopt;
}

ObjectSnapshot snapshot_of(const ObjectEntity& obj, const Room& room) {
    ObjectSnapshot s;
    s.object_id = obj.object_id;
    s.object_name = obj.object_name;
    s.kind = obj.kind;
    s.position = obj.position;
    s.room_id = room.room_id;
    s.room_name = room.room_name;
    s.states = obj.states;
    s.container_state = obj.container_state;
    if (obj.placement.kind == Placement::Kind::InContainer) s.container_id = obj.placement.container;
    return s;
}

}  // namespace

Observation observe(const WorldState& state, AgentId agent_id) {
    const AgentBody* self = state.find_agent(agent_id);
    if (!self) throw KernelError("observe: unknown agent " + std::to_string(agent_id));

    Observation obs;
    obs.observer_id = agent_id;
    obs.step = state.step_index;
    auto room_id = state.room_at(self->position);
    if (!room_id) return obs;
    obs.room_id = *room_id;
    const Room& room = *state.find_room(*room_id);

    for (const auto& obj : state.objects) {
        if (object_room(state, obj) != room_id) continue;
        if (obj.placement.kind == Placement::Kind::InContainer) {
            const auto* c = state.find_object(obj.placement.container);
            if (!c || !c->accessible()) continue;
        }
        obs.visible_objects.push_back(snapshot_of(obj, room));
    }
    for (const auto& agent : state.agents) {
        if (agent.agent_id == agent_id) continue;
        if (state.room_at(agent.position) != room_id) continue;
        obs.visible_collaborators.push_back(
            {agent.agent_id, agent.name, agent.position, agent.held_object_ids});
    }
    return obs;
}

std::vector<Message> inbox_for(const WorldState& state, AgentId agent_id) {
    std::vector<Message> out;
    for (const auto& m : state.delivered)
        if (m.addressed_to(agent_id)) out.push_back(m);
    return out;
}

std::optional<std::string> illegal_reason(const WorldState& state, AgentId agent_id,
                                          const ActionRequest& action) {
    const AgentBody* self = state.find_agent(agent_id);
    if (!self) return "unknown agent";

    auto reachable_object = [&](ObjectId id) -> const ObjectEntity* {
        const auto* obj = state.find_object(id);
        if (!obj) return nullptr;
        return obj;
    };

    switch (action.type) {
        case ActionType::NoOp: return std::nullopt;
        case ActionType::Move:
            if (!state.grid.walkable(neighbor(self->position, action.direction))) return "blocked";
            return std::nullopt;
        case ActionType::Open:
        case ActionType::Close: {
            const auto* obj = reachable_object(action.object);
            if (!obj) return "no such object";
            if (obj->kind != ObjectKind::Container) return "not a container";
            if (!within_reach(self->position, obj->position)) return "out of reach";
            if (action.type == ActionType::Open && obj->container_state != ContainerState::Closed)
                return "already open";
            if (action.type == ActionType::Close && obj->container_state != ContainerState::Open)
                return "already closed";
            return std::nullopt;
        }
        case ActionType::Grasp: {
            const auto* obj = reachable_object(action.object);
            if (!obj) return "no such object";
            if (obj->kind != ObjectKind::Item) return "not grabbable";
            if (static_cast<int>(self->held_object_ids.size()) >= kHandCapacity) return "hands full";
            switch (obj->placement.kind) {
                case Placement::Kind::Held: return "already held";
                case Placement::Kind::Cell:
                    if (!within_reach(self->position, obj->position)) return "out of reach";
                    return std::nullopt;
                case Placement::Kind::InContainer: {
                    const auto* c = state.find_object(obj->placement.container);
                    if (!c || !within_reach(self->position, c->position)) return "out of reach";
                    if (!c->accessible()) return "container closed";
                    return std::nullopt;
                }
            }
            return "unknown placement";
        }
        case ActionType::Put: {
            const auto& held = self->held_object_ids;
            if (std::find(held.begin(), held.end(), action.object) == held.end())
                return "not holding object";
            const auto* dst = reachable_object(action.target);
            if (!dst) return "no such destination";
            if (!dst->is_container) return "destination cannot hold objects";
            if (!within_reach(self->position, dst->position)) return "out of reach";
            if (!dst->accessible()) return "destination closed";
            return std::nullopt;
        }
        case ActionType::SendMessage:
            if (!action.message) return "missing message";
            if (action.message->text.size() > kMessageBudget) return "message over budget";
            return std::nullopt;
    }
    return "unknown action";
}

std::vector<ActionRequest> legal_actions(const WorldState& state, AgentId agent_id) {
    std::vector<ActionRequest> out;
    const AgentBody* self = state.find_agent(agent_id);
    if (!self) return out;
    auto try_add = [&](ActionRequest a) {
        if (!illegal_reason(state, agent_id, a)) out.push_back(std::move(a));
    };
    for (Direction d : kAllDirections) try_add(ActionRequest::move(d));
    for (const auto& obj : state.objects) {
        if (obj.kind == ObjectKind::Container) {
            try_add(ActionRequest::open(obj.object_id));
            try_add(ActionRequest::close(obj.object_id));
        }
        if (obj.kind == ObjectKind::Item && obj.placement.kind != Placement::Kind::Held)
            try_add(ActionRequest::grasp(obj.object_id));
        if (obj.is_container)
            for (ObjectId held : self->held_object_ids)
                try_add(ActionRequest::put(held, obj.object_id));
    }
    return out;
}

namespace {

void detach_from_container(WorldState& state, ObjectEntity& obj) {
    if (obj.placement.kind != Placement::Kind::InContainer) return;
    if (auto* c = state.find_object(obj.placement.container)) {
        auto& contents = c->contents;
        contents.erase(std::remove(contents.begin(), contents.end(), obj.object_id), contents.end());
    }
}

void apply_action(WorldState& state, AgentBody& agent, const ActionRequest& action,
                  std::vector<Message>& outgoing) {
    switch (action.type) {
        case ActionType::NoOp: break;
        case ActionType::Move: {
            GridPos next = neighbor(agent.position, action.direction);
            agent.distance_traveled += euclidean(agent.position, next);
            agent.position = next;
            for (ObjectId id : agent.held_object_ids)
                if (auto* obj = state.find_object(id)) obj->position = next;
            break;
        }
        case ActionType::Open:
        case ActionType::Close: {
            auto* obj = state.find_object(action.object);
            obj->container_state =
                action.type == ActionType::Open ? ContainerState::Open : ContainerState::Closed;
            refresh_states(*obj);
            break;
        }
        case ActionType::Grasp: {
            auto* obj = state.find_object(action.object);
            detach_from_container(state, *obj);
            obj->placement = {Placement::Kind::Held, -1, agent.agent_id};
            obj->position = agent.position;
            agent.held_object_ids.push_back(obj->object_id);
            break;
        }
        case ActionType::Put: {
            auto* obj = state.find_object(action.object);
            auto* dst = state.find_object(action.target);
            auto& held = agent.held_object_ids;
            held.erase(std::remove(held.begin(), held.end(), obj->object_id), held.end());
            obj->placement = {Placement::Kind::InContainer, dst->object_id, -1};
            obj->position = dst->position;
            dst->contents.push_back(obj->object_id);
            break;
        }
        case ActionType::SendMessage: {
            Message m = *action.message;
            m.sender_id = agent.agent_id;
            m.step_sent = state.step_index;
            outgoing.push_back(std::move(m));
            ++state.messages_sent;
            break;
        }
    }
}

}  // namespace

std::vector<Event> step(WorldState& state, const JointAction& actions) {
    std::vector<Event> events;
    std::vector<Message> outgoing;
    for (auto& agent : state.agents) {
        auto it = actions.find(agent.agent_id);
        if (it == actions.end()) continue;
        const ActionRequest& action = it->second;
        if (auto reason = illegal_reason(state, agent.agent_id, action)) {
            Event e;
            e.step = state.step_index;
            e.type = "illegal_action";
            e.agent = agent.agent_id;
            e.data = {{"action", action.id()}, {"reason", *reason}};
            events.push_back(std::move(e));
            continue;
        }
        apply_action(state, agent, action, outgoing);
    }
    for (const auto& [id, _] : actions) {
        if (!state.find_agent(id)) {
            Event e;
            e.step = state.step_index;
            e.type = "illegal_action";
            e.agent = id;
            e.data = {{"reason", "unknown agent"}};
            events.push_back(std::move(e));
        }
    }
    state.delivered = std::move(outgoing);
    ++state.step_index;
    return events;
}

std::string_view to_string(TerminationReason r) {
    switch (r) {
        case TerminationReason::Running: return "running";
        case TerminationReason::Success: return "success";
        case TerminationReason::Horizon: return "horizon";
        case TerminationReason::Stuck: return "stuck";
    }
    return "running";
}

int placed_count(const WorldState& state, const Goal& goal, std::string_view object_name) {
    const auto* loc = state.find_object(goal.location_id);
    if (!loc) return 0;
    int n = 0;
    for (ObjectId id : loc->contents) {
        const auto* obj = state.find_object(id);
        if (obj && obj->object_name == object_name) ++n;
    }
    return n;
}

bool goal_satisfied(const WorldState& state, const Goal& goal) {
    for (const auto& g : goal.sub_goals)
        if (placed_count(state, goal, g.object_name) < g.count) return false;
    return true;
}

Termination check_termination(const WorldState& state, const Goal& goal) {
    if (goal_satisfied(state, goal)) return {TerminationReason::Success};
    if (state.step_index >= state.horizon) return {TerminationReason::Horizon};
    bool any_viable = false;
    for (const auto& agent : state.agents) {
        if (!legal_actions(state, agent.agent_id).empty()) {
            any_viable = true;
            break;
        }
    }
    if (!any_viable) return {TerminationReason::Stuck};
    return {TerminationReason::Running};
}

EpisodeMetrics current_metrics(const WorldState& state, const Termination& t) {
    EpisodeMetrics m;
    m.simulation_steps = state.step_index;
    double total = 0.0;
    for (const auto& a : state.agents) total += a.distance_traveled;
    m.travel_distance = state.agents.empty() ? 0.0 : total / static_cast<double>(state.agents.size());
    m.success = t.success();
    m.messages_sent = state.messages_sent;
    return m;
}

}  // namespace reveca
