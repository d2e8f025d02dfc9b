#pragma once

#include <map>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "json.hpp"
#include "reveca/geometry.hpp"
#include "reveca/message.hpp"

namespace reveca {

using ObjectId = int;
using RoomId = int;

inline constexpr int kHandCapacity = 2;
inline constexpr int kDefaultHorizon = 250;

struct Room {
    RoomId room_id = -1;
    std::string room_name;
    std::vector<GridPos> cells;  // sorted; includes furniture cells and owned door cells
    GridPos center;

    bool contains(GridPos p) const;
    bool operator==(const Room&) const = default;
};

enum class ObjectKind { Item, Container, Surface, Decor };
enum class ContainerState { NotApplicable, Open, Closed };

std::string_view to_string(ObjectKind k);
std::string_view to_string(ContainerState s);

// Where an object currently is. Exactly one of the three.
struct Placement {
    enum class Kind { Cell, InContainer, Held };
    Kind kind = Kind::Cell;
    ObjectId container = -1;
    AgentId holder = -1;

    bool operator==(const Placement&) const = default;
};

struct ObjectEntity {
    ObjectId object_id = -1;
    std::string object_name;
    ObjectKind kind = ObjectKind::Item;
    GridPos position;
    bool is_container = false;  // containers and surfaces both hold contents
    ContainerState container_state = ContainerState::NotApplicable;
    std::vector<ObjectId> contents;
    std::vector<std::string> states;
    bool is_dummy = false;
    Placement placement;

    bool accessible() const { return container_state != ContainerState::Closed; }
    bool operator==(const ObjectEntity&) const = default;
};

// Recomputes the state labels (GRABBABLE, CONTAINER, OPEN, ...) from kind and container state.
void refresh_states(ObjectEntity& obj);

struct AgentBody {
    AgentId agent_id = -1;
    std::string name;
    GridPos position;
    std::vector<ObjectId> held_object_ids;
    double distance_traveled = 0.0;

    bool operator==(const AgentBody&) const = default;
};

struct SubGoal {
    std::string object_name;
    int count = 0;
    ObjectId location_id = -1;

    bool operator==(const SubGoal&) const = default;
};

struct Goal {
    std::vector<SubGoal> sub_goals;
    ObjectId location_id = -1;
    std::string location_name;
    std::string relation = "on";  // "on" for surfaces, "inside" for containers
    std::string text;

    int total_count() const;
    bool is_target_name(std::string_view name) const;
    int required(std::string_view name) const;
    bool operator==(const Goal&) const = default;
};

// Renders "Find and put target objects 1 pudding, 2 cupcakes onto the goal location <coffeetable> (268)."
std::string render_goal_text(const Goal& goal);

// Raw view of one object as seen by an observer.
struct ObjectSnapshot {
    ObjectId object_id = -1;
    std::string object_name;
    ObjectKind kind = ObjectKind::Item;
    GridPos position;
    RoomId room_id = -1;
    std::string room_name;
    std::vector<std::string> states;
    ContainerState container_state = ContainerState::NotApplicable;
    std::optional<ObjectId> container_id;  // set when the object sits in/on another object

    bool operator==(const ObjectSnapshot&) const = default;
};

struct CollaboratorSnapshot {
    AgentId agent_id = -1;
    std::string name;
    GridPos position;
    std::vector<ObjectId> held_object_ids;

    bool operator==(const CollaboratorSnapshot&) const = default;
};

struct Observation {
    AgentId observer_id = -1;
    int step = 0;
    RoomId room_id = -1;
    std::vector<ObjectSnapshot> visible_objects;
    std::vector<CollaboratorSnapshot> visible_collaborators;

    const ObjectSnapshot* find(ObjectId id) const;
};

enum class ActionType { NoOp, Move, Open, Close, Grasp, Put, SendMessage };
std::string_view to_string(ActionType t);

struct ActionRequest {
    ActionType type = ActionType::NoOp;
    Direction direction = Direction::North;
    ObjectId object = -1;  // Open/Close/Grasp/Put subject
    ObjectId target = -1;  // Put destination
    std::optional<Message> message;

    static ActionRequest noop() { return {}; }
    static ActionRequest move(Direction d);
    static ActionRequest open(ObjectId container);
    static ActionRequest close(ObjectId container);
    static ActionRequest grasp(ObjectId object);
    static ActionRequest put(ObjectId object, ObjectId destination);
    static ActionRequest send(Message m);

    // Short stable id used by the session service: "move:E", "grasp:21", "put:21:268".
    std::string id() const;
    bool operator==(const ActionRequest&) const = default;
};

std::optional<ActionRequest> parse_action_id(std::string_view id);

using JointAction = std::map<AgentId, ActionRequest>;

struct Event {
    int step = 0;
    std::string type;
    AgentId agent = -1;
    nlohmann::json data = nlohmann::json::object();
};

struct WorldState {
    int step_index = 1;
    int horizon = kDefaultHorizon;
    unsigned long long rng_seed = 0;
    GridMap grid;
    std::vector<Room> rooms;
    std::vector<ObjectEntity> objects;  // sorted by object_id
    std::vector<AgentBody> agents;      // sorted by agent_id
    std::vector<RoomId> cell_room;      // per grid cell; -1 for walls
    std::vector<Message> delivered;     // readable during the current step
    int messages_sent = 0;

    const ObjectEntity* find_object(ObjectId id) const;
    ObjectEntity* find_object(ObjectId id);
    const AgentBody* find_agent(AgentId id) const;
    AgentBody* find_agent(AgentId id);
    const Room* find_room(RoomId id) const;
    const Room* find_room(std::string_view name) const;
    std::optional<RoomId> room_at(GridPos p) const;

    bool operator==(const WorldState&) const = default;
};

// Indexes cell_room from rooms; call after rooms change.
void rebuild_room_index(WorldState& state);

Observation observe(const WorldState& state, AgentId agent_id);

// Messages delivered to agent_id at the current step.
std::vector<Message> inbox_for(const WorldState& state, AgentId agent_id);

// Reason the action is illegal for the agent right now, or nullopt when legal.
std::optional<std::string> illegal_reason(const WorldState& state, AgentId agent_id,
                                          const ActionRequest& action);

// Physical actions the agent could take (moves, open/close, grasp, put). No-op and messaging
// are always available and are excluded here.
std::vector<ActionRequest> legal_actions(const WorldState& state, AgentId agent_id);

// Applies the joint action in ascending agent_id order and advances step_index by one.
// Illegal actions degrade to no-ops and are reported as "illegal_action" events.
std::vector<Event> step(WorldState& state, const JointAction& actions);

enum class TerminationReason { Running, Success, Horizon, Stuck };
std::string_view to_string(TerminationReason r);

struct Termination {
    TerminationReason reason = TerminationReason::Running;
    bool done() const { return reason != TerminationReason::Running; }
    bool success() const { return reason == TerminationReason::Success; }
};

int placed_count(const WorldState& state, const Goal& goal, std::string_view object_name);
bool goal_satisfied(const WorldState& state, const Goal& goal);
Termination check_termination(const WorldState& state, const Goal& goal);

struct EpisodeMetrics {
    int simulation_steps = 0;
    double travel_distance = 0.0;  // mean over agents, meters
    bool success = false;
    int messages_sent = 0;

    bool operator==(const EpisodeMetrics&) const = default;
};

EpisodeMetrics current_metrics(const WorldState& state, const Termination& t);

}  // namespace reveca
