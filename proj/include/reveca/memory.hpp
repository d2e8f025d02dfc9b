#pragma once

#include <map>
#include <optional>
#include <set>
#include <string>
#include <vector>

#include "json.hpp"
#include "reveca/world.hpp"

namespace reveca {

// Ordinal relevance. Numeric values are shared by every ladder so comparisons stay valid
// across ladder sizes.
enum class Relevance { None = 0, Low = 1, Medium = 2, High = 3, Strong = 4 };

std::string_view to_string(Relevance r);
std::optional<Relevance> parse_relevance(std::string_view s);

struct RelevanceLadder {
    int size = 4;  // R in {3, 4, 5}

    static RelevanceLadder make(int r);
    // Levels from lowest to highest.
    std::vector<Relevance> levels() const;
    bool contains(Relevance r) const;
    // Snaps a level onto the ladder: R=3 merges Low into None, R<5 merges High into Strong.
    Relevance project(Relevance r) const;
};

inline constexpr std::string_view kActionGrab = "gograb";
inline constexpr std::string_view kActionCheck = "gocheck";
inline constexpr std::string_view kActionNone = "none";

struct ObservationRecord {
    int record_id = -1;
    ObjectId object_id = -1;
    std::string object_name;
    ObjectKind kind = ObjectKind::Item;
    GridPos position;
    RoomId room_id = -1;
    std::string room_name;
    std::string available_action{kActionNone};
    std::vector<std::string> states;
    ContainerState container_state = ContainerState::NotApplicable;
    std::optional<ObjectId> container_id;
    Relevance relevance = Relevance::None;
    int acquired_step = 0;
    bool discarded = false;
};

struct PositionFix {
    enum class Source { Observed, RoomCenter };
    GridPos position;
    RoomId room_id = -1;
    int step = 0;
    Source source = Source::Observed;

    bool operator==(const PositionFix&) const = default;
};

std::string_view to_string(PositionFix::Source s);

struct ConversationEntry {
    int step = 0;
    std::string message;
};

struct CollaboratorRecord {
    AgentId collaborator_id = -1;
    std::string name;
    std::vector<ObjectId> held_object_ids;
    int held_step = -1;
    std::optional<PositionFix> position_estimate;
    std::vector<PositionFix> position_history;  // every fix, in arrival order
    std::vector<ConversationEntry> conversation_log;
    std::vector<std::string> completed_plans;
};

struct SkillDescriptor {
    std::string name;
    std::string parameter;  // "room", "container", "object" or "location"
    std::string precondition;
};

class SkillBook {
public:
    static const SkillBook& standard();
    const SkillDescriptor* find(std::string_view name) const;
    const std::vector<SkillDescriptor>& skills() const { return skills_; }

private:
    std::vector<SkillDescriptor> skills_;
};

// Static layout an agent knows from the start: room footprints and the occupancy grid.
struct MapKnowledge {
    GridMap grid;
    std::vector<Room> rooms;
    std::vector<RoomId> cell_room;

    static MapKnowledge from_world(const WorldState& state);
    const Room* find_room(RoomId id) const;
    const Room* find_room(std::string_view name) const;
    std::optional<RoomId> room_at(GridPos p) const;
};

// Plan strings in the collaborator-memory format.
std::string grab_plan_string(std::string_view name, ObjectId id);
std::string put_plan_string(std::string_view location, ObjectId id);
// Object id referenced by a "[gograb] <name> (id)" string.
std::optional<ObjectId> grabbed_id_from_plan(std::string_view plan);

struct ParseWarning {
    std::string reason;
};

class AgentMemory {
public:
    AgentMemory() = default;
    AgentMemory(AgentId self, std::string self_name, Goal goal, MapKnowledge map,
                RelevanceLadder ladder);

    AgentId self_id() const { return self_id_; }
    const std::string& self_name() const { return self_name_; }
    const Goal& goal() const { return goal_; }
    const MapKnowledge& map() const { return map_; }
    const RelevanceLadder& ladder() const { return ladder_; }

    // ---- observation memory ----
    const std::vector<ObservationRecord>& records() const { return records_; }
    const ObservationRecord* record(int record_id) const;
    const ObservationRecord* live_record_for(ObjectId object_id) const;
    // Available action the snapshot would get if stored now.
    std::string derive_action(const ObjectSnapshot& s) const;
    // True when storing the snapshot requires a fresh relevance estimate: new record, room
    // changed, or the available action changed.
    bool needs_relevance(const ObjectSnapshot& s) const;
    // Relevance is applied when given; otherwise the existing level is kept.
    int upsert_observation(const ObjectSnapshot& s, std::optional<Relevance> relevance, int step);
    int discard_plan_provenance(const std::vector<int>& record_ids);
    int discard_object(ObjectId object_id);
    // Records count as non-None when relevance > None and not discarded.
    int live_non_none_count() const;

    // ---- goal view ----
    const std::optional<ObjectSnapshot>& goal_location() const { return goal_location_; }
    void set_goal_location(const ObjectSnapshot& s) { goal_location_ = s; }
    void mark_placed(ObjectId id, std::string_view name);
    bool known_placed(ObjectId id) const { return placed_.contains(id); }
    int known_placed_count(std::string_view name) const;
    // Required count minus known placements minus what this agent carries.
    int remaining(std::string_view name, const std::vector<std::pair<ObjectId, std::string>>& held) const;
    const std::map<ObjectId, std::string>& placed() const { return placed_; }

    // ---- collaborator memory ----
    CollaboratorRecord& collaborator(AgentId id, std::string_view name = {});
    const CollaboratorRecord* find_collaborator(AgentId id) const;
    const std::map<AgentId, CollaboratorRecord>& collaborators() const { return collaborators_; }
    void observe_collaborator(const CollaboratorSnapshot& c, int step);
    // Applies the conversational content of a message: log append, room-center position fix,
    // completed plans. Returns a warning when the payload could not be used.
    std::optional<ParseWarning> update_collaborator_from_message(AgentId sender, const Message& m,
                                                                 int step);

    // ---- own history ----
    const std::vector<std::string>& completed_plans() const { return completed_plans_; }
    void add_completed_plan(std::string plan) { completed_plans_.push_back(std::move(plan)); }
    void note_interaction(ObjectId id) { interacted_.insert(id); }
    bool interacted_with(ObjectId id) const { return interacted_.contains(id); }

    // ---- rooms ----
    void visit_room(RoomId room, int step) { room_last_visit_[room] = step; }
    bool explored(RoomId room) const { return room_last_visit_.contains(room); }
    std::optional<int> last_visit(RoomId room) const;

    const SkillBook& skills() const { return SkillBook::standard(); }

    // Snapshot in the shape of the common-goal, object and collaborator listings.
    nlohmann::json dump() const;

private:
    AgentId self_id_ = -1;
    std::string self_name_;
    Goal goal_;
    MapKnowledge map_;
    RelevanceLadder ladder_;
    std::vector<ObservationRecord> records_;
    std::map<AgentId, CollaboratorRecord> collaborators_;
    std::optional<ObjectSnapshot> goal_location_;
    std::map<ObjectId, std::string> placed_;
    std::vector<std::string> completed_plans_;
    std::set<ObjectId> interacted_;
    std::map<RoomId, int> room_last_visit_;
};

}  // namespace reveca
