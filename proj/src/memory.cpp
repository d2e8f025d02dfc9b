#include "reveca/memory.hpp"

#include <algorithm>
#include <regex>

#include "reveca/errors.hpp"
#include "reveca/serialize.hpp"

namespace reveca {

std::string_view to_string(Relevance r) {
    switch (r) {
        case Relevance::None: return "None";
        case Relevance::Low: return "Low";
        case Relevance::Medium: return "Medium";
        case Relevance::High: return "High";
        case Relevance::Strong: return "Strong";
    }
    return "None";
}

std::optional<Relevance> parse_relevance(std::string_view s) {
    for (auto r : {Relevance::None, Relevance::Low, Relevance::Medium, Relevance::High, Relevance::Strong})
        if (to_string(r) == s) return r;
    return std::nullopt;
}

RelevanceLadder RelevanceLadder::make(int r) {
    if (r < 3 || r > 5) throw ConfigError("relevance ladder size must be 3, 4 or 5");
    return RelevanceLadder{r};
}

std::vector<Relevance> RelevanceLadder::levels() const {
    switch (size) {
        case 3: return {Relevance::None, Relevance::Medium, Relevance::Strong};
        case 5: return {Relevance::None, Relevance::Low, Relevance::Medium, Relevance::High, Relevance::Strong};
        default: return {Relevance::None, Relevance::Low, Relevance::Medium, Relevance::Strong};
    }
}

bool RelevanceLadder::contains(Relevance r) const {
    auto l = levels();
    return std::find(l.begin(), l.end(), r) != l.end();
}

Relevance RelevanceLadder::project(Relevance r) const {
    if (r == Relevance::Low && size == 3) return Relevance::None;
    if (r == Relevance::High && size < 5) return Relevance::Strong;
    return r;
}

std::string_view to_string(PositionFix::Source s) {
    return s == PositionFix::Source::Observed ? "observed" : "room_center";
}

const SkillBook& SkillBook::standard() {
    static const SkillBook book = [] {
        SkillBook b;
        b.skills_ = {
            {"goexplore", "room", "current room differs from the target room"},
            {"gocheck", "container", "container is not OPEN"},
            {"gograb", "object", "target is reachable and a hand is free"},
            {"goput", "location", "at least one object is held"},
        };
        return b;
    }();
    return book;
}

const SkillDescriptor* SkillBook::find(std::string_view name) const {
    for (const auto& s : skills_)
        if (s.name == name) return &s;
    return nullptr;
}

MapKnowledge MapKnowledge::from_world(const WorldState& state) {
    return MapKnowledge{state.grid, state.rooms, state.cell_room};
}

const Room* MapKnowledge::find_room(RoomId id) const {
    for (const auto& r : rooms)
        if (r.room_id == id) return &r;
    return nullptr;
}

const Room* MapKnowledge::find_room(std::string_view name) const {
    for (const auto& r : rooms)
        if (r.room_name == name) return &r;
    return nullptr;
}

std::optional<RoomId> MapKnowledge::room_at(GridPos p) const {
    if (!grid.in_bounds(p)) return std::nullopt;
    RoomId id = cell_room[grid.index(p)];
    if (id < 0) return std::nullopt;
    return id;
}

std::string grab_plan_string(std::string_view name, ObjectId id) {
    return "[gograb] <" + std::string(name) + "> (" + std::to_string(id) + ")";
}

std::string put_plan_string(std::string_view location, ObjectId id) {
    return "[goput] <" + std::string(location) + "> (" + std::to_string(id) + ")";
}

std::optional<ObjectId> grabbed_id_from_plan(std::string_view plan) {
    static const std::regex re(R"(^\[gograb\]\s*<[^>]*>\s*\((\d+)\)$)");
    std::cmatch m;
    if (!std::regex_match(plan.begin(), plan.end(), m, re)) return std::nullopt;
    return std::stoi(m[1].str());
}

AgentMemory::AgentMemory(AgentId self, std::string self_name, Goal goal, MapKnowledge map,
                         RelevanceLadder ladder)
    : self_id_(self),
      self_name_(std::move(self_name)),
      goal_(std::move(goal)),
      map_(std::move(map)),
      ladder_(ladder) {}

const ObservationRecord* AgentMemory::record(int record_id) const {
    if (record_id < 0 || record_id >= static_cast<int>(records_.size())) return nullptr;
    return &records_[static_cast<std::size_t>(record_id)];
}

const ObservationRecord* AgentMemory::live_record_for(ObjectId object_id) const {
    for (auto it = records_.rbegin(); it != records_.rend(); ++it)
        if (it->object_id == object_id && !it->discarded) return &*it;
    return nullptr;
}

std::string AgentMemory::derive_action(const ObjectSnapshot& s) const {
    if (placed_.contains(s.object_id)) return std::string(kActionNone);
    if (s.container_id && *s.container_id == goal_.location_id) return std::string(kActionNone);
    if (s.kind == ObjectKind::Item) return std::string(kActionGrab);
    if (s.kind == ObjectKind::Container && s.container_state == ContainerState::Closed)
        return std::string(kActionCheck);
    return std::string(kActionNone);
}

bool AgentMemory::needs_relevance(const ObjectSnapshot& s) const {
    const auto* rec = live_record_for(s.object_id);
    if (!rec) return true;
    return rec->room_id != s.room_id || rec->available_action != derive_action(s);
}

int AgentMemory::upsert_observation(const ObjectSnapshot& s, std::optional<Relevance> relevance, int step) {
    ObservationRecord* rec = nullptr;
    for (auto it = records_.rbegin(); it != records_.rend(); ++it)
        if (it->object_id == s.object_id && !it->discarded) {
            rec = &*it;
            break;
        }
    if (!rec) {
        ObservationRecord fresh;
        fresh.record_id = static_cast<int>(records_.size());
        fresh.object_id = s.object_id;
        fresh.relevance = ladder_.levels().front();
        records_.push_back(std::move(fresh));
        rec = &records_.back();
    }
    rec->object_name = s.object_name;
    rec->kind = s.kind;
    rec->position = s.position;
    rec->room_id = s.room_id;
    rec->room_name = s.room_name;
    rec->states = s.states;
    rec->container_state = s.container_state;
    rec->container_id = s.container_id;
    rec->available_action = derive_action(s);
    rec->acquired_step = step;
    if (relevance) rec->relevance = ladder_.project(*relevance);
    return rec->record_id;
}

int AgentMemory::discard_plan_provenance(const std::vector<int>& record_ids) {
    int n = 0;
    for (int id : record_ids) {
        if (id < 0 || id >= static_cast<int>(records_.size())) continue;
        auto& rec = records_[static_cast<std::size_t>(id)];
        if (!rec.discarded) {
            rec.discarded = true;
            ++n;
        }
    }
    return n;
}

int AgentMemory::discard_object(ObjectId object_id) {
    int n = 0;
    for (auto& rec : records_)
        if (rec.object_id == object_id && !rec.discarded) {
            rec.discarded = true;
            ++n;
        }
    return n;
}

int AgentMemory::live_non_none_count() const {
    return static_cast<int>(std::count_if(records_.begin(), records_.end(), [](const auto& r) {
        return !r.discarded && r.relevance != Relevance::None;
    }));
}

void AgentMemory::mark_placed(ObjectId id, std::string_view name) { placed_[id] = std::string(name); }

int AgentMemory::known_placed_count(std::string_view name) const {
    return static_cast<int>(std::count_if(placed_.begin(), placed_.end(),
                                          [&](const auto& kv) { return kv.second == name; }));
}

int AgentMemory::remaining(std::string_view name,
                           const std::vector<std::pair<ObjectId, std::string>>& held) const {
    int carried = 0;
    for (const auto& [id, n] : held)
        if (n == name && !placed_.contains(id)) ++carried;
    return goal_.required(name) - known_placed_count(name) - carried;
}

CollaboratorRecord& AgentMemory::collaborator(AgentId id, std::string_view name) {
    auto& rec = collaborators_[id];
    rec.collaborator_id = id;
    if (!name.empty()) rec.name = std::string(name);
    return rec;
}

const CollaboratorRecord* AgentMemory::find_collaborator(AgentId id) const {
    auto it = collaborators_.find(id);
    return it == collaborators_.end() ? nullptr : &it->second;
}

namespace {

void apply_fix(CollaboratorRecord& rec, const PositionFix& fix) {
    rec.position_history.push_back(fix);
    const auto& cur = rec.position_estimate;
    bool newer = !cur || fix.step > cur->step ||
                 (fix.step == cur->step && (fix.source == PositionFix::Source::Observed ||
                                            cur->source == PositionFix::Source::RoomCenter));
    if (newer) rec.position_estimate = fix;
}

}  // namespace

void AgentMemory::observe_collaborator(const CollaboratorSnapshot& c, int step) {
    auto& rec = collaborator(c.agent_id, c.name);
    rec.held_object_ids = c.held_object_ids;
    rec.held_step = step;
    apply_fix(rec, {c.position, map_.room_at(c.position).value_or(-1), step, PositionFix::Source::Observed});
}

std::optional<ParseWarning> AgentMemory::update_collaborator_from_message(AgentId sender, const Message& m,
                                                                           int step) {
    auto& rec = collaborator(sender);
    const int said_at = m.step_sent > 0 ? m.step_sent : step;
    rec.conversation_log.push_back({said_at, m.text});
    std::optional<ParseWarning> warning;

    const Room* room = nullptr;
    if (m.payload.contains("sender_room")) {
        const auto& r = m.payload["sender_room"];
        if (r.is_string()) room = map_.find_room(r.get<std::string>());
        if (!room) warning = ParseWarning{"unknown sender_room"};
    } else {
        // No structured room: take the earliest room name mentioned in the text.
        std::size_t best = std::string::npos;
        for (const auto& candidate : map_.rooms) {
            auto pos = m.text.find(candidate.room_name);
            if (pos < best) {
                best = pos;
                room = &candidate;
            }
        }
    }
    if (room) {
        if (m.payload.contains("position") && m.payload["position"].is_array()) {
            GridPos p = pos_from_json(m.payload["position"]);
            apply_fix(rec, {p, room->room_id, said_at, PositionFix::Source::Observed});
        } else {
            apply_fix(rec, {room->center, room->room_id, said_at, PositionFix::Source::RoomCenter});
        }
    }
    if (m.payload.contains("completed_plans")) {
        const auto& plans = m.payload["completed_plans"];
        if (plans.is_array() && std::all_of(plans.begin(), plans.end(), [](const auto& p) { return p.is_string(); })) {
            for (const auto& p : plans) rec.completed_plans.push_back(p.get<std::string>());
        } else {
            warning = ParseWarning{"completed_plans is not a list of strings"};
        }
    }
    if (m.payload.contains("held_object_ids") && m.payload["held_object_ids"].is_array()) {
        rec.held_object_ids = m.payload["held_object_ids"].get<std::vector<int>>();
        rec.held_step = said_at;
    }
    return warning;
}

std::optional<int> AgentMemory::last_visit(RoomId room) const {
    auto it = room_last_visit_.find(room);
    if (it == room_last_visit_.end()) return std::nullopt;
    return it->second;
}

nlohmann::json AgentMemory::dump() const {
    using nlohmann::json;
    json objects = json::array();
    for (const auto& r : records_)
        objects.push_back({{"record_id", r.record_id},
                           {"object_id", r.object_id},
                           {"object_name", r.object_name},
                           {"position", to_json(r.position)},
                           {"available_action", r.available_action},
                           {"room_name", r.room_name},
                           {"room_id", r.room_id},
                           {"states", r.states},
                           {"relevance", to_string(r.relevance)},
                           {"acquired_step", r.acquired_step},
                           {"discarded", r.discarded}});
    json collaborators = json::array();
    for (const auto& [id, c] : collaborators_) {
        json log = json::array();
        for (const auto& e : c.conversation_log) log.push_back({{"step", e.step}, {"message", e.message}});
        json entry{{"collaborator_id", id},
                   {"name", c.name},
                   {"held_object_ids", c.held_object_ids},
                   {"conversation_log", log},
                   {"completed_plans", c.completed_plans}};
        if (c.position_estimate) {
            entry["position"] = to_json(c.position_estimate->position);
            entry["position_source"] = to_string(c.position_estimate->source);
            entry["position_step"] = c.position_estimate->step;
        } else {
            entry["position"] = nullptr;
        }
        collaborators.push_back(std::move(entry));
    }
    json skill_names = json::array();
    for (const auto& s : skills().skills()) skill_names.push_back(s.name);
    json placed = json::array();
    for (const auto& [id, name] : placed_) placed.push_back({{"object_id", id}, {"object_name", name}});
    return {{"common_goal", goal_.text},
            {"object_information_list", objects},
            {"collaborator_information_list", collaborators},
            {"completed_plans", completed_plans_},
            {"known_placed", placed},
            {"skills", skill_names}};
}

}  // namespace reveca
