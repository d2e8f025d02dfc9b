#include "reveca/serialize.hpp"

#include "reveca/errors.hpp"

namespace reveca {

std::string_view to_string(MessageKind kind) {
    switch (kind) {
        case MessageKind::InitBroadcast: return "init_broadcast";
        case MessageKind::ValidationQuery: return "validation_query";
        case MessageKind::ValidationResponse: return "validation_response";
        case MessageKind::SubGoalAnnouncement: return "subgoal_announcement";
    }
    return "init_broadcast";
}

std::optional<MessageKind> parse_message_kind(std::string_view s) {
    for (auto k : {MessageKind::InitBroadcast, MessageKind::ValidationQuery,
                   MessageKind::ValidationResponse, MessageKind::SubGoalAnnouncement})
        if (to_string(k) == s) return k;
    return std::nullopt;
}

void to_json(nlohmann::json& j, const Message& m) {
    j = nlohmann::json{{"kind", std::string(to_string(m.kind))},
                       {"sender", m.sender_id},
                       {"recipients", m.recipient ? nlohmann::json(*m.recipient) : nlohmann::json("all")},
                       {"text", m.text},
                       {"payload", m.payload},
                       {"step", m.step_sent}};
}

void from_json(const nlohmann::json& j, Message& m) {
    auto kind = parse_message_kind(j.at("kind").get<std::string>());
    if (!kind) throw SchemaMismatch("unknown message kind " + j.at("kind").dump());
    m.kind = *kind;
    m.sender_id = j.value("sender", -1);
    const auto& r = j.contains("recipients") ? j["recipients"] : nlohmann::json("all");
    if (r.is_string()) {
        if (r.get<std::string>() != "all") throw SchemaMismatch("bad recipients");
        m.recipient.reset();
    } else {
        m.recipient = r.get<int>();
    }
    m.text = j.value("text", "");
    m.payload = j.contains("payload") ? j["payload"] : nlohmann::json::object();
    m.step_sent = j.value("step", 0);
}

json to_json(GridPos p) { return json::array({p.x, p.y}); }

GridPos pos_from_json(const json& j) { return {j.at(0).get<int>(), j.at(1).get<int>()}; }

ObjectKind parse_object_kind(std::string_view s) {
    for (auto k : {ObjectKind::Item, ObjectKind::Container, ObjectKind::Surface, ObjectKind::Decor})
        if (to_string(k) == s) return k;
    throw SchemaMismatch("unknown object kind " + std::string(s));
}

ContainerState parse_container_state(std::string_view s) {
    for (auto c : {ContainerState::NotApplicable, ContainerState::Open, ContainerState::Closed})
        if (to_string(c) == s) return c;
    throw SchemaMismatch("unknown container state " + std::string(s));
}

json to_json(const ObjectSnapshot& s) {
    json j{{"object_id", s.object_id},
           {"object_name", s.object_name},
           {"kind", to_string(s.kind)},
           {"position", to_json(s.position)},
           {"room_id", s.room_id},
           {"room_name", s.room_name},
           {"states", s.states},
           {"container_state", to_string(s.container_state)}};
    if (s.container_id) j["container_id"] = *s.container_id;
    return j;
}

json to_json(const Observation& obs) {
    json objects = json::array();
    for (const auto& o : obs.visible_objects) objects.push_back(to_json(o));
    json collaborators = json::array();
    for (const auto& c : obs.visible_collaborators)
        collaborators.push_back({{"agent_id", c.agent_id},
                                 {"name", c.name},
                                 {"position", to_json(c.position)},
                                 {"held_object_ids", c.held_object_ids}});
    return {{"observer_id", obs.observer_id},
            {"step", obs.step},
            {"room_id", obs.room_id},
            {"visible_objects", objects},
            {"visible_collaborators", collaborators}};
}

json to_json(const Goal& goal) {
    json subs = json::array();
    for (const auto& g : goal.sub_goals)
        subs.push_back({{"object_name", g.object_name}, {"count", g.count}, {"location_id", g.location_id}});
    return {{"sub_goals", subs},
            {"location_id", goal.location_id},
            {"location_name", goal.location_name},
            {"relation", goal.relation},
            {"text", goal.text}};
}

Goal goal_from_json(const json& j) {
    Goal g;
    for (const auto& s : j.at("sub_goals"))
        g.sub_goals.push_back({s.at("object_name").get<std::string>(), s.at("count").get<int>(),
                               s.at("location_id").get<int>()});
    g.location_id = j.at("location_id").get<int>();
    g.location_name = j.at("location_name").get<std::string>();
    g.relation = j.value("relation", "on");
    g.text = j.value("text", render_goal_text(g));
    return g;
}

namespace {

json placement_json(const Placement& p) {
    switch (p.kind) {
        case Placement::Kind::Cell: return {{"kind", "cell"}};
        case Placement::Kind::InContainer: return {{"kind", "in"}, {"container", p.container}};
        case Placement::Kind::Held: return {{"kind", "held"}, {"holder", p.holder}};
    }
    return {{"kind", "cell"}};
}

Placement placement_from_json(const json& j) {
    const auto kind = j.at("kind").get<std::string>();
    if (kind == "cell") return {Placement::Kind::Cell, -1, -1};
    if (kind == "in") return {Placement::Kind::InContainer, j.at("container").get<int>(), -1};
    if (kind == "held") return {Placement::Kind::Held, -1, j.at("holder").get<int>()};
    throw SchemaMismatch("unknown placement " + kind);
}

}  // namespace

json to_json(const WorldState& state) {
    json rows = json::array();
    for (int y = 0; y < state.grid.height(); ++y) {
        std::string row;
        for (int x = 0; x < state.grid.width(); ++x) row += state.grid.walkable({x, y}) ? '.' : '#';
        rows.push_back(row);
    }
    json rooms = json::array();
    for (const auto& r : state.rooms) {
        json cells = json::array();
        for (GridPos c : r.cells) cells.push_back(to_json(c));
        rooms.push_back({{"room_id", r.room_id},
                         {"room_name", r.room_name},
                         {"center", to_json(r.center)},
                         {"cells", cells}});
    }
    json objects = json::array();
    for (const auto& o : state.objects)
        objects.push_back({{"object_id", o.object_id},
                           {"object_name", o.object_name},
                           {"kind", to_string(o.kind)},
                           {"position", to_json(o.position)},
                           {"is_container", o.is_container},
                           {"container_state", to_string(o.container_state)},
                           {"contents", o.contents},
                           {"states", o.states},
                           {"is_dummy", o.is_dummy},
                           {"placement", placement_json(o.placement)}});
    json agents = json::array();
    for (const auto& a : state.agents)
        agents.push_back({{"agent_id", a.agent_id},
                          {"name", a.name},
                          {"position", to_json(a.position)},
                          {"held_object_ids", a.held_object_ids},
                          {"distance_traveled", a.distance_traveled}});
    json delivered = json::array();
    for (const auto& m : state.delivered) delivered.push_back(m);
    return {{"step_index", state.step_index},
            {"horizon", state.horizon},
            {"rng_seed", state.rng_seed},
            {"grid", rows},
            {"rooms", rooms},
            {"objects", objects},
            {"agents", agents},
            {"delivered", delivered},
            {"messages_sent", state.messages_sent}};
}

WorldState world_from_json(const json& j) {
    WorldState state;
    state.step_index = j.at("step_index").get<int>();
    state.horizon = j.at("horizon").get<int>();
    state.rng_seed = j.at("rng_seed").get<unsigned long long>();
    const auto& rows = j.at("grid");
    const int height = static_cast<int>(rows.size());
    const int width = height > 0 ? static_cast<int>(rows[0].get<std::string>().size()) : 0;
    state.grid = GridMap(width, height);
    for (int y = 0; y < height; ++y) {
        const auto row = rows[static_cast<std::size_t>(y)].get<std::string>();
        if (static_cast<int>(row.size()) != width) throw SchemaMismatch("ragged grid");
        for (int x = 0; x < width; ++x) state.grid.set_walkable({x, y}, row[static_cast<std::size_t>(x)] == '.');
    }
    for (const auto& r : j.at("rooms")) {
        Room room;
        room.room_id = r.at("room_id").get<int>();
        room.room_name = r.at("room_name").get<std::string>();
        room.center = pos_from_json(r.at("center"));
        for (const auto& c : r.at("cells")) room.cells.push_back(pos_from_json(c));
        state.rooms.push_back(std::move(room));
    }
    for (const auto& o : j.at("objects")) {
        ObjectEntity e;
        e.object_id = o.at("object_id").get<int>();
        e.object_name = o.at("object_name").get<std::string>();
        e.kind = parse_object_kind(o.at("kind").get<std::string>());
        e.position = pos_from_json(o.at("position"));
        e.is_container = o.at("is_container").get<bool>();
        e.container_state = parse_container_state(o.at("container_state").get<std::string>());
        e.contents = o.at("contents").get<std::vector<int>>();
        e.states = o.at("states").get<std::vector<std::string>>();
        e.is_dummy = o.at("is_dummy").get<bool>();
        e.placement = placement_from_json(o.at("placement"));
        state.objects.push_back(std::move(e));
    }
    for (const auto& a : j.at("agents")) {
        AgentBody b;
        b.agent_id = a.at("agent_id").get<int>();
        b.name = a.at("name").get<std::string>();
        b.position = pos_from_json(a.at("position"));
        b.held_object_ids = a.at("held_object_ids").get<std::vector<int>>();
        b.distance_traveled = a.at("distance_traveled").get<double>();
        state.agents.push_back(std::move(b));
    }
    for (const auto& m : j.value("delivered", json::array())) state.delivered.push_back(m.get<Message>());
    state.messages_sent = j.value("messages_sent", 0);
    rebuild_room_index(state);
    return state;
}

json to_json(const ActionRequest& a) {
    json j{{"id", a.id()}};
    if (a.message) j["message"] = *a.message;
    return j;
}

ActionRequest action_from_json(const json& j) {
    const auto id = j.at("id").get<std::string>();
    if (id == "send") return ActionRequest::send(j.at("message").get<Message>());
    auto a = parse_action_id(id);
    if (!a) throw SchemaMismatch("unknown action id " + id);
    return *a;
}

json to_json(const Event& e) {
    return {{"step", e.step}, {"type", e.type}, {"agent", e.agent}, {"data", e.data}};
}

json to_json(const EpisodeMetrics& m) {
    return {{"simulation_steps", m.simulation_steps},
            {"travel_distance", m.travel_distance},
            {"success", m.success},
            {"messages_sent", m.messages_sent}};
}

}  // namespace reveca
