#include "reveca/scenario.hpp"

#include <algorithm>
#include <cstdlib>
#include <fstream>
#include <random>
#include <set>

#include "reveca/errors.hpp"

namespace reveca {

namespace {

using nlohmann::json;

std::size_t uniform_index(std::mt19937_64& rng, std::size_t n) {
    return static_cast<std::size_t>(rng() % static_cast<std::uint64_t>(n));
}

template <typename T>
void shuffle(std::vector<T>& v, std::mt19937_64& rng) {
    for (std::size_t i = v.size(); i > 1; --i) std::swap(v[i - 1], v[uniform_index(rng, i)]);
}

std::uint64_t fnv1a(std::string_view s) {
    std::uint64_t h = 14695981039346656037ULL;
    for (unsigned char c : s) {
        h ^= c;
        h *= 1099511628211ULL;
    }
    return h;
}

GridPos parse_pos(const json& j, std::string_view what) {
    if (!j.is_array() || j.size() != 2) throw ScenarioError("map: bad coordinate for " + std::string(what));
    return {j[0].get<int>(), j[1].get<int>()};
}

ObjectKind parse_kind(const std::string& s) {
    if (s == "item") return ObjectKind::Item;
    if (s == "container") return ObjectKind::Container;
    if (s == "surface") return ObjectKind::Surface;
    if (s == "decor") return ObjectKind::Decor;
    throw ScenarioError("map: unknown object kind '" + s + "'");
}

ObjectEntity make_furniture(ObjectId id, const std::string& name, ObjectKind kind, GridPos at,
                            bool closed) {
    ObjectEntity o;
    o.object_id = id;
    o.object_name = name;
    o.kind = kind;
    o.position = at;
    o.is_container = kind == ObjectKind::Container || kind == ObjectKind::Surface;
    if (kind == ObjectKind::Container)
        o.container_state = closed ? ContainerState::Closed : ContainerState::Open;
    o.placement = {Placement::Kind::Cell, -1, -1};
    refresh_states(o);
    return o;
}

ObjectEntity make_item(ObjectId id, const std::string& name, bool dummy) {
    ObjectEntity o;
    o.object_id = id;
    o.object_name = name;
    o.kind = ObjectKind::Item;
    o.is_dummy = dummy;
    refresh_states(o);
    return o;
}

void place_in(WorldState& state, ObjectEntity& item, ObjectEntity& receptacle) {
    item.placement = {Placement::Kind::InContainer, receptacle.object_id, -1};
    item.position = receptacle.position;
    receptacle.contents.push_back(item.object_id);
    (void)state;
}

void sort_objects(WorldState& state) {
    std::sort(state.objects.begin(), state.objects.end(),
              [](const auto& a, const auto& b) { return a.object_id < b.object_id; });
}

ObjectId next_free_id(const WorldState& state) {
    ObjectId max_id = 0;
    for (const auto& o : state.objects) max_id = std::max(max_id, o.object_id);
    return (max_id / 100 + 1) * 100 + 1;
}

// Walkable cells that belong to a room, are not door cells, and are not occupied.
std::vector<GridPos> free_floor_cells(const WorldState& state, const std::set<GridPos>& doors) {
    std::vector<GridPos> cells;
    for (const auto& room : state.rooms)
        for (GridPos c : room.cells)
            if (state.grid.walkable(c) && !doors.contains(c)) cells.push_back(c);
    std::sort(cells.begin(), cells.end());
    return cells;
}

std::set<GridPos> door_cells(const MapSpec& map) {
    std::set<GridPos> doors;
    if (map.doc.contains("doors"))
        for (const auto& d : map.doc["doors"]) doors.insert(parse_pos(d.at("at"), "door"));
    return doors;
}

}  // namespace

TaskCatalog TaskCatalog::load(const std::filesystem::path& dir) {
    TaskCatalog catalog;
    if (!std::filesystem::is_directory(dir)) throw ScenarioError("task directory not found: " + dir.string());
    std::vector<std::filesystem::path> files;
    for (const auto& entry : std::filesystem::directory_iterator(dir))
        if (entry.path().extension() == ".json") files.push_back(entry.path());
    std::sort(files.begin(), files.end());
    for (const auto& file : files) {
        std::ifstream in(file);
        json j = json::parse(in);
        TaskSpec spec;
        spec.name = j.at("name").get<std::string>();
        spec.display_name = j.value("display_name", spec.name);
        spec.objects = j.at("objects").get<std::vector<std::string>>();
        spec.location = j.at("location").get<std::string>();
        spec.relation = j.value("relation", "on");
        catalog.add(std::move(spec));
    }
    return catalog;
}

const TaskCatalog& TaskCatalog::builtin() {
    static const TaskCatalog catalog = load(data_dir() / "tasks");
    return catalog;
}

void TaskCatalog::add(TaskSpec spec) {
    auto name = spec.name;
    tasks_[name] = std::move(spec);
}

const TaskSpec* TaskCatalog::find(std::string_view name) const {
    auto it = tasks_.find(name);
    return it == tasks_.end() ? nullptr : &it->second;
}

std::vector<std::string> TaskCatalog::names() const {
    std::vector<std::string> out;
    for (const auto& [name, _] : tasks_) out.push_back(name);
    return out;
}

MapSpec MapSpec::load(const std::filesystem::path& file) {
    std::ifstream in(file);
    if (!in) throw ScenarioError("map file not found: " + file.string());
    return MapSpec{json::parse(in)};
}

const MapSpec& MapSpec::builtin_house() {
    static const MapSpec house = load(data_dir() / "maps" / "house.json");
    return house;
}

std::string MapSpec::name() const { return doc.value("name", "map"); }

std::filesystem::path data_dir() {
    if (const char* env = std::getenv("REVECA_DATA_DIR"); env && *env) return env;
    return REVECA_DATA_DIR;
}

const std::vector<std::string>& dummy_object_names() {
    static const std::vector<std::string> names = {
        "book",   "remotecontrol", "towel",   "pillow", "candle",   "cellphone",
        "magazine", "toy",         "folder",  "mug",    "keyboard", "slippers",
        "clock",  "notebook",      "hairbrush", "sponge"};
    return names;
}

WorldState build_world(const MapSpec& map, int agent_count, int horizon) {
    const json& doc = map.doc;
    WorldState state;
    state.horizon = horizon;
    const int width = doc.at("width").get<int>();
    const int height = doc.at("height").get<int>();
    if (width <= 0 || height <= 0) throw ScenarioError("map: empty grid");
    state.grid = GridMap(width, height);

    std::set<GridPos> claimed;
    RoomId next_room_id = 1;
    for (const auto& r : doc.at("rooms")) {
        Room room;
        room.room_id = r.contains("id") ? r["id"].get<int>() : next_room_id;
        next_room_id = std::max(next_room_id, room.room_id) + 1;
        room.room_name = r.at("name").get<std::string>();
        const auto& rect = r.at("rect");
        const int x0 = rect[0], y0 = rect[1], x1 = rect[2], y1 = rect[3];
        for (int y = y0; y <= y1; ++y)
            for (int x = x0; x <= x1; ++x) {
                GridPos c{x, y};
                if (!state.grid.in_bounds(c)) throw ScenarioError("map: room outside grid");
                if (!claimed.insert(c).second) throw ScenarioError("map: overlapping rooms");
                room.cells.push_back(c);
                state.grid.set_walkable(c, true);
            }
        room.center = {(x0 + x1) / 2, (y0 + y1) / 2};
        state.rooms.push_back(std::move(room));
    }
    if (doc.contains("doors")) {
        for (const auto& d : doc["doors"]) {
            GridPos at = parse_pos(d.at("at"), "door");
            const auto room_name = d.at("room").get<std::string>();
            auto it = std::find_if(state.rooms.begin(), state.rooms.end(),
                                   [&](const Room& r) { return r.room_name == room_name; });
            if (it == state.rooms.end()) throw ScenarioError("map: door references unknown room");
            if (!claimed.insert(at).second) throw ScenarioError("map: door inside a room");
            it->cells.push_back(at);
            state.grid.set_walkable(at, true);
        }
    }
    for (auto& room : state.rooms) std::sort(room.cells.begin(), room.cells.end());
    rebuild_room_index(state);

    ObjectId next_id = 100;
    std::vector<json> item_placements;
    if (doc.contains("placements")) {
        for (const auto& p : doc["placements"]) {
            const auto kind = parse_kind(p.value("kind", "decor"));
            if (kind == ObjectKind::Item) {
                item_placements.push_back(p);
                continue;
            }
            ObjectId id = p.contains("id") ? p["id"].get<int>() : next_id;
            next_id = std::max(next_id, id) + 1;
            GridPos at = parse_pos(p.at("at"), "placement");
            if (!state.room_at(at)) throw ScenarioError("map: furniture outside rooms");
            state.grid.set_walkable(at, false);
            state.objects.push_back(make_furniture(id, p.at("name").get<std::string>(), kind, at,
                                                   p.value("state", "closed") == "closed"));
        }
    }
    sort_objects(state);

    // Room centers must be walkable; shift to the nearest walkable cell of the room.
    for (auto& room : state.rooms) {
        if (state.grid.walkable(room.center)) continue;
        GridPos best{-1, -1};
        int best_d = 1 << 30;
        for (GridPos c : room.cells)
            if (state.grid.walkable(c) && manhattan(c, room.center) < best_d) {
                best_d = manhattan(c, room.center);
                best = c;
            }
        if (best.x < 0) throw ScenarioError("map: room without walkable cells");
        room.center = best;
    }

    ObjectId item_id = next_free_id(state);
    for (const auto& p : item_placements) {
        ObjectEntity item = make_item(p.contains("id") ? p["id"].get<int>() : item_id++,
                                      p.at("name").get<std::string>(), p.value("dummy", false));
        if (p.contains("in")) {
            const auto host_name = p["in"].get<std::string>();
            auto it = std::find_if(state.objects.begin(), state.objects.end(),
                                   [&](const auto& o) { return o.object_name == host_name && o.is_container; });
            if (it == state.objects.end()) throw ScenarioError("map: unknown receptacle " + host_name);
            place_in(state, item, *it);
        } else {
            item.position = parse_pos(p.at("at"), "item");
            if (!state.grid.walkable(item.position)) throw ScenarioError("map: item on blocked cell");
            item.placement = {Placement::Kind::Cell, -1, -1};
        }
        state.objects.push_back(std::move(item));
        sort_objects(state);
    }

    const auto& names = agent_names();
    const json agents_doc = doc.value("agents", json::array());
    for (int i = 0; i < agent_count; ++i) {
        AgentBody body;
        body.agent_id = i;
        body.name = i < static_cast<int>(names.size()) ? names[static_cast<std::size_t>(i)]
                                                       : "Agent" + std::to_string(i);
        body.position = {-1, -1};
        if (i < static_cast<int>(agents_doc.size())) {
            const auto& a = agents_doc[static_cast<std::size_t>(i)];
            body.name = a.value("name", body.name);
            if (a.contains("at")) {
                body.position = parse_pos(a["at"], "agent");
                if (!state.grid.walkable(body.position)) throw ScenarioError("map: agent on blocked cell");
            }
        }
        state.agents.push_back(std::move(body));
    }
    return state;
}

Goal make_goal(const WorldState& state, const TaskSpec& task,
               const std::vector<std::pair<std::string, int>>& counts) {
    Goal goal;
    auto it = std::find_if(state.objects.begin(), state.objects.end(),
                           [&](const auto& o) { return o.object_name == task.location && o.is_container; });
    if (it == state.objects.end())
        throw ScenarioError("map has no goal location '" + task.location + "'");
    goal.location_id = it->object_id;
    goal.location_name = it->object_name;
    goal.relation = task.relation;
    for (const auto& [name, count] : counts) goal.sub_goals.push_back({name, count, goal.location_id});
    goal.text = render_goal_text(goal);
    return goal;
}

Scenario spawn_scenario(const TaskCatalog& catalog, std::string_view task_name,
                        unsigned long long seed, int dummy_count, const MapSpec& map,
                        const ScenarioOptions& options) {
    const TaskSpec* task = catalog.find(task_name);
    if (!task) throw ScenarioError("unknown task '" + std::string(task_name) + "'");
    if (dummy_count < 0) throw ScenarioError("dummy_count must be >= 0");
    if (options.agent_count < 1) throw ScenarioError("need at least one agent");

    std::mt19937_64 rng(seed ^ fnv1a(task_name));
    Scenario sc;
    sc.task_name = std::string(task_name);
    sc.state = build_world(map, options.agent_count, options.horizon);
    WorldState& state = sc.state;
    state.rng_seed = seed;

    // Sub-goals: 3..5 objects spread over a few distinct target names.
    const int total = 3 + static_cast<int>(uniform_index(rng, 3));
    std::vector<std::string> names = task->objects;
    shuffle(names, rng);
    const int max_types = std::min<int>(total, static_cast<int>(names.size()));
    int types = max_types - static_cast<int>(uniform_index(rng, 2));
    types = std::max(1, std::min(types, max_types));
    std::vector<int> counts(static_cast<std::size_t>(types), 1);
    for (int extra = total - types; extra > 0; --extra)
        ++counts[uniform_index(rng, static_cast<std::size_t>(types))];
    std::vector<std::pair<std::string, int>> goal_counts;
    for (int i = 0; i < types; ++i)
        goal_counts.emplace_back(names[static_cast<std::size_t>(i)], counts[static_cast<std::size_t>(i)]);
    sc.goal = make_goal(state, *task, goal_counts);

    std::vector<ObjectId> receptacles, closed;
    for (const auto& o : state.objects) {
        if (!o.is_container || o.object_id == sc.goal.location_id) continue;
        receptacles.push_back(o.object_id);
        if (o.container_state == ContainerState::Closed) closed.push_back(o.object_id);
    }
    if (receptacles.empty()) throw ScenarioError("map has no receptacles for objects");

    ObjectId next_id = next_free_id(state);
    std::vector<std::string> instances;
    for (const auto& [name, count] : goal_counts)
        for (int i = 0; i < count; ++i) instances.push_back(name);
    const std::size_t hidden = closed.empty() ? instances.size() : uniform_index(rng, instances.size());
    std::vector<ObjectEntity> new_items;
    for (std::size_t i = 0; i < instances.size(); ++i) {
        ObjectEntity item = make_item(next_id++, instances[i], false);
        const ObjectId host = i == hidden ? closed[uniform_index(rng, closed.size())]
                                          : receptacles[uniform_index(rng, receptacles.size())];
        place_in(state, item, *state.find_object(host));
        new_items.push_back(std::move(item));
    }

    const auto doors = door_cells(map);
    std::vector<GridPos> floor = free_floor_cells(state, doors);
    for (const auto& a : state.agents)
        floor.erase(std::remove(floor.begin(), floor.end(), a.position), floor.end());
    std::set<GridPos> used_floor;
    const auto& dummy_names = dummy_object_names();
    for (int i = 0; i < dummy_count; ++i) {
        ObjectEntity item =
            make_item(next_id++, dummy_names[uniform_index(rng, dummy_names.size())], true);
        const bool on_floor = uniform_index(rng, 2) == 0 && used_floor.size() < floor.size();
        if (on_floor) {
            GridPos cell;
            do {
                cell = floor[uniform_index(rng, floor.size())];
            } while (used_floor.contains(cell));
            used_floor.insert(cell);
            item.position = cell;
            item.placement = {Placement::Kind::Cell, -1, -1};
        } else {
            place_in(state, item, *state.find_object(receptacles[uniform_index(rng, receptacles.size())]));
        }
        new_items.push_back(std::move(item));
    }
    for (auto& item : new_items) state.objects.push_back(std::move(item));
    sort_objects(state);

    // Agents not pinned by the map start on distinct random floor cells.
    std::vector<GridPos> starts = free_floor_cells(state, doors);
    std::erase_if(starts, [&](GridPos c) { return used_floor.contains(c); });
    for (auto& agent : state.agents) {
        if (agent.position.x >= 0) {
            std::erase(starts, agent.position);
            continue;
        }
        if (starts.empty()) throw ScenarioError("map too small to place agents");
        const std::size_t k = uniform_index(rng, starts.size());
        agent.position = starts[k];
        starts.erase(starts.begin() + static_cast<std::ptrdiff_t>(k));
    }
    return sc;
}

}  // namespace reveca
