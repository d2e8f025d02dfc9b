#pragma once

// Shared test oracles and fixtures. The oracles here are written independently of the library
// code they check: plain sorts, plain BFS, direct ground-truth reads.

#include <algorithm>
#include <atomic>
#include <deque>
#include <functional>
#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <queue>
#include <random>
#include <string>
#include <thread>
#include <tuple>
#include <vector>

#include "httplib.h"
#include "json.hpp"
#include "reveca/agent.hpp"
#include "reveca/harness.hpp"
#include "reveca/planning.hpp"
#include "reveca/scenario.hpp"
#include "reveca/validation.hpp"

namespace testsupport {

using namespace reveca;
using nlohmann::json;

// ---------- retrieval ----------

inline int proximity_rank(Proximity p) {
    switch (p) {
        case Proximity::CloserThanAll: return 3;
        case Proximity::Similar: return 2;
        case Proximity::Unknown: return 1;
        case Proximity::FartherThanSome: return 0;
    }
    return 1;
}

inline int relevance_rank(Relevance r) {
    switch (r) {
        case Relevance::Strong: return 4;
        case Relevance::High: return 3;
        case Relevance::Medium: return 2;
        case Relevance::Low: return 1;
        case Relevance::None: return 0;
    }
    return 0;
}

// Full sort of every live record by the documented key, then a prefix.
inline std::vector<int> brute_force_top_k(const std::vector<ObservationRecord>& records,
                                          const std::map<int, ProximityBucket>& prox, int k) {
    std::vector<std::tuple<int, int, int, int, int>> keyed;  // -rel, -prox, -step, object_id, record_id
    for (const auto& r : records) {
        if (r.discarded) continue;
        auto it = prox.find(r.record_id);
        const int p = proximity_rank(it == prox.end() ? Proximity::Unknown : it->second.value);
        keyed.emplace_back(-relevance_rank(r.relevance), -p, -r.acquired_step, r.object_id, r.record_id);
    }
    std::sort(keyed.begin(), keyed.end());
    std::vector<int> out;
    for (const auto& t : keyed) {
        if (k >= 0 && static_cast<int>(out.size()) >= k) break;
        out.push_back(std::get<4>(t));
    }
    return out;
}

struct RandomMemory {
    std::vector<ObservationRecord> records;
    std::map<int, ProximityBucket> prox;
};

inline RandomMemory random_memory(std::mt19937_64& rng, int size, const RelevanceLadder& ladder) {
    RandomMemory m;
    // One record per object, as in a real memory.
    std::vector<int> ids(250);
    for (int i = 0; i < 250; ++i) ids[static_cast<std::size_t>(i)] = i;
    for (int i = 249; i > 0; --i) std::swap(ids[static_cast<std::size_t>(i)], ids[rng() % static_cast<unsigned>(i + 1)]);
    const auto levels = ladder.levels();
    const Proximity all[] = {Proximity::FartherThanSome, Proximity::Unknown, Proximity::Similar, Proximity::CloserThanAll};
    for (int i = 0; i < size; ++i) {
        ObservationRecord r;
        r.record_id = i;
        // A small step range forces ties on relevance, proximity and step.
        r.object_id = ids[static_cast<std::size_t>(i)];
        r.object_name = "obj" + std::to_string(r.object_id);
        r.relevance = levels[rng() % levels.size()];
        r.acquired_step = static_cast<int>(rng() % 8);
        r.discarded = rng() % 7 == 0;
        m.records.push_back(r);
        if (rng() % 10 != 0) m.prox[i] = ProximityBucket{all[rng() % 4], ""};
    }
    return m;
}

// ---------- tiny world ----------

// Two rooms joined by one door:
//   kitchen (1) x 1..3, y 1..3 with a table (10) at (1,1), an apple (20) at (2,2), a cup (22) at (3,3)
//   hall    (2) x 5..7, y 1..3 with a closed fridge (11) at (7,1) holding milk (21)
//   door at (4,2), owned by the kitchen. Alice starts at (2,1), Bob at (7,2).
inline MapSpec tiny_map() {
    return MapSpec{json::parse(R"({
      "name": "tiny", "width": 9, "height": 5,
      "rooms": [{"id": 1, "name": "kitchen", "rect": [1, 1, 3, 3]},
                {"id": 2, "name": "hall", "rect": [5, 1, 7, 3]}],
      "doors": [{"at": [4, 2], "room": "kitchen"}],
      "placements": [
        {"id": 10, "name": "table", "kind": "surface", "at": [1, 1]},
        {"id": 11, "name": "fridge", "kind": "container", "state": "closed", "at": [7, 1]},
        {"id": 20, "name": "apple", "kind": "item", "at": [2, 2]},
        {"id": 21, "name": "milk", "kind": "item", "in": "fridge"},
        {"id": 22, "name": "cup", "kind": "item", "at": [3, 3]}],
      "agents": [{"at": [2, 1]}, {"at": [7, 2]}]
    })")};
}

inline WorldState tiny_world(int horizon = 50) { return build_world(tiny_map(), 2, horizon); }

// Goal: `count` apples on the table.
inline Goal tiny_goal(const WorldState& state, int count = 1) {
    TaskSpec t;
    t.name = "tiny";
    t.objects = {"apple", "milk"};
    t.location = "table";
    return make_goal(state, t, {{"apple", count}});
}

// ---------- paths ----------

// Length (in moves) of the shortest 4-connected path, or -1.
inline int bfs_length(const GridMap& grid, GridPos from, const std::vector<GridPos>& goals) {
    if (!grid.walkable(from)) return -1;
    std::vector<int> dist(static_cast<std::size_t>(grid.width() * grid.height()), -1);
    std::deque<GridPos> q{from};
    dist[grid.index(from)] = 0;
    while (!q.empty()) {
        GridPos p = q.front();
        q.pop_front();
        if (std::find(goals.begin(), goals.end(), p) != goals.end()) return dist[grid.index(p)];
        const GridPos next[] = {{p.x + 1, p.y}, {p.x - 1, p.y}, {p.x, p.y + 1}, {p.x, p.y - 1}};
        for (GridPos n : next) {
            if (!grid.walkable(n) || dist[grid.index(n)] >= 0) continue;
            dist[grid.index(n)] = dist[grid.index(p)] + 1;
            q.push_back(n);
        }
    }
    return -1;
}

inline bool valid_path(const GridMap& grid, const std::vector<GridPos>& path, GridPos from,
                       const std::vector<GridPos>& goals) {
    if (path.empty() || path.front() != from) return false;
    if (std::find(goals.begin(), goals.end(), path.back()) == goals.end()) return false;
    for (std::size_t i = 0; i < path.size(); ++i) {
        if (!grid.walkable(path[i])) return false;
        if (i && std::abs(path[i].x - path[i - 1].x) + std::abs(path[i].y - path[i - 1].y) != 1) return false;
    }
    return true;
}

// ---------- chat-completions stub ----------

// Answers by prompt shape with grammatical replies, or via a custom handler.
class StubServer {
public:
    using Handler = std::function<httplib::Response(const json& body, int call)>;

    StubServer() {
        server_.Post("/v1/chat/completions", [this](const httplib::Request& req, httplib::Response& res) {
            json body = json::parse(req.body);
            int call;
            {
                std::lock_guard lock(mu_);
                bodies_.push_back(body);
                call = static_cast<int>(bodies_.size());
            }
            if (handler_) {
                auto r = handler_(body, call);
                res.status = r.status;
                res.set_content(r.body, "application/json");
                return;
            }
            res.set_content(completion(default_reply(body)).dump(), "application/json");
        });
        port_ = server_.bind_to_any_port("127.0.0.1");
        thread_ = std::thread([this] { server_.listen_after_bind(); });
        server_.wait_until_ready();
    }
    ~StubServer() {
        server_.stop();
        thread_.join();
    }

    std::string url() const { return "http://127.0.0.1:" + std::to_string(port_) + "/v1/chat/completions"; }
    void set_handler(Handler h) { handler_ = std::move(h); }
    int calls() const {
        std::lock_guard lock(mu_);
        return static_cast<int>(bodies_.size());
    }
    json body(int i) const {
        std::lock_guard lock(mu_);
        return bodies_.at(static_cast<std::size_t>(i));
    }

    static json completion(const std::string& content) {
        return {{"id", "stub"}, {"object", "chat.completion"},
                {"choices", json::array({{{"index", 0}, {"message", {{"role", "assistant"}, {"content", content}}}}})}};
    }

    static httplib::Response text(int status, const std::string& content) {
        httplib::Response r;
        r.status = status;
        r.body = status == 200 ? completion(content).dump() : content;
        return r;
    }

    static std::string default_reply(const json& body) {
        const auto prompt = body.at("messages").back().at("content").get<std::string>();
        if (prompt.rfind("You are helping a team", 0) == 0) {
            if (prompt.find("available action gograb") != std::string::npos &&
                prompt.find("Still needed of this name: 0.") == std::string::npos &&
                prompt.find("Still needed of this name: -") == std::string::npos)
                return "The goal needs this.\nAnswer: [Strong]";
            if (prompt.find("available action gocheck") != std::string::npos) return "Could hide something.\nAnswer: [Medium]";
            return "Answer: [None]";
        }
        if (prompt.find("cooperating with other agents") != std::string::npos) return "First option.\nAnswer: [A]";
        if (prompt.rfind("Before executing", 0) == 0) return "Answer: [Low]";
        if (prompt.rfind("Rewrite this message", 0) == 0) return "Message: hello";
        return "Answer: [A]";
    }

private:
    httplib::Server server_;
    std::thread thread_;
    int port_ = 0;
    Handler handler_;
    mutable std::mutex mu_;
    std::vector<json> bodies_;
};

// ---------- scripted-collaborator validation scenarios ----------

struct SoundnessCase {
    unsigned long long seed = 0;
    bool removed_in_window = false;       // ground truth: B grabbed T before A planned it
    bool evidence_in_target_room = false;  // some hypothesis evidence puts B in T's room
    bool validated = false;                // A opened a validation session for T
    std::optional<ValidationOutcome> run_outcome;  // run_validation on A's hypotheses
    std::optional<std::string> agent_state;        // final state of A's own session
    EpisodeResult result;
};

inline const Room* room_of(const WorldState& s, GridPos p) {
    auto r = s.room_at(p);
    return r ? s.find_room(*r) : nullptr;
}

// A and B start in T's room. A is scripted to leave for the farthest room and then grab T;
// B is scripted to step into a neighbouring room, come back, take T and deliver it. Both
// plan on their own once their script runs out.
inline SoundnessCase run_soundness_case(unsigned long long seed, bool no_validation) {
    SoundnessCase out;
    out.seed = seed;
    RunConfig cfg;
    cfg.no_validation = no_validation;
    const auto tasks = TaskCatalog::builtin().names();
    const auto& task = tasks[seed % tasks.size()];
    cfg.tasks = {task};
    Scenario sc = make_scenario(cfg, task, seed);
    WorldState& st = sc.state;

    // Target: lowest-id goal item, made visible if it sits in a closed container.
    ObjectEntity* target = nullptr;
    for (auto& o : st.objects)
        if (o.kind == ObjectKind::Item && sc.goal.is_target_name(o.object_name) && o.placement.kind != Placement::Kind::Held) {
            target = &o;
            break;
        }
    if (target->placement.kind == Placement::Kind::InContainer) {
        auto* box = st.find_object(target->placement.container);
        if (box->container_state == ContainerState::Closed) {
            box->container_state = ContainerState::Open;
            refresh_states(*box);
        }
    }
    const ObjectId tid = target->object_id;
    const GridPos tpos = target->position;
    const RoomId x = *st.room_at(tpos);
    const Room* xroom = st.find_room(x);

    // Two free cells of room X for the agents.
    std::vector<GridPos> free;
    for (GridPos c : xroom->cells) {
        if (!st.grid.walkable(c) || c == tpos) continue;
        bool occupied = false;
        for (const auto& o : st.objects) occupied = occupied || (o.placement.kind == Placement::Kind::Cell && o.position == c);
        if (!occupied) free.push_back(c);
    }
    st.agents[0].position = free.front();
    st.agents[1].position = free.back();

    const auto map = MapKnowledge::from_world(st);
    // A's detour: the room whose center is farthest by walking distance.
    RoomId far = -1;
    int far_d = -1;
    for (const auto& r : st.rooms) {
        if (r.room_id == x) continue;
        const int d = bfs_length(st.grid, st.agents[0].position, {r.center});
        if (d > far_d) far_d = d, far = r.room_id;
    }
    auto adj = adjacent_rooms(map, x);
    RoomId y = adj.empty() ? far : adj.front();
    if (y == far && adj.size() > 1) y = adj[1];

    auto explore = [&](RoomId r) {
        Plan p;
        p.skill = Skill::GoExplore;
        p.target_room = r;
        p.target_name = st.find_room(r)->room_name;
        p.target_object = r;
        p.target_position = st.find_room(r)->center;
        return p;
    };
    Plan grab;
    grab.skill = Skill::GoGrab;
    grab.target_object = tid;
    grab.target_name = target->object_name;
    grab.target_room = x;
    grab.target_position = tpos;
    if (target->placement.kind == Placement::Kind::InContainer) grab.target_container = target->placement.container;
    Plan put;
    put.skill = Skill::GoPut;
    put.target_object = sc.goal.location_id;
    put.target_name = sc.goal.location_name;
    put.target_position = st.find_object(sc.goal.location_id)->position;
    put.target_room = *st.room_at(put.target_position);

    auto agents = make_agents(cfg, sc, std::make_shared<OracleReasoner>(), cfg.agent_config());
    auto* a = dynamic_cast<RevecaAgent*>(agents.at(0).get());
    auto* b = dynamic_cast<RevecaAgent*>(agents.at(1).get());
    a->set_script({explore(far), grab}, true);
    b->set_script({explore(y), grab, put}, true);

    EpisodeRunner runner(cfg, std::move(sc), std::move(agents), seed);
    a = dynamic_cast<RevecaAgent*>(runner.agent(0));
    b = dynamic_cast<RevecaAgent*>(runner.agent(1));
    bool captured = false;
    bool a_planned_t = false;
    auto taken = [&] {
        const auto* obj = runner.state().find_object(tid);
        if (obj->placement.kind == Placement::Kind::Held) return obj->placement.holder == 1;
        return obj->placement.kind == Placement::Kind::InContainer && obj->placement.container == runner.goal().location_id;
    };
    while (!runner.done()) {
        // Ground truth as A plans: state before this round's kernel step.
        const bool taken_before = taken();
        runner.step_round();
        const auto& ev = runner.last_step().at("events");
        if (!a_planned_t && ev.at("agent").contains("0"))
            for (const auto& e : ev["agent"]["0"])
                if (e.value("type", "") == "plan" && e.value("scripted", false) && e.value("label", "") == grab.describe()) {
                    a_planned_t = true;
                    out.removed_in_window = taken_before;
                }
        if (!captured && a->session() && a->session()->plan().target_object == tid && a->session()->plan().skill == Skill::GoGrab) {
            captured = true;
            out.validated = true;
            const auto& s = *a->session();
            for (const auto& h : s.hypotheses())
                for (const auto& e : h.evidence) out.evidence_in_target_room = out.evidence_in_target_room || e.in_target_room;
            const auto b_plans = b->memory().completed_plans();
            auto run = run_validation(s.plan(), s.hypotheses(), [&](AgentId) -> std::optional<Answer> {
                return answer_validation_query(tid, grab.target_name, b_plans);
            });
            out.run_outcome = run.outcome;
        }
        if (ev.at("validation").contains("0"))
            for (const auto& e : ev["validation"]["0"])
                if (e.value("type", "") == "outcome" && captured && !out.agent_state) out.agent_state = e.value("state", "");
    }
    out.result = runner.finish();
    return out;
}

}  // namespace testsupport
