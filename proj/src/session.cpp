#include "reveca/session.hpp"

#include <algorithm>
#include <cctype>

#include "reveca/comms.hpp"
#include "reveca/errors.hpp"
#include "reveca/serialize.hpp"

namespace reveca {

using nlohmann::json;

std::string_view to_string(SessionMode m) {
    switch (m) {
        case SessionMode::Reveca: return "reveca";
        case SessionMode::AlwaysAsk: return "always_ask";
        case SessionMode::NoComm: return "no_comm";
    }
    return "reveca";
}

std::optional<SessionMode> parse_session_mode(std::string_view s) {
    for (auto m : {SessionMode::Reveca, SessionMode::AlwaysAsk, SessionMode::NoComm})
        if (to_string(m) == s) return m;
    return std::nullopt;
}

std::string_view to_string(SessionPhase p) {
    switch (p) {
        case SessionPhase::AwaitingHumanAction: return "awaiting_human_action";
        case SessionPhase::Advancing: return "advancing";
        case SessionPhase::Ended: return "ended";
    }
    return "ended";
}

SessionConfig SessionConfig::from_json(const json& j) {
    SessionConfig c;
    if (!j.is_object()) throw ConfigError("session config must be an object");
    try {
        if (j.contains("run")) c.run = RunConfig::from_json(j.at("run"));
        c.task = j.value("task", c.task);
        c.seed = j.value("seed", c.seed);
        c.human_agent_id = j.value("human_agent_id", c.human_agent_id);
        if (j.contains("mode")) {
            auto m = parse_session_mode(j.at("mode").get<std::string>());
            if (!m) throw ConfigError("mode must be reveca, always_ask or no_comm");
            c.mode = *m;
        }
    } catch (const json::exception& e) {
        throw ConfigError(std::string("bad session config: ") + e.what());
    }
    c.run.validate();
    if (!TaskCatalog::builtin().find(c.task)) throw ConfigError("unknown task: " + c.task);
    if (c.human_agent_id < 0 || c.human_agent_id >= c.run.agent_count)
        throw ConfigError("human_agent_id must name one of the " + std::to_string(c.run.agent_count) + " agents");
    return c;
}

namespace {

std::string lower(std::string s) {
    std::transform(s.begin(), s.end(), s.begin(), [](unsigned char c) { return static_cast<char>(std::tolower(c)); });
    return s;
}

std::string trimmed_lower(const std::string& s) {
    auto b = s.find_first_not_of(" \t\r\n.!");
    if (b == std::string::npos) return "";
    auto e = s.find_last_not_of(" \t\r\n.!");
    return lower(s.substr(b, e - b + 1));
}

}  // namespace

Session::Session(std::string id, SessionConfig config) : id_(std::move(id)), config_(std::move(config)) {
    auto scenario = make_scenario(config_.run, config_.task, config_.seed);
    AgentConfig ac = config_.run.agent_config();
    ac.always_ask = config_.mode == SessionMode::AlwaysAsk;
    ac.communicate = config_.mode != SessionMode::NoComm;
    auto agents = make_agents(config_.run, scenario, make_reasoner(config_.run), ac);
    agents.erase(config_.human_agent_id);
    runner_ = std::make_unique<EpisodeRunner>(config_.run, std::move(scenario), std::move(agents), config_.seed);
    learn_locked();
    if (runner_->done()) phase_ = SessionPhase::Ended;
}

SessionPhase Session::phase() const {
    std::lock_guard lock(mu_);
    return phase_;
}

int Session::step_index() const {
    std::lock_guard lock(mu_);
    return runner_->state().step_index;
}

void Session::learn_locked() {
    const auto& state = runner_->state();
    const auto obs = observe(state, config_.human_agent_id);
    if (obs.room_id >= 0) visited_rooms_.insert(obs.room_id);
    for (const auto& s : obs.visible_objects) {
        known_ids_.insert(s.object_id);
        seen_names_[s.object_id] = s.object_name;
    }
    known_ids_.insert(runner_->goal().location_id);
    if (const auto* body = state.find_agent(config_.human_agent_id))
        for (ObjectId id : body->held_object_ids) known_ids_.insert(id);
}

json Session::legal_locked() const {
    json out = json::array({"noop"});
    for (const auto& a : legal_actions(runner_->state(), config_.human_agent_id)) out.push_back(a.id());
    return out;
}

json Session::snapshot_locked() const {
    const auto& state = runner_->state();
    const AgentBody* body = state.find_agent(config_.human_agent_id);
    const auto obs = observe(state, config_.human_agent_id);

    json held = json::array();
    for (ObjectId id : body->held_object_ids) {
        const auto* obj = state.find_object(id);
        held.push_back({{"object_id", id}, {"object_name", obj ? obj->object_name : ""}});
    }
    // Fog: only rooms the human has stood in are drawn, plus the walls around them.
    const auto& grid = state.grid;
    auto known_cell = [&](GridPos p) {
        if (!grid.in_bounds(p)) return false;
        const RoomId r = state.cell_room[grid.index(p)];
        return r >= 0 && visited_rooms_.count(r) > 0;
    };
    json rows = json::array();
    for (int y = 0; y < grid.height(); ++y) {
        std::string row;
        for (int x = 0; x < grid.width(); ++x) {
            GridPos p{x, y};
            if (known_cell(p)) {
                row += grid.walkable(p) ? '.' : '#';
                continue;
            }
            bool edge = state.cell_room[grid.index(p)] < 0;
            bool near = false;
            for (int dy = -1; dy <= 1; ++dy)
                for (int dx = -1; dx <= 1; ++dx) near = near || known_cell({x + dx, y + dy});
            row += edge && near ? '#' : '?';
        }
        rows.push_back(row);
    }
    json rooms = json::array();
    for (RoomId r : visited_rooms_)
        if (const Room* room = state.find_room(r)) rooms.push_back({{"room_id", r}, {"room_name", room->room_name}});

    const auto term = runner_->termination();
    return {{"session_id", id_},
            {"step", state.step_index},
            {"horizon", state.horizon},
            {"phase", to_string(phase_)},
            {"mode", to_string(config_.mode)},
            {"human_agent_id", config_.human_agent_id},
            {"name", body->name},
            {"goal", runner_->goal().text},
            {"position", to_json(body->position)},
            {"held", held},
            {"observation", to_json(obs)},
            {"chat", chat_},
            {"legal_actions", phase_ == SessionPhase::AwaitingHumanAction ? legal_locked() : json::array()},
            {"map", {{"width", grid.width()}, {"height", grid.height()}, {"rows", rows}, {"visited_rooms", rooms}}},
            {"termination", to_string(term.reason)}};
}

json Session::snapshot() const {
    std::lock_guard lock(mu_);
    return snapshot_locked();
}

std::set<ObjectId> Session::known_object_ids() const {
    std::lock_guard lock(mu_);
    return known_ids_;
}

SubmitResult Session::advance_locked(const ActionRequest& action) {
    SubmitResult r;
    const int step = runner_->state().step_index;
    phase_ = SessionPhase::Advancing;
    std::optional<std::string> failure;
    try {
        runner_->step_round({{config_.human_agent_id, action}});
    } catch (const std::exception& e) {
        failure = e.what();
    }

    json new_chat = json::array();
    for (const auto& m : runner_->state().delivered) {
        if (m.sender_id != config_.human_agent_id && !m.addressed_to(config_.human_agent_id)) continue;
        json wire = m;
        chat_.push_back(wire);
        new_chat.push_back(wire);
        if (m.sender_id != config_.human_agent_id) {
            if (m.kind == MessageKind::ValidationQuery) open_query_ = m.payload;
            for (const auto* key : {"object_id", "location_id"})
                if (m.payload.contains(key) && m.payload[key].is_number_integer()) known_ids_.insert(m.payload[key].get<int>());
            if (m.payload.contains("objects"))
                for (const auto& o : m.payload["objects"]) known_ids_.insert(o.value("object_id", -1));
            if (m.payload.contains("items"))
                for (const auto& o : m.payload["items"]) known_ids_.insert(o.value("object_id", -1));
        }
    }
    json events = json::array();
    if (!failure) {
        for (const auto& e : runner_->last_step().at("events").at("kernel"))
            if (e.value("agent", -1) == config_.human_agent_id) events.push_back(e);
    } else {
        events.push_back({{"type", "session_error"}, {"reason", *failure}});
    }
    learn_locked();
    phase_ = failure || runner_->done() ? SessionPhase::Ended : SessionPhase::AwaitingHumanAction;
    r.accepted = true;
    r.broadcast = {{"type", "step_result"}, {"step", step}, {"snapshot", snapshot_locked()}, {"chat", new_chat}, {"events", events}};
    return r;
}

SubmitResult Session::submit_action(const std::string& action_id) {
    SubmitResult r;
    {
        std::lock_guard lock(mu_);
        if (phase_ != SessionPhase::AwaitingHumanAction) {
            r.error = "session is " + std::string(to_string(phase_));
            return r;
        }
        const json legal = legal_locked();
        auto parsed = action_id == "noop" ? std::optional<ActionRequest>(ActionRequest::noop()) : parse_action_id(action_id);
        if (!parsed || std::find(legal.begin(), legal.end(), json(action_id)) == legal.end()) {
            r.error = "illegal action: " + action_id;
            r.legal_actions = legal;
            return r;
        }
        r = advance_locked(*parsed);
    }
    broadcast(r.broadcast.dump());
    return r;
}

SubmitResult Session::submit_chat(const std::string& text) {
    SubmitResult r;
    {
        std::lock_guard lock(mu_);
        if (phase_ != SessionPhase::AwaitingHumanAction) {
            r.error = "session is " + std::string(to_string(phase_));
            return r;
        }
        if (text.empty() || text.size() > kMessageBudget) {
            r.error = "chat must be 1.." + std::to_string(kMessageBudget) + " characters";
            r.legal_actions = legal_locked();
            return r;
        }
        Message m;
        m.sender_id = config_.human_agent_id;
        const auto plain = trimmed_lower(text);
        if ((plain == "yes" || plain == "no") && open_query_) {
            m.kind = MessageKind::ValidationResponse;
            m.payload = {{"object_id", open_query_->value("object_id", json(nullptr))},
                         {"object_name", open_query_->value("object_name", "")},
                         {"answer", plain == "yes" ? "confirm" : "deny"}};
            open_query_.reset();
        } else {
            // A question about an object the human knows by name, or a generic query.
            std::string mentioned;
            const auto hay = lower(text);
            std::vector<std::string> names;
            for (const auto& g : runner_->goal().sub_goals) names.push_back(g.object_name);
            for (const auto& [id, name] : seen_names_) names.push_back(name);
            for (const auto& n : names)
                if (n.size() > mentioned.size() && hay.find(lower(n)) != std::string::npos) mentioned = n;
            m.kind = MessageKind::ValidationQuery;
            m.payload = {{"object_id", nullptr}, {"object_name", mentioned}};
        }
        const auto summary = render_summary(m.kind, m.payload);
        m.text = text.size() + 1 + summary.size() <= kMessageBudget ? text + " " + summary : text;
        r = advance_locked(ActionRequest::send(std::move(m)));
    }
    broadcast(r.broadcast.dump());
    return r;
}

int Session::subscribe(std::function<void(const std::string&)> sink) {
    std::lock_guard lock(sinks_mu_);
    sinks_.emplace(next_token_, std::move(sink));
    return next_token_++;
}

void Session::unsubscribe(int token) {
    std::lock_guard lock(sinks_mu_);
    sinks_.erase(token);
}

std::size_t Session::client_count() const {
    std::lock_guard lock(sinks_mu_);
    return sinks_.size();
}

void Session::broadcast(const std::string& text) {
    std::lock_guard lock(sinks_mu_);
    for (auto& [token, sink] : sinks_) sink(text);
}

std::string SessionManager::create(const json& config) {
    auto c = SessionConfig::from_json(config);
    std::lock_guard lock(mu_);
    auto id = "s" + std::to_string(next_id_++);
    sessions_.emplace(id, std::make_shared<Session>(id, std::move(c)));
    return id;
}

std::shared_ptr<Session> SessionManager::find(const std::string& id) const {
    std::lock_guard lock(mu_);
    auto it = sessions_.find(id);
    return it == sessions_.end() ? nullptr : it->second;
}

std::size_t SessionManager::size() const {
    std::lock_guard lock(mu_);
    return sessions_.size();
}

}  // namespace reveca
