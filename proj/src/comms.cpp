#include "reveca/comms.hpp"

#include "reveca/errors.hpp"
#include "reveca/serialize.hpp"

namespace reveca {

namespace {

constexpr std::size_t kProseReserve = 100;

std::string tag(std::string_view name, const nlohmann::json& id) {
    return "<" + std::string(name) + "> (" + (id.is_number_integer() ? std::to_string(id.get<int>()) : "?") + ")";
}

std::string str(const nlohmann::json& j, const char* key) {
    return j.contains(key) && j[key].is_string() ? j[key].get<std::string>() : std::string();
}

}  // namespace

std::string_view to_string(CommEvent e) {
    switch (e) {
        case CommEvent::EpisodeStart: return "episode_start";
        case CommEvent::ValidationNeeded: return "validation_needed";
        case CommEvent::ValidationQueryReceived: return "validation_query_received";
        case CommEvent::SubGoalCompleted: return "subgoal_completed";
        case CommEvent::Movement: return "movement";
        case CommEvent::Other: return "other";
    }
    return "other";
}

std::optional<MessageKind> should_communicate(CommEvent event) {
    switch (event) {
        case CommEvent::EpisodeStart: return MessageKind::InitBroadcast;
        case CommEvent::ValidationNeeded: return MessageKind::ValidationQuery;
        case CommEvent::ValidationQueryReceived: return MessageKind::ValidationResponse;
        case CommEvent::SubGoalCompleted: return MessageKind::SubGoalAnnouncement;
        default: return std::nullopt;
    }
}

bool payload_valid(MessageKind kind, const nlohmann::json& p) {
    if (!p.is_object()) return false;
    auto id_ok = [&] { return p.contains("object_id") && (p["object_id"].is_null() || p["object_id"].is_number_integer()); };
    switch (kind) {
        case MessageKind::InitBroadcast: {
            if (!p.contains("objects") || !p["objects"].is_array()) return false;
            for (const auto& o : p["objects"])
                if (!o.contains("object_id") || !o.contains("object_name") || !o.contains("room")) return false;
            return p.contains("sender_room") && p["sender_room"].is_string();
        }
        case MessageKind::ValidationQuery: return id_ok() && p.contains("object_name");
        case MessageKind::ValidationResponse: {
            auto a = str(p, "answer");
            return id_ok() && (a == "confirm" || a == "deny");
        }
        case MessageKind::SubGoalAnnouncement:
            return p.contains("items") && p["items"].is_array() && p.contains("location_id") &&
                   p.contains("completed_plans") && p["completed_plans"].is_array();
    }
    return false;
}

std::string render_summary(MessageKind kind, const nlohmann::json& p) {
    switch (kind) {
        case MessageKind::InitBroadcast: {
            std::string s = "[at " + str(p, "sender_room");
            if (p.contains("position") && p["position"].is_array())
                s += " (" + std::to_string(p["position"][0].get<int>()) + "," + std::to_string(p["position"][1].get<int>()) + ")";
            s += "]";
            for (const auto& o : p["objects"]) s += " " + tag(str(o, "object_name"), o["object_id"]) + "@" + str(o, "room");
            return s;
        }
        case MessageKind::ValidationQuery: return "[query] " + tag(str(p, "object_name"), p["object_id"]);
        case MessageKind::ValidationResponse:
            return "[" + str(p, "answer") + "] " + tag(str(p, "object_name"), p["object_id"]);
        case MessageKind::SubGoalAnnouncement: {
            std::string s = "[done]";
            bool first = true;
            for (const auto& it : p["items"]) {
                s += (first ? " " : ", ") + tag(str(it, "object_name"), it["object_id"]);
                first = false;
            }
            s += " -> " + tag(str(p, "location_name"), p["location_id"]);
            return s;
        }
    }
    return {};
}

std::string render_draft(MessageKind kind, const nlohmann::json& p, std::string_view sender, std::string_view recipient) {
    const std::string to(recipient);
    switch (kind) {
        case MessageKind::InitBroadcast:
            if (p.value("sync", false)) return "Update from " + std::string(sender) + " in the " + str(p, "sender_room") + ".";
            return "Hi " + to + ", I'm " + std::string(sender) + " and I'm starting in the " + str(p, "sender_room") +
                   ". Here is what I can see.";
        case MessageKind::ValidationQuery:
            return "Hi " + to + ", did you already grab the " + str(p, "object_name") +
                   "? I was about to go get it.";
        case MessageKind::ValidationResponse:
            if (str(p, "answer") == "confirm") return "Yes, I already took care of the " + str(p, "object_name") + ".";
            return "No, I haven't touched the " + str(p, "object_name") + ".";
        case MessageKind::SubGoalAnnouncement: {
            std::string s = "Hi " + to + ", I just wanted to share that we've completed one of our subgoals.";
            if (p.contains("sender_room")) s += " I'm in the " + str(p, "sender_room") + " now.";
            return s;
        }
    }
    return {};
}

Message render_message(MessageKind kind, nlohmann::json payload, Reasoner* reasoner, const RenderOptions& options,
                       std::vector<ReasonerRequest>* issued) {
    if (!payload_valid(kind, payload)) throw SchemaMismatch("invalid payload for " + std::string(to_string(kind)));
    const std::string summary = render_summary(kind, payload);
    if (summary.size() > kMessageBudget) throw MessageOverflow("payload needs " + std::to_string(summary.size()) + " characters");
    const std::size_t prose_budget = summary.size() + 1 >= kMessageBudget ? 0 : kMessageBudget - summary.size() - 1;

    std::string prose = render_draft(kind, payload, options.sender, options.recipient);
    if (options.refine && reasoner) {
        nlohmann::json ctx{{"kind", to_string(kind)},
                           {"draft", prose},
                           {"sender", options.sender},
                           {"recipient", options.recipient},
                           {"limit", prose_budget}};
        auto request = make_request(RequestKind::Refine, std::move(ctx), false);
        if (issued) issued->push_back(request);
        try {
            auto reply = reasoner->answer(request);
            auto refined = reply.parsed.value("text", "");
            if (!refined.empty() && refined.size() <= prose_budget) prose = refined;
        } catch (const ParseFailure&) {
            // keep the draft
        }
    }
    if (prose.size() > prose_budget) prose.resize(prose_budget);

    Message m;
    m.kind = kind;
    m.text = prose.empty() ? summary : prose + " " + summary;
    m.payload = std::move(payload);
    return m;
}

nlohmann::json fit_init_payload(nlohmann::json payload) {
    auto& objects = payload["objects"];
    while (!objects.empty() && render_summary(MessageKind::InitBroadcast, payload).size() + kProseReserve > kMessageBudget)
        objects.erase(objects.end() - 1);
    return payload;
}

InboundUpdate parse_inbound(const Message& m, const MapKnowledge& map) {
    InboundUpdate u;
    u.sender = m.sender_id;
    u.kind = m.kind;
    const auto& p = m.payload;
    if (!payload_valid(m.kind, p)) {
        u.warnings.push_back("invalid payload");
        return u;
    }
    if (m.text.find(render_summary(m.kind, p)) == std::string::npos) u.warnings.push_back("payload/text mismatch");

    switch (m.kind) {
        case MessageKind::InitBroadcast:
            if (p.contains("position") && p["position"].is_array()) u.sender_position = pos_from_json(p["position"]);
            for (const auto& o : p["objects"]) {
                const Room* room = map.find_room(str(o, "room"));
                if (!room) {
                    u.warnings.push_back("unknown room " + str(o, "room"));
                    continue;
                }
                ObjectSnapshot s;
                s.object_id = o["object_id"].get<int>();
                s.object_name = str(o, "object_name");
                s.kind = parse_object_kind(o.value("kind", "item"));
                s.position = o.contains("position") ? pos_from_json(o["position"]) : room->center;
                s.room_id = room->room_id;
                s.room_name = room->room_name;
                s.container_state = parse_container_state(o.value("container_state", "n/a"));
                if (o.contains("container_id") && o["container_id"].is_number_integer())
                    s.container_id = o["container_id"].get<int>();
                ObjectEntity tmp;
                tmp.kind = s.kind;
                tmp.container_state = s.container_state;
                refresh_states(tmp);
                s.states = tmp.states;
                u.objects.push_back(std::move(s));
            }
            break;
        case MessageKind::ValidationQuery:
            if (p["object_id"].is_number_integer()) u.query_object = p["object_id"].get<int>();
            u.query_name = str(p, "object_name");
            u.schedule_answer = true;
            break;
        case MessageKind::ValidationResponse:
            if (p["object_id"].is_number_integer()) u.query_object = p["object_id"].get<int>();
            u.query_name = str(p, "object_name");
            u.answer = str(p, "answer") == "confirm" ? Answer::Confirm : Answer::Deny;
            break;
        case MessageKind::SubGoalAnnouncement:
            for (const auto& it : p["items"])
                if (it.contains("object_id") && it["object_id"].is_number_integer())
                    u.placed.emplace_back(it["object_id"].get<int>(), str(it, "object_name"));
            break;
    }
    return u;
}

}  // namespace reveca
