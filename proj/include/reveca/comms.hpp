#pragma once

#include <optional>
#include <string>
#include <vector>

#include "json.hpp"
#include "reveca/memory.hpp"
#include "reveca/message.hpp"
#include "reveca/reasoner.hpp"
#include "reveca/validation.hpp"

namespace reveca {

enum class CommEvent { EpisodeStart, ValidationNeeded, ValidationQueryReceived, SubGoalCompleted, Movement, Other };
std::string_view to_string(CommEvent e);

// The four trigger cases. Every other event maps to no message.
std::optional<MessageKind> should_communicate(CommEvent event);

// Payload schemas:
//   init_broadcast       {sender_room, position, held_object_ids, objects:[{object_id, object_name,
//                         kind, room, position, container_state, container_id?}]}
//   validation_query     {object_id|null, object_name, plan, sender_room?}
//   validation_response  {object_id|null, object_name, answer: "confirm"|"deny", sender_room?}
//   subgoal_announcement {items:[{object_id, object_name}], location_id, location_name,
//                         completed_plans, sender_room?}
bool payload_valid(MessageKind kind, const nlohmann::json& payload);

// Compact rendering of the payload that every message text ends with.
std::string render_summary(MessageKind kind, const nlohmann::json& payload);
// Rule-based prose that precedes the summary.
std::string render_draft(MessageKind kind, const nlohmann::json& payload, std::string_view sender,
                         std::string_view recipient);

struct RenderOptions {
    std::string sender;
    std::string recipient = "everyone";
    bool refine = false;
    bool cot_enabled = true;
};

// Text is "<prose> <summary>". Refined prose replaces the draft only when it fits the budget;
// otherwise the draft is used, truncated if needed. Throws MessageOverflow when the summary
// alone exceeds the budget.
Message render_message(MessageKind kind, nlohmann::json payload, Reasoner* reasoner, const RenderOptions& options,
                       std::vector<ReasonerRequest>* issued = nullptr);

// Drops trailing objects from an init_broadcast payload until its summary leaves room for prose.
nlohmann::json fit_init_payload(nlohmann::json payload);

struct InboundUpdate {
    AgentId sender = -1;
    MessageKind kind = MessageKind::InitBroadcast;
    std::vector<ObjectSnapshot> objects;
    std::optional<GridPos> sender_position;
    std::vector<std::pair<ObjectId, std::string>> placed;
    std::optional<ObjectId> query_object;
    std::string query_name;
    std::optional<Answer> answer;
    bool schedule_answer = false;
    std::vector<std::string> warnings;
};

// Structured view of a delivered message. The payload is trusted over the text.
InboundUpdate parse_inbound(const Message& message, const MapKnowledge& map);

}  // namespace reveca
