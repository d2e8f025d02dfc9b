#pragma once

#include <cstddef>
#include <optional>
#include <string>
#include <string_view>

#include "json.hpp"

namespace reveca {

using AgentId = int;

// Per-message character cap.
inline constexpr std::size_t kMessageBudget = 500;

enum class MessageKind { InitBroadcast, ValidationQuery, ValidationResponse, SubGoalAnnouncement };

std::string_view to_string(MessageKind kind);
std::optional<MessageKind> parse_message_kind(std::string_view s);

// Wire envelope shared by agents, transcripts and the session service.
//   {"kind", "sender", "recipients": "all" | id, "text", "payload", "step"}
struct Message {
    MessageKind kind = MessageKind::InitBroadcast;
    AgentId sender_id = -1;
    std::optional<AgentId> recipient;  // nullopt broadcasts to every other agent
    std::string text;
    nlohmann::json payload = nlohmann::json::object();
    int step_sent = 0;

    bool addressed_to(AgentId agent) const {
        return agent != sender_id && (!recipient || *recipient == agent);
    }
    bool operator==(const Message&) const = default;
};

void to_json(nlohmann::json& j, const Message& m);
void from_json(const nlohmann::json& j, Message& m);

}  // namespace reveca
