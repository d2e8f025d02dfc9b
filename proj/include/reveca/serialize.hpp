#pragma once

#include "json.hpp"
#include "reveca/world.hpp"

namespace reveca {

using nlohmann::json;

json to_json(GridPos p);
GridPos pos_from_json(const json& j);

json to_json(const ObjectSnapshot& s);
json to_json(const Observation& obs);
json to_json(const Goal& goal);
Goal goal_from_json(const json& j);

// Full ground truth, enough to rebuild the state exactly.
json to_json(const WorldState& state);
WorldState world_from_json(const json& j);

// Actions are written as {"id": "move:E"} plus the message for send actions.
json to_json(const ActionRequest& a);
ActionRequest action_from_json(const json& j);

json to_json(const Event& e);
json to_json(const EpisodeMetrics& m);

ObjectKind parse_object_kind(std::string_view s);
ContainerState parse_container_state(std::string_view s);

}  // namespace reveca
