#pragma once

#include <map>
#include <optional>
#include <string>
#include <vector>

#include "json.hpp"
#include "reveca/memory.hpp"
#include "reveca/reasoner.hpp"

namespace reveca {

inline constexpr double kProximityEpsilon = 1.0;
// K value meaning "no retrieval cut": every live record is passed on.
inline constexpr int kTopKAll = -1;

// Declared in ranking order, lowest first.
enum class Proximity { FartherThanSome = 0, Unknown = 1, Similar = 2, CloserThanAll = 3 };

std::string_view to_string(Proximity p);

struct ProximityBucket {
    Proximity value = Proximity::Unknown;
    std::string rendered;

    bool operator==(const ProximityBucket&) const = default;
};

struct CollaboratorPosition {
    std::string name;
    std::optional<GridPos> position;
};

ProximityBucket relative_proximity(GridPos self, GridPos object,
                                   const std::vector<CollaboratorPosition>& collaborators);

// Retrieval total order: relevance desc, proximity desc, acquired_step desc, object_id asc.
bool retrieval_before(const ObservationRecord& a, Proximity pa, const ObservationRecord& b, Proximity pb);

// Top-K undiscarded records. Records missing from `proximities` count as Unknown.
std::vector<const ObservationRecord*> retrieve_top_k(const std::vector<ObservationRecord>& records,
                                                     const std::map<int, ProximityBucket>& proximities,
                                                     int k);

enum class Skill { GoExplore, GoCheck, GoGrab, GoPut };
std::string_view to_string(Skill s);
std::optional<Skill> parse_skill(std::string_view s);

struct Plan {
    Skill skill = Skill::GoExplore;
    ObjectId target_object = -1;
    std::string target_name;
    RoomId target_room = -1;
    GridPos target_position;
    std::optional<ObjectId> target_container;
    std::vector<int> provenance;
    std::string rationale_text;
    int created_step = 0;
    bool fallback = false;

    // "[gograb] <apple> (21)", "[goexplore] <kitchen> (56)".
    std::string describe() const;
    nlohmann::json to_json() const;
};

struct PlanningFlags {
    bool no_cot = false;
    bool no_proximity = false;
    bool no_other_info = false;
    bool no_relevance = false;
};

struct SelfState {
    GridPos position;
    RoomId room = -1;
    std::vector<std::pair<ObjectId, std::string>> held;
};

struct PlanOption {
    std::string letter;
    Plan plan;
};

struct PlanContext {
    nlohmann::json structured;
    std::vector<PlanOption> options;
    std::vector<int> top_k;  // record ids in retrieval order
    bool cot_enabled = true;
};

std::vector<CollaboratorPosition> collaborator_positions(const AgentMemory& memory);
std::map<int, ProximityBucket> compute_proximities(const AgentMemory& memory, GridPos self,
                                                   const PlanningFlags& flags);

PlanContext build_plan_context(const AgentMemory& memory, const std::vector<const ObservationRecord*>& top_k,
                               const std::map<int, ProximityBucket>& proximities, const SelfState& self,
                               const PlanningFlags& flags, int step);

struct PlanOutcome {
    Plan plan;
    std::vector<ReasonerRequest> requests;  // prompts issued, in order
    std::vector<std::string> notes;         // "repair", "fallback: ..." markers
};

// Asks the reasoner for an option; one repair retry on an out-of-context or malformed answer,
// then the rule-based choice. Transport failures propagate as ReasonerUnavailable.
PlanOutcome plan(const PlanContext& context, Reasoner& reasoner, int step);

}  // namespace reveca
