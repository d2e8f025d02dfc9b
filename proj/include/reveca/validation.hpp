#pragma once

#include <functional>
#include <optional>
#include <string>
#include <vector>

#include "json.hpp"
#include "reveca/memory.hpp"
#include "reveca/planning.hpp"
#include "reveca/reasoner.hpp"

namespace reveca {

inline constexpr int kQueryTimeoutSteps = 3;

enum class Likelihood { None = 0, Low = 1, Medium = 2, High = 3 };
std::string_view to_string(Likelihood l);
std::optional<Likelihood> parse_likelihood(std::string_view s);

struct RoomSpan {
    int from = 0;
    int to = 0;
    RoomId room_id = -1;  // -1 while the collaborator's room is unknown

    bool operator==(const RoomSpan&) const = default;
};

// One position fix considered when reconstructing a collaborator's trajectory.
struct Evidence {
    int step = 0;
    RoomId room_id = -1;
    GridPos position;
    PositionFix::Source source = PositionFix::Source::Observed;
    bool in_target_room = false;
    bool adjacent_room = false;
    int grid_distance = -1;  // steps needed to reach the target; -1 when unreachable
    bool reachable = false;  // grid_distance fits in the remaining window
};

struct TrajectoryHypothesis {
    AgentId collaborator_id = -1;
    std::string collaborator_name;
    int alpha = 0;
    int beta = 0;
    std::vector<RoomSpan> inferred_rooms;
    std::vector<Evidence> evidence;
    Likelihood interaction_likelihood = Likelihood::None;
    std::string rationale_text;
    bool inference_failed = false;
    int last_conversation_step = -1;
    bool discarded = false;

    nlohmann::json to_json() const;
};

// Minimum acquisition step over the plan's provenance records; created_step when empty.
int plan_alpha(const Plan& plan, const AgentMemory& memory);

// Rooms that share a walkable border with `room`.
std::vector<RoomId> adjacent_rooms(const MapKnowledge& map, RoomId room);

// Steps from every walkable cell to the nearest cell 4-adjacent to `target` (or the target cell
// itself when walkable). -1 marks unreachable cells.
std::vector<int> distance_field(const GridMap& grid, GridPos target);

std::vector<Evidence> collect_evidence(const Plan& plan, const CollaboratorRecord& collaborator,
                                       const AgentMemory& memory, int alpha, int beta);
std::vector<RoomSpan> tile_rooms(const std::vector<Evidence>& evidence, int alpha, int beta);

// Builds the hypothesis and asks the reasoner for the interaction likelihood. Reasoner failures
// leave the likelihood at None with inference_failed set.
TrajectoryHypothesis infer_trajectory(const Plan& plan, const CollaboratorRecord& collaborator,
                                      const AgentMemory& memory, Reasoner& reasoner, bool cot_enabled,
                                      std::vector<ReasonerRequest>* issued = nullptr);

// Likelihood desc, most recent conversation step desc, agent id asc.
void rank_hypotheses(std::vector<TrajectoryHypothesis>& hypotheses);

enum class Answer { Confirm, Deny };
std::string_view to_string(Answer a);

// Truthful answer from an agent's own plan history. Matches by id when given, else by name.
Answer answer_validation_query(std::optional<ObjectId> object_id, std::string_view object_name,
                               const std::vector<std::string>& completed_plans);

enum class ValidationState { Ranking, Querying, Confirmed, AllDenied, NoCandidates };
std::string_view to_string(ValidationState s);

enum class ValidationOutcome { Valid, FalsePlan };

// Query/confirm/deny protocol. Reentrant across steps: callers feed answers and ticks.
class ValidationSession {
public:
    ValidationSession(Plan plan, std::vector<TrajectoryHypothesis> hypotheses,
                      int timeout_steps = kQueryTimeoutSteps);

    // Leaves Ranking. Returns the first collaborator to query, or nullopt for NoCandidates.
    std::optional<AgentId> begin(int step);
    // Returns the next collaborator to query, if the protocol continues.
    std::optional<AgentId> on_answer(AgentId from, Answer answer, int step);
    // Counts a timeout as a denial once the wait exceeds the limit.
    std::optional<AgentId> on_tick(int step);

    ValidationState state() const { return state_; }
    bool finished() const;
    std::optional<ValidationOutcome> outcome() const;
    std::optional<AgentId> awaiting() const;
    int queries_sent() const { return queries_sent_; }
    const Plan& plan() const { return plan_; }
    const std::vector<TrajectoryHypothesis>& hypotheses() const { return hypotheses_; }
    // Protocol events since the last call.
    std::vector<nlohmann::json> take_events();

private:
    std::optional<AgentId> advance(int step);

    Plan plan_;
    std::vector<TrajectoryHypothesis> hypotheses_;
    int timeout_steps_;
    ValidationState state_ = ValidationState::Ranking;
    std::size_t index_ = 0;
    int queries_sent_ = 0;
    int asked_at_ = 0;
    std::vector<nlohmann::json> events_;
};

// Synchronous driver: `ask` returns the collaborator's answer or nullopt for a timeout.
struct ValidationRun {
    ValidationOutcome outcome = ValidationOutcome::Valid;
    int queries_sent = 0;
    ValidationState final_state = ValidationState::NoCandidates;
};
ValidationRun run_validation(const Plan& plan, std::vector<TrajectoryHypothesis> hypotheses,
                             const std::function<std::optional<Answer>(AgentId)>& ask);

}  // namespace reveca
