#include "reveca/validation.hpp"

#include <algorithm>
#include <deque>
#include <set>

#include "reveca/errors.hpp"

namespace reveca {

std::string_view to_string(Likelihood l) {
    switch (l) {
        case Likelihood::None: return "None";
        case Likelihood::Low: return "Low";
        case Likelihood::Medium: return "Medium";
        case Likelihood::High: return "High";
    }
    return "None";
}

std::optional<Likelihood> parse_likelihood(std::string_view s) {
    for (auto l : {Likelihood::None, Likelihood::Low, Likelihood::Medium, Likelihood::High})
        if (to_string(l) == s) return l;
    return std::nullopt;
}

std::string_view to_string(Answer a) { return a == Answer::Confirm ? "confirm" : "deny"; }

std::string_view to_string(ValidationState s) {
    switch (s) {
        case ValidationState::Ranking: return "ranking";
        case ValidationState::Querying: return "querying";
        case ValidationState::Confirmed: return "confirmed";
        case ValidationState::AllDenied: return "all_denied";
        case ValidationState::NoCandidates: return "no_candidates";
    }
    return "ranking";
}

nlohmann::json TrajectoryHypothesis::to_json() const {
    nlohmann::json rooms = nlohmann::json::array();
    for (const auto& s : inferred_rooms) rooms.push_back({{"from", s.from}, {"to", s.to}, {"room_id", s.room_id}});
    return {{"collaborator_id", collaborator_id},
            {"alpha", alpha},
            {"beta", beta},
            {"inferred_rooms", rooms},
            {"interaction_likelihood", to_string(interaction_likelihood)},
            {"inference_failed", inference_failed},
            {"last_conversation_step", last_conversation_step}};
}

int plan_alpha(const Plan& plan, const AgentMemory& memory) {
    int alpha = plan.created_step;
    for (int id : plan.provenance)
        if (const auto* r = memory.record(id)) alpha = std::min(alpha, r->acquired_step);
    return std::max(alpha, 1);
}

std::vector<RoomId> adjacent_rooms(const MapKnowledge& map, RoomId room) {
    std::set<RoomId> out;
    const Room* r = map.find_room(room);
    if (!r) return {};
    for (GridPos c : r->cells) {
        if (!map.grid.walkable(c)) continue;
        for (GridPos n : map.grid.walkable_neighbors(c)) {
            auto other = map.room_at(n);
            if (other && *other != room) out.insert(*other);
        }
    }
    return {out.begin(), out.end()};
}

std::vector<int> distance_field(const GridMap& grid, GridPos target) {
    std::vector<int> dist(static_cast<std::size_t>(grid.width()) * static_cast<std::size_t>(grid.height()), -1);
    std::deque<GridPos> queue;
    auto seed = [&](GridPos p) {
        if (!grid.walkable(p) || dist[grid.index(p)] == 0) return;
        dist[grid.index(p)] = 0;
        queue.push_back(p);
    };
    seed(target);
    for (Direction d : kAllDirections) seed(neighbor(target, d));
    while (!queue.empty()) {
        GridPos p = queue.front();
        queue.pop_front();
        for (GridPos n : grid.walkable_neighbors(p)) {
            auto& dn = dist[grid.index(n)];
            if (dn >= 0) continue;
            dn = dist[grid.index(p)] + 1;
            queue.push_back(n);
        }
    }
    return dist;
}

std::vector<Evidence> collect_evidence(const Plan& plan, const CollaboratorRecord& collaborator,
                                       const AgentMemory& memory, int alpha, int beta) {
    const auto& map = memory.map();
    const auto field = distance_field(map.grid, plan.target_position);
    const auto neighbours = adjacent_rooms(map, plan.target_room);

    std::vector<PositionFix> fixes;
    std::optional<PositionFix> carried;
    for (const auto& f : collaborator.position_history) {
        if (f.step > beta) continue;
        if (f.step < alpha) {
            if (!carried || f.step >= carried->step) carried = f;
        } else {
            fixes.push_back(f);
        }
    }
    if (carried) fixes.insert(fixes.begin(), *carried);
    std::stable_sort(fixes.begin(), fixes.end(), [](const auto& a, const auto& b) { return a.step < b.step; });

    std::vector<Evidence> out;
    for (const auto& f : fixes) {
        Evidence e;
        e.step = f.step;
        e.room_id = f.room_id;
        e.position = f.position;
        e.source = f.source;
        e.in_target_room = f.room_id == plan.target_room;
        e.adjacent_room = std::find(neighbours.begin(), neighbours.end(), f.room_id) != neighbours.end();
        int d = -1;
        if (f.source == PositionFix::Source::Observed) {
            if (map.grid.walkable(f.position)) d = field[map.grid.index(f.position)];
        } else if (const Room* room = map.find_room(f.room_id)) {
            // Only the room is known, so take its best cell.
            for (GridPos c : room->cells) {
                if (!map.grid.walkable(c)) continue;
                int dc = field[map.grid.index(c)];
                if (dc >= 0 && (d < 0 || dc < d)) d = dc;
            }
        }
        e.grid_distance = d;
        e.reachable = d >= 0 && d <= beta - f.step;
        out.push_back(e);
    }
    return out;
}

std::vector<RoomSpan> tile_rooms(const std::vector<Evidence>& evidence, int alpha, int beta) {
    std::vector<RoomSpan> spans;
    RoomId current = -1;
    int start = alpha;
    for (const auto& e : evidence) {
        if (e.step < alpha) {
            current = e.room_id;
            continue;
        }
        if (e.step > beta) break;
        if (e.room_id == current) continue;
        if (e.step > start) {
            spans.push_back({start, e.step - 1, current});
            start = e.step;
        }
        current = e.room_id;
    }
    spans.push_back({start, beta, current});
    return spans;
}

TrajectoryHypothesis infer_trajectory(const Plan& plan, const CollaboratorRecord& collaborator,
                                      const AgentMemory& memory, Reasoner& reasoner, bool cot_enabled,
                                      std::vector<ReasonerRequest>* issued) {
    using nlohmann::json;
    TrajectoryHypothesis h;
    h.collaborator_id = collaborator.collaborator_id;
    h.collaborator_name = collaborator.name;
    h.beta = plan.created_step;
    h.alpha = std::min(plan_alpha(plan, memory), h.beta);
    if (!collaborator.conversation_log.empty()) h.last_conversation_step = collaborator.conversation_log.back().step;
    h.evidence = collect_evidence(plan, collaborator, memory, h.alpha, h.beta);
    h.inferred_rooms = tile_rooms(h.evidence, h.alpha, h.beta);
    if (h.alpha == h.beta) {
        h.rationale_text = "information acquired at planning time";
        return h;
    }

    const auto& map = memory.map();
    auto room_name = [&](RoomId id) -> std::string {
        const Room* r = map.find_room(id);
        return r ? r->room_name : "unknown";
    };
    bool strong = false;
    for (int id : plan.provenance)
        if (const auto* r = memory.record(id)) strong = strong || r->relevance == Relevance::Strong;

    json evidence = json::array();
    for (const auto& e : h.evidence)
        evidence.push_back({{"step", e.step},
                            {"room", room_name(e.room_id)},
                            {"source", to_string(e.source)},
                            {"in_target_room", e.in_target_room},
                            {"adjacent_room", e.adjacent_room},
                            {"grid_distance", e.grid_distance},
                            {"reachable", e.reachable}});
    json spans = json::array();
    for (const auto& s : h.inferred_rooms)
        spans.push_back({{"from", s.from}, {"to", s.to}, {"room", room_name(s.room_id)}});
    json plans = collaborator.completed_plans;
    json context{{"plan", {{"label", plan.describe()}, {"target_room", room_name(plan.target_room)}, {"target_strong", strong}}},
                 {"alpha", h.alpha},
                 {"beta", h.beta},
                 {"collaborator", {{"agent_id", collaborator.collaborator_id}, {"name", collaborator.name}}},
                 {"completed_plans", plans},
                 {"evidence", evidence},
                 {"inferred_rooms", spans}};
    auto request = make_request(RequestKind::Trajectory, std::move(context), cot_enabled);
    if (issued) issued->push_back(request);
    try {
        auto reply = reasoner.answer(request);
        h.interaction_likelihood = parse_likelihood(reply.parsed.at("choice").get<std::string>()).value();
        h.rationale_text = reply.raw_text;
    } catch (const ParseFailure& e) {
        h.inference_failed = true;
        h.rationale_text = e.what();
    } catch (const ReasonerUnavailable& e) {
        h.inference_failed = true;
        h.rationale_text = e.what();
    }
    return h;
}

void rank_hypotheses(std::vector<TrajectoryHypothesis>& hypotheses) {
    std::stable_sort(hypotheses.begin(), hypotheses.end(), [](const auto& a, const auto& b) {
        if (a.interaction_likelihood != b.interaction_likelihood)
            return a.interaction_likelihood > b.interaction_likelihood;
        if (a.last_conversation_step != b.last_conversation_step)
            return a.last_conversation_step > b.last_conversation_step;
        return a.collaborator_id < b.collaborator_id;
    });
}

Answer answer_validation_query(std::optional<ObjectId> object_id, std::string_view object_name,
                               const std::vector<std::string>& completed_plans) {
    for (const auto& p : completed_plans) {
        auto id = grabbed_id_from_plan(p);
        if (!id) continue;
        if (object_id) {
            if (*id == *object_id) return Answer::Confirm;
        } else if (!object_name.empty() && p.find("<" + std::string(object_name) + ">") != std::string::npos) {
            return Answer::Confirm;
        }
    }
    return Answer::Deny;
}

ValidationSession::ValidationSession(Plan plan, std::vector<TrajectoryHypothesis> hypotheses, int timeout_steps)
    : plan_(std::move(plan)), hypotheses_(std::move(hypotheses)), timeout_steps_(timeout_steps) {
    rank_hypotheses(hypotheses_);
}

bool ValidationSession::finished() const {
    return state_ == ValidationState::Confirmed || state_ == ValidationState::AllDenied ||
           state_ == ValidationState::NoCandidates;
}

std::optional<ValidationOutcome> ValidationSession::outcome() const {
    switch (state_) {
        case ValidationState::Confirmed: return ValidationOutcome::FalsePlan;
        case ValidationState::AllDenied:
        case ValidationState::NoCandidates: return ValidationOutcome::Valid;
        default: return std::nullopt;
    }
}

std::optional<AgentId> ValidationSession::awaiting() const {
    if (state_ != ValidationState::Querying) return std::nullopt;
    return hypotheses_[index_].collaborator_id;
}

std::vector<nlohmann::json> ValidationSession::take_events() { return std::exchange(events_, {}); }

std::optional<AgentId> ValidationSession::begin(int step) {
    if (state_ != ValidationState::Ranking) return awaiting();
    nlohmann::json ranked = nlohmann::json::array();
    for (const auto& h : hypotheses_) ranked.push_back(h.to_json());
    events_.push_back({{"type", "hypotheses"}, {"step", step}, {"plan", plan_.describe()}, {"ranked", ranked}});
    index_ = 0;
    const bool any = std::any_of(hypotheses_.begin(), hypotheses_.end(),
                                 [](const auto& h) { return h.interaction_likelihood != Likelihood::None; });
    if (!any) {
        state_ = ValidationState::NoCandidates;
        events_.push_back({{"type", "outcome"}, {"step", step}, {"state", to_string(state_)}, {"queries", 0}});
        return std::nullopt;
    }
    return advance(step);
}

std::optional<AgentId> ValidationSession::advance(int step) {
    while (index_ < hypotheses_.size() && hypotheses_[index_].interaction_likelihood == Likelihood::None) ++index_;
    if (index_ >= hypotheses_.size()) {
        state_ = ValidationState::AllDenied;
        events_.push_back({{"type", "outcome"}, {"step", step}, {"state", to_string(state_)}, {"queries", queries_sent_}});
        return std::nullopt;
    }
    state_ = ValidationState::Querying;
    ++queries_sent_;
    asked_at_ = step;
    const auto target = hypotheses_[index_].collaborator_id;
    events_.push_back({{"type", "query"}, {"step", step}, {"to", target}, {"plan", plan_.describe()}});
    return target;
}

std::optional<AgentId> ValidationSession::on_answer(AgentId from, Answer answer, int step) {
    if (state_ != ValidationState::Querying || hypotheses_[index_].collaborator_id != from) return awaiting();
    events_.push_back({{"type", "answer"}, {"step", step}, {"from", from}, {"answer", to_string(answer)}});
    if (answer == Answer::Confirm) {
        state_ = ValidationState::Confirmed;
        events_.push_back({{"type", "outcome"}, {"step", step}, {"state", to_string(state_)}, {"queries", queries_sent_}});
        return std::nullopt;
    }
    hypotheses_[index_].discarded = true;
    ++index_;
    return advance(step);
}

std::optional<AgentId> ValidationSession::on_tick(int step) {
    if (state_ != ValidationState::Querying) return std::nullopt;
    if (step - asked_at_ <= timeout_steps_) return awaiting();
    const auto who = hypotheses_[index_].collaborator_id;
    events_.push_back({{"type", "timeout"}, {"step", step}, {"from", who}});
    hypotheses_[index_].discarded = true;
    ++index_;
    return advance(step);
}

ValidationRun run_validation(const Plan& plan, std::vector<TrajectoryHypothesis> hypotheses,
                             const std::function<std::optional<Answer>(AgentId)>& ask) {
    ValidationSession session(plan, std::move(hypotheses));
    int step = plan.created_step;
    auto next = session.begin(step);
    while (next) {
        auto answer = ask(*next);
        if (answer) {
            next = session.on_answer(*next, *answer, ++step);
        } else {
            step += kQueryTimeoutSteps + 1;
            next = session.on_tick(step);
        }
    }
    ValidationRun run;
    run.outcome = session.outcome().value_or(ValidationOutcome::Valid);
    run.queries_sent = session.queries_sent();
    run.final_state = session.state();
    return run;
}

}  // namespace reveca
