#include "reveca/agent.hpp"

#include <algorithm>

#include "reveca/errors.hpp"
#include "reveca/serialize.hpp"

namespace reveca {

using nlohmann::json;

namespace {

ObjectSnapshot snapshot_of(const ObservationRecord& r) {
    ObjectSnapshot s;
    s.object_id = r.object_id;
    s.object_name = r.object_name;
    s.kind = r.kind;
    s.position = r.position;
    s.room_id = r.room_id;
    s.room_name = r.room_name;
    s.states = r.states;
    s.container_state = r.container_state;
    s.container_id = r.container_id;
    return s;
}

json event(std::string_view type, int step, json data = json::object()) {
    data["type"] = type;
    data["step"] = step;
    return data;
}

}  // namespace

RevecaAgent::RevecaAgent(AgentId id, std::string name, Goal goal, MapKnowledge map, std::vector<Teammate> teammates,
                         AgentConfig config, std::shared_ptr<Reasoner> reasoner)
    : id_(id),
      name_(name),
      teammates_(std::move(teammates)),
      config_(config),
      reasoner_(std::move(reasoner)),
      memory_(id, std::move(name), std::move(goal), std::move(map), RelevanceLadder::make(config.ladder)) {
    if (!reasoner_) throw ConfigError("agent needs a reasoner");
    if (config_.top_k != kTopKAll && config_.top_k < 1) throw ConfigError("K must be >= 1 or Inf");
    for (const auto& t : teammates_) memory_.collaborator(t.id, t.name);
}

void RevecaAgent::set_script(std::vector<Plan> plans, bool then_plan) {
    script_ = std::move(plans);
    script_then_plan_ = then_plan;
}

std::vector<std::pair<ObjectId, std::string>> RevecaAgent::held_named(const std::vector<ObjectId>& held) const {
    std::vector<std::pair<ObjectId, std::string>> out;
    for (ObjectId id : held) {
        auto it = held_names_.find(id);
        std::string name = it != held_names_.end() ? it->second : "";
        if (name.empty())
            for (const auto& r : memory_.records())
                if (r.object_id == id) name = r.object_name;
        out.emplace_back(id, name.empty() ? "object" : name);
    }
    return out;
}

void RevecaAgent::log_requests(const std::vector<ReasonerRequest>& requests, Decision& out) const {
    if (!config_.log_prompts) return;
    for (const auto& r : requests)
        out.prompts.push_back({{"kind", to_string(r.kind)}, {"prompt", r.rendered_prompt}});
}

Relevance RevecaAgent::estimate_relevance(const ObjectSnapshot& s, Decision& out) {
    if (config_.planning.no_relevance) return Relevance::Strong;
    const Goal& goal = memory_.goal();
    bool goal_open = false;
    for (const auto& g : goal.sub_goals)
        goal_open = goal_open || memory_.known_placed_count(g.object_name) < g.count;
    bool strong_in_room = false;
    for (const auto& r : memory_.records())
        if (!r.discarded && r.room_id == s.room_id && r.relevance == Relevance::Strong && r.object_id != s.object_id)
            strong_in_room = true;
    json levels = json::array();
    for (auto l : memory_.ladder().levels()) levels.push_back(to_string(l));
    json ctx{{"goal", goal.text},
             {"goal_location_id", goal.location_id},
             {"ladder", memory_.ladder().size},
             {"levels", levels},
             {"object",
              {{"object_id", s.object_id},
               {"object_name", s.object_name},
               {"kind", to_string(s.kind)},
               {"room", s.room_name},
               {"container_state", to_string(s.container_state)},
               {"available_action", memory_.derive_action(s)}}},
             {"goal_target", goal.is_target_name(s.object_name)},
             {"remaining", memory_.remaining(s.object_name, {})},
             {"goal_open", goal_open},
             {"strong_in_room", strong_in_room}};
    auto request = make_request(RequestKind::Relevance, std::move(ctx), !config_.planning.no_cot);
    log_requests({request}, out);
    try {
        auto reply = reasoner_->answer(request);
        return parse_relevance(reply.parsed.at("choice").get<std::string>()).value();
    } catch (const ParseFailure& e) {
        out.events.push_back(event("relevance_fallback", 0, {{"object_id", s.object_id}, {"reason", e.what()}}));
        return parse_relevance(oracle_relevance(request.context)).value();
    }
}

void RevecaAgent::store_snapshot(const ObjectSnapshot& s, int step, Decision& out) {
    if (s.object_id == memory_.goal().location_id) {
        memory_.set_goal_location(s);
        return;
    }
    if (s.container_id && *s.container_id == memory_.goal().location_id) memory_.mark_placed(s.object_id, s.object_name);
    std::optional<Relevance> rel;
    if (memory_.needs_relevance(s)) rel = estimate_relevance(s, out);
    memory_.upsert_observation(s, rel, step);
}

void RevecaAgent::refresh_stale(int step, Decision& out) {
    for (const auto& r : memory_.records()) {
        if (r.discarded) continue;
        auto s = snapshot_of(r);
        if (memory_.derive_action(s) == r.available_action) continue;
        const int keep_step = r.acquired_step;
        auto rel = estimate_relevance(s, out);
        memory_.upsert_observation(s, rel, keep_step);
    }
    (void)step;
}

void RevecaAgent::handle_message(const Message& m, int step, Decision& out) {
    if (auto w = memory_.update_collaborator_from_message(m.sender_id, m, step))
        out.events.push_back(event("parse_warning", step, {{"from", m.sender_id}, {"reason", w->reason}}));
    auto u = parse_inbound(m, memory_.map());
    for (const auto& w : u.warnings)
        out.events.push_back(event("parse_warning", step, {{"from", m.sender_id}, {"reason", w}}));

    switch (m.kind) {
        case MessageKind::InitBroadcast:
            for (const auto& s : u.objects) {
                if (memory_.known_placed(s.object_id)) continue;
                if (const auto* rec = memory_.live_record_for(s.object_id); rec && rec->acquired_step >= m.step_sent) continue;
                store_snapshot(s, step, out);
            }
            break;
        case MessageKind::ValidationQuery:
            answers_.push_back({m.sender_id, u.query_object, u.query_name});
            break;
        case MessageKind::ValidationResponse:
            if (session_ && u.answer && session_->awaiting() == m.sender_id) {
                query_to_ = session_->on_answer(m.sender_id, *u.answer, step);
                for (auto& e : session_->take_events()) out.validation.push_back(std::move(e));
            }
            break;
        case MessageKind::SubGoalAnnouncement:
            for (const auto& [id, name] : u.placed) {
                memory_.mark_placed(id, name);
                memory_.discard_object(id);
            }
            break;
    }
}

void RevecaAgent::ingest_observation(const TurnInput& in, Decision& out) {
    const auto& obs = in.observation;
    const int step = in.step;
    if (obs.room_id >= 0) memory_.visit_room(obs.room_id, step);
    for (const auto& c : obs.visible_collaborators) {
        memory_.observe_collaborator(c, step);
        for (ObjectId id : c.held_object_ids) memory_.discard_object(id);
    }
    for (const auto& s : obs.visible_objects) store_snapshot(s, step, out);

    // Records of this room that should be visible but are not: the object moved.
    std::vector<ObjectId> gone;
    for (const auto& r : memory_.records()) {
        if (r.discarded || r.room_id != obs.room_id || obs.find(r.object_id)) continue;
        if (r.container_id) {
            const auto* box = obs.find(*r.container_id);
            if (box && box->container_state == ContainerState::Closed) continue;
        }
        gone.push_back(r.object_id);
    }
    for (ObjectId id : gone) memory_.discard_object(id);
    refresh_stale(step, out);
}

Message RevecaAgent::outgoing(MessageKind kind, json payload, std::optional<AgentId> to, Decision& out) {
    RenderOptions opts;
    opts.sender = name_;
    opts.refine = config_.refine_messages;
    opts.cot_enabled = !config_.planning.no_cot;
    if (to) {
        for (const auto& t : teammates_)
            if (t.id == *to) opts.recipient = t.name;
    } else if (teammates_.size() == 1) {
        opts.recipient = teammates_.front().name;
    }
    std::vector<ReasonerRequest> issued;
    Message m = render_message(kind, std::move(payload), reasoner_.get(), opts, &issued);
    log_requests(issued, out);
    m.recipient = to;
    return m;
}

json RevecaAgent::observation_payload(const TurnInput& in) const {
    const auto& obs = in.observation;
    const Room* room = memory_.map().find_room(obs.room_id);
    std::vector<std::pair<int, json>> ranked;
    for (const auto& s : obs.visible_objects) {
        json o{{"object_id", s.object_id},
               {"object_name", s.object_name},
               {"kind", to_string(s.kind)},
               {"room", s.room_name},
               {"position", to_json(s.position)},
               {"container_state", to_string(s.container_state)}};
        if (s.container_id) o["container_id"] = *s.container_id;
        int rank = 0;
        if (s.object_id == memory_.goal().location_id) rank = 10;
        else if (const auto* r = memory_.live_record_for(s.object_id)) rank = static_cast<int>(r->relevance);
        ranked.emplace_back(rank, std::move(o));
    }
    std::stable_sort(ranked.begin(), ranked.end(), [](const auto& a, const auto& b) { return a.first > b.first; });
    json objects = json::array();
    for (auto& [rank, o] : ranked) {
        if (rank == 0) continue;  // nothing worth a teammate's attention
        objects.push_back(std::move(o));
    }
    return fit_init_payload({{"sender_room", room ? room->room_name : "hallway"},
                             {"position", to_json(in.position)},
                             {"held_object_ids", in.held},
                             {"objects", objects}});
}

std::optional<Message> RevecaAgent::next_message(const TurnInput& in, Decision& out) {
    const int step = in.step;
    if (config_.communicate && !init_sent_) {
        init_sent_ = true;
        out.events.push_back(event("comm", step, {{"trigger", to_string(CommEvent::EpisodeStart)}}));
        return outgoing(*should_communicate(CommEvent::EpisodeStart), observation_payload(in), std::nullopt, out);
    }
    if (config_.communicate && !answers_.empty()) {
        auto q = answers_.front();
        answers_.pop_front();
        const auto answer = answer_validation_query(q.object_id, q.object_name, memory_.completed_plans());
        out.events.push_back(event("comm", step, {{"trigger", to_string(CommEvent::ValidationQueryReceived)}}));
        json payload{{"object_id", q.object_id ? json(*q.object_id) : json(nullptr)},
                     {"object_name", q.object_name},
                     {"answer", to_string(answer)}};
        return outgoing(*should_communicate(CommEvent::ValidationQueryReceived), std::move(payload), q.to, out);
    }
    if (announcement_) {
        json payload = std::move(*announcement_);
        announcement_.reset();
        if (config_.communicate) {
            out.events.push_back(event("comm", step, {{"trigger", to_string(CommEvent::SubGoalCompleted)}}));
            return outgoing(*should_communicate(CommEvent::SubGoalCompleted), std::move(payload), std::nullopt, out);
        }
    }
    if (config_.full_observation && config_.communicate) {
        json payload = observation_payload(in);
        const auto signature = payload["objects"].dump();
        if (signature != last_sync_) {
            last_sync_ = signature;
            payload["sync"] = true;
            out.events.push_back(event("full_observation_sync", step));
            return outgoing(MessageKind::InitBroadcast, std::move(payload), std::nullopt, out);
        }
    }
    return std::nullopt;
}

void RevecaAgent::begin_validation(const Plan& plan, const TurnInput& in, Decision& out) {
    std::vector<TrajectoryHypothesis> hyps;
    std::vector<ReasonerRequest> issued;
    for (const auto& t : teammates_) {
        const auto* rec = memory_.find_collaborator(t.id);
        if (!rec) continue;
        if (config_.always_ask) {
            TrajectoryHypothesis h;
            h.collaborator_id = t.id;
            h.collaborator_name = t.name;
            h.alpha = h.beta = plan.created_step;
            h.inferred_rooms = {{h.alpha, h.beta, -1}};
            h.interaction_likelihood = Likelihood::Low;
            h.rationale_text = "always ask";
            hyps.push_back(std::move(h));
            continue;
        }
        auto h = infer_trajectory(plan, *rec, memory_, *reasoner_, !config_.planning.no_cot, &issued);
        if (h.inference_failed)
            out.events.push_back(event("inference_failed", in.step, {{"collaborator", t.id}, {"reason", h.rationale_text}}));
        hyps.push_back(std::move(h));
    }
    log_requests(issued, out);
    session_.emplace(plan, std::move(hyps));
    query_to_ = session_->begin(in.step);
    for (auto& e : session_->take_events()) out.validation.push_back(std::move(e));
}

void RevecaAgent::settle_validation(const TurnInput& in, Decision& out) {
    if (!session_ || !session_->finished()) return;
    const auto outcome = *session_->outcome();
    const Plan plan = session_->plan();
    out.session_queries.push_back(session_->queries_sent());
    session_.reset();
    query_to_.reset();
    if (outcome == ValidationOutcome::FalsePlan) {
        const int n = memory_.discard_plan_provenance(plan.provenance);
        if (plan.skill == Skill::GoExplore) memory_.visit_room(plan.target_room, in.step);
        out.events.push_back(event("false_plan", in.step, {{"plan", plan.describe()}, {"discarded", n}}));
        return;
    }
    exec_ = start_skill(plan, memory_.map(), in.position);
}

void RevecaAgent::make_plan(const TurnInput& in, Decision& out) {
    const int step = in.step;
    Plan p;
    const bool validate_ok = config_.communicate && !teammates_.empty();
    if (script_ && !script_->empty()) {
        p = script_->front();
        script_->erase(script_->begin());
        p.created_step = step;
        if (script_then_plan_ && p.skill == Skill::GoGrab) {
            const auto* rec = memory_.live_record_for(p.target_object);
            if (!rec) {
                out.events.push_back(event("script_skip", step, {{"label", p.describe()}}));
                return;
            }
            if (p.provenance.empty()) p.provenance = {rec->record_id};
        }
        out.events.push_back(event("plan", step, {{"plan", p.to_json()}, {"label", p.describe()}, {"scripted", true}}));
        if (script_then_plan_ && validate_ok &&
            (config_.always_ask || (!config_.no_validation && p.skill == Skill::GoGrab))) {
            begin_validation(p, in, out);
            settle_validation(in, out);
            return;
        }
        exec_ = start_skill(p, memory_.map(), in.position);
        return;
    }
    if (script_ && !script_then_plan_) return;

    SelfState self{in.position, in.observation.room_id, held_named(in.held)};
    const auto prox = compute_proximities(memory_, in.position, config_.planning);
    // Without relevance every record ties at Strong, so the greedy search only looks at
    // records it can act on; otherwise nearby surfaces would crowd out every item.
    std::vector<ObservationRecord> actionable;
    if (config_.planning.no_relevance)
        for (const auto& r : memory_.records())
            if (!r.discarded && r.available_action != kActionNone) actionable.push_back(r);
    const auto top = retrieve_top_k(config_.planning.no_relevance ? actionable : memory_.records(), prox, config_.top_k);
    PlanningAudit audit;
    audit.step = step;
    audit.agent = id_;
    audit.k = config_.top_k;
    audit.live_non_none = memory_.live_non_none_count();
    for (const auto* r : top) audit.top_k.emplace_back(r->object_id, r->relevance);
    out.audits.push_back(std::move(audit));

    const auto ctx = build_plan_context(memory_, top, prox, self, config_.planning, step);
    auto outcome = plan(ctx, *reasoner_, step);
    log_requests(outcome.requests, out);
    p = outcome.plan;
    json top_ids = json::array();
    for (int id : ctx.top_k) top_ids.push_back(id);
    out.events.push_back(event("plan", step,
                               {{"plan", p.to_json()}, {"label", p.describe()}, {"top_k", top_ids}, {"notes", outcome.notes}}));

    const bool validate = validate_ok && (config_.always_ask || (!config_.no_validation && p.skill == Skill::GoGrab));
    if (validate) {
        begin_validation(p, in, out);
        settle_validation(in, out);
        return;
    }
    exec_ = start_skill(p, memory_.map(), in.position);
}

void RevecaAgent::finish_skill(const TurnInput& in, Decision& out) {
    const int step = in.step;
    SkillExecution done = std::move(*exec_);
    exec_.reset();
    const Plan& p = done.plan;
    out.events.push_back(event("skill_end", step,
                               {{"plan", p.describe()}, {"phase", to_string(done.phase)}, {"reason", to_string(done.reason)}}));
    if (done.phase == SkillPhase::Failed) {
        if (done.reason == FailReason::TargetMissing) {
            memory_.discard_plan_provenance(p.provenance);
            memory_.discard_object(p.target_object);
        }
        return;
    }
    switch (p.skill) {
        case Skill::GoGrab:
            memory_.add_completed_plan(grab_plan_string(p.target_name, p.target_object));
            memory_.note_interaction(p.target_object);
            memory_.discard_object(p.target_object);
            held_names_[p.target_object] = p.target_name;
            break;
        case Skill::GoPut: {
            json items = json::array();
            json plans = json::array();
            for (const auto& [id, name] : carrying_at_put_) {
                if (std::find(in.held.begin(), in.held.end(), id) != in.held.end()) continue;
                memory_.mark_placed(id, name);
                items.push_back({{"object_id", id}, {"object_name", name}});
                plans.push_back(grab_plan_string(name, id));
            }
            const auto put = put_plan_string(p.target_name, p.target_object);
            memory_.add_completed_plan(put);
            plans.push_back(put);
            carrying_at_put_.clear();
            if (!items.empty()) {
                const Room* room = memory_.map().find_room(in.observation.room_id);
                announcement_ = json{{"items", items},
                                     {"location_id", p.target_object},
                                     {"location_name", p.target_name},
                                     {"completed_plans", plans},
                                     {"sender_room", room ? room->room_name : "hallway"}};
            }
            refresh_stale(step, out);
            break;
        }
        default: break;
    }
}

ActionRequest RevecaAgent::choose_action(const TurnInput& in, Decision& out) {
    // A grab that already landed is booked before any message goes out, so answers sent this
    // turn already know about it.
    if (exec_ && !exec_->finished() && exec_->plan.skill == Skill::GoGrab &&
        std::find(in.held.begin(), in.held.end(), exec_->plan.target_object) != in.held.end()) {
        exec_->phase = SkillPhase::Done;
        finish_skill(in, out);
    }
    if (auto m = next_message(in, out)) return ActionRequest::send(std::move(*m));

    if (session_) {
        if (!session_->finished() && !query_to_) {
            query_to_ = session_->on_tick(in.step);
            for (auto& e : session_->take_events()) out.validation.push_back(std::move(e));
        }
        settle_validation(in, out);
    }
    for (int attempt = 0; attempt < 4; ++attempt) {
        if (session_ && query_to_) {
            const Plan& p = session_->plan();
            json payload{{"object_id", p.skill == Skill::GoExplore ? json(nullptr) : json(p.target_object)},
                         {"object_name", p.target_name},
                         {"plan", p.describe()}};
            const auto to = *query_to_;
            query_to_.reset();
            out.events.push_back(event("comm", in.step, {{"trigger", to_string(CommEvent::ValidationNeeded)}}));
            return ActionRequest::send(outgoing(*should_communicate(CommEvent::ValidationNeeded), std::move(payload), to, out));
        }
        if (session_) return ActionRequest::noop();  // frozen while waiting for a reply

        if (!exec_) {
            make_plan(in, out);
            if (session_) continue;
            if (!exec_) return ActionRequest::noop();
            if (exec_->plan.skill == Skill::GoPut) carrying_at_put_ = held_named(in.held);
        }
        AgentView view{in.position, in.held, &in.observation};
        if (auto action = tick_skill(*exec_, view, memory_.map())) return *action;
        finish_skill(in, out);
        if (auto m = next_message(in, out)) return ActionRequest::send(std::move(*m));
    }
    return ActionRequest::noop();
}

Decision RevecaAgent::decide(const TurnInput& in) {
    Decision out;
    for (const auto& m : in.inbox) handle_message(m, in.step, out);
    ingest_observation(in, out);
    out.action = choose_action(in, out);
    if (config_.dump_memory) out.memory_dump = memory_.dump();
    return out;
}

}  // namespace reveca
