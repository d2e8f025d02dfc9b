#include "reveca/planning.hpp"

#include <algorithm>
#include <cmath>

#include "reveca/errors.hpp"
#include "reveca/serialize.hpp"

namespace reveca {

std::string_view to_string(Proximity p) {
    switch (p) {
        case Proximity::FartherThanSome: return "FartherThanSome";
        case Proximity::Unknown: return "Unknown";
        case Proximity::Similar: return "Similar";
        case Proximity::CloserThanAll: return "CloserThanAll";
    }
    return "Unknown";
}

namespace {

std::string join_names(const std::vector<std::string>& names) {
    std::string out;
    for (std::size_t i = 0; i < names.size(); ++i) {
        if (i > 0) out += i + 1 == names.size() ? " and " : ", ";
        out += names[i];
    }
    return out;
}

}  // namespace

ProximityBucket relative_proximity(GridPos self, GridPos object,
                                   const std::vector<CollaboratorPosition>& collaborators) {
    const double d_self = euclidean(self, object);
    std::vector<std::pair<double, std::string>> known;
    for (const auto& c : collaborators)
        if (c.position) known.emplace_back(euclidean(*c.position, object), c.name);
    if (known.empty()) return {Proximity::Unknown, "I don't know where the others are"};

    std::vector<std::string> names;
    for (const auto& k : known) names.push_back(k.second);
    if (std::all_of(known.begin(), known.end(),
                    [&](const auto& k) { return d_self < k.first - kProximityEpsilon; }))
        return {Proximity::CloserThanAll, "I'm closer than " + join_names(names)};

    auto nearest = std::min_element(known.begin(), known.end(),
                                    [](const auto& a, const auto& b) { return a.first < b.first; });
    if (std::abs(d_self - nearest->first) <= kProximityEpsilon)
        return {Proximity::Similar, "I'm about as close as " + nearest->second};

    std::vector<std::string> closer;
    for (const auto& k : known)
        if (k.first < d_self - kProximityEpsilon) closer.push_back(k.second);
    return {Proximity::FartherThanSome, "I'm farther than " + join_names(closer)};
}

bool retrieval_before(const ObservationRecord& a, Proximity pa, const ObservationRecord& b, Proximity pb) {
    if (a.relevance != b.relevance) return a.relevance > b.relevance;
    if (pa != pb) return pa > pb;
    if (a.acquired_step != b.acquired_step) return a.acquired_step > b.acquired_step;
    return a.object_id < b.object_id;
}

std::vector<const ObservationRecord*> retrieve_top_k(const std::vector<ObservationRecord>& records,
                                                     const std::map<int, ProximityBucket>& proximities,
                                                     int k) {
    auto bucket = [&](const ObservationRecord& r) {
        auto it = proximities.find(r.record_id);
        return it == proximities.end() ? Proximity::Unknown : it->second.value;
    };
    std::vector<const ObservationRecord*> live;
    for (const auto& r : records)
        if (!r.discarded) live.push_back(&r);
    std::sort(live.begin(), live.end(), [&](const auto* a, const auto* b) {
        return retrieval_before(*a, bucket(*a), *b, bucket(*b));
    });
    if (k != kTopKAll && static_cast<int>(live.size()) > k) live.resize(static_cast<std::size_t>(k));
    return live;
}

std::string_view to_string(Skill s) {
    switch (s) {
        case Skill::GoExplore: return "goexplore";
        case Skill::GoCheck: return "gocheck";
        case Skill::GoGrab: return "gograb";
        case Skill::GoPut: return "goput";
    }
    return "goexplore";
}

std::optional<Skill> parse_skill(std::string_view s) {
    for (auto k : {Skill::GoExplore, Skill::GoCheck, Skill::GoGrab, Skill::GoPut})
        if (to_string(k) == s) return k;
    return std::nullopt;
}

std::string Plan::describe() const {
    std::string out = "[" + std::string(to_string(skill)) + "] <" + target_name + "> (";
    out += std::to_string(skill == Skill::GoExplore ? target_room : target_object) + ")";
    return out;
}

nlohmann::json Plan::to_json() const {
    nlohmann::json j{{"skill", to_string(skill)},
                     {"target_object", target_object},
                     {"target_name", target_name},
                     {"target_room", target_room},
                     {"target_position", reveca::to_json(target_position)},
                     {"provenance", provenance},
                     {"created_step", created_step},
                     {"fallback", fallback}};
    if (target_container) j["target_container"] = *target_container;
    return j;
}

std::vector<CollaboratorPosition> collaborator_positions(const AgentMemory& memory) {
    std::vector<CollaboratorPosition> out;
    for (const auto& [id, c] : memory.collaborators()) {
        CollaboratorPosition p;
        p.name = c.name.empty() ? "agent " + std::to_string(id) : c.name;
        if (c.position_estimate) p.position = c.position_estimate->position;
        out.push_back(std::move(p));
    }
    return out;
}

std::map<int, ProximityBucket> compute_proximities(const AgentMemory& memory, GridPos self,
                                                   const PlanningFlags& flags) {
    std::map<int, ProximityBucket> out;
    const bool blind = flags.no_proximity || flags.no_other_info;
    const auto others = collaborator_positions(memory);
    for (const auto& r : memory.records()) {
        if (r.discarded) continue;
        out[r.record_id] = blind ? ProximityBucket{Proximity::Unknown, ""}
                                 : relative_proximity(self, r.position, others);
    }
    return out;
}

namespace {

std::string letter_for(std::size_t i) {
    // Bijective base 26: A..Z, AA, AB, ...
    std::string s;
    for (std::size_t n = i + 1; n > 0; n /= 26) {
        --n;
        s.insert(s.begin(), static_cast<char>('A' + n % 26));
    }
    return s;
}

}  // namespace

PlanContext build_plan_context(const AgentMemory& memory, const std::vector<const ObservationRecord*>& top_k,
                               const std::map<int, ProximityBucket>& proximities, const SelfState& self,
                               const PlanningFlags& flags, int step) {
    using nlohmann::json;
    PlanContext ctx;
    ctx.cot_enabled = !flags.no_cot;
    const Goal& goal = memory.goal();
    const auto& map = memory.map();

    json held = json::array();
    for (const auto& [id, name] : self.held) held.push_back({{"object_id", id}, {"object_name", name}});
    const Room* here = map.find_room(self.room);
    json self_json{{"name", memory.self_name()},
                   {"position", to_json(self.position)},
                   {"room", here ? here->room_name : "hallway"},
                   {"held", held},
                   {"completed_plans", memory.completed_plans()}};

    auto add_option = [&](Plan p) -> std::string {
        p.created_step = step;
        auto letter = letter_for(ctx.options.size());
        ctx.options.push_back({letter, std::move(p)});
        return letter;
    };

    json records = json::array();
    for (const auto* r : top_k) {
        ctx.top_k.push_back(r->record_id);
        json rj{{"record_id", r->record_id},
                {"object_id", r->object_id},
                {"object_name", r->object_name},
                {"room", r->room_name},
                {"relevance", to_string(r->relevance)},
                {"available_action", r->available_action},
                {"goal_target", goal.is_target_name(r->object_name)},
                {"remaining", memory.remaining(r->object_name, self.held)},
                {"acquired_step", r->acquired_step}};
        if (!flags.no_proximity) {
            auto it = proximities.find(r->record_id);
            const ProximityBucket b = it == proximities.end() ? ProximityBucket{} : it->second;
            rj["proximity"] = to_string(b.value);
            rj["proximity_text"] = b.rendered;
            rj["distance"] = euclidean(self.position, r->position);
        }
        if (r->available_action == kActionGrab || r->available_action == kActionCheck) {
            Plan p;
            p.skill = r->available_action == kActionGrab ? Skill::GoGrab : Skill::GoCheck;
            p.target_object = r->object_id;
            p.target_name = r->object_name;
            p.target_room = r->room_id;
            p.target_position = r->position;
            p.target_container = r->container_id;
            p.provenance = {r->record_id};
            rj["option"] = add_option(std::move(p));
        }
        records.push_back(std::move(rj));
    }

    const auto& loc = memory.goal_location();
    if (!self.held.empty() && loc) {
        Plan p;
        p.skill = Skill::GoPut;
        p.target_object = loc->object_id;
        p.target_name = loc->object_name;
        p.target_room = loc->room_id;
        p.target_position = loc->position;
        add_option(std::move(p));
    }

    const auto others = collaborator_positions(memory);
    json rooms = json::array();
    for (const auto& room : map.rooms) {
        if (room.room_id == self.room) continue;
        Plan p;
        p.skill = Skill::GoExplore;
        p.target_room = room.room_id;
        p.target_name = room.room_name;
        p.target_position = room.center;
        const auto last = memory.last_visit(room.room_id);
        json rj{{"room_id", room.room_id},
                {"room_name", room.room_name},
                {"explored", last.has_value()},
                {"last_visit", last ? json(*last) : json(nullptr)},
                {"distance", euclidean(self.position, room.center)}};
        if (!flags.no_proximity) {
            const auto b = flags.no_other_info ? ProximityBucket{Proximity::Unknown, ""}
                                               : relative_proximity(self.position, room.center, others);
            rj["proximity"] = to_string(b.value);
            rj["proximity_text"] = b.rendered;
        }
        rj["option"] = add_option(std::move(p));
        rooms.push_back(std::move(rj));
    }

    json options = json::array();
    for (const auto& o : ctx.options)
        options.push_back({{"letter", o.letter}, {"skill", to_string(o.plan.skill)}, {"label", o.plan.describe()}});

    ctx.structured = {{"goal", goal.text},
                      {"self", self_json},
                      {"records", records},
                      {"rooms", rooms},
                      {"options", options},
                      {"goal_location_known", loc.has_value()},
                      {"hand_capacity", kHandCapacity},
                      {"flags",
                       {{"no_proximity", flags.no_proximity},
                        {"no_other_info", flags.no_other_info},
                        {"no_relevance", flags.no_relevance}}}};
    if (!flags.no_other_info) {
        json collaborators = json::array();
        for (const auto& [id, c] : memory.collaborators()) {
            json cj{{"agent_id", id},
                    {"name", c.name},
                    {"held_object_ids", c.held_object_ids},
                    {"completed_plans", c.completed_plans}};
            if (c.position_estimate) {
                const Room* r = map.find_room(c.position_estimate->room_id);
                cj["position"] = to_json(c.position_estimate->position);
                cj["room"] = r ? r->room_name : "unknown";
                cj["seen_step"] = c.position_estimate->step;
            }
            collaborators.push_back(std::move(cj));
        }
        ctx.structured["collaborators"] = collaborators;
    }
    return ctx;
}

namespace {

const PlanOption* find_option(const PlanContext& ctx, const std::string& letter) {
    for (const auto& o : ctx.options)
        if (o.letter == letter) return &o;
    return nullptr;
}

}  // namespace

PlanOutcome plan(const PlanContext& context, Reasoner& reasoner, int step) {
    PlanOutcome out;
    if (context.options.empty()) {
        // Single-room layouts with nothing known: stay put by exploring where we are.
        out.plan.skill = Skill::GoExplore;
        out.plan.created_step = step;
        out.plan.fallback = true;
        out.notes.push_back("fallback: no options");
        return out;
    }
    nlohmann::json ctx_json = context.structured;
    for (int attempt = 0; attempt < 2; ++attempt) {
        auto request = make_request(RequestKind::Plan, ctx_json, context.cot_enabled);
        out.requests.push_back(request);
        std::string answered;
        try {
            auto reply = reasoner.answer(request);
            answered = reply.parsed.value("choice", "");
            if (const auto* opt = find_option(context, answered)) {
                out.plan = opt->plan;
                out.plan.rationale_text = reply.raw_text;
                out.plan.created_step = step;
                return out;
            }
            out.notes.push_back("out-of-context answer: " + answered);
        } catch (const ParseFailure& e) {
            answered = "unparseable";
            out.notes.push_back(std::string("parse failure: ") + e.what());
        }
        ctx_json["repair_of"] = answered;
    }
    const auto letter = oracle_plan_choice(context.structured);
    const auto* opt = find_option(context, letter);
    out.plan = opt ? opt->plan : context.options.front().plan;
    out.plan.created_step = step;
    out.plan.fallback = true;
    out.plan.rationale_text = "rule-based fallback";
    out.notes.push_back("fallback: " + letter);
    return out;
}

}  // namespace reveca
