#include "reveca/reasoner.hpp"

#include <algorithm>
#include <regex>

#include "reveca/errors.hpp"
#include "reveca/memory.hpp"

namespace reveca {

using nlohmann::json;

std::string_view to_string(RequestKind k) {
    switch (k) {
        case RequestKind::Relevance: return "relevance";
        case RequestKind::Plan: return "plan";
        case RequestKind::Trajectory: return "trajectory";
        case RequestKind::Refine: return "refine";
    }
    return "relevance";
}

std::optional<RequestKind> parse_request_kind(std::string_view s) {
    for (auto k : {RequestKind::Relevance, RequestKind::Plan, RequestKind::Trajectory, RequestKind::Refine})
        if (to_string(k) == s) return k;
    return std::nullopt;
}

ReasonerRequest make_request(RequestKind kind, json context, bool cot_enabled) {
    ReasonerRequest r;
    r.kind = kind;
    r.cot_enabled = cot_enabled;
    r.rendered_prompt = render_prompt(kind, context, cot_enabled);
    r.context = std::move(context);
    return r;
}

namespace {

std::optional<std::string> last_answer_token(const std::string& text) {
    static const std::regex re(R"(Answer:\s*\[([^\]\n]+)\])");
    std::optional<std::string> token;
    for (auto it = std::sregex_iterator(text.begin(), text.end(), re); it != std::sregex_iterator(); ++it)
        token = (*it)[1].str();
    return token;
}

std::string trim(std::string s) {
    const auto first = s.find_first_not_of(" \t\r\n");
    if (first == std::string::npos) return {};
    const auto last = s.find_last_not_of(" \t\r\n");
    return s.substr(first, last - first + 1);
}

}  // namespace

json parse_reply(const ReasonerRequest& request, const std::string& raw) {
    if (request.kind == RequestKind::Refine) {
        const auto pos = raw.rfind("Message:");
        if (pos == std::string::npos) throw ParseFailure("refine reply has no 'Message:' line", raw);
        auto line = raw.substr(pos + 8);
        if (auto nl = line.find('\n'); nl != std::string::npos) line.resize(nl);
        line = trim(line);
        if (line.empty()) throw ParseFailure("refine reply is empty", raw);
        return {{"text", line}};
    }
    auto token = last_answer_token(raw);
    if (!token) throw ParseFailure("reply has no 'Answer: [X]' line", raw);
    const std::string t = trim(*token);
    switch (request.kind) {
        case RequestKind::Relevance: {
            auto r = parse_relevance(t);
            const auto ladder = RelevanceLadder{request.context.value("ladder", 4)};
            if (!r || !ladder.contains(*r)) throw ParseFailure("relevance '" + t + "' is not on the ladder", raw);
            break;
        }
        case RequestKind::Plan:
            if (t.empty() || !std::all_of(t.begin(), t.end(), [](char c) { return c >= 'A' && c <= 'Z'; }))
                throw ParseFailure("plan answer '" + t + "' is not an option letter", raw);
            break;
        case RequestKind::Trajectory:
            if (t != "High" && t != "Medium" && t != "Low" && t != "None")
                throw ParseFailure("likelihood '" + t + "' is not a level", raw);
            break;
        case RequestKind::Refine: break;
    }
    return {{"choice", t}};
}

std::string oracle_relevance(const json& ctx) {
    const auto& obj = ctx.at("object");
    const int ladder_size = ctx.value("ladder", 4);
    const RelevanceLadder ladder{ladder_size};
    const auto kind = obj.value("kind", "item");
    Relevance r = Relevance::None;
    if (obj.value("object_id", -1) == ctx.value("goal_location_id", -2)) {
        r = Relevance::Strong;
    } else if (ctx.value("goal_target", false)) {
        const bool placed = obj.value("available_action", "") == kActionNone;
        r = (placed || ctx.value("remaining", 0) <= 0) ? Relevance::None : Relevance::Strong;
    } else if (kind == "container" && obj.value("container_state", "") == "closed") {
        if (ctx.value("goal_open", false))
            r = (ladder_size == 5 && ctx.value("strong_in_room", false)) ? Relevance::High : Relevance::Medium;
        else
            r = Relevance::Low;
    } else if (kind == "item" || kind == "container") {
        r = Relevance::Low;
    }
    return std::string(to_string(ladder.project(r)));
}

namespace {

int proximity_rank(const json& j) {
    const auto p = j.value("proximity", "Unknown");
    if (p == "CloserThanAll") return 3;
    if (p == "Similar") return 2;
    if (p == "Unknown") return 1;
    return 0;
}

std::optional<std::string> option_with_skill(const json& ctx, std::string_view skill) {
    for (const auto& o : ctx.at("options"))
        if (o.at("skill").get<std::string>() == skill) return o.at("letter").get<std::string>();
    return std::nullopt;
}

}  // namespace

std::string oracle_plan_choice(const json& ctx) {
    const int held = static_cast<int>(ctx.at("self").at("held").size());
    const int capacity = ctx.value("hand_capacity", 2);
    const auto put = option_with_skill(ctx, "goput");
    if (held >= capacity && put) return *put;

    for (const auto& r : ctx.at("records")) {
        if (!r.contains("option")) continue;
        const auto rel = parse_relevance(r.value("relevance", "None")).value_or(Relevance::None);
        if (rel <= Relevance::Low) continue;
        const auto action = r.value("available_action", "");
        if (action == kActionGrab) {
            if (held >= capacity) continue;
            if (r.value("goal_target", false) && r.value("remaining", 0) <= 0) continue;
        }
        return r.at("option").get<std::string>();
    }
    if (held > 0 && put) return *put;

    const auto& rooms = ctx.at("rooms");
    if (rooms.empty()) return ctx.at("options").front().at("letter").get<std::string>();
    const bool by_list = ctx.at("flags").value("no_proximity", false);
    std::vector<const json*> order;
    for (const auto& r : rooms) order.push_back(&r);
    std::stable_sort(order.begin(), order.end(), [&](const json* a, const json* b) {
        const bool ea = a->value("explored", false), eb = b->value("explored", false);
        if (ea != eb) return !ea;
        if (ea) {
            const int la = a->at("last_visit").get<int>(), lb = b->at("last_visit").get<int>();
            if (la != lb) return la < lb;
        }
        if (by_list) return false;
        if (!ea && proximity_rank(*a) != proximity_rank(*b)) return proximity_rank(*a) > proximity_rank(*b);
        const double da = a->value("distance", 0.0), db = b->value("distance", 0.0);
        if (da != db) return da < db;
        return a->value("room_id", 0) < b->value("room_id", 0);
    });
    return order.front()->at("option").get<std::string>();
}

std::string oracle_likelihood(const json& ctx) {
    const auto& ev = ctx.at("evidence");
    auto any = [&](const char* flag) {
        return std::any_of(ev.begin(), ev.end(), [&](const json& e) { return e.value(flag, false) && e.value("reachable", false); });
    };
    if (any("in_target_room")) return ctx.at("plan").value("target_strong", false) ? "High" : "Medium";
    if (any("adjacent_room")) return "Medium";
    if (std::any_of(ev.begin(), ev.end(), [](const json& e) { return e.value("reachable", false); })) return "Low";
    return "None";
}

std::string OracleReasoner::reply_text(const ReasonerRequest& request) {
    const auto& ctx = request.context;
    switch (request.kind) {
        case RequestKind::Relevance: {
            const auto level = oracle_relevance(ctx);
            std::string why = request.cot_enabled ? "Judging the object against the goal. " : "";
            return why + "Answer: [" + level + "]";
        }
        case RequestKind::Plan: {
            const auto letter = oracle_plan_choice(ctx);
            std::string label;
            for (const auto& o : ctx.at("options"))
                if (o.at("letter").get<std::string>() == letter) label = o.at("label").get<std::string>();
            std::string why = request.cot_enabled ? "Best next step is " + label + ". " : "";
            return why + "Answer: [" + letter + "]";
        }
        case RequestKind::Trajectory: {
            const auto level = oracle_likelihood(ctx);
            std::string why;
            if (request.cot_enabled) {
                why = std::to_string(ctx.at("evidence").size()) + " position fixes between steps " +
                      std::to_string(ctx.value("alpha", 0)) + " and " + std::to_string(ctx.value("beta", 0)) + ". ";
            }
            return why + "Answer: [" + level + "]";
        }
        case RequestKind::Refine: return "Message: " + ctx.value("draft", "");
    }
    return {};
}

ReasonerReply OracleReasoner::answer(const ReasonerRequest& request) {
    ReasonerReply reply;
    reply.kind = request.kind;
    reply.raw_text = reply_text(request);
    reply.parsed = parse_reply(request, reply.raw_text);
    return reply;
}

}  // namespace reveca
