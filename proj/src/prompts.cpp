// Prompt templates for the remote backend. Every template is a pure function of its context so
// that fixture hashes stay stable across runs.
#include <sstream>

#include "reveca/reasoner.hpp"

namespace reveca {

using nlohmann::json;

namespace {

std::string s(const json& j, const char* key, std::string fallback = "") {
    return j.contains(key) && j[key].is_string() ? j[key].get<std::string>() : fallback;
}

std::string pos(const json& p) {
    if (!p.is_array() || p.size() != 2) return "(?)";
    return "(" + std::to_string(p[0].get<int>()) + ", " + std::to_string(p[1].get<int>()) + ")";
}

std::string fmt_distance(double d) {
    std::ostringstream out;
    out.precision(1);
    out << std::fixed << d << " m";
    return out.str();
}

void finish(std::ostringstream& out, bool cot, std::string_view grammar) {
    out << "\n" << grammar << "\n";
    if (cot) out << kCotInstruction << "\n";
}

std::string relevance_prompt(const json& c, bool cot) {
    std::ostringstream out;
    const auto& o = c.at("object");
    out << "You are helping a team of household agents decide how useful an object is.\n";
    out << "Goal: " << s(c, "goal") << "\n";
    out << "Observed object: <" << s(o, "object_name") << "> (" << o.value("object_id", -1) << ") in the "
        << s(o, "room") << ", kind " << s(o, "kind") << ", container state " << s(o, "container_state", "n/a")
        << ", available action " << s(o, "available_action") << ".\n";
    if (c.contains("remaining")) out << "Still needed of this name: " << c["remaining"].get<int>() << ".\n";
    out << "Relevance levels, lowest to highest:";
    for (const auto& l : c.at("levels")) out << " " << l.get<std::string>();
    out << ".\n";
    finish(out, cot, "Rate the relevance of the object to the goal. End with a line \"Answer: [LEVEL]\".");
    return out.str();
}

std::string plan_prompt(const json& c, bool cot) {
    std::ostringstream out;
    const auto& self = c.at("self");
    out << "You are " << s(self, "name") << ", cooperating with other agents on a household task.\n";
    out << "Goal: " << s(c, "goal") << "\n";
    out << "Current state: I'm at " << pos(self.at("position")) << " in the " << s(self, "room") << ". ";
    const auto& held = self.at("held");
    if (held.empty()) {
        out << "I'm holding nothing.";
    } else {
        out << "I'm holding";
        for (const auto& h : held) out << " <" << s(h, "object_name") << "> (" << h.value("object_id", -1) << ")";
        out << ".";
    }
    out << " Completed plans:";
    if (self.at("completed_plans").empty()) out << " none";
    for (const auto& p : self.at("completed_plans")) out << " " << p.get<std::string>();
    out << ".\n";

    const auto& records = c.at("records");
    if (records.empty()) {
        out << "No useful objects are known yet; choose a room to explore.\n";
    } else {
        out << "Known objects:\n";
        for (const auto& r : records) {
            out << "- <" << s(r, "object_name") << "> (" << r.value("object_id", -1) << ") in the " << s(r, "room")
                << ", relevance " << s(r, "relevance") << ", action " << s(r, "available_action") << ".";
            if (r.contains("proximity_text")) out << " " << s(r, "proximity_text") << " (" << fmt_distance(r.value("distance", 0.0)) << ").";
            out << "\n";
        }
    }
    if (c.contains("collaborators")) {
        out << "Collaborators:\n";
        for (const auto& col : c["collaborators"]) {
            out << "- " << s(col, "name") << ": ";
            if (col.contains("position"))
                out << "last known at " << pos(col["position"]) << " in the " << s(col, "room") << " (step "
                    << col.value("seen_step", 0) << ")";
            else
                out << "position unknown";
            out << ", completed plans:";
            if (col.at("completed_plans").empty()) out << " none";
            for (const auto& p : col["completed_plans"]) out << " " << p.get<std::string>();
            out << ".\n";
        }
    }
    out << "Rooms:\n";
    for (const auto& r : c.at("rooms")) {
        out << "- " << s(r, "room_name") << (r.value("explored", false) ? " (explored)" : " (unexplored)");
        if (r.contains("proximity_text")) out << ", " << s(r, "proximity_text");
        out << "\n";
    }
    out << "Options:\n";
    for (const auto& o : c.at("options")) out << "[" << s(o, "letter") << "] " << s(o, "label") << "\n";
    if (c.contains("repair_of"))
        out << "Your previous answer \"" << s(c, "repair_of") << "\" was not one of the options. Pick a listed letter.\n";
    finish(out, cot, "Choose the best option. End with a line \"Answer: [LETTER]\".");
    return out.str();
}

std::string trajectory_prompt(const json& c, bool cot) {
    std::ostringstream out;
    const auto& plan = c.at("plan");
    const auto& col = c.at("collaborator");
    out << "Before executing " << s(plan, "label") << " in the " << s(plan, "target_room")
        << ", estimate whether " << s(col, "name") << " may already have handled the target.\n";
    out << "The information behind the plan was acquired at step " << c.value("alpha", 0)
        << " and the plan was made at step " << c.value("beta", 0) << ".\n";
    out << s(col, "name") << "'s completed plans:";
    if (c.at("completed_plans").empty()) out << " none";
    for (const auto& p : c.at("completed_plans")) out << " " << p.get<std::string>();
    out << ".\nKnown positions:\n";
    if (c.at("evidence").empty()) out << "- none\n";
    for (const auto& e : c.at("evidence")) {
        out << "- step " << e.value("step", 0) << ": " << s(e, "room") << " (" << s(e, "source") << ")";
        if (e.value("grid_distance", -1) >= 0) out << ", " << e["grid_distance"].get<int>() << " steps from the target";
        out << "\n";
    }
    out << "Inferred trajectory:";
    for (const auto& r : c.at("inferred_rooms"))
        out << " [" << r.value("from", 0) << "-" << r.value("to", 0) << "] " << s(r, "room") << ";";
    out << "\n";
    finish(out, cot, "Rate the likelihood of an interaction as High, Medium, Low or None. End with a line \"Answer: [LEVEL]\".");
    return out.str();
}

std::string refine_prompt(const json& c) {
    std::ostringstream out;
    out << "Rewrite this message from " << s(c, "sender") << " to " << s(c, "recipient")
        << " so it sounds natural. Keep the facts unchanged and stay under " << c.value("limit", 0)
        << " characters.\n";
    out << "Draft: " << s(c, "draft") << "\n";
    out << "Reply with a single line \"Message: TEXT\".\n";
    return out.str();
}

}  // namespace

std::string render_prompt(RequestKind kind, const json& context, bool cot_enabled) {
    switch (kind) {
        case RequestKind::Relevance: return relevance_prompt(context, cot_enabled);
        case RequestKind::Plan: return plan_prompt(context, cot_enabled);
        case RequestKind::Trajectory: return trajectory_prompt(context, cot_enabled);
        case RequestKind::Refine: return refine_prompt(context);
    }
    return {};
}

std::string format_reminder(RequestKind kind) {
    if (kind == RequestKind::Refine) return "Your reply must be a single line starting with \"Message:\".";
    return "Your reply did not follow the required format. Finish with exactly one line of the form "
           "\"Answer: [X]\" where X is one of the listed choices.";
}

}  // namespace reveca
