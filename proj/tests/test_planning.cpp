#include <gtest/gtest.h>

#include "reveca/errors.hpp"
#include "support.hpp"

using namespace reveca;
using testsupport::tiny_goal;
using testsupport::tiny_world;

namespace {

ObservationRecord rec(int record_id, ObjectId object_id, Relevance rel, int step) {
    ObservationRecord r;
    r.record_id = record_id;
    r.object_id = object_id;
    r.object_name = "o" + std::to_string(object_id);
    r.relevance = rel;
    r.acquired_step = step;
    return r;
}

std::vector<int> ids(const std::vector<const ObservationRecord*>& v) {
    std::vector<int> out;
    for (const auto* r : v) out.push_back(r->record_id);
    return out;
}

// Replies with a fixed text for every request.
struct ScriptedReasoner : Reasoner {
    std::vector<std::string> replies;
    std::size_t next = 0;
    ReasonerReply answer(const ReasonerRequest& request) override {
        ReasonerReply r;
        r.kind = request.kind;
        r.raw_text = replies.at(std::min(next++, replies.size() - 1));
        r.parsed = parse_reply(request, r.raw_text);
        return r;
    }
    std::string backend() const override { return "scripted"; }
};

struct Fixture {
    WorldState s = tiny_world();
    AgentMemory m{0, "Alice", tiny_goal(s), MapKnowledge::from_world(s), RelevanceLadder::make(4)};

    Fixture() {
        for (const auto& snap : observe(s, 0).visible_objects) {
            if (snap.object_id == 10) {
                m.set_goal_location(snap);
                continue;
            }
            m.upsert_observation(snap, snap.object_name == "apple" ? Relevance::Strong : Relevance::Low, 1);
        }
        m.visit_room(1, 1);
    }

    PlanContext context(std::vector<std::pair<ObjectId, std::string>> held = {}, PlanningFlags flags = {}) {
        SelfState self{s.agents[0].position, 1, std::move(held)};
        auto prox = compute_proximities(m, self.position, flags);
        auto top = retrieve_top_k(m.records(), prox, 3);
        return build_plan_context(m, top, prox, self, flags, 2);
    }
};

std::optional<Skill> skill_of(const PlanContext& c, const std::string& letter) {
    for (const auto& o : c.options)
        if (o.letter == letter) return o.plan.skill;
    return std::nullopt;
}

}  // namespace

TEST(Proximity, Buckets) {
    EXPECT_EQ(relative_proximity({0, 0}, {2, 0}, {}).value, Proximity::Unknown);
    EXPECT_EQ(relative_proximity({0, 0}, {2, 0}, {{"Bob", std::nullopt}}).value, Proximity::Unknown);
    EXPECT_EQ(relative_proximity({0, 0}, {2, 0}, {{"Bob", GridPos{-2, 0}}}).value, Proximity::CloserThanAll);
    EXPECT_EQ(relative_proximity({0, 0}, {2, 0}, {{"Bob", GridPos{4, 0}}}).value, Proximity::Similar);
    const auto far = relative_proximity({0, 0}, {4, 0}, {{"Bob", GridPos{4, 1}}, {"Carol", GridPos{-8, 0}}});
    EXPECT_EQ(far.value, Proximity::FartherThanSome);
    EXPECT_NE(far.rendered.find("Bob"), std::string::npos);
    EXPECT_EQ(far.rendered.find("Carol"), std::string::npos);
}

TEST(Proximity, EpsilonBoundary) {
    // Self 3.0 vs Bob 2.0: exactly epsilon apart counts as similar.
    EXPECT_EQ(relative_proximity({0, 0}, {3, 0}, {{"Bob", GridPos{5, 0}}}).value, Proximity::Similar);
    // Self 2.0 vs Bob 4.0: more than epsilon closer.
    EXPECT_EQ(relative_proximity({0, 0}, {2, 0}, {{"Bob", GridPos{6, 0}}}).value, Proximity::CloserThanAll);
}

TEST(Retrieval, OrderingKeys) {
    // Same relevance; B is closer than A, which is closer than C.
    std::vector<ObservationRecord> records = {rec(0, 5, Relevance::Strong, 1), rec(1, 6, Relevance::Strong, 1),
                                              rec(2, 7, Relevance::Strong, 1)};
    std::map<int, ProximityBucket> prox = {{0, {Proximity::Similar, ""}},
                                           {1, {Proximity::CloserThanAll, ""}},
                                           {2, {Proximity::FartherThanSome, ""}}};
    EXPECT_EQ(ids(retrieve_top_k(records, prox, 3)), (std::vector<int>{1, 0, 2}));
    EXPECT_EQ(ids(retrieve_top_k(records, prox, 2)), (std::vector<int>{1, 0}));
}

TEST(Retrieval, RelevanceThenStepThenId) {
    std::vector<ObservationRecord> records = {rec(0, 9, Relevance::Low, 5), rec(1, 8, Relevance::Medium, 1),
                                              rec(2, 3, Relevance::Low, 5), rec(3, 1, Relevance::Low, 2)};
    records.push_back(rec(4, 0, Relevance::Strong, 9));
    records.back().discarded = true;
    EXPECT_EQ(ids(retrieve_top_k(records, {}, kTopKAll)), (std::vector<int>{1, 2, 0, 3}));
    EXPECT_TRUE(retrieve_top_k({}, {}, 3).empty());
}

TEST(Planning, OptionsFollowTopK) {
    Fixture f;
    auto c = f.context();
    ASSERT_FALSE(c.top_k.empty());
    EXPECT_EQ(f.m.record(c.top_k.front())->object_name, "apple");
    // gograb apple + gograb cup + explore hall; no goput with empty hands.
    int grabs = 0, puts = 0, explores = 0;
    for (const auto& o : c.options) {
        grabs += o.plan.skill == Skill::GoGrab;
        puts += o.plan.skill == Skill::GoPut;
        explores += o.plan.skill == Skill::GoExplore;
    }
    EXPECT_EQ(grabs, 2);
    EXPECT_EQ(puts, 0);
    EXPECT_EQ(explores, 1);
    EXPECT_EQ(c.options.front().letter, "A");
}

TEST(Planning, OracleGrabsTheRelevantTarget) {
    Fixture f;
    auto c = f.context();
    OracleReasoner oracle;
    auto out = plan(c, oracle, 2);
    EXPECT_EQ(out.plan.skill, Skill::GoGrab);
    EXPECT_EQ(out.plan.target_object, 20);
    EXPECT_EQ(out.plan.provenance.size(), 1u);
    EXPECT_FALSE(out.plan.fallback);
    EXPECT_EQ(out.plan.describe(), "[gograb] <apple> (20)");
}

TEST(Planning, FullHandsGoPut) {
    Fixture f;
    auto c = f.context({{20, "apple"}, {22, "cup"}});
    EXPECT_EQ(skill_of(c, oracle_plan_choice(c.structured)), Skill::GoPut);
}

TEST(Planning, EmptyMemoryExplores) {
    auto s = tiny_world();
    AgentMemory m(0, "Alice", tiny_goal(s), MapKnowledge::from_world(s), RelevanceLadder::make(4));
    SelfState self{s.agents[0].position, 1, {}};
    auto c = build_plan_context(m, {}, {}, self, {}, 1);
    EXPECT_EQ(skill_of(c, oracle_plan_choice(c.structured)), Skill::GoExplore);
}

TEST(Planning, CotToggle) {
    Fixture f;
    auto with = make_request(RequestKind::Plan, f.context().structured, true);
    PlanningFlags flags;
    flags.no_cot = true;
    auto ctx = f.context({}, flags);
    EXPECT_FALSE(ctx.cot_enabled);
    auto without = make_request(RequestKind::Plan, ctx.structured, false);
    const std::string cot(kCotInstruction);
    ASSERT_GE(with.rendered_prompt.size(), cot.size() + 1);
    EXPECT_EQ(with.rendered_prompt.substr(with.rendered_prompt.size() - cot.size() - 1), cot + "\n");
    EXPECT_EQ(without.rendered_prompt.find(cot), std::string::npos);
}

TEST(Planning, AblationFlagsStripContext) {
    Fixture f;
    f.m.observe_collaborator({1, "Bob", {6, 3}, {}}, 1);
    PlanningFlags flags;
    flags.no_proximity = true;
    auto c = f.context({}, flags);
    for (const auto& r : c.structured["records"]) EXPECT_FALSE(r.contains("proximity"));
    EXPECT_TRUE(c.structured.contains("collaborators"));

    flags = {};
    flags.no_other_info = true;
    c = f.context({}, flags);
    EXPECT_FALSE(c.structured.contains("collaborators"));
    for (const auto& r : c.structured["records"]) EXPECT_EQ(r["proximity"], "Unknown");
}

TEST(Planning, RepairThenFallback) {
    Fixture f;
    auto c = f.context();
    ScriptedReasoner bad;
    bad.replies = {"Answer: [Z]"};
    auto out = plan(c, bad, 2);
    EXPECT_EQ(out.requests.size(), 2u);
    EXPECT_TRUE(out.plan.fallback);
    EXPECT_EQ(out.plan.describe(), "[gograb] <apple> (20)");

    ScriptedReasoner late;
    late.replies = {"no idea", "Answer: [B]"};
    out = plan(c, late, 2);
    EXPECT_EQ(out.requests.size(), 2u);
    EXPECT_FALSE(out.plan.fallback);
    EXPECT_EQ(out.plan.skill, *skill_of(c, "B"));
}
