#include <gtest/gtest.h>

#include <boost/asio/connect.hpp>
#include <boost/asio/ip/tcp.hpp>
#include <boost/beast/core.hpp>
#include <boost/beast/websocket.hpp>

#include "reveca/errors.hpp"
#include "reveca/session.hpp"
#include "support.hpp"

using namespace reveca;
using nlohmann::json;

namespace {

SessionConfig config(SessionMode mode = SessionMode::Reveca, unsigned long long seed = 1) {
    json j{{"task", "prepare_afternoon_tea"}, {"seed", seed}, {"human_agent_id", 0}, {"mode", std::string(to_string(mode))}};
    return SessionConfig::from_json(j);
}

bool has(const json& arr, const std::string& v) { return std::find(arr.begin(), arr.end(), json(v)) != arr.end(); }

// Chat lines received by the human, in order.
std::vector<json> inbound_chat(const json& snapshot) {
    std::vector<json> out;
    for (const auto& m : snapshot["chat"])
        if (m["sender"] != 0) out.push_back(m);
    return out;
}

}  // namespace

TEST(Session, SnapshotShowsOnlyTheHumansView) {
    Session s("s1", config());
    const auto snap = s.snapshot();
    EXPECT_EQ(snap["phase"], "awaiting_human_action");
    EXPECT_EQ(snap["step"], 1);
    EXPECT_TRUE(has(snap["legal_actions"], "noop"));

    const auto& truth = s.ground_truth();
    const auto room = truth.room_at(truth.find_agent(0)->position);
    for (const auto& o : snap["observation"]["visible_objects"]) EXPECT_EQ(o["room_id"], *room);

    // Fog: unvisited rooms stay hidden.
    ASSERT_EQ(snap["map"]["visited_rooms"].size(), 1u);
    int hidden = 0;
    for (const auto& row : snap["map"]["rows"]) {
        const auto text = row.get<std::string>();
        hidden += static_cast<int>(std::count(text.begin(), text.end(), '?'));
    }
    EXPECT_GT(hidden, 0);
    for (const auto& r : truth.rooms) {
        if (r.room_id == *room) continue;
        const GridPos c = r.center;
        EXPECT_EQ(snap["map"]["rows"][c.y].get<std::string>()[static_cast<std::size_t>(c.x)], '?');
    }
    for (ObjectId id : s.known_object_ids()) {
        const auto* obj = truth.find_object(id);
        ASSERT_NE(obj, nullptr);
    }
}

TEST(Session, IllegalActionRejectedWithoutStepping) {
    Session s("s1", config());
    auto r = s.submit_action("move:Q");
    EXPECT_FALSE(r.accepted);
    EXPECT_FALSE(r.legal_actions.empty());
    EXPECT_EQ(s.step_index(), 1);
    r = s.submit_action("grasp:999999");
    EXPECT_FALSE(r.accepted);
    EXPECT_EQ(s.step_index(), 1);
}

TEST(Session, LegalActionsMatchTheKernel) {
    Session s("s1", config());
    for (int i = 0; i < 5; ++i) {
        const auto snap = s.snapshot();
        std::vector<std::string> expected = {"noop"};
        for (const auto& a : legal_actions(s.ground_truth(), 0)) expected.push_back(a.id());
        EXPECT_EQ(snap["legal_actions"].get<std::vector<std::string>>(), expected);
        ASSERT_TRUE(s.submit_action(expected.back()).accepted);
    }
}

TEST(Session, StepsBroadcastToSubscribers) {
    Session s("s1", config());
    std::vector<json> got;
    const int token = s.subscribe([&](const std::string& t) { got.push_back(json::parse(t)); });
    auto r = s.submit_action("noop");
    ASSERT_TRUE(r.accepted);
    EXPECT_EQ(s.step_index(), 2);
    ASSERT_EQ(got.size(), 1u);
    EXPECT_EQ(got[0]["type"], "step_result");
    EXPECT_EQ(got[0]["step"], 1);
    EXPECT_EQ(got[0], r.broadcast);
    s.unsubscribe(token);
    s.submit_action("noop");
    EXPECT_EQ(got.size(), 1u);
    EXPECT_EQ(s.client_count(), 0u);
}

TEST(Session, ChatBudget) {
    Session s("s1", config());
    EXPECT_FALSE(s.submit_chat("").accepted);
    EXPECT_FALSE(s.submit_chat(std::string(kMessageBudget + 1, 'a')).accepted);
    EXPECT_EQ(s.step_index(), 1);
    auto r = s.submit_chat(std::string(kMessageBudget, 'a'));
    EXPECT_TRUE(r.accepted);
    EXPECT_EQ(s.step_index(), 2);
}

TEST(Session, ChatQuestionGetsAnAnswer) {
    Session s("s1", config());
    const std::string target = s.snapshot()["goal"].get<std::string>();
    // Ask about the first goal object by name.
    std::string name;
    for (const auto& o : s.ground_truth().objects)
        if (o.kind == ObjectKind::Item && target.find(o.object_name) != std::string::npos) {
            name = o.object_name;
            break;
        }
    ASSERT_FALSE(name.empty());
    auto r = s.submit_chat("Did anyone pick up the " + name + "?");
    ASSERT_TRUE(r.accepted);
    ASSERT_FALSE(r.broadcast["chat"].empty());
    const auto mine = r.broadcast["chat"][0];
    EXPECT_EQ(mine["kind"], "validation_query");
    EXPECT_EQ(mine["payload"]["object_name"], name);

    bool answered = false;
    for (int i = 0; i < 8 && !answered; ++i) {
        auto step = s.submit_action("noop");
        for (const auto& m : step.broadcast["chat"])
            answered = answered || (m["kind"] == "validation_response" && m["payload"]["object_name"] == name);
    }
    EXPECT_TRUE(answered);
}

TEST(Session, AlwaysAskQueriesTheHuman) {
    Session s("s1", config(SessionMode::AlwaysAsk));
    bool asked = false;
    for (int i = 0; i < 30 && !asked; ++i) {
        auto r = s.submit_action("noop");
        for (const auto& m : r.broadcast["chat"])
            asked = asked || (m["kind"] == "validation_query" && m["recipients"] == 0);
    }
    ASSERT_TRUE(asked);
    auto r = s.submit_chat("yes");
    ASSERT_TRUE(r.accepted);
    EXPECT_EQ(r.broadcast["chat"][0]["kind"], "validation_response");
    EXPECT_EQ(r.broadcast["chat"][0]["payload"]["answer"], "confirm");
}

TEST(Session, NoCommKeepsTheTeamSilent) {
    Session s("s1", config(SessionMode::NoComm));
    for (int i = 0; i < 20 && s.phase() == SessionPhase::AwaitingHumanAction; ++i) s.submit_action("noop");
    EXPECT_TRUE(inbound_chat(s.snapshot()).empty());
    EXPECT_EQ(s.ground_truth().messages_sent, 0);
}

TEST(Session, ManagerIdsAndBadConfig) {
    SessionManager m;
    EXPECT_EQ(m.create({{"seed", 1}}), "s1");
    EXPECT_EQ(m.create({{"seed", 2}}), "s2");
    EXPECT_EQ(m.size(), 2u);
    EXPECT_NE(m.find("s2"), nullptr);
    EXPECT_EQ(m.find("s9"), nullptr);
    EXPECT_THROW(m.create({{"mode", "chaos"}}), ConfigError);
    EXPECT_THROW(m.create({{"task", "bake_bread"}}), ConfigError);
    EXPECT_THROW(m.create({{"human_agent_id", 5}}), ConfigError);
}

TEST(Server, HttpRoutes) {
    SessionManager manager;
    SessionServer server(manager);
    server.start("127.0.0.1", 0);
    httplib::Client client("127.0.0.1", server.port());

    auto created = client.Post("/sessions", R"({"task":"prepare_afternoon_tea","seed":3})", "application/json");
    ASSERT_TRUE(created);
    EXPECT_EQ(created->status, 201);
    const auto id = json::parse(created->body)["session_id"].get<std::string>();

    auto state = client.Get("/sessions/" + id + "/state");
    ASSERT_TRUE(state);
    EXPECT_EQ(state->status, 200);
    EXPECT_EQ(json::parse(state->body)["session_id"], id);

    auto bad = client.Post("/sessions/" + id + "/action", R"({"action":"move:Q"})", "application/json");
    ASSERT_TRUE(bad);
    EXPECT_EQ(bad->status, 422);
    EXPECT_TRUE(has(json::parse(bad->body)["legal_actions"], "noop"));

    auto ok = client.Post("/sessions/" + id + "/action", R"({"action":"noop"})", "application/json");
    ASSERT_TRUE(ok);
    EXPECT_EQ(ok->status, 200);
    EXPECT_EQ(json::parse(ok->body)["type"], "step_result");

    EXPECT_EQ(client.Get("/sessions/nope/state")->status, 404);
    EXPECT_EQ(client.Post("/sessions/" + id + "/action", "{", "application/json")->status, 400);
    EXPECT_EQ(client.Post("/sessions", R"({"mode":"chaos"})", "application/json")->status, 400);
    server.stop();
}

TEST(Server, WebSocketStream) {
    namespace beast = boost::beast;
    namespace net = boost::asio;
    SessionManager manager;
    const auto id = manager.create({{"seed", 4}});
    SessionServer server(manager);
    server.start("127.0.0.1", 0);

    net::io_context ioc;
    net::ip::tcp::resolver resolver(ioc);
    beast::websocket::stream<net::ip::tcp::socket> ws(ioc);
    net::connect(ws.next_layer(), resolver.resolve("127.0.0.1", std::to_string(server.port())));
    ws.handshake("127.0.0.1", "/sessions/" + id + "/stream");

    beast::flat_buffer buf;
    ws.read(buf);
    auto first = json::parse(beast::buffers_to_string(buf.data()));
    buf.consume(buf.size());
    EXPECT_EQ(first["type"], "snapshot");
    EXPECT_EQ(first["snapshot"]["session_id"], id);

    // Wait for the stream to subscribe before stepping.
    auto session = manager.find(id);
    for (int i = 0; i < 100 && session->client_count() == 0; ++i) std::this_thread::sleep_for(std::chrono::milliseconds(10));
    ASSERT_EQ(session->client_count(), 1u);

    httplib::Client client("127.0.0.1", server.port());
    ASSERT_EQ(client.Post("/sessions/" + id + "/action", R"({"action":"noop"})", "application/json")->status, 200);
    ws.read(buf);
    auto pushed = json::parse(beast::buffers_to_string(buf.data()));
    EXPECT_EQ(pushed["type"], "step_result");
    EXPECT_EQ(pushed["snapshot"]["step"], 2);

    beast::error_code ec;
    ws.close(beast::websocket::close_code::normal, ec);
    EXPECT_FALSE(ec) << ec.message();
    for (int i = 0; i < 100 && session->client_count() > 0; ++i) std::this_thread::sleep_for(std::chrono::milliseconds(10));
    EXPECT_EQ(session->client_count(), 0u);
    server.stop();
}
