#include <atomic>
#include <condition_variable>
#include <deque>
#include <regex>
#include <thread>

#include <boost/asio/ip/tcp.hpp>
#include <boost/beast/core.hpp>
#include <boost/beast/http.hpp>
#include <boost/beast/websocket.hpp>

#include "reveca/errors.hpp"
#include "reveca/session.hpp"

namespace reveca {

namespace beast = boost::beast;
namespace http = beast::http;
namespace websocket = beast::websocket;
namespace net = boost::asio;
using tcp = net::ip::tcp;
using nlohmann::json;

struct SessionServer::Impl {
    net::io_context ioc{1};
    std::unique_ptr<tcp::acceptor> acceptor;
    std::thread thread;
    std::atomic<bool> stopping{false};
    std::mutex conn_mu;
    std::vector<std::pair<std::thread, std::shared_ptr<tcp::socket>>> connections;
};

namespace {

using Request = http::request<http::string_body>;
using Response = http::response<http::string_body>;

Response reply(const Request& req, http::status status, const json& body) {
    Response res{status, req.version()};
    res.set(http::field::content_type, "application/json");
    res.set(http::field::access_control_allow_origin, "*");
    res.keep_alive(req.keep_alive());
    res.body() = body.dump();
    res.prepare_payload();
    return res;
}

Response route(SessionManager& manager, const Request& req) {
    static const std::regex state_re("^/sessions/([A-Za-z0-9_-]+)/state$");
    static const std::regex action_re("^/sessions/([A-Za-z0-9_-]+)/action$");
    const std::string target(req.target());
    std::smatch m;
    try {
        if (target == "/sessions" && req.method() == http::verb::post) {
            json cfg = req.body().empty() ? json::object() : json::parse(req.body());
            return reply(req, http::status::created, {{"session_id", manager.create(cfg)}});
        }
        if (std::regex_match(target, m, state_re) && req.method() == http::verb::get) {
            auto s = manager.find(m[1]);
            if (!s) return reply(req, http::status::not_found, {{"error", "unknown session"}});
            return reply(req, http::status::ok, s->snapshot());
        }
        if (std::regex_match(target, m, action_re) && req.method() == http::verb::post) {
            auto s = manager.find(m[1]);
            if (!s) return reply(req, http::status::not_found, {{"error", "unknown session"}});
            const json body = json::parse(req.body());
            SubmitResult r;
            if (body.contains("chat")) r = s->submit_chat(body.at("chat").get<std::string>());
            else r = s->submit_action(body.at("action").get<std::string>());
            if (!r.accepted)
                return reply(req, http::status::unprocessable_entity, {{"error", r.error}, {"legal_actions", r.legal_actions}});
            return reply(req, http::status::ok, r.broadcast);
        }
    } catch (const ConfigError& e) {
        return reply(req, http::status::bad_request, {{"error", e.what()}});
    } catch (const json::exception& e) {
        return reply(req, http::status::bad_request, {{"error", std::string("bad request body: ") + e.what()}});
    }
    return reply(req, http::status::not_found, {{"error", "no route for " + target}});
}

// Server-push stream: the session pushes step results into a queue drained by this thread.
void stream(std::shared_ptr<Session> session, tcp::socket socket, Request req, std::atomic<bool>& stopping) {
    websocket::stream<tcp::socket> ws(std::move(socket));
    ws.accept(req);
    std::mutex mu;
    std::condition_variable cv;
    std::deque<std::string> queue;
    const int token = session->subscribe([&](const std::string& text) {
        std::lock_guard lock(mu);
        queue.push_back(text);
        cv.notify_one();
    });
    try {
        json hello{{"type", "snapshot"}, {"snapshot", session->snapshot()}};
        ws.text(true);
        ws.write(net::buffer(hello.dump()));
        beast::flat_buffer inbound;
        while (!stopping) {
            // Client frames are drained only so a close handshake gets its reply.
            if (ws.next_layer().available() > 0) {
                beast::error_code ec;
                ws.read(inbound, ec);
                inbound.consume(inbound.size());
                if (ec == websocket::error::closed) break;
                if (ec) throw beast::system_error(ec);
            }
            std::unique_lock lock(mu);
            cv.wait_for(lock, std::chrono::milliseconds(50), [&] { return !queue.empty(); });
            while (!queue.empty()) {
                auto text = std::move(queue.front());
                queue.pop_front();
                lock.unlock();
                ws.write(net::buffer(text));
                lock.lock();
            }
        }
        if (stopping) ws.close(websocket::close_code::going_away);
    } catch (const std::exception&) {
        // client went away
    }
    session->unsubscribe(token);
}

void serve_connection(SessionManager& manager, std::shared_ptr<tcp::socket> sock, std::atomic<bool>& stopping) {
    tcp::socket& socket = *sock;
    static const std::regex stream_re("^/sessions/([A-Za-z0-9_-]+)/stream$");
    beast::flat_buffer buffer;
    try {
        for (;;) {
            Request req;
            http::read(socket, buffer, req);
            std::smatch m;
            const std::string target(req.target());
            if (websocket::is_upgrade(req) && std::regex_match(target, m, stream_re)) {
                auto s = manager.find(m[1]);
                if (!s) {
                    http::write(socket, reply(req, http::status::not_found, {{"error", "unknown session"}}));
                    return;
                }
                stream(std::move(s), std::move(socket), std::move(req), stopping);
                return;
            }
            auto res = route(manager, req);
            http::write(socket, res);
            if (!res.keep_alive()) break;
        }
        beast::error_code ec;
        socket.shutdown(tcp::socket::shutdown_send, ec);
    } catch (const std::exception&) {
        // connection closed or malformed request
    }
}

}  // namespace

SessionServer::SessionServer(SessionManager& manager) : manager_(manager), impl_(std::make_unique<Impl>()) {}

SessionServer::~SessionServer() { stop(); }

void SessionServer::start(const std::string& address, unsigned short port) {
    impl_->acceptor = std::make_unique<tcp::acceptor>(impl_->ioc, tcp::endpoint(net::ip::make_address(address), port));
    port_ = impl_->acceptor->local_endpoint().port();
    impl_->thread = std::thread([this] {
        while (!impl_->stopping) {
            beast::error_code ec;
            auto socket = std::make_shared<tcp::socket>(impl_->ioc);
            impl_->acceptor->accept(*socket, ec);
            if (ec || impl_->stopping) continue;
            std::lock_guard lock(impl_->conn_mu);
            std::thread t(serve_connection, std::ref(manager_), socket, std::ref(impl_->stopping));
            impl_->connections.emplace_back(std::move(t), socket);
        }
    });
}

void SessionServer::run_blocking(const std::string& address, unsigned short port) {
    start(address, port);
    impl_->thread.join();
}

void SessionServer::stop() {
    if (!impl_->acceptor || impl_->stopping.exchange(true)) return;
    // Wake the blocking accept with a throwaway connection.
    try {
        net::io_context ioc;
        tcp::socket poke(ioc);
        poke.connect(tcp::endpoint(net::ip::make_address("127.0.0.1"), port_));
    } catch (const std::exception&) {
    }
    if (impl_->thread.joinable()) impl_->thread.join();
    beast::error_code ec;
    impl_->acceptor->close(ec);
    std::vector<std::pair<std::thread, std::shared_ptr<tcp::socket>>> conns;
    {
        std::lock_guard lock(impl_->conn_mu);
        conns.swap(impl_->connections);
    }
    // Idle keep-alive connections sit in a blocking read; shutting the socket ends it.
    for (auto& [t, sock] : conns) sock->shutdown(tcp::socket::shutdown_both, ec);
    for (auto& [t, sock] : conns) t.join();
}

}  // namespace reveca
