#pragma once

// WebSocket + HTTP front end for a Session.
//   /ws          JSON operator messages in, FRAME/STATUS/ERROR out
//   GET /status  latest STATUS snapshot
// Network I/O runs on one io_context thread. Operator messages go through a
// queue to the tick thread, which is the only code touching the Session.

#include <boost/asio.hpp>
#include <boost/beast/core.hpp>
#include <boost/beast/http.hpp>
#include <boost/beast/websocket.hpp>
#include <nlohmann/json.hpp>

#include <atomic>
#include <chrono>
#include <condition_variable>
#include <deque>
#include <functional>
#include <memory>
#include <mutex>
#include <set>
#include <stop_token>
#include <string>
#include <thread>
#include <utility>
#include <vector>

#include "hexatrack/error.hpp"
#include "hexatrack/teleop/session.hpp"

namespace hexatrack::teleop {

namespace net = boost::asio;
namespace beast = boost::beast;
namespace http = beast::http;
namespace websocket = beast::websocket;
using tcp = net::ip::tcp;

struct ServerOptions {
  std::string address = "127.0.0.1";
  unsigned short port = 0;  // 0 picks a free port
  double ticks_per_second = 10.0;
  std::size_t max_queued_writes = 64;  // per client; older frames are dropped past this
};

class Server;

namespace detail {

class WsClient : public std::enable_shared_from_this<WsClient> {
 public:
  WsClient(tcp::socket&& socket, Server& server, std::size_t max_queue)
      : ws_(std::move(socket)), server_(server), max_queue_(max_queue) {}

  void start(http::request<http::string_body> req);
  void send(std::shared_ptr<const std::string> msg);
  void close();

 private:
  void read();
  void write_next();

  websocket::stream<beast::tcp_stream> ws_;
  Server& server_;
  std::size_t max_queue_;
  beast::flat_buffer buffer_;
  std::deque<std::shared_ptr<const std::string>> queue_;
  bool open_ = false;
};

class HttpConnection : public std::enable_shared_from_this<HttpConnection> {
 public:
  HttpConnection(tcp::socket&& socket, Server& server) : stream_(std::move(socket)), server_(server) {}
  void start() { read(); }

 private:
  void read();
  void respond();

  beast::tcp_stream stream_;
  Server& server_;
  beast::flat_buffer buffer_;
  http::request<http::string_body> req_;
};

}  // namespace detail

class Server {
 public:
  /// Binds right away; a bad address or busy port throws io_error.
  Server(SessionConfig cfg, ServerOptions opt = {})
      : opt_(std::move(opt)), session_(std::move(cfg)), acceptor_(ioc_) {
    if (!(opt_.ticks_per_second > 0.0)) throw Error(Errc::invalid_parameter, "tick rate must be positive");
    beast::error_code ec;
    const auto addr = net::ip::make_address(opt_.address, ec);
    if (ec) throw Error(Errc::io_error, "bad bind address: " + opt_.address);
    const tcp::endpoint ep{addr, opt_.port};
    acceptor_.open(ep.protocol(), ec);
    if (!ec) acceptor_.set_option(net::socket_base::reuse_address(true), ec);
    if (!ec) acceptor_.bind(ep, ec);
    if (!ec) acceptor_.listen(net::socket_base::max_listen_connections, ec);
    if (ec) throw Error(Errc::io_error, "cannot bind " + opt_.address + ":" + std::to_string(opt_.port) + ": " + ec.message());
    port_ = acceptor_.local_endpoint().port();
    snapshot_ = session_.status().dump();
  }

  Server(const Server&) = delete;
  Server& operator=(const Server&) = delete;
  ~Server() { stop(); }

  unsigned short port() const noexcept { return port_; }

  void start() {
    if (running_.exchange(true)) return;
    accept();
    io_thread_ = std::thread([this] { ioc_.run(); });
    tick_thread_ = std::jthread([this](std::stop_token st) { tick_loop(st); });
  }

  void stop() {
    if (!running_.exchange(false)) return;
    tick_thread_.request_stop();
    if (tick_thread_.joinable()) tick_thread_.join();
    net::post(ioc_, [this] {
      beast::error_code ec;
      acceptor_.close(ec);
      std::lock_guard lock(clients_mutex_);
      for (const auto& c : clients_) c->close();
    });
    // Give close frames a moment, then tear down.
    std::this_thread::sleep_for(std::chrono::milliseconds(50));
    ioc_.stop();
    if (io_thread_.joinable()) io_thread_.join();
    std::lock_guard lock(clients_mutex_);
    clients_.clear();
  }

  /// Blocks until stop() is called from elsewhere (e.g. a signal handler).
  void wait() {
    while (running_) std::this_thread::sleep_for(std::chrono::milliseconds(100));
  }

  /// Latest STATUS as a JSON string.
  std::string snapshot() const {
    std::lock_guard lock(snapshot_mutex_);
    return snapshot_;
  }

  /// Runs f on the session with the loop paused.
  template <typename F>
  auto with_session(F&& f) {
    std::lock_guard lock(session_mutex_);
    return f(session_);
  }

  std::size_t client_count() const {
    std::lock_guard lock(clients_mutex_);
    return clients_.size();
  }

  // --- used by the connection classes
  void enqueue(std::shared_ptr<detail::WsClient> from, std::string raw) {
    std::lock_guard lock(inbox_mutex_);
    inbox_.emplace_back(std::move(from), std::move(raw));
  }
  void add_client(std::shared_ptr<detail::WsClient> c) {
    std::lock_guard lock(clients_mutex_);
    clients_.insert(std::move(c));
  }
  void remove_client(const std::shared_ptr<detail::WsClient>& c) {
    std::lock_guard lock(clients_mutex_);
    clients_.erase(c);
  }
  std::size_t max_queue() const noexcept { return opt_.max_queued_writes; }

 private:
  void accept() {
    acceptor_.async_accept(net::make_strand(ioc_), [this](beast::error_code ec, tcp::socket socket) {
      if (ec) return;  // acceptor closed
      std::make_shared<detail::HttpConnection>(std::move(socket), *this)->start();
      accept();
    });
  }

  void broadcast(const std::vector<nlohmann::json>& msgs) {
    if (msgs.empty()) return;
    std::vector<std::shared_ptr<detail::WsClient>> targets;
    {
      std::lock_guard lock(clients_mutex_);
      targets.assign(clients_.begin(), clients_.end());
    }
    for (const auto& m : msgs) {
      auto text = std::make_shared<const std::string>(m.dump());
      for (const auto& c : targets) c->send(text);
    }
  }

  void publish_snapshot(const nlohmann::json& status) {
    std::lock_guard lock(snapshot_mutex_);
    snapshot_ = status.dump();
  }

  void tick_loop(std::stop_token st) {
    using clock = std::chrono::steady_clock;
    const auto period = std::chrono::duration_cast<clock::duration>(std::chrono::duration<double>(1.0 / opt_.ticks_per_second));
    auto next = clock::now();
    while (!st.stop_requested()) {
      std::deque<std::pair<std::shared_ptr<detail::WsClient>, std::string>> inbox;
      {
        std::lock_guard lock(inbox_mutex_);
        inbox.swap(inbox_);
      }
      Outbox tick_out;
      {
        std::lock_guard lock(session_mutex_);
        for (auto& [from, raw] : inbox) {
          Outbox o = session_.handle_raw(raw);
          for (const auto& r : o.reply) from->send(std::make_shared<const std::string>(r.dump()));
          broadcast(o.broadcast);
        }
        try {
          tick_out = session_.tick();
        } catch (const std::exception& e) {
          tick_out.broadcast.push_back(make_error(std::string("tick failed: ") + e.what()));
        }
        publish_snapshot(session_.status());
      }
      broadcast(tick_out.broadcast);
      next += period;
      const auto now = clock::now();
      if (next < now) next = now;  // overrun: don't try to catch up
      std::unique_lock lk(sleep_mutex_);
      sleep_cv_.wait_until(lk, st, next, [] { return false; });
    }
  }

  ServerOptions opt_;
  Session session_;
  net::io_context ioc_;
  tcp::acceptor acceptor_;
  unsigned short port_ = 0;
  std::atomic<bool> running_{false};
  std::thread io_thread_;
  std::jthread tick_thread_;

  std::mutex session_mutex_;
  std::mutex sleep_mutex_;
  std::condition_variable_any sleep_cv_;
  mutable std::mutex snapshot_mutex_;
  std::string snapshot_;
  std::mutex inbox_mutex_;
  std::deque<std::pair<std::shared_ptr<detail::WsClient>, std::string>> inbox_;
  mutable std::mutex clients_mutex_;
  std::set<std::shared_ptr<detail::WsClient>> clients_;
};

namespace detail {

inline void HttpConnection::read() {
  req_ = {};
  stream_.expires_after(std::chrono::seconds(30));
  http::async_read(stream_, buffer_, req_, [self = shared_from_this()](beast::error_code ec, std::size_t) {
    if (ec) return;
    self->respond();
  });
}

inline void HttpConnection::respond() {
  if (websocket::is_upgrade(req_)) {
    if (req_.target() == "/ws") {
      stream_.expires_never();
      std::make_shared<WsClient>(stream_.release_socket(), server_, server_.max_queue())->start(std::move(req_));
      return;
    }
  }
  auto res = std::make_shared<http::response<http::string_body>>();
  res->version(req_.version());
  res->keep_alive(false);
  res->set(http::field::server, "hexatrack");
  if (req_.method() == http::verb::get && req_.target() == "/status") {
    res->result(http::status::ok);
    res->set(http::field::content_type, "application/json");
    res->set(http::field::access_control_allow_origin, "*");
    res->body() = server_.snapshot();
  } else {
    res->result(http::status::not_found);
    res->set(http::field::content_type, "text/plain");
    res->body() = "not found\n";
  }
  res->prepare_payload();
  http::async_write(stream_, *res, [self = shared_from_this(), res](beast::error_code, std::size_t) {
    beast::error_code ec;
    self->stream_.socket().shutdown(tcp::socket::shutdown_send, ec);
  });
}

inline void WsClient::start(http::request<http::string_body> req) {
  ws_.set_option(websocket::stream_base::timeout::suggested(beast::role_type::server));
  ws_.text(true);
  ws_.async_accept(req, [self = shared_from_this()](beast::error_code ec) {
    if (ec) return;
    self->open_ = true;
    self->server_.add_client(self);
    self->read();
  });
}

inline void WsClient::read() {
  ws_.async_read(buffer_, [self = shared_from_this()](beast::error_code ec, std::size_t) {
    if (ec) {
      self->open_ = false;
      self->server_.remove_client(self);
      return;
    }
    self->server_.enqueue(self, beast::buffers_to_string(self->buffer_.data()));
    self->buffer_.consume(self->buffer_.size());
    self->read();
  });
}

inline void WsClient::send(std::shared_ptr<const std::string> msg) {
  net::post(ws_.get_executor(), [self = shared_from_this(), msg = std::move(msg)] {
    if (!self->open_) return;
    if (self->queue_.size() >= self->max_queue_) return;  // slow reader
    self->queue_.push_back(msg);
    if (self->queue_.size() == 1) self->write_next();
  });
}

inline void WsClient::write_next() {
  ws_.async_write(net::buffer(*queue_.front()), [self = shared_from_this()](beast::error_code ec, std::size_t) {
    if (ec) {
      self->open_ = false;
      self->queue_.clear();
      self->server_.remove_client(self);
      return;
    }
    self->queue_.pop_front();
    if (!self->queue_.empty()) self->write_next();
  });
}

// Called on the I/O thread during shutdown.
inline void WsClient::close() {
  if (!open_) return;
  open_ = false;
  if (queue_.empty()) {
    ws_.async_close(websocket::close_code::going_away, [self = shared_from_this()](beast::error_code) {});
  } else {
    beast::error_code ec;
    beast::get_lowest_layer(ws_).socket().close(ec);
  }
}

}  // namespace detail

}  // namespace hexatrack::teleop
