#pragma once

// HTTP + WebSocket front end of the live simulation (Boost.Beast).
//
//   GET /api/info  scenario and schema versions
//   GET /ws        upgrade; snapshots out, commands in, acks out
//   GET /...       static files from `static_root`, when configured
//
// The SimHost lives on one strand. Sessions never touch it: they post
// commands to that strand and receive acks and snapshots posted back.

#include <boost/asio.hpp>
#include <boost/beast/core.hpp>
#include <boost/beast/http.hpp>
#include <boost/beast/websocket.hpp>

#include <atomic>
#include <chrono>
#include <cstdint>
#include <deque>
#include <filesystem>
#include <future>
#include <limits>
#include <map>
#include <memory>
#include <optional>
#include <string>
#include <thread>
#include <vector>

#include "orosoar/service/host.hpp"
#include "orosoar/service/protocol.hpp"

namespace orosoar::service {

namespace net = boost::asio;
namespace beast = boost::beast;
namespace http = beast::http;
namespace websocket = beast::websocket;
using tcp = net::ip::tcp;

struct ServerOptions {
  std::string address{"127.0.0.1"};
  unsigned short port{8080};  ///< 0 picks a free port
  std::optional<std::filesystem::path> static_root;
  int threads{2};
  std::chrono::milliseconds tick{10};
  HostOptions host{};
};

namespace detail {

inline std::string_view mime_type(const std::filesystem::path& p) {
  const std::string ext = p.extension().string();
  if (ext == ".html" || ext == ".htm") return "text/html";
  if (ext == ".js" || ext == ".mjs") return "text/javascript";
  if (ext == ".css") return "text/css";
  if (ext == ".json" || ext == ".map") return "application/json";
  if (ext == ".svg") return "image/svg+xml";
  if (ext == ".png") return "image/png";
  if (ext == ".wasm") return "application/wasm";
  return "application/octet-stream";
}

/// Maps a request target onto a file under root, refusing anything that
/// would escape it.
inline std::optional<std::filesystem::path> static_file(const std::filesystem::path& root, std::string_view target) {
  std::string path(target.substr(0, target.find('?')));
  if (path.empty() || path.front() != '/') return std::nullopt;
  if (path.back() == '/') path += "index.html";
  const std::filesystem::path rel = std::filesystem::path(path.substr(1)).lexically_normal();
  if (rel.empty() || rel.is_absolute() || *rel.begin() == "..") return std::nullopt;
  const auto full = root / rel;
  std::error_code ec;
  if (!std::filesystem::is_regular_file(full, ec)) return std::nullopt;
  return full;
}

}  // namespace detail

class Server;

class WsSession : public std::enable_shared_from_this<WsSession> {
 public:
  WsSession(tcp::socket&& socket, Server& server, std::uint64_t id) : ws_(std::move(socket)), server_(server), id_(id) {}

  std::uint64_t id() const noexcept { return id_; }

  template <typename Body, typename Allocator>
  void run(http::request<Body, http::basic_fields<Allocator>> req);

  /// Acks and rejections: queued in order, never dropped.
  void deliver(std::string text) {
    net::post(ws_.get_executor(), [self = shared_from_this(), text = std::move(text)]() mutable {
      self->control_.push_back(std::move(text));
      self->pump();
    });
  }

  /// Snapshots: only the latest one waits, older ones are dropped.
  void deliver_snapshot(json payload, std::uint64_t revision, std::shared_ptr<const json> zeuc) {
    net::post(ws_.get_executor(),
              [self = shared_from_this(), payload = std::move(payload), revision, zeuc = std::move(zeuc)]() mutable {
                self->latest_ = std::move(payload);
                self->latest_rev_ = revision;
                self->zeuc_ = std::move(zeuc);
                self->pump();
              });
  }

 private:
  void on_accept(beast::error_code ec);
  void read() {
    ws_.async_read(buffer_, beast::bind_front_handler(&WsSession::on_read, shared_from_this()));
  }
  void on_read(beast::error_code ec, std::size_t);
  void close();

  void pump() {
    if (writing_ || !open_) return;
    if (!control_.empty()) {
      out_ = std::move(control_.front());
      control_.pop_front();
    } else if (latest_) {
      json payload = std::move(*latest_);
      latest_.reset();
      if (latest_rev_ != sent_rev_ && zeuc_) {
        payload["zeuc"] = *zeuc_;
        sent_rev_ = latest_rev_;
      }
      out_ = envelope("snapshot", static_cast<std::int64_t>(snapshot_seq_++), std::move(payload)).dump();
    } else {
      return;
    }
    writing_ = true;
    ws_.text(true);
    ws_.async_write(net::buffer(out_), [self = shared_from_this()](beast::error_code ec, std::size_t) {
      self->writing_ = false;
      if (ec) {
        self->close();
        return;
      }
      self->pump();
    });
  }

  websocket::stream<beast::tcp_stream> ws_;
  Server& server_;
  std::uint64_t id_;
  beast::flat_buffer buffer_;
  bool open_{false};
  bool writing_{false};
  std::string out_;
  std::deque<std::string> control_;
  std::optional<json> latest_;
  std::uint64_t latest_rev_{0};
  std::uint64_t sent_rev_{std::numeric_limits<std::uint64_t>::max()};
  std::shared_ptr<const json> zeuc_;
  std::uint64_t snapshot_seq_{0};
};

class HttpSession : public std::enable_shared_from_this<HttpSession> {
 public:
  HttpSession(tcp::socket&& socket, Server& server) : stream_(std::move(socket)), server_(server) {}
  void run() {
    net::dispatch(stream_.get_executor(), beast::bind_front_handler(&HttpSession::read, shared_from_this()));
  }

 private:
  void read() {
    req_ = {};
    stream_.expires_after(std::chrono::seconds(30));
    http::async_read(stream_, buffer_, req_, beast::bind_front_handler(&HttpSession::on_read, shared_from_this()));
  }
  void on_read(beast::error_code ec, std::size_t);
  template <typename Body>
  void send(http::response<Body>&& res) {
    const bool keep = res.keep_alive();
    auto msg = std::make_shared<http::response<Body>>(std::move(res));
    http::async_write(stream_, *msg, [self = shared_from_this(), msg, keep](beast::error_code ec, std::size_t) {
      if (ec) return;
      if (!keep) {
        beast::error_code ignored;
        self->stream_.socket().shutdown(tcp::socket::shutdown_send, ignored);
        return;
      }
      self->read();
    });
  }

  beast::tcp_stream stream_;
  Server& server_;
  beast::flat_buffer buffer_;
  http::request<http::string_body> req_;
};

class Server {
 public:
  Server(sim::Scenario scenario, ServerOptions options = {})
      : opts_(std::move(options)),
        ioc_(std::max(1, opts_.threads)),
        sim_strand_(net::make_strand(ioc_)),
        acceptor_(net::make_strand(ioc_)),
        timer_(sim_strand_),
        host_(std::move(scenario), opts_.host),
        info_(host_.info().dump()) {}

  Server(const Server&) = delete;
  Server& operator=(const Server&) = delete;
  ~Server() { stop(); }

  /// Binds and starts accepting. Throws PortInUse when the port is taken.
  void start() {
    beast::error_code ec;
    const tcp::endpoint ep(net::ip::make_address(opts_.address, ec), opts_.port);
    if (ec) throw Error(ErrorCode::IoError, "bad address " + opts_.address);
    acceptor_.open(ep.protocol(), ec);
    if (!ec) acceptor_.set_option(net::socket_base::reuse_address(true), ec);
    if (!ec) acceptor_.bind(ep, ec);
    if (ec == net::error::address_in_use) {
      throw Error(ErrorCode::PortInUse, opts_.address + ":" + std::to_string(opts_.port) + " is in use");
    }
    if (!ec) acceptor_.listen(net::socket_base::max_listen_connections, ec);
    if (ec) throw Error(ErrorCode::IoError, "cannot listen on " + opts_.address + ": " + ec.message());
    port_ = acceptor_.local_endpoint().port();
    accept();
    last_tick_ = std::chrono::steady_clock::now();
    net::dispatch(sim_strand_, [this] { tick(); });
    for (int i = 0; i < std::max(1, opts_.threads); ++i) workers_.emplace_back([this] { ioc_.run(); });
  }

  unsigned short port() const noexcept { return port_; }

  /// Blocks until stop() is called.
  void wait() {
    for (auto& t : workers_) {
      if (t.joinable()) t.join();
    }
  }

  void stop() {
    ioc_.stop();
    for (auto& t : workers_) {
      if (t.joinable() && t.get_id() != std::this_thread::get_id()) t.join();
    }
  }

  /// Runs `fn(host)` on the simulation strand and waits for it. For tests
  /// and tooling; never call it from the strand itself.
  template <typename Fn>
  auto with_host(Fn&& fn) {
    using R = decltype(fn(host_));
    std::packaged_task<R()> task([&] { return fn(host_); });
    auto fut = task.get_future();
    net::post(sim_strand_, [&task] { task(); });
    return fut.get();
  }

  const std::string& info() const noexcept { return info_; }
  const std::optional<std::filesystem::path>& static_root() const noexcept { return opts_.static_root; }
  net::io_context& context() noexcept { return ioc_; }

  // Called by sessions; all hop onto the simulation strand.
  void attach(std::shared_ptr<WsSession> s) {
    net::post(sim_strand_, [this, s] {
      sessions_[s->id()] = s;
      json snap = host_.snapshot();
      s->deliver_snapshot(std::move(snap), host_.zeuc_revision(), zeuc_for_current());
    });
  }
  void detach(std::uint64_t id) {
    net::post(sim_strand_, [this, id] { sessions_.erase(id); });
  }
  void submit(std::uint64_t id, Command c) {
    net::post(sim_strand_, [this, id, c = std::move(c)]() mutable { host_.submit(id, std::move(c)); });
  }
  std::uint64_t next_session_id() { return ++session_ids_; }

 private:
  void accept() {
    acceptor_.async_accept(net::make_strand(ioc_), [this](beast::error_code ec, tcp::socket socket) {
      if (ec == net::error::operation_aborted) return;
      if (!ec) std::make_shared<HttpSession>(std::move(socket), *this)->run();
      accept();
    });
  }

  std::shared_ptr<const json> zeuc_for_current() {
    const std::uint64_t rev = host_.zeuc_revision();
    if (!zeuc_ || zeuc_rev_ != rev) {
      zeuc_ = std::make_shared<const json>(host_.zeuc_payload());
      zeuc_rev_ = rev;
    }
    return zeuc_;
  }

  void tick() {
    const auto now = std::chrono::steady_clock::now();
    const double wall = std::chrono::duration<double>(now - last_tick_).count();
    last_tick_ = now;
    std::vector<Reply> replies;
    std::vector<json> snaps;
    host_.advance_wall(wall, replies, snaps);
    for (auto& r : replies) {
      if (auto it = sessions_.find(r.client); it != sessions_.end()) {
        if (auto s = it->second.lock()) s->deliver(r.message.dump());
      }
    }
    if (!snaps.empty()) {
      // Only the newest matters to a live view; clients drop the rest anyway.
      json& latest = snaps.back();
      const std::uint64_t rev = latest.at("zeuc_revision").get<std::uint64_t>();
      auto zeuc = zeuc_for_current();
      for (auto it = sessions_.begin(); it != sessions_.end();) {
        if (auto s = it->second.lock()) {
          s->deliver_snapshot(latest, rev, zeuc);
          ++it;
        } else {
          it = sessions_.erase(it);
        }
      }
    }
    timer_.expires_after(opts_.tick);
    timer_.async_wait([this](beast::error_code ec) {
      if (!ec) tick();
    });
  }

  ServerOptions opts_;
  net::io_context ioc_;
  net::strand<net::io_context::executor_type> sim_strand_;
  tcp::acceptor acceptor_;
  net::steady_timer timer_;
  SimHost host_;
  std::string info_;
  unsigned short port_{0};
  std::vector<std::thread> workers_;
  std::chrono::steady_clock::time_point last_tick_;
  std::map<std::uint64_t, std::weak_ptr<WsSession>> sessions_;
  std::shared_ptr<const json> zeuc_;
  std::uint64_t zeuc_rev_{0};
  std::atomic<std::uint64_t> session_ids_{0};
};

template <typename Body, typename Allocator>
void WsSession::run(http::request<Body, http::basic_fields<Allocator>> req) {
  ws_.set_option(websocket::stream_base::timeout::suggested(beast::role_type::server));
  ws_.async_accept(req, beast::bind_front_handler(&WsSession::on_accept, shared_from_this()));
}

inline void WsSession::on_accept(beast::error_code ec) {
  if (ec) return;
  open_ = true;
  server_.attach(shared_from_this());
  read();
}

inline void WsSession::on_read(beast::error_code ec, std::size_t) {
  if (ec) {
    close();
    return;
  }
  const std::string text = beast::buffers_to_string(buffer_.data());
  buffer_.consume(buffer_.size());
  json msg;
  std::int64_t seq = -1;
  std::string type = "unknown";
  try {
    msg = json::parse(text);
    if (msg.is_object() && msg.contains("seq") && msg["seq"].is_number_integer()) seq = msg["seq"].get<std::int64_t>();
    if (msg.is_object() && msg.contains("type") && msg["type"].is_string()) type = msg["type"].get<std::string>();
    server_.submit(id_, parse_command(msg));
  } catch (const json::exception& e) {
    control_.push_back(rejection(seq, type, Error(ErrorCode::MalformedCommand, e.what())).dump());
    pump();
  } catch (const Error& e) {
    control_.push_back(rejection(seq, type, e).dump());
    pump();
  }
  read();
}

inline void WsSession::close() {
  if (!open_) return;
  open_ = false;
  server_.detach(id_);
}

inline void HttpSession::on_read(beast::error_code ec, std::size_t) {
  if (ec) return;
  if (websocket::is_upgrade(req_)) {
    if (req_.target() == "/ws") {
      std::make_shared<WsSession>(stream_.release_socket(), server_, server_.next_session_id())->run(std::move(req_));
      return;
    }
  }
  auto respond = [&](http::status status, std::string_view type, std::string body) {
    http::response<http::string_body> res{status, req_.version()};
    res.set(http::field::content_type, std::string(type));
    res.keep_alive(req_.keep_alive());
    res.body() = std::move(body);
    res.prepare_payload();
    return res;
  };
  if (req_.method() != http::verb::get && req_.method() != http::verb::head) {
    send(respond(http::status::method_not_allowed, "text/plain", "GET only\n"));
    return;
  }
  if (req_.target() == "/api/info") {
    send(respond(http::status::ok, "application/json", server_.info()));
    return;
  }
  if (server_.static_root()) {
    if (auto file = detail::static_file(*server_.static_root(), std::string_view(req_.target().data(), req_.target().size()))) {
      http::response<http::file_body> res{http::status::ok, req_.version()};
      beast::error_code fec;
      res.body().open(file->string().c_str(), beast::file_mode::scan, fec);
      if (!fec) {
        res.set(http::field::content_type, std::string(detail::mime_type(*file)));
        res.keep_alive(req_.keep_alive());
        res.prepare_payload();
        send(std::move(res));
        return;
      }
    }
  }
  send(respond(http::status::not_found, "text/plain", "not found\n"));
}

}  // namespace orosoar::service
