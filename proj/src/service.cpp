#include "sketchsearch/service.hpp"

#include <atomic>
#include <chrono>
#include <condition_variable>
#include <deque>
#include <fstream>
#include <map>
#include <mutex>
#include <thread>

#include <boost/asio/dispatch.hpp>
#include <boost/asio/ip/tcp.hpp>
#include <boost/asio/post.hpp>
#include <boost/asio/steady_timer.hpp>
#include <boost/asio/strand.hpp>
#include <boost/beast/core.hpp>
#include <boost/beast/websocket.hpp>
#include <spdlog/spdlog.h>

#include "sketchsearch/error.hpp"
#include "sketchsearch/session.hpp"

namespace sketchsearch {

namespace net = boost::asio;
namespace beast = boost::beast;
namespace websocket = beast::websocket;
using tcp = net::ip::tcp;
using nlohmann::json;
using Clock = std::chrono::steady_clock;

namespace {

std::int64_t wall_ms() {
  return std::chrono::duration_cast<std::chrono::milliseconds>(std::chrono::system_clock::now().time_since_epoch())
      .count();
}

class Connection;

// One episode with its pacing timer. Every engine call runs on strand_.
class LiveSession : public std::enable_shared_from_this<LiveSession> {
 public:
  LiveSession(net::io_context& ioc, std::string id, std::shared_ptr<const RoadNetwork> net, EpisodeConfig cfg,
              double speed, const std::filesystem::path& log_dir, std::function<void(const std::string&)> on_end)
      : strand_(net::make_strand(ioc)),
        timer_(strand_),
        net_(std::move(net)),
        speed_(speed),
        on_end_(std::move(on_end)) {
    if (!log_dir.empty()) {
      std::filesystem::create_directories(log_dir);
      log_.open(log_dir / (id + ".jsonl"));
      transcript_.open(log_dir / (id + ".transcript.jsonl"));
    }
    core_ = std::make_unique<Session>(id, *net_, std::move(cfg), log_.is_open() ? &log_ : nullptr);
    interval_ = speed_ > 0 ? std::chrono::duration_cast<Clock::duration>(
                                 std::chrono::duration<double>(core_->episode().config().dt / speed_))
                           : Clock::duration::zero();
  }

  const std::string& id() const { return core_->id(); }
  double clock() const { return clock_.load(); }

  void begin() {
    net::dispatch(strand_, [self = shared_from_this()] {
      self->origin_ = Clock::now();
      self->schedule();
    });
  }

  void attach(const std::shared_ptr<Connection>& conn);
  void detach(const Connection* conn);

  void input(std::string text) {
    net::post(strand_, [self = shared_from_this(), text = std::move(text)] {
      self->record("in", text);
      for (const auto& f : self->core_->handle(text)) self->deliver(f);
    });
  }

  void halt() {
    net::post(strand_, [self = shared_from_this()] { self->timer_.cancel(); });
  }

 private:
  void schedule() {
    if (core_->done()) return;
    if (interval_ == Clock::duration::zero()) {
      net::post(strand_, [self = shared_from_this()] { self->on_tick(); });
      return;
    }
    timer_.expires_at(origin_ + interval_ * (ticks_ + 1));
    timer_.async_wait([self = shared_from_this()](beast::error_code ec) {
      if (!ec) self->on_tick();
    });
  }

  void on_tick() {
    ++ticks_;
    try {
      for (const auto& f : core_->step()) deliver(f);
    } catch (const std::exception& e) {
      spdlog::error("session {} failed: {}", id(), e.what());
      deliver(error_frame("engine", e.what()));
      finish();
      return;
    }
    clock_ = core_->episode().clock();
    if (core_->done()) {
      finish();
    } else {
      schedule();
    }
  }

  void finish() {
    log_.flush();
    transcript_.flush();
    on_end_(id());
  }

  void record(const char* dir, const std::string& text) {
    if (!transcript_.is_open()) return;
    json frame = json::parse(text, nullptr, false);
    if (frame.is_discarded()) frame = text;
    transcript_ << json{{"wall_ms", wall_ms()}, {"clock", core_->episode().clock()}, {"dir", dir}, {"frame", frame}}
                       .dump()
                << '\n';
  }

  void deliver(const json& f);

  net::strand<net::io_context::executor_type> strand_;
  net::steady_timer timer_;
  std::shared_ptr<const RoadNetwork> net_;
  std::ofstream log_;
  std::ofstream transcript_;
  std::unique_ptr<Session> core_;
  std::weak_ptr<Connection> conn_;
  const Connection* conn_raw_ = nullptr;
  double speed_;
  Clock::duration interval_{};
  Clock::time_point origin_{};
  std::int64_t ticks_ = 0;
  std::atomic<double> clock_{0.0};
  std::function<void(const std::string&)> on_end_;
};

struct Registry {
  mutable std::mutex mu;
  std::map<std::string, std::shared_ptr<LiveSession>> sessions;
  std::map<std::string, std::shared_ptr<const RoadNetwork>> maps;
  int next_id = 1;
};

// One websocket. Outbound frames queue here; when full, the oldest telemetry
// frame is dropped so a slow client never stalls the engine.
class Connection : public std::enable_shared_from_this<Connection> {
 public:
  Connection(tcp::socket socket, net::io_context& ioc, const ServiceConfig& cfg, Registry& reg)
      : ws_(std::move(socket)), heartbeat_(ws_.get_executor()), ioc_(ioc), cfg_(cfg), reg_(reg), out_(cfg.queue_limit) {}

  void run() {
    net::dispatch(ws_.get_executor(), [self = shared_from_this()] {
      self->ws_.set_option(websocket::stream_base::timeout::suggested(beast::role_type::server));
      self->ws_.async_accept([self](beast::error_code ec) {
        if (ec) return;
        self->beat();
        self->read();
      });
    });
  }

  void send(std::string text, bool droppable) {
    net::post(ws_.get_executor(), [self = shared_from_this(), text = std::move(text), droppable]() mutable {
      if (self->closed_) return;
      self->out_.push(std::move(text), droppable);
      if (!self->writing_) self->write();
    });
  }

 private:
  void read() {
    ws_.async_read(buffer_, [self = shared_from_this()](beast::error_code ec, std::size_t) {
      if (ec) {
        self->close();
        return;
      }
      std::string text = beast::buffers_to_string(self->buffer_.data());
      self->buffer_.consume(self->buffer_.size());
      self->on_frame(std::move(text));
      self->read();
    });
  }

  void on_frame(std::string text) {
    if (session_) {
      session_->input(std::move(text));
      return;
    }
    try {
      const json f = json::parse(text);
      const std::string type = f.value("type", "");
      if (type == "start") {
        open(parse_start(f));
      } else if (type == "attach") {
        const std::string id = f.value("session", "");
        std::shared_ptr<LiveSession> s;
        {
          std::lock_guard lock(reg_.mu);
          if (auto it = reg_.sessions.find(id); it != reg_.sessions.end()) s = it->second;
        }
        if (!s) {
          send(error_frame("unknown_session", "no running session '" + id + "'").dump(), false);
          return;
        }
        session_ = s;
        session_->attach(shared_from_this());
      } else {
        send(error_frame("no_session", "send a start or attach frame first").dump(), false);
      }
    } catch (const json::exception& e) {
      send(error_frame("malformed", e.what()).dump(), false);
    } catch (const Error& e) {
      send(error_frame(dynamic_cast<const ProtocolError*>(&e) ? "malformed" : "config", e.what()).dump(), false);
    }
  }

  void open(const SessionRequest& req) {
    EpisodeConfig cfg = session_config(req, cfg_.episode_patch);
    std::shared_ptr<const RoadNetwork> map;
    std::string id;
    {
      std::lock_guard lock(reg_.mu);
      auto& cached = reg_.maps[cfg.map];
      if (!cached) cached = std::make_shared<const RoadNetwork>(load_map(cfg.map));
      map = cached;
      id = "s" + std::to_string(wall_ms()) + "-" + std::to_string(reg_.next_id++);
    }
    Registry* reg = &reg_;
    auto s = std::make_shared<LiveSession>(ioc_, id, map, std::move(cfg), req.speed.value_or(cfg_.speed),
                                           cfg_.log_dir, [reg](const std::string& done) {
                                             std::lock_guard lock(reg->mu);
                                             reg->sessions.erase(done);
                                           });
    {
      std::lock_guard lock(reg_.mu);
      reg_.sessions[id] = s;
    }
    spdlog::info("session {} opened", id);
    session_ = s;
    session_->attach(shared_from_this());
    session_->begin();
  }

  void write() {
    writing_ = true;
    ws_.text(true);
    ws_.async_write(net::buffer(out_.begin_write()), [self = shared_from_this()](beast::error_code ec, std::size_t) {
      self->out_.pop();
      if (ec) {
        self->writing_ = false;
        self->close();
        return;
      }
      if (self->out_.empty()) {
        self->writing_ = false;
      } else {
        self->write();
      }
    });
  }

  void beat() {
    heartbeat_.expires_after(std::chrono::duration_cast<Clock::duration>(std::chrono::duration<double>(cfg_.heartbeat)));
    heartbeat_.async_wait([self = shared_from_this()](beast::error_code ec) {
      if (ec || self->closed_) return;
      self->send(heartbeat_frame(self->session_ ? self->session_->clock() : 0.0).dump(), true);
      self->beat();
    });
  }

  void close() {
    if (closed_) return;
    closed_ = true;
    heartbeat_.cancel();
    out_.clear();
    if (session_) session_->detach(this);
  }

  websocket::stream<beast::tcp_stream> ws_;
  beast::flat_buffer buffer_;
  net::steady_timer heartbeat_;
  net::io_context& ioc_;
  const ServiceConfig& cfg_;
  Registry& reg_;
  OutboundQueue out_;
  bool writing_ = false;
  bool closed_ = false;
  std::shared_ptr<LiveSession> session_;
};

void LiveSession::attach(const std::shared_ptr<Connection>& conn) {
  net::post(strand_, [self = shared_from_this(), conn] {
    self->conn_ = conn;
    self->conn_raw_ = conn.get();
    self->core_->set_connected(true);
    self->deliver(self->core_->opened());
    self->deliver(self->core_->telemetry());
  });
}

void LiveSession::detach(const Connection* conn) {
  net::post(strand_, [self = shared_from_this(), conn] {
    if (self->conn_raw_ != conn) return;
    self->conn_.reset();
    self->conn_raw_ = nullptr;
    self->core_->set_connected(false);
    spdlog::info("session {} lost its client; continuing without a human", self->id());
  });
}

void LiveSession::deliver(const json& f) {
  const bool telemetry = f.at("type") == "telemetry";
  std::string text = f.dump();
  if (!telemetry) record("out", text);
  if (auto c = conn_.lock()) c->send(std::move(text), telemetry);
}

}  // namespace

struct Service::Impl {
  explicit Impl(ServiceConfig c) : cfg(std::move(c)), acceptor(ioc) {}

  void accept() {
    acceptor.async_accept(net::make_strand(ioc), [this](beast::error_code ec, tcp::socket socket) {
      if (ec) return;
      std::make_shared<Connection>(std::move(socket), ioc, cfg, reg)->run();
      accept();
    });
  }

  ServiceConfig cfg;
  net::io_context ioc;
  tcp::acceptor acceptor;
  Registry reg;
  std::vector<std::thread> threads;
  std::mutex stop_mu;
  std::condition_variable stopped_cv;
  bool stopped = false;
};

Service::Service(ServiceConfig config) : impl_(std::make_shared<Impl>(std::move(config))) {}

Service::~Service() { stop(); }

unsigned short Service::start() {
  auto& i = *impl_;
  if (i.cfg.queue_limit == 0) throw ConfigError("queue limit must be positive");
  const tcp::endpoint ep(net::ip::make_address(i.cfg.address), i.cfg.port);
  i.acceptor.open(ep.protocol());
  i.acceptor.set_option(net::socket_base::reuse_address(true));
  i.acceptor.bind(ep);
  i.acceptor.listen();
  i.accept();
  for (int t = 0; t < std::max(1, i.cfg.threads); ++t) i.threads.emplace_back([&i] { i.ioc.run(); });
  return i.acceptor.local_endpoint().port();
}

void Service::wait() {
  std::unique_lock lock(impl_->stop_mu);
  impl_->stopped_cv.wait(lock, [&] { return impl_->stopped; });
}

void Service::stop() {
  auto& i = *impl_;
  {
    std::lock_guard lock(i.stop_mu);
    if (i.stopped && i.threads.empty()) return;
    i.stopped = true;
  }
  i.stopped_cv.notify_all();
  {
    std::lock_guard lock(i.reg.mu);
    for (auto& [id, s] : i.reg.sessions) s->halt();
  }
  i.ioc.stop();
  for (auto& t : i.threads) {
    if (t.joinable() && t.get_id() != std::this_thread::get_id()) t.join();
  }
  i.threads.clear();
  std::lock_guard lock(i.reg.mu);
  i.reg.sessions.clear();
}

std::size_t Service::session_count() const {
  std::lock_guard lock(impl_->reg.mu);
  return impl_->reg.sessions.size();
}

}  // namespace sketchsearch
