// Headless protocol client against a live service on an ephemeral port.
#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <chrono>
#include <cmath>
#include <condition_variable>
#include <deque>
#include <fstream>
#include <mutex>
#include <numbers>
#include <sstream>
#include <thread>

#include <boost/asio/connect.hpp>
#include <boost/asio/ip/tcp.hpp>
#include <boost/beast/core.hpp>
#include <boost/beast/websocket.hpp>

#include "sketchsearch/geometry.hpp"
#include "sketchsearch/service.hpp"
#include "sketchsearch/session.hpp"

using namespace sketchsearch;
using nlohmann::json;
namespace net = boost::asio;
namespace beast = boost::beast;
namespace websocket = beast::websocket;
using namespace std::chrono_literals;

namespace {

class Client {
 public:
  explicit Client(unsigned short port) : ws_(ioc_) {
    net::ip::tcp::resolver resolver(ioc_);
    net::connect(ws_.next_layer(), resolver.resolve("127.0.0.1", std::to_string(port)));
    ws_.handshake("127.0.0.1", "/");
    reader_ = std::thread([this] {
      try {
        while (true) {
          beast::flat_buffer buf;
          ws_.read(buf);
          std::lock_guard lock(mu_);
          frames_.push_back(json::parse(beast::buffers_to_string(buf.data())));
          cv_.notify_all();
        }
      } catch (...) {
        std::lock_guard lock(mu_);
        closed_ = true;
        cv_.notify_all();
      }
    });
  }

  ~Client() { close(); }

  void send(const json& f) {
    std::lock_guard lock(write_mu_);
    ws_.write(net::buffer(f.dump()));
  }

  /// Next frame of `type`. Telemetry and heartbeats passed over are
  /// discarded; other frames are kept for a later call.
  std::optional<json> next(const std::string& type, std::chrono::milliseconds timeout = 20s) {
    std::unique_lock lock(mu_);
    for (auto it = stash_.begin(); it != stash_.end(); ++it) {
      if ((*it)["type"] == type) {
        json f = std::move(*it);
        stash_.erase(it);
        return f;
      }
    }
    const auto deadline = std::chrono::steady_clock::now() + timeout;
    while (true) {
      while (!frames_.empty()) {
        json f = std::move(frames_.front());
        frames_.pop_front();
        seen_.push_back(f["type"]);
        if (f["type"] == type) return f;
        if (f["type"] != "telemetry" && f["type"] != "heartbeat") stash_.push_back(std::move(f));
      }
      if (closed_ || cv_.wait_until(lock, deadline) == std::cv_status::timeout) return std::nullopt;
    }
  }

  bool saw(const std::string& type) {
    std::lock_guard lock(mu_);
    for (const auto& f : frames_) seen_.push_back(f["type"]);
    frames_.clear();
    return std::find(seen_.begin(), seen_.end(), type) != seen_.end();
  }

  void close() {
    if (reader_.joinable()) {
      beast::error_code ec;
      ws_.close(websocket::close_code::normal, ec);
      if (ec) ws_.next_layer().close(ec);
      reader_.join();
    }
  }

 private:
  net::io_context ioc_;
  websocket::stream<net::ip::tcp::socket> ws_;
  std::thread reader_;
  std::mutex mu_, write_mu_;
  std::condition_variable cv_;
  std::deque<json> frames_;
  std::vector<json> stash_;
  std::vector<std::string> seen_;
  bool closed_ = false;
};

json stroke(Point2 c, double r, int n = 200) {
  json pts = json::array();
  for (int i = 0; i < n; ++i) {
    const double a = 2 * std::numbers::pi * i / n;
    pts.push_back({c.x + r * std::cos(a) * (1 + 0.04 * std::sin(5 * a)), c.y + r * std::sin(a)});
  }
  return pts;
}

double mass_inside(const json& telemetry, const json& polygon) {
  std::vector<Point2> v;
  for (const auto& p : polygon) v.push_back({p[0], p[1]});
  const ConvexPolygon poly(v);
  double in = 0, total = 0;
  for (const auto& b : telemetry["belief"]) {
    total += b[2].get<double>();
    if (contains(poly, {b[0], b[1]})) in += b[2].get<double>();
  }
  return in / total;
}

json start_frame(const std::string& mode, std::uint64_t seed) {
  return {{"v", kProtocolVersion},
          {"type", "start"},
          {"mode", mode},
          {"preset", "study"},
          {"seed", seed},
          {"speed", 30},
          {"config", {{"particles", 2000}, {"t_max", 300.0}, {"planner", {{"sims_per_second", 5}}}}}};
}

}  // namespace

TEST_CASE("a headless client drives a live session end to end") {
  const auto t0 = std::chrono::steady_clock::now();
  const auto logs = std::filesystem::temp_directory_path() / "sketchsearch-e2e";
  std::filesystem::remove_all(logs);
  ServiceConfig cfg;
  cfg.port = 0;
  cfg.heartbeat = 0.5;
  cfg.log_dir = logs;
  Service service(cfg);
  const auto port = service.start();

  std::string session_id;
  {
    Client c(port);
    c.send({{"type", "sketch"}, {"label", "x"}, {"points", json::array()}});
    auto err = c.next("error");
    REQUIRE(err);
    CHECK((*err)["code"] == "no_session");
    c.send({{"type", "attach"}, {"session", "nobody"}});
    err = c.next("error");
    REQUIRE(err);
    CHECK((*err)["code"] == "unknown_session");

    c.send(start_frame("both", 10));
    const auto opened = c.next("session");
    REQUIRE(opened);
    session_id = (*opened)["session"];
    CHECK((*opened)["mode"] == "both");
    const auto first = c.next("telemetry");
    REQUIRE(first);
    const std::size_t space = (*first)["query_space"];

    // Sketch: 200 raw points in, 4-vertex polygon back, query space +5.
    c.send({{"v", 1}, {"type", "sketch"}, {"label", "area1"}, {"delta", nullptr}, {"points", stroke({300, 300}, 120)}});
    const auto ack = c.next("sketch_ack");
    REQUIRE(ack);
    CHECK((*ack)["polygon"].size() == 4);
    const auto after_sketch = c.next("telemetry");
    REQUIRE(after_sketch);
    CHECK((*after_sketch)["query_space"] == space + 5);
    const double before = mass_inside(*after_sketch, (*ack)["polygon"]);

    // Statement: belief mass moves into the sketched region.
    c.send({{"type", "statement"}, {"positive", true}, {"relation", "Inside"}, {"label", "area1"}});
    REQUIRE(c.next("statement_ack"));
    const auto after_statement = c.next("telemetry");
    REQUIRE(after_statement);
    CHECK(mass_inside(*after_statement, (*ack)["polygon"]) > before + 0.2);

    // One query, answered in time.
    const auto q = c.next("query");
    REQUIRE(q);
    CHECK((*q)["label"] == "area1");
    c.send({{"type", "answer"}, {"id", (*q)["id"]}, {"answer", "Yes"}});
    const auto answered = c.next("answer_ack", 5s);
    REQUIRE(answered);
    CHECK((*answered)["id"] == (*q)["id"]);
    CHECK(c.saw("heartbeat"));
  }

  // The client is gone; the session runs on without a human and then ends.
  CHECK(service.session_count() == 1);
  {
    Client passive(port);
    passive.send(start_frame("passive", 11));
    REQUIRE(passive.next("session"));
    passive.send({{"type", "sketch"}, {"label", "pond"}, {"points", stroke({600, 600}, 80)}});
    REQUIRE(passive.next("sketch_ack"));
    passive.send({{"type", "answer"}, {"id", 1}, {"answer", "No"}});
    const auto err = passive.next("error");
    REQUIRE(err);
    CHECK((*err)["code"] == "mode");
    // Passive sessions never see a query frame.
    for (int i = 0; i < 20; ++i) passive.next("telemetry", 2s);
    CHECK_FALSE(passive.saw("query"));
  }
  for (int i = 0; i < 300 && service.session_count() > 0; ++i) std::this_thread::sleep_for(100ms);
  CHECK(service.session_count() == 0);
  service.stop();

  // Episode log replays; the transcript holds the client frames.
  std::ifstream log(logs / (session_id + ".jsonl"));
  REQUIRE(log);
  std::stringstream text;
  text << log.rdbuf();
  CHECK(replay_log(text.str()) == text.str());
  std::ifstream transcript(logs / (session_id + ".transcript.jsonl"));
  int inbound = 0;
  for (std::string line; std::getline(transcript, line);) {
    if (json::parse(line)["dir"] == "in") ++inbound;
  }
  CHECK(inbound == 3);
  CHECK(std::chrono::steady_clock::now() - t0 < 60s);
  std::filesystem::remove_all(logs);
}
