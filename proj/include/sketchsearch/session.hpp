#pragma once

#include <cstdint>
#include <deque>
#include <memory>
#include <ostream>
#include <string>
#include <vector>

#include <json.hpp>

#include "sketchsearch/episode.hpp"

namespace sketchsearch {

/// Version stamped into every frame as "v". Bumped on any field change.
inline constexpr int kProtocolVersion = 1;

/// Parameters a client sends in its "start" frame.
struct SessionRequest {
  InteractionMode mode = InteractionMode::Both;
  std::string preset = "study";
  std::optional<std::uint64_t> seed;
  std::optional<double> speed;  // engine seconds per wall second
  nlohmann::json config = nlohmann::json::object();  // EpisodeConfig patch
};

/// Parses a start frame. Throws ProtocolError.
SessionRequest parse_start(const nlohmann::json& frame);

/// Builds the episode config for a session: preset, then the service-wide
/// patch, then the client's patch. The human source is always live.
EpisodeConfig session_config(const SessionRequest& req, const nlohmann::json& service_patch);

nlohmann::json error_frame(const std::string& code, const std::string& message);
nlohmann::json heartbeat_frame(double engine_clock);

/// Outbound frames for one client. When full, the oldest droppable frame
/// that is not being written is evicted; control frames are never evicted.
class OutboundQueue {
 public:
  explicit OutboundQueue(std::size_t limit);

  /// False when `frame` itself was discarded.
  bool push(std::string frame, bool droppable);
  bool empty() const { return frames_.empty(); }
  std::size_t size() const { return frames_.size(); }
  std::size_t dropped() const { return dropped_; }
  /// Marks the front frame as in flight until pop().
  const std::string& begin_write();
  void pop();
  /// Discards queued frames except one in flight.
  void clear();

 private:
  std::size_t limit_;
  std::deque<std::pair<std::string, bool>> frames_;
  bool in_flight_ = false;
  std::size_t dropped_ = 0;
};

/// One live episode behind the message protocol, independent of transport.
/// Not thread-safe: the caller serializes every call.
class Session {
 public:
  Session(std::string id, const RoadNetwork& net, EpisodeConfig config, std::ostream* log = nullptr);

  const std::string& id() const { return id_; }
  InteractionMode mode() const { return episode_.config().human.mode; }
  bool done() const { return episode_.done(); }
  const Episode& episode() const { return episode_; }

  /// Frame sent once when the session opens.
  nlohmann::json opened() const;
  /// Handles one client frame and returns the direct replies.
  std::vector<nlohmann::json> handle(const std::string& text);
  /// Advances the engine one tick. Returns telemetry, any new query frames
  /// and, on the final tick, the end frame.
  std::vector<nlohmann::json> step();
  nlohmann::json telemetry() const;

  /// While disconnected every query resolves to Null at once.
  void set_connected(bool connected);
  bool connected() const { return connected_; }

 private:
  nlohmann::json handle_frame(const nlohmann::json& frame);
  nlohmann::json query_frame(const PendingQuery& q) const;

  std::string id_;
  Episode episode_;
  bool connected_ = true;
  std::int64_t tick_ = 0;
  std::vector<Point2> glimpses_;  // since the last telemetry
};

}  // namespace sketchsearch
