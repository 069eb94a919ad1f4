#pragma once

#include <cstddef>
#include <filesystem>
#include <memory>
#include <string>

#include <json.hpp>

namespace sketchsearch {

struct ServiceConfig {
  std::string address = "127.0.0.1";
  unsigned short port = 8765;  // 0 binds an ephemeral port
  int threads = 2;
  double speed = 1.0;          // engine seconds per wall second; 0 runs unpaced
  double heartbeat = 5.0;      // wall seconds
  std::size_t queue_limit = 64;  // outbound frames per connection
  std::filesystem::path log_dir;  // episode logs and transcripts; empty disables
  nlohmann::json episode_patch = nlohmann::json::object();
};

/// Websocket gateway. Each connection opens (or re-attaches to) one session.
class Service {
 public:
  explicit Service(ServiceConfig config);
  ~Service();
  Service(const Service&) = delete;
  Service& operator=(const Service&) = delete;

  /// Binds and starts the worker threads. Returns the bound port.
  unsigned short start();
  /// Blocks until stop() is called from another thread or a signal handler.
  void wait();
  void stop();
  std::size_t session_count() const;

 private:
  struct Impl;
  std::shared_ptr<Impl> impl_;
};

}  // namespace sketchsearch
