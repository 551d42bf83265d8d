#pragma once

#include <atomic>
#include <cstdint>
#include <deque>
#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <shared_mutex>
#include <string>
#include <thread>

#include "toolgym/episode.hpp"

namespace httplib {
class Server;
}

namespace toolgym::server {

// Owns live episodes. All methods are safe to call concurrently; steps on the
// same episode are serialized, and an overlapping step fails with Busy.
// Requests and responses use the HTTP wire shapes. Finished episodes are
// kept for inspection until more than `retain_finished` have accumulated;
// the oldest are then dropped and report NoSuchEpisode.
class EpisodeManager {
 public:
  static constexpr std::size_t kDefaultRetainFinished = 256;

  explicit EpisodeManager(ToolOptions options = {}, std::size_t retain_finished = kDefaultRetainFinished);
  ~EpisodeManager();

  // Body is an episode config; an optional "n" creates a group of n
  // episodes sharing it. "inline_images" adds base64 PNGs to responses.
  json create(const json& body);
  json step(const std::string& id, const std::string& text);
  json view(const std::string& id) const;
  std::string image_png(const std::string& image_id) const;  // NoSuchEpisode, BadImageRef
  json tools(std::optional<std::uint64_t> schema_seed) const;
  json metrics() const;
  std::size_t size() const;

 private:
  struct Slot;
  std::shared_ptr<Slot> find(const std::string& id) const;
  json create_one(const episode::EpisodeConfig& cfg, bool inline_images);

  void retire(const std::string& id);

  ToolOptions options_;
  std::size_t retain_finished_;
  mutable std::shared_mutex mutex_;
  std::map<std::string, std::shared_ptr<Slot>> episodes_;
  std::deque<std::string> finished_order_;
  std::uint64_t next_id_ = 1;

  std::atomic<std::uint64_t> created_{0};
  std::atomic<std::uint64_t> finished_{0};
  std::atomic<std::uint64_t> steps_{0};
  std::atomic<std::uint64_t> protocol_errors_{0};
  std::atomic<std::uint64_t> tool_calls_{0};
  std::atomic<std::uint64_t> tool_successes_{0};
  std::atomic<std::uint64_t> correct_{0};
};

// HTTP status for a given error kind.
int http_status(ErrorKind kind);
json error_body(ErrorKind kind, std::string_view message);

class HttpServer {
 public:
  explicit HttpServer(EpisodeManager& manager);
  ~HttpServer();
  HttpServer(const HttpServer&) = delete;
  HttpServer& operator=(const HttpServer&) = delete;

  // Port 0 picks a free port. Returns the bound port; Unavailable on failure.
  int bind(const std::string& host, int port);
  void listen();        // blocks until stop()
  void start();         // listen on a background thread
  void stop();
  int port() const { return port_; }

 private:
  EpisodeManager& manager_;
  std::unique_ptr<httplib::Server> http_;
  std::thread worker_;
  int port_ = 0;
};

}  // namespace toolgym::server
