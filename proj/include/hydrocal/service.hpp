#pragma once

#include <atomic>
#include <filesystem>
#include <iosfwd>
#include <map>
#include <memory>
#include <mutex>
#include <string>
#include <thread>
#include <vector>

#include <json.hpp>

#include "hydrocal/episode.hpp"

namespace hydrocal {

struct ServiceOptions {
  std::filesystem::path base_dir = ".";  // relative control paths resolve here
};

/// Newline-delimited JSON front end over episodes. Requests {"id", "method", "params"}; responses
/// {"id", "ok": true, "result"} or {"id", "ok": false, "error": {"code", "message"}}.
/// Methods: create_episode, set_parameters, run_simulation, evaluate, parse_failure, status, score, close.
/// Thread-safe; calls on one session are serialized, sessions are independent.
class EpisodeService {
 public:
  explicit EpisodeService(ServiceOptions options = {});

  /// One request line in, one response line out (no trailing newline).
  std::string handle(const std::string& line);
  nlohmann::ordered_json handle(const nlohmann::json& request);

  std::size_t session_count() const;

 private:
  struct Session {
    std::mutex mu;
    std::unique_ptr<Episode> episode;
  };

  nlohmann::ordered_json create_episode(const nlohmann::json& params);
  std::shared_ptr<Session> find(const std::string& id) const;

  ServiceOptions options_;
  mutable std::mutex mu_;
  std::map<std::string, std::shared_ptr<Session>> sessions_;
  long next_id_ = 1;
};

/// Serves requests line by line until end of input.
void serve_stdio(EpisodeService& service, std::istream& in, std::ostream& out);

/// NDJSON over TCP, one thread per connection.
class TcpServer {
 public:
  /// Binds and listens; port 0 picks a free port. Throws std::runtime_error when the endpoint is unavailable.
  TcpServer(EpisodeService& service, const std::string& host = "127.0.0.1", int port = 0);
  ~TcpServer();
  TcpServer(const TcpServer&) = delete;
  TcpServer& operator=(const TcpServer&) = delete;

  int port() const { return port_; }

  /// Accept loop; returns after stop().
  void run();
  /// Starts the accept loop on a background thread.
  void start();
  void stop();

 private:
  void serve_connection(int fd);

  EpisodeService& service_;
  int listen_fd_ = -1;
  int port_ = 0;
  std::atomic<bool> stopping_{false};
  std::thread acceptor_;
  std::mutex mu_;
  std::vector<std::thread> connections_;
  std::vector<int> client_fds_;
};

}  // namespace hydrocal
