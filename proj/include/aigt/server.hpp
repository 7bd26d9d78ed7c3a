#pragma once

#include <memory>
#include <string>

#include <nlohmann/json.hpp>

#include "aigt/error.hpp"

namespace aigt {

struct ServerConfig {
  std::string bind_address = "127.0.0.1";
  int port = 8080;  // 0 picks a free port
  std::string data_dir = "aigt-data";
  unsigned workers = 2;  // job worker pool size
};

// HTTP status for a library error kind.
int http_status(ErrorKind kind);
// {"error": {"code", "message", "field"}}
nlohmann::json error_body(const Error& error);

// JSON-over-HTTP service under /api/v1/. Corpora, models, comparisons, jobs
// and projects are persisted under data_dir, so a restart keeps every
// finished result. See docs/api.md for the route list.
class Server {
 public:
  explicit Server(ServerConfig config);
  ~Server();
  Server(const Server&) = delete;
  Server& operator=(const Server&) = delete;

  // Binds the socket; returns the bound port. Throws kIo when binding fails.
  int bind();
  // Serves until stop() is called. Requires bind().
  void listen();
  void stop();
  // Blocks until queued and running jobs have finished.
  void wait_for_jobs();

 private:
  class Impl;
  std::unique_ptr<Impl> impl_;
};

}  // namespace aigt
