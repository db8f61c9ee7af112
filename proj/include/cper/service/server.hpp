#pragma once

// REST session service. SessionService holds the logic and is usable without
// a socket; HttpServer maps it onto the /api routes.

#include <atomic>
#include <filesystem>
#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <shared_mutex>
#include <string>

#include <nlohmann/json.hpp>

#include "cper/backend_factory.hpp"
#include "cper/errors.hpp"
#include "cper/service/session_store.hpp"

namespace httplib {
class Server;
}

namespace cper::service {

class NotFound : public Error {
 public:
  using Error::Error;
};

struct ServiceConfig {
  std::filesystem::path data_dir = "data/sessions";
  BackendSettings backend;  // kind and endpoints; the seed is the session default
  std::optional<std::filesystem::path> prompts_dir;
  SessionConfig defaults;  // backend and seed are taken from `backend`
};

class SessionService {
 public:
  // Loads every persisted session from the data directory.
  explicit SessionService(ServiceConfig config);

  // Body: {"domain"?, "config"?: {alpha, beta, temperature, sample_count, seed}}.
  // The override fields are also accepted at the top level.
  nlohmann::json create_session(const nlohmann::json& body);
  nlohmann::json post_message(const std::string& session_id, const nlohmann::json& body);
  nlohmann::json get_session(const std::string& session_id) const;
  nlohmann::json list_sessions() const;
  nlohmann::json delete_session(const std::string& session_id);

  const std::vector<std::string>& load_warnings() const { return load_warnings_; }

 private:
  struct Entry {
    std::mutex write;  // serializes turns on one session
    mutable std::mutex snapshot_mutex;
    std::shared_ptr<const SessionRecord> snapshot;
    bool deleted = false;

    std::shared_ptr<const SessionRecord> current() const;
    void publish(std::shared_ptr<const SessionRecord> next);
  };

  std::shared_ptr<Entry> find(const std::string& session_id) const;
  Backends backends_for(const SessionConfig& config);

  ServiceConfig config_;
  SessionStore store_;
  PromptSet prompts_;
  std::vector<std::string> load_warnings_;

  mutable std::shared_mutex sessions_mutex_;
  std::map<std::string, std::shared_ptr<Entry>> sessions_;

  std::mutex backends_mutex_;
  std::map<std::uint64_t, Backends> backends_;
};

struct ServerOptions {
  std::string host = "127.0.0.1";
  int port = 8080;  // 0 picks a free port
  std::size_t workers = 8;
  int retry_after_seconds = 5;
};

class HttpServer {
 public:
  HttpServer(SessionService& service, ServerOptions options);
  ~HttpServer();

  // Binds the socket and returns the port. Throws Error on failure.
  int bind();
  // Blocks until stop() is called.
  void run();
  void stop();

 private:
  SessionService& service_;
  ServerOptions options_;
  std::unique_ptr<httplib::Server> server_;
};

}  // namespace cper::service
