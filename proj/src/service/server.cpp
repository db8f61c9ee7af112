#include "cper/service/server.hpp"

#include <algorithm>

#include <httplib.h>
#include <spdlog/spdlog.h>

#include "cper/serialization.hpp"
#include "cper/text.hpp"

namespace cper::service {

using nlohmann::json;

namespace {

const std::vector<std::string> kOverrideFields{"alpha", "beta", "temperature", "sample_count", "n",
                                               "seed"};

// Reads one override; a wrong type is reported under the field's name.
template <typename T>
void read_field(const json& src, const std::string& key, T& out, std::vector<std::string>& bad) {
  if (!src.contains(key)) return;
  const auto& v = src[key];
  if constexpr (std::is_floating_point_v<T>) {
    if (!v.is_number()) return bad.push_back(key);
  } else {
    if (!v.is_number_integer()) return bad.push_back(key);
  }
  out = v.get<T>();
}

void apply_overrides(const json& src, SessionConfig& c, std::vector<std::string>& bad) {
  read_field(src, "alpha", c.alpha, bad);
  read_field(src, "beta", c.beta, bad);
  read_field(src, "temperature", c.temperature, bad);
  read_field(src, "n", c.sample_count, bad);
  read_field(src, "sample_count", c.sample_count, bad);
  if (src.contains("seed")) {
    if (src["seed"].is_number_unsigned()) {
      c.seed = src["seed"].get<std::uint64_t>();
    } else if (src["seed"].is_number_integer() && src["seed"].get<std::int64_t>() >= 0) {
      c.seed = static_cast<std::uint64_t>(src["seed"].get<std::int64_t>());
    } else {
      bad.emplace_back("seed");
    }
  }
}

json summary(const SessionRecord& r) {
  return {{"session_id", r.session_id},
          {"created_at", r.created_at},
          {"domain", eval::to_string(r.domain)},
          {"turn_count", r.turns.size()}};
}

}  // namespace

std::shared_ptr<const SessionRecord> SessionService::Entry::current() const {
  std::lock_guard lock(snapshot_mutex);
  return snapshot;
}

void SessionService::Entry::publish(std::shared_ptr<const SessionRecord> next) {
  std::lock_guard lock(snapshot_mutex);
  snapshot = std::move(next);
}

SessionService::SessionService(ServiceConfig config)
    : config_(std::move(config)), store_(config_.data_dir), prompts_(PromptSet::load(config_.prompts_dir)) {
  prompts_.validate();
  auto loaded = store_.load_all();
  load_warnings_ = std::move(loaded.warnings);
  for (auto& r : loaded.records) {
    r.state.prompts = prompts_;
    auto entry = std::make_shared<Entry>();
    const auto id = r.session_id;
    entry->snapshot = std::make_shared<const SessionRecord>(std::move(r));
    sessions_.emplace(id, std::move(entry));
  }
  spdlog::info("session service: {} sessions loaded from {}", sessions_.size(),
               config_.data_dir.string());
}

std::shared_ptr<SessionService::Entry> SessionService::find(const std::string& session_id) const {
  std::shared_lock lock(sessions_mutex_);
  const auto it = sessions_.find(session_id);
  if (it == sessions_.end()) throw NotFound("unknown session " + session_id);
  return it->second;
}

Backends SessionService::backends_for(const SessionConfig& config) {
  std::lock_guard lock(backends_mutex_);
  auto it = backends_.find(config.seed);
  if (it == backends_.end()) {
    auto settings = config_.backend;
    settings.seed = config.seed;
    // A misconfigured server is not the client's fault: report it as unavailable.
    try {
      it = backends_.emplace(config.seed, make_backends(settings)).first;
    } catch (const InvalidInput& e) {
      throw BackendUnavailable(e.what());
    }
  }
  return it->second;
}

json SessionService::create_session(const json& body) {
  if (!body.is_null() && !body.is_object()) {
    throw ValidationError("request body must be an object", {"body"});
  }
  SessionConfig cfg = config_.defaults;
  cfg.backend = config_.backend.kind;
  cfg.seed = config_.backend.seed;
  eval::Domain domain = eval::Domain::kGeneric;
  std::vector<std::string> bad;

  if (body.is_object()) {
    for (const auto& [key, value] : body.items()) {
      const bool known = key == "domain" || key == "config" ||
                         std::find(kOverrideFields.begin(), kOverrideFields.end(), key) !=
                             kOverrideFields.end();
      if (!known) bad.push_back(key);
    }
    if (body.contains("domain")) {
      try {
        domain = eval::parse_domain(body["domain"].get<std::string>());
      } catch (const std::exception&) {
        bad.emplace_back("domain");
      }
    }
    apply_overrides(body, cfg, bad);
    if (body.contains("config")) {
      const auto& overrides = body["config"];
      if (!overrides.is_object()) {
        bad.emplace_back("config");
      } else {
        for (const auto& [key, value] : overrides.items()) {
          if (std::find(kOverrideFields.begin(), kOverrideFields.end(), key) == kOverrideFields.end()) {
            bad.push_back(key);
          }
        }
        apply_overrides(overrides, cfg, bad);
      }
    }
  }
  if (!bad.empty()) throw ValidationError("invalid session request: " + join(bad, ", "), bad);
  validate(cfg);

  SessionRecord r;
  r.session_id = new_session_id();
  r.created_at = utc_timestamp();
  r.domain = domain;
  r.config = cfg;
  r.state.id = r.session_id;
  r.state.config.params = {cfg.alpha, cfg.beta};
  r.state.config.generation.temperature = cfg.temperature;
  r.state.config.generation.sample_count = cfg.sample_count;
  r.state.config.validate();
  r.state.prompts = prompts_;

  store_.create(r);
  auto entry = std::make_shared<Entry>();
  entry->snapshot = std::make_shared<const SessionRecord>(r);
  {
    std::unique_lock lock(sessions_mutex_);
    sessions_.emplace(r.session_id, std::move(entry));
  }
  return {{"session_id", r.session_id},
          {"created_at", r.created_at},
          {"domain", eval::to_string(r.domain)},
          {"config", to_json(r.config)}};
}

json SessionService::post_message(const std::string& session_id, const json& body) {
  const auto entry = find(session_id);
  if (!body.is_object() || !body.contains("text") || !body["text"].is_string() ||
      trim(body["text"].get_ref<const std::string&>()).empty()) {
    throw ValidationError("text must be a non-empty string", {"text"});
  }
  const auto text = body["text"].get<std::string>();

  std::lock_guard write(entry->write);
  if (entry->deleted) throw NotFound("unknown session " + session_id);
  auto next = std::make_shared<SessionRecord>(*entry->current());
  const auto backends = backends_for(next->config);
  Pipeline pipeline(backends.chat, backends.embedder);
  const auto result = pipeline.run_turn(next->state, text);
  const auto payload = make_payload(result);

  // Durable before the client sees the reply.
  store_.append_turn(session_id, payload, next->state);
  next->turns.push_back(payload);
  entry->publish(std::move(next));
  return to_json(payload);
}

json SessionService::get_session(const std::string& session_id) const {
  return to_json(*find(session_id)->current());
}

json SessionService::list_sessions() const {
  std::vector<std::shared_ptr<const SessionRecord>> records;
  {
    std::shared_lock lock(sessions_mutex_);
    for (const auto& [id, entry] : sessions_) records.push_back(entry->current());
  }
  std::sort(records.begin(), records.end(), [](const auto& a, const auto& b) {
    return std::tie(a->created_at, a->session_id) < std::tie(b->created_at, b->session_id);
  });
  json out = json::array();
  for (const auto& r : records) out.push_back(summary(*r));
  return {{"sessions", out}};
}

json SessionService::delete_session(const std::string& session_id) {
  std::shared_ptr<Entry> entry;
  {
    std::shared_lock lock(sessions_mutex_);
    const auto it = sessions_.find(session_id);
    if (it != sessions_.end()) entry = it->second;
  }
  bool already_absent = true;
  if (entry) {
    std::lock_guard write(entry->write);
    if (!entry->deleted) {
      entry->deleted = true;
      already_absent = false;
      store_.erase(session_id);
      std::unique_lock lock(sessions_mutex_);
      sessions_.erase(session_id);
    }
  }
  return {{"session_id", session_id}, {"deleted", true}, {"already_absent", already_absent}};
}

namespace {

void send_json(httplib::Response& res, int status, const json& body) {
  res.status = status;
  res.set_content(body.dump(), "application/json");
}

void send_error(httplib::Response& res, int status, std::string_view code, const std::string& message,
                const std::vector<std::string>& fields = {}) {
  json err{{"code", code}, {"message", message}};
  if (!fields.empty()) err["fields"] = fields;
  send_json(res, status, {{"error", err}});
}

json parse_body(const httplib::Request& req) {
  if (trim(req.body).empty()) return nullptr;
  try {
    return json::parse(req.body);
  } catch (const json::parse_error& e) {
    throw InvalidInput(std::string("request body is not valid JSON: ") + e.what());
  }
}

}  // namespace

HttpServer::HttpServer(SessionService& service, ServerOptions options)
    : service_(service), options_(std::move(options)), server_(std::make_unique<httplib::Server>()) {
  auto& s = *server_;
  const auto workers = std::max<std::size_t>(1, options_.workers);
  s.new_task_queue = [workers] { return new httplib::ThreadPool(workers); };

  const int retry_after = options_.retry_after_seconds;
  auto guarded = [retry_after](auto handler) {
    return [handler, retry_after](const httplib::Request& req, httplib::Response& res) {
      try {
        handler(req, res);
      } catch (const NotFound& e) {
        send_error(res, 404, "not_found", e.what());
      } catch (const ValidationError& e) {
        send_error(res, 400, "validation_error", e.what(), e.fields());
      } catch (const InvalidInput& e) {
        send_error(res, 400, "invalid_request", e.what());
      } catch (const BackendUnavailable& e) {
        res.set_header("Retry-After", std::to_string(retry_after));
        send_error(res, 503, "backend_unavailable", e.what());
      } catch (const ProtocolError& e) {
        send_error(res, 502, "backend_protocol_error", e.what());
      } catch (const std::exception& e) {
        spdlog::error("{} {}: {}", req.method, req.path, e.what());
        send_error(res, 500, "internal_error", e.what());
      }
    };
  };

  s.Post("/api/sessions", guarded([this](const httplib::Request& req, httplib::Response& res) {
           send_json(res, 201, service_.create_session(parse_body(req)));
         }));
  s.Get("/api/sessions", guarded([this](const httplib::Request&, httplib::Response& res) {
          send_json(res, 200, service_.list_sessions());
        }));
  s.Post(R"(/api/sessions/([^/]+)/messages)",
         guarded([this](const httplib::Request& req, httplib::Response& res) {
           send_json(res, 200, service_.post_message(req.matches[1], parse_body(req)));
         }));
  s.Get(R"(/api/sessions/([^/]+))", guarded([this](const httplib::Request& req, httplib::Response& res) {
          send_json(res, 200, service_.get_session(req.matches[1]));
        }));
  s.Delete(R"(/api/sessions/([^/]+))",
           guarded([this](const httplib::Request& req, httplib::Response& res) {
             send_json(res, 200, service_.delete_session(req.matches[1]));
           }));
  s.set_error_handler([](const httplib::Request& req, httplib::Response& res) {
    if (!res.body.empty()) return;
    if (res.status == 404) {
      send_error(res, 404, "not_found", "no route for " + req.method + " " + req.path);
    } else {
      send_error(res, res.status, "http_error", "request failed with status " + std::to_string(res.status));
    }
  });
}

HttpServer::~HttpServer() { stop(); }

int HttpServer::bind() {
  const int port = options_.port == 0 ? server_->bind_to_any_port(options_.host)
                                      : (server_->bind_to_port(options_.host, options_.port)
                                             ? options_.port
                                             : -1);
  if (port < 0) {
    throw Error("cannot bind " + options_.host + ":" + std::to_string(options_.port));
  }
  return port;
}

void HttpServer::run() { server_->listen_after_bind(); }

void HttpServer::stop() {
  if (server_) server_->stop();
}

}  // namespace cper::service
