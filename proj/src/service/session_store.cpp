#include "cper/service/session_store.hpp"

#include <fcntl.h>
#include <unistd.h>

#include <algorithm>
#include <cctype>
#include <cerrno>
#include <chrono>
#include <cmath>
#include <cstring>
#include <ctime>
#include <fstream>
#include <random>

#include <spdlog/spdlog.h>

#include "cper/errors.hpp"
#include "cper/serialization.hpp"
#include "cper/text.hpp"

namespace cper::service {

using nlohmann::json;
namespace fs = std::filesystem;

namespace {

constexpr std::string_view kExtension = ".jsonl";

void check(bool ok, const std::string& what) {
  if (!ok) throw Error(what + ": " + std::strerror(errno));
}

// Writes all bytes and fsyncs before closing.
void write_durably(const fs::path& path, std::string_view bytes, int extra_flags) {
  const int fd = ::open(path.c_str(), O_WRONLY | O_APPEND | O_CREAT | O_CLOEXEC | extra_flags, 0644);
  if (fd < 0 && errno == EEXIST) throw InvalidInput("session file already exists: " + path.string());
  check(fd >= 0, "open " + path.string());
  std::size_t done = 0;
  while (done < bytes.size()) {
    const auto n = ::write(fd, bytes.data() + done, bytes.size() - done);
    if (n < 0 && errno == EINTR) continue;
    if (n < 0) {
      const int saved = errno;
      ::close(fd);
      errno = saved;
      check(false, "write " + path.string());
    }
    done += static_cast<std::size_t>(n);
  }
  const bool synced = ::fsync(fd) == 0;
  const int saved = errno;
  ::close(fd);
  errno = saved;
  check(synced, "fsync " + path.string());
}

void sync_directory(const fs::path& dir) {
  const int fd = ::open(dir.c_str(), O_RDONLY | O_DIRECTORY | O_CLOEXEC);
  if (fd < 0) return;
  ::fsync(fd);
  ::close(fd);
}

bool valid_id(std::string_view id) {
  return !id.empty() && id.size() <= 64 &&
         std::all_of(id.begin(), id.end(), [](unsigned char c) {
           return std::isalnum(c) || c == '-' || c == '_';
         });
}

json header_line(const SessionRecord& r) {
  return {{"kind", "session"},
          {"session_id", r.session_id},
          {"created_at", r.created_at},
          {"domain", eval::to_string(r.domain)},
          {"config", to_json(r.config)},
          {"state", r.state}};
}

}  // namespace

void validate(const SessionConfig& c) {
  std::vector<std::string> bad;
  if (!std::isfinite(c.alpha) || c.alpha < 0.0) bad.emplace_back("alpha");
  if (!std::isfinite(c.beta) || c.beta < 0.0) bad.emplace_back("beta");
  if (!std::isfinite(c.temperature) || c.temperature < 0.0 || c.temperature > 2.0) {
    bad.emplace_back("temperature");
  }
  if (c.sample_count < 2 || c.sample_count > 64) bad.emplace_back("sample_count");
  if (!bad.empty()) throw ValidationError("invalid session config: " + join(bad, ", "), bad);
}

json to_json(const SessionConfig& c) {
  return {{"alpha", c.alpha},
          {"beta", c.beta},
          {"temperature", c.temperature},
          {"sample_count", c.sample_count},
          {"backend", to_string(c.backend)},
          {"seed", c.seed}};
}

SessionConfig session_config_from_json(const json& j) {
  SessionConfig c;
  c.alpha = j.at("alpha").get<double>();
  c.beta = j.at("beta").get<double>();
  c.temperature = j.at("temperature").get<double>();
  c.sample_count = j.at("sample_count").get<int>();
  c.backend = parse_backend_kind(j.at("backend").get<std::string>());
  c.seed = j.at("seed").get<std::uint64_t>();
  return c;
}

TurnPayload make_payload(const TurnResult& r) {
  return {r.final_response,         r.diagnostics.uncertainty, r.diagnostics.wcmi,
          r.diagnostics.knowledge_gap, r.feedback.action,       r.selected_persona,
          r.feedback.feedback};
}

json to_json(const TurnPayload& p) {
  return {{"response", p.response},
          {"diagnostics",
           {{"uncertainty", p.uncertainty},
            {"wcmi", p.wcmi ? json(*p.wcmi) : json(nullptr)},
            {"knowledge_gap", p.knowledge_gap},
            {"action", to_string(p.action)},
            {"selected_persona", p.selected_persona},
            {"feedback", p.feedback}}}};
}

TurnPayload payload_from_json(const json& j) {
  TurnPayload p;
  p.response = j.at("response").get<std::string>();
  const auto& d = j.at("diagnostics");
  p.uncertainty = d.at("uncertainty").get<double>();
  if (!d.at("wcmi").is_null()) p.wcmi = d["wcmi"].get<double>();
  p.knowledge_gap = d.at("knowledge_gap").get<double>();
  p.action = d.at("action").get<Action>();
  p.selected_persona = d.at("selected_persona").get<std::string>();
  p.feedback = d.at("feedback").get<std::string>();
  return p;
}

json to_json(const SessionRecord& r) {
  json turns = json::array();
  for (const auto& t : r.turns) turns.push_back(to_json(t));
  return {{"session_id", r.session_id},
          {"created_at", r.created_at},
          {"domain", eval::to_string(r.domain)},
          {"config", to_json(r.config)},
          {"turn_count", r.turns.size()},
          {"state", r.state},
          {"turns", turns}};
}

SessionStore::SessionStore(fs::path dir) : dir_(std::move(dir)) { fs::create_directories(dir_); }

fs::path SessionStore::path_for(const std::string& session_id) const {
  if (!valid_id(session_id)) throw InvalidInput("malformed session id");
  return dir_ / (session_id + std::string(kExtension));
}

void SessionStore::create(const SessionRecord& record) {
  write_durably(path_for(record.session_id), header_line(record).dump() + "\n", O_EXCL);
  sync_directory(dir_);
}

void SessionStore::append_turn(const std::string& session_id, const TurnPayload& payload,
                               const ConversationState& state) {
  const auto path = path_for(session_id);
  if (!fs::exists(path)) throw InvalidInput("no session file for " + session_id);
  const json line{{"kind", "turn"}, {"payload", to_json(payload)}, {"state", state}};
  write_durably(path, line.dump() + "\n", 0);
}

bool SessionStore::erase(const std::string& session_id) {
  const bool removed = fs::remove(path_for(session_id));
  if (removed) sync_directory(dir_);
  return removed;
}

StoreLoad SessionStore::load_all() {
  StoreLoad out;
  std::vector<fs::path> files;
  for (const auto& entry : fs::directory_iterator(dir_)) {
    if (entry.is_regular_file() && entry.path().extension() == kExtension) {
      files.push_back(entry.path());
    }
  }
  std::sort(files.begin(), files.end());

  for (const auto& path : files) {
    std::ifstream in(path, std::ios::binary);
    std::optional<SessionRecord> record;
    std::string line;
    std::uintmax_t good_bytes = 0;
    bool torn = false;
    while (std::getline(in, line)) {
      const bool complete = !in.eof();
      try {
        if (!complete) throw InvalidInput("no line terminator");
        const auto j = json::parse(line);
        const auto kind = j.at("kind").get<std::string>();
        if (!record) {
          if (kind != "session") throw InvalidInput("first line is not a session header");
          SessionRecord r;
          r.session_id = j.at("session_id").get<std::string>();
          r.created_at = j.at("created_at").get<std::string>();
          r.domain = eval::parse_domain(j.at("domain").get<std::string>());
          r.config = session_config_from_json(j.at("config"));
          r.state = j.at("state").get<ConversationState>();
          record = std::move(r);
        } else {
          if (kind != "turn") throw InvalidInput("unexpected line kind '" + kind + "'");
          auto payload = payload_from_json(j.at("payload"));
          record->state = j.at("state").get<ConversationState>();
          record->turns.push_back(std::move(payload));
        }
        good_bytes += line.size() + 1;
      } catch (const std::exception& e) {
        if (!record) break;
        out.warnings.push_back(path.filename().string() + ": dropped unreadable tail after " +
                               std::to_string(good_bytes) + " bytes (" + e.what() + ")");
        torn = true;
        break;
      }
    }
    in.close();
    if (!record) {
      out.warnings.push_back(path.filename().string() + ": skipped, no readable session header");
      continue;
    }
    if (torn) fs::resize_file(path, good_bytes);
    if (record->session_id != path.stem().string()) {
      out.warnings.push_back(path.filename().string() + ": skipped, header id does not match file name");
      continue;
    }
    out.records.push_back(std::move(*record));
  }
  for (const auto& w : out.warnings) spdlog::warn("session store: {}", w);
  return out;
}

std::string new_session_id() {
  static thread_local std::mt19937_64 rng{[] {
    std::random_device rd;
    std::seed_seq seq{rd(), rd(), rd(), rd()};
    return std::mt19937_64(seq);
  }()};
  static constexpr char kHex[] = "0123456789abcdef";
  std::string id;
  for (int half = 0; half < 2; ++half) {
    auto v = rng();
    for (int i = 0; i < 16; ++i, v >>= 4) id.push_back(kHex[v & 0xf]);
  }
  return id;
}

std::string utc_timestamp() {
  const auto now = std::chrono::system_clock::now();
  const auto secs = std::chrono::system_clock::to_time_t(now);
  const auto ms = std::chrono::duration_cast<std::chrono::milliseconds>(now.time_since_epoch()).count() % 1000;
  std::tm tm{};
  ::gmtime_r(&secs, &tm);
  char buf[32];
  std::strftime(buf, sizeof buf, "%Y-%m-%dT%H:%M:%S", &tm);
  char out[40];
  std::snprintf(out, sizeof out, "%s.%03dZ", buf, static_cast<int>(ms));
  return out;
}

}  // namespace cper::service
