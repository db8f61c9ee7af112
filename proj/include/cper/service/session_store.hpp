#pragma once

// File-backed session persistence: one append-only JSON-lines file per
// session. The first line holds the immutable session header, every later
// line a full state snapshot plus the payload returned for that turn.

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "cper/backend_factory.hpp"
#include "cper/eval/transcript.hpp"
#include "cper/pipeline.hpp"

namespace cper::service {

struct SessionConfig {
  double alpha = 0.5;
  double beta = 0.5;
  double temperature = 0.7;
  int sample_count = 5;
  BackendKind backend = BackendKind::kMock;
  std::uint64_t seed = 0;

  friend bool operator==(const SessionConfig&, const SessionConfig&) = default;
};

// Throws ValidationError naming every out-of-range field.
void validate(const SessionConfig& config);

nlohmann::json to_json(const SessionConfig& config);
SessionConfig session_config_from_json(const nlohmann::json& j);

// Reply to one posted message.
struct TurnPayload {
  std::string response;
  double uncertainty = 0.0;
  std::optional<double> wcmi;
  double knowledge_gap = 1.0;
  Action action = Action::kGiveResponse;
  std::string selected_persona;
  std::string feedback;
};

TurnPayload make_payload(const TurnResult& result);
nlohmann::json to_json(const TurnPayload& payload);
TurnPayload payload_from_json(const nlohmann::json& j);

struct SessionRecord {
  std::string session_id;
  std::string created_at;  // ISO 8601, UTC
  eval::Domain domain = eval::Domain::kGeneric;
  SessionConfig config;
  ConversationState state;
  std::vector<TurnPayload> turns;
};

nlohmann::json to_json(const SessionRecord& record);

struct StoreLoad {
  std::vector<SessionRecord> records;
  std::vector<std::string> warnings;
};

class SessionStore {
 public:
  // Creates the directory if needed.
  explicit SessionStore(std::filesystem::path dir);

  const std::filesystem::path& dir() const { return dir_; }

  // Writes the header line. Throws InvalidInput if the id is taken.
  void create(const SessionRecord& record);

  // Appends one turn line and syncs it to disk before returning.
  void append_turn(const std::string& session_id, const TurnPayload& payload,
                   const ConversationState& state);

  // Returns false when the session file did not exist.
  bool erase(const std::string& session_id);

  // Reads every session file. A torn final line (crash mid-write) is dropped
  // and truncated away; files without a readable header are skipped.
  StoreLoad load_all();

 private:
  std::filesystem::path path_for(const std::string& session_id) const;

  std::filesystem::path dir_;
};

// Random 128-bit hex token.
std::string new_session_id();

// Current UTC time as "YYYY-MM-DDTHH:MM:SS.mmmZ".
std::string utc_timestamp();

}  // namespace cper::service
