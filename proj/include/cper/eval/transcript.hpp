#pragma once

// Dialogue corpora: CCPE-M, ESConv and the normalized transcript format.

#include <filesystem>
#include <string>
#include <string_view>
#include <vector>

#include <nlohmann/json.hpp>

#include "cper/model_gateway.hpp"

namespace cper::eval {

enum class Domain { kMovies, kSupport, kGeneric };

std::string_view to_string(Domain domain);
Domain parse_domain(std::string_view text);

enum class Speaker { kUser, kAssistant };

struct Turn {
  Speaker speaker = Speaker::kUser;
  std::string text;
  nlohmann::json meta = nlohmann::json::object();
};

// Normalized dialogue: turns alternate user/assistant, starting with the user.
// Assistant text that preceded the first user turn lives in `context`.
struct DialogueTranscript {
  std::string id;
  Domain domain = Domain::kMovies;
  std::vector<std::string> context;
  std::vector<Turn> turns;
  nlohmann::json meta = nlohmann::json::object();

  std::size_t user_turn_count() const;

  // Ground-truth history before the k-th user turn (0-based), context first.
  std::vector<ChatMessage> history_before(std::size_t user_turn) const;
  const Turn& user_turn(std::size_t user_turn) const;
  // The assistant reply following the k-th user turn, if the transcript has one.
  const Turn* reference_after(std::size_t user_turn) const;
};

struct LoadReport {
  std::vector<DialogueTranscript> dialogues;
  std::size_t skipped = 0;
  std::vector<std::string> problems;  // one line per skipped record
};

enum class DatasetKind { kCcpem, kEsconv, kNormalized };

std::string_view to_string(DatasetKind kind);
DatasetKind parse_dataset_kind(std::string_view text);

// Folds leading assistant turns into context, merges consecutive same-speaker
// turns with a newline and drops blank turns. Throws InvalidInput when no user
// turn remains.
DialogueTranscript normalize(std::string id, Domain domain, std::vector<Turn> raw,
                             nlohmann::json meta = nlohmann::json::object());

// Parsers over already-decoded documents. Malformed records are skipped and
// counted; a document of the wrong overall shape throws InvalidInput.
LoadReport parse_ccpem(const nlohmann::json& doc);
LoadReport parse_esconv(const nlohmann::json& doc);
LoadReport parse_normalized(const nlohmann::json& doc);

// Reads and parses a file. An empty (or whitespace-only) file yields no
// dialogues; unreadable or non-JSON files throw InvalidInput.
LoadReport load_ccpem(const std::filesystem::path& path);
LoadReport load_esconv(const std::filesystem::path& path);
LoadReport load_normalized(const std::filesystem::path& path);
LoadReport load_transcripts(DatasetKind kind, const std::filesystem::path& path);

nlohmann::json to_json(const DialogueTranscript& d);

}  // namespace cper::eval
