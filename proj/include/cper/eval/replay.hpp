#pragma once

// Batch replay of transcripts through the strategies, and judging of the
// resulting responses file.

#include <cstdint>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "cper/backend_factory.hpp"
#include "cper/eval/judge.hpp"
#include "cper/eval/report.hpp"
#include "cper/eval/strategies.hpp"
#include "cper/eval/transcript.hpp"

namespace cper::eval {

struct TurnRecord {
  std::size_t turn = 0;
  std::string user_input;
  std::vector<ChatMessage> history;  // ground truth before the turn
  std::optional<std::string> reference;
  std::map<StrategyKind, std::string> responses;
};

struct DialogueResponses {
  std::string id;
  Domain domain = Domain::kMovies;
  std::vector<TurnRecord> turns;
  std::map<StrategyKind, std::string> errors;  // strategies cut short by a backend failure
};

struct ResponsesFile {
  std::uint64_t seed = 0;
  std::vector<StrategyKind> strategies;
  std::vector<DialogueResponses> dialogues;
};

nlohmann::json to_json(const ResponsesFile& file);
ResponsesFile responses_from_json(const nlohmann::json& doc);

struct ReplayConfig {
  std::vector<StrategyKind> strategies{kAllStrategies.begin(), kAllStrategies.end()};
  StrategyConfig strategy;
  std::size_t workers = 4;
  std::uint64_t seed = 0;  // recorded in the responses file
};

struct ReplayOutput {
  ResponsesFile responses;
  std::vector<std::string> run_log;  // cper run-log lines, in dialogue order
  std::size_t failed_dialogues = 0;  // dialogues where some strategy hit a backend failure
};

// Dialogues run concurrently on a bounded worker pool; output order follows
// the input order regardless of scheduling.
ReplayOutput replay(std::span<const DialogueTranscript> transcripts, const Backends& backends,
                    const ReplayConfig& config);

struct EvalConfig {
  JudgeConfig judge;
  std::size_t workers = 4;
};

struct EvalOutput {
  EvalReport report;
  std::vector<JudgeVerdict> verdicts;
  std::vector<LexicalScore> lexical;
};

// Judges every turn and scores every response with a reference reply.
// Throws ValidationError listing "<dialogue> turn <k>: <strategy>" for every
// missing response.
EvalOutput evaluate(const ResponsesFile& responses, ChatModel& judge, const EvalConfig& config);

}  // namespace cper::eval
