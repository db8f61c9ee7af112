#pragma once

// Blind A/B preference judging: the five strategy responses are shown as
// unlabelled options in a seeded random order, and the judge's pick is mapped
// back to a strategy.

#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "cper/eval/strategies.hpp"
#include "cper/eval/transcript.hpp"
#include "cper/model_gateway.hpp"

namespace cper::eval {

// Display order for one turn: option k shows the response of order[k-1].
// A Fisher-Yates shuffle driven by mt19937_64 seeded from
// (seed, dialogue id, turn), so it is reproducible and independent per turn.
std::vector<StrategyKind> option_order(std::uint64_t seed, std::string_view dialogue_id,
                                       std::size_t turn);

// Maps the judge's best_response text to a strategy: "option 3", "Option 3",
// "3", or a strategy label ("cper", "CoT", ...). nullopt means abstention.
std::optional<StrategyKind> resolve_choice(std::string_view choice,
                                           std::span<const StrategyKind> order);

struct JudgeRequest {
  std::string dialogue_id;
  std::size_t turn = 0;
  Domain domain = Domain::kMovies;
  std::vector<ChatMessage> history;
  std::string user_input;
  std::map<StrategyKind, std::string> responses;  // all five required
};

struct JudgeConfig {
  std::uint64_t seed = 0;
  GenerationConfig generation;
  std::size_t history_window = 20;
  std::optional<std::filesystem::path> prompts_dir;
};

struct JudgeVerdict {
  std::string dialogue_id;
  std::size_t turn = 0;
  std::string thought_process;
  std::string raw_choice;
  std::optional<StrategyKind> best;  // nullopt: abstention
  std::vector<StrategyKind> order;   // what option k showed
};

nlohmann::json to_json(const JudgeVerdict& verdict);

// Throws InvalidInput when a strategy response is missing. Backend failures
// propagate; unparseable verdicts become abstentions.
JudgeVerdict judge_ab(const JudgeRequest& request, ChatModel& judge, const JudgeConfig& config);

// Judge prompt for the request, shown in the given option order.
std::string judge_prompt(const JudgeRequest& request, std::span<const StrategyKind> order,
                         const JudgeConfig& config);

}  // namespace cper::eval
