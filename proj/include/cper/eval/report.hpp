#pragma once

#include <array>
#include <optional>
#include <span>
#include <string>

#include <nlohmann/json.hpp>

#include "cper/eval/judge.hpp"
#include "cper/eval/strategies.hpp"

namespace cper::eval {

struct LexicalScore {
  std::string dialogue_id;
  std::size_t turn = 0;
  StrategyKind strategy = StrategyKind::kCper;
  double bleu = 0.0;
  double rouge_l = 0.0;
};

struct StrategyRow {
  StrategyKind strategy = StrategyKind::kCper;
  std::size_t wins = 0;
  std::optional<double> turn_rate;      // wins / non-abstained verdicts
  std::optional<double> dialogue_rate;  // mean over dialogues of per-dialogue win share
  std::optional<double> mean_bleu;      // over turns with a reference reply
  std::optional<double> mean_rouge_l;
  std::size_t scored_turns = 0;
};

struct EvalReport {
  std::array<StrategyRow, 5> rows;  // kAllStrategies order
  std::size_t verdicts = 0;
  std::size_t abstentions = 0;
  std::size_t dialogues = 0;
  std::size_t turns = 0;
  bool abstention_only = false;  // no verdict could be mapped to a strategy
};

EvalReport build_report(std::span<const JudgeVerdict> verdicts,
                        std::span<const LexicalScore> lexical);

nlohmann::json to_json(const EvalReport& report);

// Aligned-column table for terminals.
std::string to_table(const EvalReport& report);

}  // namespace cper::eval
