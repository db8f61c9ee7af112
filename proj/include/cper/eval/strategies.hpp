#pragma once

// Response strategies compared by the harness: four prompting baselines and
// the full CPER pipeline.

#include <array>
#include <filesystem>
#include <memory>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "cper/backend_factory.hpp"
#include "cper/eval/transcript.hpp"
#include "cper/pipeline.hpp"

namespace cper {
class RunLog;
}

namespace cper::eval {

enum class StrategyKind { kZeroShot, kChainOfThought, kSelfRefine, kRationaleOfThought, kCper };

inline constexpr std::array kAllStrategies{
    StrategyKind::kZeroShot, StrategyKind::kChainOfThought, StrategyKind::kSelfRefine,
    StrategyKind::kRationaleOfThought, StrategyKind::kCper};

// "zero-shot", "chain-of-thought", "self-refine", "rationale-of-thought", "cper".
std::string_view to_string(StrategyKind kind);
// Also accepts the short labels 0S, CoT, SR, RoT (any case). nullopt if unknown.
std::optional<StrategyKind> parse_strategy(std::string_view text);

// Comma-separated names, or "all".
std::vector<StrategyKind> parse_strategy_list(std::string_view text);

struct StrategyConfig {
  PipelineConfig pipeline;
  int refine_iterations = 1;  // self-refine feedback/refine rounds
  std::optional<std::filesystem::path> prompts_dir;
};

struct TurnResponse {
  std::size_t turn = 0;  // 0-based user-turn index
  std::string text;
};

struct StrategyRun {
  std::vector<TurnResponse> responses;
  std::optional<std::string> error;  // set when a backend failure cut the run short
};

// Replays the transcript with teacher forcing: each user turn is answered
// given the ground-truth history before it, never the strategy's own earlier
// replies. For cper, the pipeline's persona history still accumulates over
// the dialogue and `log` (if any) receives its per-turn records.
StrategyRun run_strategy(StrategyKind kind, const DialogueTranscript& transcript,
                         const Backends& backends, const StrategyConfig& config,
                         std::shared_ptr<RunLog> log = nullptr);

}  // namespace cper::eval
