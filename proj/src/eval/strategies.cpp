#include "cper/eval/strategies.hpp"

#include <algorithm>
#include <cctype>

#include <spdlog/spdlog.h>

#include "cper/errors.hpp"
#include "cper/prompts.hpp"
#include "cper/structured_output.hpp"
#include "cper/text.hpp"

namespace cper::eval {

std::string_view to_string(StrategyKind kind) {
  switch (kind) {
    case StrategyKind::kZeroShot:
      return "zero-shot";
    case StrategyKind::kChainOfThought:
      return "chain-of-thought";
    case StrategyKind::kSelfRefine:
      return "self-refine";
    case StrategyKind::kRationaleOfThought:
      return "rationale-of-thought";
    case StrategyKind::kCper:
      return "cper";
  }
  return "cper";
}

std::optional<StrategyKind> parse_strategy(std::string_view text) {
  const auto t = to_lower(trim(text));
  for (auto kind : kAllStrategies) {
    if (t == to_string(kind)) return kind;
  }
  if (t == "0s" || t == "zs" || t == "zero shot" || t == "zeroshot") return StrategyKind::kZeroShot;
  if (t == "cot" || t == "chain of thought") return StrategyKind::kChainOfThought;
  if (t == "sr" || t == "self refine" || t == "selfrefine") return StrategyKind::kSelfRefine;
  if (t == "rot" || t == "rationale of thought") return StrategyKind::kRationaleOfThought;
  return std::nullopt;
}

std::vector<StrategyKind> parse_strategy_list(std::string_view text) {
  if (trim(text) == "all") return {kAllStrategies.begin(), kAllStrategies.end()};
  std::vector<StrategyKind> out;
  for (const auto& name : split(text, ',')) {
    const auto kind = parse_strategy(name);
    if (!kind) throw InvalidInput("unknown strategy '" + std::string(trim(name)) + "'");
    if (std::find(out.begin(), out.end(), *kind) == out.end()) out.push_back(*kind);
  }
  if (out.empty()) throw InvalidInput("no strategies selected");
  return out;
}

namespace {

// The named field of a JSON reply, or the raw text when the reply has none.
std::string field_or_raw(const std::string& raw, std::string_view field) {
  if (const auto parsed = parse_structured_output(raw)) {
    if (auto v = text_field(parsed->value, field)) return std::string(trim(*v));
  }
  spdlog::debug("reply without a '{}' field; using raw text", field);
  return std::string(trim(raw));
}

class Baseline {
 public:
  Baseline(StrategyKind kind, ChatModel& chat, const StrategyConfig& config)
      : kind_(kind), chat_(chat), config_(config) {
    auto load = [&](const char* name) { return load_prompt(name, config.prompts_dir); };
    switch (kind) {
      case StrategyKind::kZeroShot:
        main_ = load("zero_shot");
        break;
      case StrategyKind::kChainOfThought:
        main_ = load("chain_of_thought");
        break;
      case StrategyKind::kRationaleOfThought:
        main_ = load("rationale_of_thought");
        break;
      case StrategyKind::kSelfRefine:
        main_ = load("self_refine_draft");
        critique_ = load("self_refine_feedback");
        rewrite_ = load("self_refine_refine");
        break;
      case StrategyKind::kCper:
        throw InvalidInput("cper is not a prompting baseline");
    }
  }

  std::string respond(std::span<const ChatMessage> history, const std::string& user_input) {
    PromptValues values{
        {"conversation_history", render_history(history, config_.pipeline.history_window)},
        {"user_input", user_input}};
    auto response = field_or_raw(ask(fill_template(main_, values)), "response");
    if (kind_ != StrategyKind::kSelfRefine) return response;

    for (int i = 0; i < config_.refine_iterations; ++i) {
      values["draft_response"] = response;
      const auto critique = field_or_raw(ask(fill_template(critique_, values)), "feedback");
      values["feedback"] = critique;
      auto refined = field_or_raw(ask(fill_template(rewrite_, values)), "response");
      if (!refined.empty()) response = std::move(refined);
    }
    return response;
  }

 private:
  std::string ask(const std::string& prompt) {
    const ChatMessage message{Role::kUser, prompt};
    auto single = config_.pipeline.generation;
    single.sample_count = 1;
    return chat_.complete(std::span(&message, 1), single);
  }

  StrategyKind kind_;
  ChatModel& chat_;
  const StrategyConfig& config_;
  std::string main_, critique_, rewrite_;
};

}  // namespace

StrategyRun run_strategy(StrategyKind kind, const DialogueTranscript& transcript,
                         const Backends& backends, const StrategyConfig& config,
                         std::shared_ptr<RunLog> log) {
  if (config.refine_iterations < 1) throw InvalidInput("refine_iterations must be >= 1");
  const auto turns = transcript.user_turn_count();
  if (turns == 0) throw InvalidInput("transcript " + transcript.id + " has no user turns");

  StrategyRun run;
  try {
    if (kind == StrategyKind::kCper) {
      Pipeline pipeline(backends.chat, backends.embedder, std::move(log));
      ConversationState state;
      state.id = transcript.id;
      state.config = config.pipeline;
      state.prompts = PromptSet::load(config.prompts_dir);
      state.chat_history = transcript.history_before(0);
      for (std::size_t k = 0; k < turns; ++k) {
        auto result = pipeline.run_turn(state, transcript.user_turn(k).text);
        run.responses.push_back({k, result.final_response});
        // Teacher forcing: the next turn sees the recorded reply.
        if (const auto* ref = transcript.reference_after(k)) {
          state.chat_history.back().content = ref->text;
        }
      }
    } else {
      Baseline baseline(kind, *backends.chat, config);
      for (std::size_t k = 0; k < turns; ++k) {
        run.responses.push_back(
            {k, baseline.respond(transcript.history_before(k), transcript.user_turn(k).text)});
      }
    }
  } catch (const BackendUnavailable& e) {
    run.error = e.what();
  }
  return run;
}

}  // namespace cper::eval
