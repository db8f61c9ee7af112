#pragma once

// One CPER turn: extract persona + candidates, score the knowledge gap,
// generate feedback, select a persona and refine the response.

#include <memory>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "cper/embedding.hpp"
#include "cper/gap_math.hpp"
#include "cper/model_gateway.hpp"
#include "cper/prompts.hpp"

namespace cper {

class RunLog;

inline constexpr std::string_view kPersonaDelimiter = "; ";

// Persona sub-sentences from one sample, before embedding.
struct PersonaDraft {
  std::vector<std::string> sub_sentences;
  std::string persona_text;  // sub-sentences joined by "; ", or "[empty]"

  friend bool operator==(const PersonaDraft&, const PersonaDraft&) = default;
};

PersonaDraft make_persona_draft(std::vector<std::string> sub_sentences);

struct PersonaRecord {
  int turn_index = 0;  // 1-based
  std::vector<std::string> sub_sentences;
  std::string persona_text;
  Embedding embedding{0.0};

  friend bool operator==(const PersonaRecord&, const PersonaRecord&) = default;
};

enum class Action { kFollowUpQuestion, kGiveResponse };

std::string_view to_string(Action action);
// Accepts both prompt vocabularies ("Follow up question", "Follow-Up Question",
// "Give response", "Give Response based on the feedback") and the enum
// spellings. nullopt when unrecognized.
std::optional<Action> parse_action(std::string_view text);

struct FeedbackRecord {
  std::string thought_process;
  std::string feedback;
  Action action = Action::kGiveResponse;
  std::string suggested_response;
  bool warning = false;  // output unparseable or action unrecognized

  friend bool operator==(const FeedbackRecord&, const FeedbackRecord&) = default;
};

struct TurnDiagnostics {
  double uncertainty = 0.0;
  std::optional<double> wcmi;  // absent on the first turn
  double knowledge_gap = 1.0;
  std::vector<double> attention;
  int sample_count = 0;
  Action action = Action::kGiveResponse;

  friend bool operator==(const TurnDiagnostics&, const TurnDiagnostics&) = default;
};

enum class UncertaintySource { kResponses, kPersonas };

std::string_view to_string(UncertaintySource source);
UncertaintySource parse_uncertainty_source(std::string_view text);

struct PipelineConfig {
  gap::GapParams params;
  GenerationConfig generation;
  UncertaintySource uncertainty_source = UncertaintySource::kResponses;
  std::size_t history_window = 20;  // chat messages rendered into prompts

  // Throws ValidationError naming every bad field.
  void validate() const;
};

struct ConversationState {
  std::string id;
  std::vector<ChatMessage> chat_history;
  std::vector<PersonaRecord> persona_history;
  std::vector<TurnDiagnostics> diagnostics;
  PipelineConfig config;
  PromptSet prompts = PromptSet::defaults();
};

struct TurnResult {
  int turn_index = 0;
  std::string user_input;
  std::vector<std::string> initial_candidates;
  std::vector<PersonaDraft> persona_drafts;
  PersonaRecord persona;
  TurnDiagnostics diagnostics;
  FeedbackRecord feedback;
  std::string selected_persona;
  std::string final_response;
  std::vector<std::string> warnings;

  // Inputs of the gap computation, kept so it can be recomputed offline.
  std::vector<Embedding> uncertainty_embeddings;
  std::vector<Embedding> prior_persona_embeddings;
};

struct DialogueOutcome {
  std::vector<TurnResult> results;
  std::optional<std::string> error;  // set when a backend failure cut the run short
};

// "User: ..." / "Assistant: ..." lines, most recent last, limited to the
// latest `window` messages. "(none)" when empty.
std::string render_history(std::span<const ChatMessage> history, std::size_t window);

// "1. text" lines. "(none)" when empty.
std::string render_numbered(std::span<const std::string> items);

class Pipeline {
 public:
  Pipeline(std::shared_ptr<ChatModel> chat, std::shared_ptr<EmbeddingModel> embedder,
           std::shared_ptr<RunLog> log = nullptr);

  struct Extraction {
    std::vector<std::string> candidates;
    std::vector<PersonaDraft> personas;
    std::vector<std::string> warnings;
  };

  Extraction extract_persona_and_initial(const ConversationState& state,
                                         std::string_view user_input);

  struct Scoring {
    TurnDiagnostics diagnostics;
    std::vector<Embedding> uncertainty_embeddings;
    std::vector<Embedding> prior_persona_embeddings;
    std::vector<std::string> warnings;
  };

  // `persona` is this turn's record, not yet in state.persona_history.
  Scoring score_turn(const ConversationState& state, std::span<const std::string> candidates,
                     std::span<const PersonaDraft> drafts, const PersonaRecord& persona);

  FeedbackRecord generate_feedback(const ConversationState& state, std::string_view user_input,
                                   std::string_view initial_response, double knowledge_gap);

  // Picks among the persona texts in state.persona_history. With a single
  // record (or none, in which case `current_persona` is used) no model call
  // is made.
  std::string select_persona(const ConversationState& state, std::string_view user_input,
                             const FeedbackRecord& feedback, std::string_view current_persona,
                             std::vector<std::string>* warnings = nullptr);

  // Returns y_t and appends the user input and y_t to state.chat_history.
  std::string refine_response(ConversationState& state, std::string_view user_input,
                              const FeedbackRecord& feedback, std::string_view selected_persona,
                              std::span<const std::string> candidates,
                              std::vector<std::string>* warnings = nullptr);

  TurnResult run_turn(ConversationState& state, std::string_view user_input);

  DialogueOutcome run_dialogue(ConversationState& state, std::span<const std::string> user_turns);

 private:
  std::string call(const std::string& prompt, const GenerationConfig& config);

  std::shared_ptr<ChatModel> chat_;
  std::shared_ptr<EmbeddingModel> embedder_;
  std::shared_ptr<RunLog> log_;
};

}  // namespace cper
