#include "cper/pipeline.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>

#include <spdlog/spdlog.h>

#include "cper/errors.hpp"
#include "cper/run_log.hpp"
#include "cper/serialization.hpp"
#include "cper/structured_output.hpp"
#include "cper/text.hpp"

namespace cper {

using nlohmann::json;

namespace {

// Newlines would break the line-oriented prompt layout.
std::string one_line(std::string_view text) {
  std::string out(trim(text));
  for (char& c : out) {
    if (c == '\n' || c == '\r') c = ' ';
  }
  return out;
}

std::vector<std::string> split_sub_sentences(const json& value) {
  std::vector<std::string> out;
  auto add = [&](std::string_view piece) {
    auto t = trim(piece);
    if (!t.empty()) out.emplace_back(t);
  };
  if (value.is_string()) {
    for (const auto& piece : split(value.get<std::string>(), ',')) add(piece);
  } else if (value.is_array()) {
    for (const auto& item : value) {
      if (item.is_string()) add(item.get<std::string>());
    }
  }
  return out;
}

// The object holding the stage's payload: `key` if present, else the root.
const json& section(const json& root, std::string_view key) {
  const json* inner = find_field(root, key);
  return inner && inner->is_object() ? *inner : root;
}

std::string render_feedback(const FeedbackRecord& f) {
  std::string out = one_line(f.feedback);
  out += " Action: ";
  out += f.action == Action::kFollowUpQuestion ? "Follow up question" : "Give response";
  out += ".";
  if (!trim(f.suggested_response).empty()) {
    out += " Suggested_Response: " + one_line(f.suggested_response);
  }
  return out;
}

void warn(std::vector<std::string>* sink, std::string message) {
  spdlog::warn("{}", message);
  if (sink) sink->push_back(std::move(message));
}

}  // namespace

PersonaDraft make_persona_draft(std::vector<std::string> sub_sentences) {
  PersonaDraft d;
  for (auto& s : sub_sentences) {
    auto t = one_line(s);
    if (!t.empty()) d.sub_sentences.push_back(std::move(t));
  }
  d.persona_text = d.sub_sentences.empty() ? std::string(kEmptyPlaceholder)
                                           : join(d.sub_sentences, kPersonaDelimiter);
  return d;
}

std::string_view to_string(Action action) {
  return action == Action::kFollowUpQuestion ? "follow-up-question" : "give-response";
}

std::optional<Action> parse_action(std::string_view text) {
  std::string letters;
  for (unsigned char c : text) {
    if (std::isalpha(c)) letters += static_cast<char>(std::tolower(c));
  }
  if (letters.starts_with("followup")) return Action::kFollowUpQuestion;
  if (letters.starts_with("giveresponse")) return Action::kGiveResponse;
  return std::nullopt;
}

std::string_view to_string(UncertaintySource source) {
  return source == UncertaintySource::kPersonas ? "personas" : "responses";
}

UncertaintySource parse_uncertainty_source(std::string_view text) {
  if (text == "responses") return UncertaintySource::kResponses;
  if (text == "personas") return UncertaintySource::kPersonas;
  throw InvalidInput("uncertainty_source must be 'responses' or 'personas', got '" +
                     std::string(text) + "'");
}

void PipelineConfig::validate() const {
  std::vector<std::string> bad;
  if (!std::isfinite(params.alpha) || params.alpha < 0.0) bad.emplace_back("alpha");
  if (!std::isfinite(params.beta) || params.beta < 0.0) bad.emplace_back("beta");
  const auto& g = generation;
  if (!std::isfinite(g.temperature) || g.temperature < 0.0 || g.temperature > 2.0) {
    bad.emplace_back("temperature");
  }
  if (g.sample_count < 2) bad.emplace_back("sample_count");
  if (g.max_tokens < 1) bad.emplace_back("max_tokens");
  if (g.max_retries < 0) bad.emplace_back("max_retries");
  if (g.timeout.count() <= 0) bad.emplace_back("timeout_ms");
  if (history_window < 1) bad.emplace_back("history_window");
  if (!bad.empty()) {
    throw ValidationError("invalid configuration: " + join(bad, ", "), std::move(bad));
  }
}

std::string render_history(std::span<const ChatMessage> history, std::size_t window) {
  if (history.empty()) return "(none)";
  const auto skip = history.size() > window ? history.size() - window : 0;
  std::string out;
  for (const auto& m : history.subspan(skip)) {
    if (!out.empty()) out += '\n';
    out += m.role == Role::kAssistant ? "Assistant: " : "User: ";
    out += one_line(m.content);
  }
  return out;
}

std::string render_numbered(std::span<const std::string> items) {
  if (items.empty()) return "(none)";
  std::string out;
  for (std::size_t i = 0; i < items.size(); ++i) {
    if (i) out += '\n';
    out += std::to_string(i + 1) + ". " + one_line(items[i]);
  }
  return out;
}

Pipeline::Pipeline(std::shared_ptr<ChatModel> chat, std::shared_ptr<EmbeddingModel> embedder,
                   std::shared_ptr<RunLog> log)
    : chat_(std::move(chat)), embedder_(std::move(embedder)), log_(std::move(log)) {
  if (!chat_ || !embedder_) throw InvalidInput("pipeline needs a chat and an embedding model");
}

std::string Pipeline::call(const std::string& prompt, const GenerationConfig& config) {
  const ChatMessage message{Role::kUser, prompt};
  auto single = config;
  single.sample_count = 1;
  return chat_->complete(std::span(&message, 1), single);
}

Pipeline::Extraction Pipeline::extract_persona_and_initial(const ConversationState& state,
                                                           std::string_view user_input) {
  if (trim(user_input).empty()) throw InvalidInput("user input is empty");
  const auto prompt =
      fill_template(state.prompts.gen, {{"user_input", std::string(trim(user_input))}});
  const ChatMessage message{Role::kUser, prompt};
  const auto samples = chat_->sample_n(std::span(&message, 1), state.config.generation);

  Extraction out;
  for (std::size_t i = 0; i < samples.size(); ++i) {
    const auto parsed = parse_structured_output(samples[i]);
    std::optional<std::string> response;
    std::vector<std::string> subs;
    if (parsed) {
      const json& result = section(parsed->value, "result");
      response = text_field(result, "response");
      if (const json* s = find_field(result, "sub_sentence")) subs = split_sub_sentences(*s);
      if (response && !parsed->repairs.empty()) {
        out.warnings.push_back("generation sample " + std::to_string(i + 1) + " repaired (" +
                               join(parsed->repairs, ", ") + ")");
        spdlog::debug("{}", out.warnings.back());
      }
    }
    if (!response) {
      warn(&out.warnings, "generation sample " + std::to_string(i + 1) +
                              " unparseable; using raw text with empty persona");
      response = std::string(trim(samples[i]));
      subs.clear();
    }
    out.candidates.push_back(std::move(*response));
    out.personas.push_back(make_persona_draft(std::move(subs)));
  }
  return out;
}

Pipeline::Scoring Pipeline::score_turn(const ConversationState& state,
                                       std::span<const std::string> candidates,
                                       std::span<const PersonaDraft> drafts,
                                       const PersonaRecord& persona) {
  if (candidates.size() < 2) throw InvalidInput("scoring needs at least two candidates");
  Scoring out;
  std::vector<std::string> texts;
  if (state.config.uncertainty_source == UncertaintySource::kPersonas) {
    if (drafts.size() != candidates.size()) {
      throw InvalidInput("persona drafts and candidates differ in count");
    }
    for (const auto& d : drafts) texts.push_back(d.persona_text);
  } else {
    texts.assign(candidates.begin(), candidates.end());
  }
  out.uncertainty_embeddings = embedder_->embed(texts);
  for (const auto& p : state.persona_history) out.prior_persona_embeddings.push_back(p.embedding);

  gap::GapScore score;
  try {
    score = gap::score_turn(out.uncertainty_embeddings, out.prior_persona_embeddings,
                            persona.embedding, state.config.params);
  } catch (const DegenerateVector& e) {
    warn(&out.warnings, std::string("degenerate embedding (") + e.what() +
                            "); using neutral cosine 0 for it");
    score = gap::score_turn(out.uncertainty_embeddings, out.prior_persona_embeddings,
                            persona.embedding, state.config.params,
                            gap::DegeneratePolicy::kNeutral);
  }
  out.diagnostics.uncertainty = score.uncertainty;
  out.diagnostics.wcmi = score.wcmi;
  out.diagnostics.knowledge_gap = score.knowledge_gap;
  out.diagnostics.attention = std::move(score.attention);
  out.diagnostics.sample_count = static_cast<int>(candidates.size());
  return out;
}

FeedbackRecord Pipeline::generate_feedback(const ConversationState& state,
                                           std::string_view user_input,
                                           std::string_view initial_response,
                                           double knowledge_gap) {
  if (!std::isfinite(knowledge_gap)) throw InvalidInput("knowledge gap is not finite");
  std::vector<std::string> prior;
  for (const auto& p : state.persona_history) prior.push_back(p.persona_text);
  auto history = state.chat_history;
  history.push_back({Role::kUser, std::string(trim(user_input))});

  const auto prompt = fill_template(
      state.prompts.fb, {{"previous_persona_text", render_numbered(prior)},
                         {"conversation_history", render_history(history, state.config.history_window)},
                         {"knowledge_gap", fixed(knowledge_gap, 4)},
                         {"user_input", one_line(user_input)},
                         {"initial_response", one_line(initial_response)}});
  const auto raw = call(prompt, state.config.generation);

  FeedbackRecord f;
  const auto parsed = parse_structured_output(raw);
  const json* rec = parsed ? find_field(parsed->value, "recommendation") : nullptr;
  if (!rec || !rec->is_object()) {
    f.feedback = std::string(trim(raw));
    f.warning = true;
    return f;
  }
  f.thought_process = text_field(parsed->value, "thought_process").value_or("");
  f.feedback = text_field(*rec, "feedback").value_or("");
  f.suggested_response = text_field(*rec, "suggested_response").value_or("");
  if (auto action = parse_action(text_field(*rec, "action").value_or(""))) {
    f.action = *action;
  } else {
    f.action = Action::kGiveResponse;
    f.warning = true;
  }
  return f;
}

std::string Pipeline::select_persona(const ConversationState& state, std::string_view user_input,
                                     const FeedbackRecord& feedback,
                                     std::string_view current_persona,
                                     std::vector<std::string>* warnings) {
  std::vector<std::string> personas;
  for (const auto& p : state.persona_history) personas.push_back(p.persona_text);
  if (personas.empty()) return std::string(current_persona);
  if (personas.size() == 1) return personas.front();

  const auto prompt = fill_template(state.prompts.select,
                                    {{"user_input", one_line(user_input)},
                                     {"previous_persona_text", render_numbered(personas)},
                                     {"feedback", one_line(feedback.feedback)}});
  const auto raw = call(prompt, state.config.generation);
  std::optional<std::string> chosen;
  if (const auto parsed = parse_structured_output(raw)) {
    chosen = text_field(section(parsed->value, "response"), "selected_persona");
  }
  if (!chosen || trim(*chosen).empty()) {
    warn(warnings, "persona selection unparseable; using the most recent persona");
    return personas.back();
  }
  // A bare list number refers to the numbered persona.
  const auto t = trim(*chosen);
  if (std::all_of(t.begin(), t.end(), [](unsigned char c) { return std::isdigit(c); }) &&
      t.size() < 4) {
    const auto k = static_cast<std::size_t>(std::stoi(std::string(t)));
    if (k >= 1 && k <= personas.size()) return personas[k - 1];
  }
  return std::string(t);
}

std::string Pipeline::refine_response(ConversationState& state, std::string_view user_input,
                                      const FeedbackRecord& feedback,
                                      std::string_view selected_persona,
                                      std::span<const std::string> candidates,
                                      std::vector<std::string>* warnings) {
  const auto prompt = fill_template(
      state.prompts.refine,
      {{"selected_persona_text", one_line(selected_persona)},
       {"conversation_history", render_history(state.chat_history, state.config.history_window)},
       {"user_input", one_line(user_input)},
       {"feedback", render_feedback(feedback)}});
  const auto raw = call(prompt, state.config.generation);

  std::string text;
  if (const auto parsed = parse_structured_output(raw)) {
    text = std::string(trim(text_field(section(parsed->value, "response"), "text").value_or("")));
  }
  if (text.empty()) {
    if (!trim(feedback.suggested_response).empty()) {
      warn(warnings, "refined response unparseable; using the suggested response");
      text = std::string(trim(feedback.suggested_response));
    } else {
      const auto it = std::find_if(candidates.begin(), candidates.end(),
                                   [](const std::string& c) { return !trim(c).empty(); });
      if (it == candidates.end()) {
        throw ProtocolError("model produced no usable response for this turn");
      }
      warn(warnings, "refined response unparseable; using the first initial candidate");
      text = std::string(trim(*it));
    }
  }
  state.chat_history.push_back({Role::kUser, std::string(trim(user_input))});
  state.chat_history.push_back({Role::kAssistant, text});
  return text;
}

TurnResult Pipeline::run_turn(ConversationState& state, std::string_view user_input) {
  if (trim(user_input).empty()) throw InvalidInput("user input is empty");
  state.config.validate();

  TurnResult r;
  r.turn_index = static_cast<int>(state.persona_history.size()) + 1;
  r.user_input = std::string(trim(user_input));

  auto extraction = extract_persona_and_initial(state, r.user_input);
  r.initial_candidates = std::move(extraction.candidates);
  r.persona_drafts = std::move(extraction.personas);
  r.warnings = std::move(extraction.warnings);

  // Only the first sample's persona enters the history.
  const auto& first = r.persona_drafts.front();
  r.persona = PersonaRecord{r.turn_index, first.sub_sentences, first.persona_text,
                            embedder_->embed_one(first.persona_text)};

  auto scoring = score_turn(state, r.initial_candidates, r.persona_drafts, r.persona);
  r.diagnostics = std::move(scoring.diagnostics);
  r.uncertainty_embeddings = std::move(scoring.uncertainty_embeddings);
  r.prior_persona_embeddings = std::move(scoring.prior_persona_embeddings);
  r.warnings.insert(r.warnings.end(), scoring.warnings.begin(), scoring.warnings.end());

  r.feedback = generate_feedback(state, r.user_input, r.initial_candidates.front(),
                                 r.diagnostics.knowledge_gap);
  if (r.feedback.warning) {
    warn(&r.warnings, "feedback output unparseable or action unrecognized; action defaults to "
                      "give-response");
  }
  r.diagnostics.action = r.feedback.action;

  state.persona_history.push_back(r.persona);
  try {
    r.selected_persona =
        select_persona(state, r.user_input, r.feedback, r.persona.persona_text, &r.warnings);
    r.final_response = refine_response(state, r.user_input, r.feedback, r.selected_persona,
                                       r.initial_candidates, &r.warnings);
  } catch (...) {
    state.persona_history.pop_back();
    throw;
  }
  state.diagnostics.push_back(r.diagnostics);

  if (log_) log_->append(turn_record(state, r));
  return r;
}

DialogueOutcome Pipeline::run_dialogue(ConversationState& state,
                                       std::span<const std::string> user_turns) {
  if (user_turns.empty()) throw InvalidInput("dialogue has no user turns");
  DialogueOutcome out;
  for (const auto& turn : user_turns) {
    try {
      out.results.push_back(run_turn(state, turn));
    } catch (const BackendUnavailable& e) {
      out.error = e.what();
      break;
    }
  }
  return out;
}

}  // namespace cper
