#include "cper/serialization.hpp"

#include "cper/errors.hpp"

namespace cper {

using nlohmann::json;

namespace gap {

void to_json(json& j, const GapParams& p) { j = json{{"alpha", p.alpha}, {"beta", p.beta}}; }

void from_json(const json& j, GapParams& p) {
  p.alpha = j.at("alpha").get<double>();
  p.beta = j.at("beta").get<double>();
}

}  // namespace gap

void to_json(json& j, const Role& r) { j = std::string(to_string(r)); }
void from_json(const json& j, Role& r) { r = parse_role(j.get<std::string>()); }

void to_json(json& j, const ChatMessage& m) {
  j = json{{"role", m.role}, {"content", m.content}};
}

void from_json(const json& j, ChatMessage& m) {
  j.at("role").get_to(m.role);
  j.at("content").get_to(m.content);
}

void to_json(json& j, const GenerationConfig& c) {
  j = json{{"temperature", c.temperature}, {"sample_count", c.sample_count},
           {"max_tokens", c.max_tokens},   {"model_name", c.model_name},
           {"timeout_ms", c.timeout.count()}, {"max_retries", c.max_retries}};
}

void from_json(const json& j, GenerationConfig& c) {
  c.temperature = j.value("temperature", c.temperature);
  c.sample_count = j.value("sample_count", c.sample_count);
  c.max_tokens = j.value("max_tokens", c.max_tokens);
  c.model_name = j.value("model_name", c.model_name);
  c.timeout = std::chrono::milliseconds(j.value("timeout_ms", c.timeout.count()));
  c.max_retries = j.value("max_retries", c.max_retries);
}

void to_json(json& j, const Action& a) { j = std::string(to_string(a)); }

void from_json(const json& j, Action& a) {
  auto parsed = parse_action(j.get<std::string>());
  if (!parsed) throw InvalidInput("unknown action: " + j.get<std::string>());
  a = *parsed;
}

void to_json(json& j, const UncertaintySource& s) { j = std::string(to_string(s)); }
void from_json(const json& j, UncertaintySource& s) {
  s = parse_uncertainty_source(j.get<std::string>());
}

void to_json(json& j, const PersonaDraft& d) {
  j = json{{"sub_sentences", d.sub_sentences}, {"persona_text", d.persona_text}};
}

void from_json(const json& j, PersonaDraft& d) {
  j.at("sub_sentences").get_to(d.sub_sentences);
  j.at("persona_text").get_to(d.persona_text);
}

void to_json(json& j, const PersonaRecord& p) {
  j = json{{"turn_index", p.turn_index},
           {"sub_sentences", p.sub_sentences},
           {"persona_text", p.persona_text},
           {"embedding", p.embedding}};
}

void from_json(const json& j, PersonaRecord& p) {
  j.at("turn_index").get_to(p.turn_index);
  j.at("sub_sentences").get_to(p.sub_sentences);
  j.at("persona_text").get_to(p.persona_text);
  p.embedding = j.at("embedding").get<Embedding>();
}

void to_json(json& j, const FeedbackRecord& f) {
  j = json{{"thought_process", f.thought_process},
           {"feedback", f.feedback},
           {"action", f.action},
           {"suggested_response", f.suggested_response},
           {"warning", f.warning}};
}

void from_json(const json& j, FeedbackRecord& f) {
  j.at("thought_process").get_to(f.thought_process);
  j.at("feedback").get_to(f.feedback);
  j.at("action").get_to(f.action);
  j.at("suggested_response").get_to(f.suggested_response);
  f.warning = j.value("warning", false);
}

void to_json(json& j, const TurnDiagnostics& d) {
  j = json{{"uncertainty", d.uncertainty},
           {"wcmi", d.wcmi ? json(*d.wcmi) : json(nullptr)},
           {"knowledge_gap", d.knowledge_gap},
           {"attention", d.attention},
           {"sample_count", d.sample_count},
           {"action", d.action}};
}

void from_json(const json& j, TurnDiagnostics& d) {
  j.at("uncertainty").get_to(d.uncertainty);
  const auto& w = j.at("wcmi");
  d.wcmi = w.is_null() ? std::nullopt : std::optional<double>(w.get<double>());
  j.at("knowledge_gap").get_to(d.knowledge_gap);
  j.at("attention").get_to(d.attention);
  j.at("sample_count").get_to(d.sample_count);
  j.at("action").get_to(d.action);
}

void to_json(json& j, const PipelineConfig& c) {
  j = json{{"params", c.params},
           {"generation", c.generation},
           {"uncertainty_source", c.uncertainty_source},
           {"history_window", c.history_window}};
}

void from_json(const json& j, PipelineConfig& c) {
  if (j.contains("params")) j.at("params").get_to(c.params);
  if (j.contains("generation")) j.at("generation").get_to(c.generation);
  if (j.contains("uncertainty_source")) j.at("uncertainty_source").get_to(c.uncertainty_source);
  c.history_window = j.value("history_window", c.history_window);
}

void to_json(json& j, const ConversationState& s) {
  j = json{{"id", s.id},
           {"chat_history", s.chat_history},
           {"persona_history", s.persona_history},
           {"diagnostics", s.diagnostics},
           {"config", s.config}};
}

void from_json(const json& j, ConversationState& s) {
  j.at("id").get_to(s.id);
  j.at("chat_history").get_to(s.chat_history);
  j.at("persona_history").get_to(s.persona_history);
  j.at("diagnostics").get_to(s.diagnostics);
  j.at("config").get_to(s.config);
}

void to_json(json& j, const TurnResult& r) {
  j = json{{"turn_index", r.turn_index},
           {"user_input", r.user_input},
           {"initial_candidates", r.initial_candidates},
           {"persona_drafts", r.persona_drafts},
           {"persona", r.persona},
           {"diagnostics", r.diagnostics},
           {"feedback", r.feedback},
           {"selected_persona", r.selected_persona},
           {"final_response", r.final_response},
           {"warnings", r.warnings},
           {"uncertainty_embeddings", r.uncertainty_embeddings},
           {"prior_persona_embeddings", r.prior_persona_embeddings}};
}

}  // namespace cper
