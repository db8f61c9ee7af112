#pragma once

// JSON mapping of the domain types. Field names are the ones used on the
// wire by the service and in run logs.

#include <nlohmann/json.hpp>

#include "cper/embedding.hpp"
#include "cper/gap_math.hpp"
#include "cper/model_gateway.hpp"
#include "cper/pipeline.hpp"

namespace nlohmann {

template <>
struct adl_serializer<cper::Embedding> {
  static cper::Embedding from_json(const json& j) {
    return cper::Embedding(j.get<std::vector<double>>());
  }
  static void to_json(json& j, const cper::Embedding& e) {
    j = std::vector<double>(e.values().begin(), e.values().end());
  }
};

}  // namespace nlohmann

namespace cper {

namespace gap {
void to_json(nlohmann::json& j, const GapParams& p);
void from_json(const nlohmann::json& j, GapParams& p);
}  // namespace gap

void to_json(nlohmann::json& j, const Role& r);
void from_json(const nlohmann::json& j, Role& r);
void to_json(nlohmann::json& j, const ChatMessage& m);
void from_json(const nlohmann::json& j, ChatMessage& m);
void to_json(nlohmann::json& j, const GenerationConfig& c);
void from_json(const nlohmann::json& j, GenerationConfig& c);

void to_json(nlohmann::json& j, const Action& a);
void from_json(const nlohmann::json& j, Action& a);
void to_json(nlohmann::json& j, const UncertaintySource& s);
void from_json(const nlohmann::json& j, UncertaintySource& s);
void to_json(nlohmann::json& j, const PersonaDraft& d);
void from_json(const nlohmann::json& j, PersonaDraft& d);
void to_json(nlohmann::json& j, const PersonaRecord& p);
void from_json(const nlohmann::json& j, PersonaRecord& p);
void to_json(nlohmann::json& j, const FeedbackRecord& f);
void from_json(const nlohmann::json& j, FeedbackRecord& f);
void to_json(nlohmann::json& j, const TurnDiagnostics& d);
void from_json(const nlohmann::json& j, TurnDiagnostics& d);
void to_json(nlohmann::json& j, const PipelineConfig& c);
void from_json(const nlohmann::json& j, PipelineConfig& c);

// Prompts are not serialized; a loaded state keeps its default PromptSet.
void to_json(nlohmann::json& j, const ConversationState& s);
void from_json(const nlohmann::json& j, ConversationState& s);

void to_json(nlohmann::json& j, const TurnResult& r);

}  // namespace cper
