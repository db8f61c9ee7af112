#include "cper/eval/judge.hpp"

#include <algorithm>
#include <cctype>
#include <random>

#include "cper/errors.hpp"
#include "cper/hashing.hpp"
#include "cper/pipeline.hpp"
#include "cper/prompts.hpp"
#include "cper/structured_output.hpp"
#include "cper/text.hpp"

namespace cper::eval {

std::vector<StrategyKind> option_order(std::uint64_t seed, std::string_view dialogue_id,
                                       std::size_t turn) {
  std::vector<StrategyKind> order(kAllStrategies.begin(), kAllStrategies.end());
  std::mt19937_64 rng(hash_combine(fnv1a64(dialogue_id, seed), turn));
  for (std::size_t i = order.size() - 1; i > 0; --i) {
    const auto j = static_cast<std::size_t>(rng() % (i + 1));
    std::swap(order[i], order[j]);
  }
  return order;
}

std::optional<StrategyKind> resolve_choice(std::string_view choice,
                                           std::span<const StrategyKind> order) {
  auto t = to_lower(trim(choice));
  if (t.starts_with("option")) t = std::string(trim(std::string_view(t).substr(6)));
  while (!t.empty() && (t.back() == '.' || t.back() == ')')) t.pop_back();
  if (!t.empty() && std::all_of(t.begin(), t.end(), [](unsigned char c) { return std::isdigit(c); })) {
    if (t.size() > 2) return std::nullopt;
    const auto k = static_cast<std::size_t>(std::stoi(t));
    if (k >= 1 && k <= order.size()) return order[k - 1];
    return std::nullopt;
  }
  if (t.ends_with(" response")) t.resize(t.size() - 9);
  return parse_strategy(t);
}

std::string judge_prompt(const JudgeRequest& request, std::span<const StrategyKind> order,
                         const JudgeConfig& config) {
  std::string options;
  for (std::size_t k = 0; k < order.size(); ++k) {
    if (k) options += '\n';
    std::string text = request.responses.at(order[k]);
    for (char& c : text) {
      if (c == '\n' || c == '\r') c = ' ';
    }
    options += "option " + std::to_string(k + 1) + " : " + text;
  }
  const auto tmpl = load_prompt(
      request.domain == Domain::kSupport ? "judge_support" : "judge_movies", config.prompts_dir);
  return fill_template(tmpl, {{"chat_history", render_history(request.history, config.history_window)},
                              {"user_input", request.user_input},
                              {"response_options", options}});
}

nlohmann::json to_json(const JudgeVerdict& v) {
  nlohmann::json order = nlohmann::json::array();
  for (auto kind : v.order) order.push_back(to_string(kind));
  return {{"dialogue_id", v.dialogue_id},
          {"turn", v.turn},
          {"order", order},
          {"raw_choice", v.raw_choice},
          {"best", v.best ? nlohmann::json(to_string(*v.best)) : nlohmann::json(nullptr)},
          {"thought_process", v.thought_process}};
}

JudgeVerdict judge_ab(const JudgeRequest& request, ChatModel& judge, const JudgeConfig& config) {
  std::vector<std::string> missing;
  for (auto kind : kAllStrategies) {
    if (!request.responses.contains(kind)) missing.emplace_back(to_string(kind));
  }
  if (!missing.empty()) {
    throw InvalidInput("judge request for " + request.dialogue_id + " turn " +
                       std::to_string(request.turn) + " lacks: " + join(missing, ", "));
  }

  JudgeVerdict v;
  v.dialogue_id = request.dialogue_id;
  v.turn = request.turn;
  v.order = option_order(config.seed, request.dialogue_id, request.turn);

  const ChatMessage message{Role::kUser, judge_prompt(request, v.order, config)};
  auto single = config.generation;
  single.sample_count = 1;
  const auto raw = judge.complete(std::span(&message, 1), single);

  if (const auto parsed = parse_structured_output(raw)) {
    v.thought_process = text_field(parsed->value, "thought_process").value_or("");
    v.raw_choice = text_field(parsed->value, "best_response").value_or("");
  } else {
    v.raw_choice = std::string(trim(raw));
  }
  v.best = resolve_choice(v.raw_choice, v.order);
  return v;
}

}  // namespace cper::eval
