#include "cper/mock_backend.hpp"

#include <algorithm>
#include <array>
#include <cctype>
#include <cmath>

#include <nlohmann/json.hpp>

#include "cper/hashing.hpp"
#include "cper/text.hpp"

namespace cper {

using nlohmann::json;

namespace {

constexpr std::array kOpeners = {
    "Oh, nice!", "Got it.", "Hmm, interesting.", "I hear you.", "Okay, cool.",
    "That makes sense.", "Love that.", "Ah, I see.",
};
constexpr std::array kBridges = {
    "So you're into", "Sounds like you really care about", "It seems like", "I'm picking up on",
    "Tell me more about", "I'd love to know what draws you to", "So for you it's",
    "Makes me curious about",
};
constexpr std::array kClosers = {
    "What got you hooked?", "Any favorites lately?", "Want a couple of suggestions?",
    "How does that usually feel for you?", "Is that a recent thing?",
    "Should I keep that in mind?", "What would make it even better?",
    "Anything you'd rather avoid?",
};
constexpr std::array kThoughts = {
    "step 1: the user shares something personal; step 2: the gap is moderate; step 3: keep it "
    "short and curious",
    "step 1: review what the user said; step 2: check what is still unknown; step 3: respond and "
    "invite more detail",
    "step 1: note the stated preference; step 2: relate it to earlier turns; step 3: answer "
    "directly",
};

// Value after "Label:" at the start of a line, or empty.
std::string field(std::string_view prompt, std::string_view label) {
  std::size_t pos = 0;
  while ((pos = prompt.find(label, pos)) != std::string_view::npos) {
    if (pos == 0 || prompt[pos - 1] == '\n') {
      const auto start = pos + label.size();
      const auto end = prompt.find('\n', start);
      return std::string(trim(prompt.substr(start, end - start)));
    }
    pos += label.size();
  }
  return {};
}

std::vector<std::string> words(std::string_view text) {
  std::vector<std::string> out;
  std::string cur;
  for (unsigned char c : text) {
    if (std::isalnum(c) || c == '\'' || c == '-') {
      cur += static_cast<char>(std::tolower(c));
    } else if (!cur.empty()) {
      out.push_back(std::move(cur));
      cur.clear();
    }
  }
  if (!cur.empty()) out.push_back(std::move(cur));
  return out;
}

// Most informative-looking word: the longest, first one on ties.
std::string topic(std::string_view text) {
  std::string best;
  for (auto& w : words(text)) {
    if (w.size() > best.size()) best = w;
  }
  return best.empty() ? "that" : best;
}

bool is_first_person(std::string_view clause) {
  for (const auto& w : words(clause)) {
    if (w == "i" || w == "i'm" || w == "im" || w == "i've" || w == "i'd" || w == "my" ||
        w == "me" || w == "myself" || w == "we" || w == "our") {
      return true;
    }
  }
  return false;
}

// Clauses of the user input that talk about the user.
std::vector<std::string> persona_clauses(std::string_view input) {
  std::vector<std::string> out;
  std::string cur;
  auto flush = [&] {
    auto t = std::string(trim(cur));
    if (!t.empty() && is_first_person(t)) out.push_back(std::move(t));
    cur.clear();
  };
  for (char c : input) {
    if (c == '.' || c == '!' || c == '?' || c == ';' || c == ',') {
      flush();
    } else {
      cur += c;
    }
  }
  flush();
  return out;
}

template <std::size_t N>
const char* pick(const std::array<const char*, N>& bank, std::uint64_t h) {
  return bank[h % N];
}

std::string reply(std::uint64_t key, std::size_t sample, std::string_view about) {
  const auto h = hash_combine(key, sample);
  return std::string(pick(kOpeners, h)) + " " + pick(kBridges, splitmix64(h)) + " " +
         std::string(about) + ". " + pick(kClosers, splitmix64(h + 1));
}

std::string maybe_fenced(std::string body, std::uint64_t h) {
  // Some replies come back fenced the way chat models often format JSON.
  if (h % 5 == 0) return "```json\n" + body + "\n```";
  return body;
}

std::vector<std::string> listed_personas(std::string_view prompt) {
  std::vector<std::string> out;
  const auto start = prompt.find("\nPersonas:");
  if (start == std::string_view::npos) return out;
  bool first = true;
  for (auto& line : split(prompt.substr(start + 1), '\n')) {
    if (first) {
      first = false;
      continue;
    }
    const auto t = trim(line);
    const auto dot = t.find(". ");
    if (dot == std::string_view::npos || dot == 0 ||
        !std::all_of(t.begin(), t.begin() + dot, [](unsigned char c) { return std::isdigit(c); })) {
      break;
    }
    out.emplace_back(t.substr(dot + 2));
  }
  return out;
}

}  // namespace

PromptKind classify_prompt(std::string_view prompt) {
  if (contains(prompt, "Response_options:")) return PromptKind::kJudge;
  if (contains(prompt, "Selected_Persona:")) return PromptKind::kRefine;
  if (contains(prompt, "\"selected_persona\"")) return PromptKind::kSelect;
  if (contains(prompt, "Knowledge_Gap:")) return PromptKind::kFeedback;
  if (contains(prompt, "\"sub_sentence\"")) return PromptKind::kGenerate;
  return PromptKind::kOther;
}

MockChatBackend::MockChatBackend(std::uint64_t seed, JudgePolicy judge_policy)
    : seed_(seed), judge_policy_(judge_policy) {}

void MockChatBackend::set_interceptor(Interceptor interceptor) {
  std::lock_guard lock(mutex_);
  interceptor_ = std::move(interceptor);
}

std::size_t MockChatBackend::call_count() const {
  std::lock_guard lock(mutex_);
  return calls_;
}

std::vector<std::string> MockChatBackend::prompts() const {
  std::lock_guard lock(mutex_);
  return log_;
}

void MockChatBackend::clear_log() {
  std::lock_guard lock(mutex_);
  log_.clear();
  calls_ = 0;
}

std::string MockChatBackend::do_complete(std::span<const ChatMessage> messages,
                                         const GenerationConfig&, std::size_t sample_index) {
  std::string prompt;
  for (const auto& m : messages) {
    if (!prompt.empty()) prompt += "\n";
    prompt += m.content;
  }
  Interceptor interceptor;
  {
    std::lock_guard lock(mutex_);
    ++calls_;
    if (log_.size() == kLogLimit) log_.erase(log_.begin(), log_.begin() + kLogLimit / 2);
    log_.push_back(prompt);
    interceptor = interceptor_;
  }

  const PromptKind kind = classify_prompt(prompt);
  if (interceptor) {
    if (auto scripted = interceptor(kind, prompt, sample_index)) return std::move(*scripted);
  }
  std::string user_input = field(prompt, "User_Input:");
  const std::uint64_t key =
      hash_combine(fnv1a64(user_input, seed_), static_cast<std::uint64_t>(kind));
  const std::uint64_t h = hash_combine(key, sample_index);

  switch (kind) {
    case PromptKind::kGenerate: {
      auto clauses = persona_clauses(user_input);
      if (sample_index > 0 && clauses.size() > 1) {
        clauses.erase(clauses.begin() + static_cast<long>((sample_index - 1) % clauses.size()));
      }
      const json body{{"result",
                       {{"response", reply(key, sample_index, topic(user_input))},
                        {"sub_sentence", join(clauses, ", ")}}}};
      return maybe_fenced(body.dump(4), h);
    }
    case PromptKind::kFeedback: {
      const bool follow_up = key % 2 == 0;
      const json body{
          {"thought_process", pick(kThoughts, key)},
          {"recommendation",
           {{"Feedback", "The initial response could connect more to what the user said about " +
                             topic(user_input) + "."},
            {"action", follow_up ? "Follow up question" : "Give response"},
            {"suggested_response", reply(key, 7, topic(user_input))}}}};
      return maybe_fenced(body.dump(4), key);
    }
    case PromptKind::kSelect: {
      const auto personas = listed_personas(prompt);
      const std::string chosen = personas.empty() ? "" : personas[key % personas.size()];
      const json body{{"response", {{"selected_persona", chosen}}}};
      return body.dump(4);
    }
    case PromptKind::kRefine: {
      const auto persona = field(prompt, "Selected_Persona:");
      const auto k = hash_combine(key, fnv1a64(persona));
      const json body{
          {"thought_process", pick(kThoughts, k)},
          {"response",
           {{"action", k % 2 ? "Follow-Up Question" : "Give Response based on the feedback"},
            {"text", reply(k, 0, topic(user_input))}}}};
      return maybe_fenced(body.dump(4), k);
    }
    case PromptKind::kJudge: {
      int option = 1;
      if (judge_policy_ == JudgePolicy::kHashed) {
        option = static_cast<int>(fnv1a64(prompt, seed_) % 5) + 1;
      }
      const json body{{"Thought_process", "step 1: compare the options; step 2: pick one"},
                      {"best_response", "option " + std::to_string(option)}};
      return body.dump(2);
    }
    case PromptKind::kOther: {
      const auto k = fnv1a64(prompt, seed_);
      const json body{{"reasoning", pick(kThoughts, k)},
                      {"rationale", pick(kThoughts, splitmix64(k))},
                      {"feedback", "Mention " + topic(user_input) + " explicitly."},
                      {"response", reply(k, sample_index, topic(user_input))}};
      return body.dump(4);
    }
  }
  return {};
}

MockEmbeddingBackend::MockEmbeddingBackend(std::uint64_t seed, std::size_t dimension)
    : seed_(seed), dimension_(dimension) {}

std::vector<Embedding> MockEmbeddingBackend::do_embed(std::span<const std::string> texts) {
  std::vector<Embedding> out;
  out.reserve(texts.size());
  for (const auto& text : texts) {
    std::vector<double> v(dimension_, 0.0);
    for (const auto& w : words(text)) {
      const auto h = fnv1a64(w, seed_);
      v[h % dimension_] += (h >> 63) ? 1.0 : -1.0;
    }
    double sq = 0.0;
    for (double x : v) sq += x * x;
    if (sq > 0.0) {
      const double n = std::sqrt(sq);
      for (double& x : v) x /= n;
    }
    out.emplace_back(std::move(v));
  }
  return out;
}

}  // namespace cper
