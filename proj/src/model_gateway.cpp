#include "cper/model_gateway.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <exception>
#include <mutex>
#include <optional>
#include <thread>

#include "cper/errors.hpp"
#include "cper/text.hpp"

namespace cper {

std::string_view to_string(Role role) {
  switch (role) {
    case Role::kSystem:
      return "system";
    case Role::kUser:
      return "user";
    case Role::kAssistant:
      return "assistant";
  }
  return "user";
}

Role parse_role(std::string_view text) {
  if (text == "system") return Role::kSystem;
  if (text == "user") return Role::kUser;
  if (text == "assistant") return Role::kAssistant;
  throw InvalidInput("unknown role: " + std::string(text));
}

void ChatMessage::validate() const {
  if (role != Role::kSystem && trim(content).empty()) {
    throw InvalidInput(std::string(to_string(role)) + " message content is empty");
  }
}

void GenerationConfig::validate() const {
  if (!std::isfinite(temperature) || temperature < 0.0 || temperature > 2.0) {
    throw InvalidInput("temperature must be in [0, 2]");
  }
  if (sample_count < 1) throw InvalidInput("sample_count must be >= 1");
  if (max_tokens < 1) throw InvalidInput("max_tokens must be >= 1");
  if (max_retries < 0) throw InvalidInput("max_retries must be >= 0");
  if (timeout.count() <= 0) throw InvalidInput("timeout must be positive");
}

namespace {

void check_request(std::span<const ChatMessage> messages, const GenerationConfig& config) {
  if (messages.empty()) throw InvalidInput("no messages to complete");
  for (const auto& m : messages) m.validate();
  config.validate();
}

}  // namespace

std::string ChatModel::complete(std::span<const ChatMessage> messages,
                                const GenerationConfig& config) {
  check_request(messages, config);
  return do_complete(messages, config, 0);
}

std::vector<std::string> ChatModel::sample_n(std::span<const ChatMessage> messages,
                                             const GenerationConfig& config) {
  check_request(messages, config);
  auto out = do_sample_n(messages, config);
  if (out.size() != static_cast<std::size_t>(config.sample_count)) {
    throw ProtocolError("backend returned " + std::to_string(out.size()) + " samples, expected " +
                        std::to_string(config.sample_count));
  }
  return out;
}

std::vector<std::string> ChatModel::do_sample_n(std::span<const ChatMessage> messages,
                                                const GenerationConfig& config) {
  const auto n = static_cast<std::size_t>(config.sample_count);
  std::vector<std::optional<std::string>> slots(n);
  std::vector<std::string> errors(n);
  std::atomic<std::size_t> next{0};

  auto worker = [&] {
    for (std::size_t i = next++; i < n; i = next++) {
      try {
        slots[i] = do_complete(messages, config, i);
      } catch (const std::exception& e) {
        errors[i] = e.what();
      }
    }
  };

  const std::size_t threads = std::min(n, std::max<std::size_t>(1, max_parallel()));
  if (threads <= 1) {
    worker();
  } else {
    std::vector<std::jthread> pool;
    for (std::size_t t = 0; t < threads; ++t) pool.emplace_back(worker);
  }

  std::vector<std::size_t> failed;
  std::vector<std::string> out;
  out.reserve(n);
  for (std::size_t i = 0; i < n; ++i) {
    if (slots[i]) {
      out.push_back(std::move(*slots[i]));
    } else {
      failed.push_back(i);
    }
  }
  if (!failed.empty()) {
    std::string what = "sampling failed for indices";
    for (auto i : failed) what += " " + std::to_string(i);
    what += ": " + errors[failed.front()];
    throw BackendUnavailable(what, std::move(failed));
  }
  return out;
}

std::vector<Embedding> EmbeddingModel::embed(std::span<const std::string> texts) {
  if (texts.empty()) throw InvalidInput("no texts to embed");
  std::vector<std::string> cleaned;
  cleaned.reserve(texts.size());
  for (const auto& t : texts) {
    cleaned.push_back(trim(t).empty() ? std::string(kEmptyPlaceholder) : t);
  }
  auto out = do_embed(cleaned);
  if (out.size() != texts.size()) {
    throw ProtocolError("embedding backend returned " + std::to_string(out.size()) +
                        " vectors for " + std::to_string(texts.size()) + " texts");
  }
  const auto expected = dimension() ? dimension() : out.front().dimension();
  for (const auto& e : out) {
    if (e.dimension() != expected) {
      throw ProtocolError("embedding dimension " + std::to_string(e.dimension()) +
                          " differs from the backend's " + std::to_string(expected));
    }
  }
  return out;
}

Embedding EmbeddingModel::embed_one(const std::string& text) {
  const std::string one[] = {text};
  return embed(one).front();
}

}  // namespace cper
