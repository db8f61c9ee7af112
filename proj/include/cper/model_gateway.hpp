#pragma once

#include <chrono>
#include <cstddef>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "cper/embedding.hpp"

namespace cper {

enum class Role { kSystem, kUser, kAssistant };

std::string_view to_string(Role role);
Role parse_role(std::string_view text);

struct ChatMessage {
  Role role = Role::kUser;
  std::string content;

  // Throws InvalidInput on empty content for user/assistant messages.
  void validate() const;

  friend bool operator==(const ChatMessage&, const ChatMessage&) = default;
};

struct GenerationConfig {
  double temperature = 0.7;
  int sample_count = 5;
  int max_tokens = 1024;
  std::string model_name = "llama-3.1-8b-instruct";
  std::chrono::milliseconds timeout{60'000};
  int max_retries = 2;

  void validate() const;
};

// Chat-completion model. Implementations override the do_* hooks; the public
// entry points check pre- and postconditions.
class ChatModel {
 public:
  virtual ~ChatModel() = default;

  std::string complete(std::span<const ChatMessage> messages, const GenerationConfig& config);

  // Exactly config.sample_count completions, ordered by sample index. Throws
  // BackendUnavailable naming the failed indices if any sample fails.
  std::vector<std::string> sample_n(std::span<const ChatMessage> messages,
                                    const GenerationConfig& config);

  virtual std::string name() const = 0;

 protected:
  virtual std::string do_complete(std::span<const ChatMessage> messages,
                                  const GenerationConfig& config, std::size_t sample_index) = 0;

  // Default: independent do_complete calls, at most max_parallel() at once.
  virtual std::vector<std::string> do_sample_n(std::span<const ChatMessage> messages,
                                               const GenerationConfig& config);

  virtual std::size_t max_parallel() const { return 8; }
};

// Text embedding model with a fixed output dimension.
class EmbeddingModel {
 public:
  virtual ~EmbeddingModel() = default;

  // One vector per text, order preserved. Blank texts are embedded as the
  // placeholder "[empty]".
  std::vector<Embedding> embed(std::span<const std::string> texts);
  Embedding embed_one(const std::string& text);

  virtual std::size_t dimension() const = 0;
  virtual std::string model_name() const = 0;

 protected:
  virtual std::vector<Embedding> do_embed(std::span<const std::string> texts) = 0;
};

inline constexpr std::string_view kEmptyPlaceholder = "[empty]";

}  // namespace cper
