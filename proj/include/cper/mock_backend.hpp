#pragma once

#include <cstdint>
#include <functional>
#include <optional>
#include <mutex>
#include <string>
#include <vector>

#include "cper/model_gateway.hpp"

namespace cper {

// Which prompt a mock request looks like.
enum class PromptKind { kGenerate, kFeedback, kSelect, kRefine, kJudge, kOther };

PromptKind classify_prompt(std::string_view prompt);

// Offline chat model. Replies are a pure function of (seed, prompt kind,
// user input, sample index) so pipelines run reproducibly without network.
// CPER-stage replies ignore everything but the user input (and, for
// selection and refinement, the listed personas), in particular the
// knowledge-gap value.
class MockChatBackend final : public ChatModel {
 public:
  enum class JudgePolicy {
    kFirstOption,  // always "option 1"
    kHashed,       // option picked from a hash of the prompt
  };

  explicit MockChatBackend(std::uint64_t seed = 0,
                           JudgePolicy judge_policy = JudgePolicy::kFirstOption);

  std::string name() const override { return "mock"; }

  // Replaces the reply for matching requests; returning nullopt keeps the
  // templated reply. Used to script malformed or adversarial outputs.
  using Interceptor = std::function<std::optional<std::string>(
      PromptKind kind, std::string_view prompt, std::size_t sample_index)>;
  void set_interceptor(Interceptor interceptor);

  std::size_t call_count() const;
  // The most recent prompts; older ones are dropped past a fixed limit.
  std::vector<std::string> prompts() const;
  void clear_log();

 protected:
  std::string do_complete(std::span<const ChatMessage> messages, const GenerationConfig& config,
                          std::size_t sample_index) override;
  std::size_t max_parallel() const override { return 1; }

 private:
  std::uint64_t seed_;
  JudgePolicy judge_policy_;
  mutable std::mutex mutex_;
  static constexpr std::size_t kLogLimit = 8192;
  std::vector<std::string> log_;
  std::size_t calls_ = 0;
  Interceptor interceptor_;
};

// Seeded hashed bag-of-words projection, L2-normalized. Texts without any
// word characters map to the zero vector.
class MockEmbeddingBackend final : public EmbeddingModel {
 public:
  explicit MockEmbeddingBackend(std::uint64_t seed = 0, std::size_t dimension = 64);

  std::size_t dimension() const override { return dimension_; }
  std::string model_name() const override { return "mock-bow-" + std::to_string(dimension_); }

 protected:
  std::vector<Embedding> do_embed(std::span<const std::string> texts) override;

 private:
  std::uint64_t seed_;
  std::size_t dimension_;
};

}  // namespace cper
