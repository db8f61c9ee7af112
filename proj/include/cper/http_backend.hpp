#pragma once

#include <atomic>
#include <chrono>
#include <cstddef>
#include <string>

#include <nlohmann/json.hpp>

#include "cper/model_gateway.hpp"

namespace cper {

struct HttpEndpoint {
  std::string base_url;  // e.g. "https://api.example.com/v1"
  std::string api_key;   // sent as a bearer token when non-empty
};

// Exponential backoff between attempts: initial * factor^k, +/- jitter.
struct RetryPolicy {
  std::chrono::milliseconds initial_backoff{250};
  double factor = 2.0;
  double jitter = 0.2;
  std::chrono::milliseconds max_backoff{10'000};
};

// POSTs JSON to `path` under the endpoint, retrying transport failures,
// 429 and 5xx responses. Other 4xx statuses and unparseable bodies raise
// ProtocolError immediately; exhausted retries raise BackendUnavailable.
nlohmann::json post_json(const HttpEndpoint& endpoint, const std::string& path,
                         const nlohmann::json& body, std::chrono::milliseconds timeout,
                         int max_retries, const RetryPolicy& retry);

// Chat completions over POST {base}/chat/completions.
class HttpChatBackend final : public ChatModel {
 public:
  explicit HttpChatBackend(HttpEndpoint endpoint, RetryPolicy retry = {},
                           bool batched_sampling = true, std::size_t max_parallel = 8);

  std::string name() const override { return "http:" + endpoint_.base_url; }

 protected:
  std::string do_complete(std::span<const ChatMessage> messages, const GenerationConfig& config,
                          std::size_t sample_index) override;
  std::vector<std::string> do_sample_n(std::span<const ChatMessage> messages,
                                       const GenerationConfig& config) override;
  std::size_t max_parallel() const override { return max_parallel_; }

 private:
  std::vector<std::string> request(std::span<const ChatMessage> messages,
                                   const GenerationConfig& config, int n);

  HttpEndpoint endpoint_;
  RetryPolicy retry_;
  bool batched_sampling_;
  std::size_t max_parallel_;
};

// Embeddings over POST {base}/embeddings. The dimension is fixed by the first
// response unless given up front.
class HttpEmbeddingBackend final : public EmbeddingModel {
 public:
  HttpEmbeddingBackend(HttpEndpoint endpoint, std::string model = "bge-large-en-v1.5",
                       std::size_t dimension = 0, RetryPolicy retry = {},
                       std::chrono::milliseconds timeout = std::chrono::seconds(60),
                       int max_retries = 2);

  std::size_t dimension() const override { return dimension_.load(); }
  std::string model_name() const override { return model_; }

 protected:
  std::vector<Embedding> do_embed(std::span<const std::string> texts) override;

 private:
  HttpEndpoint endpoint_;
  std::string model_;
  std::atomic<std::size_t> dimension_;
  RetryPolicy retry_;
  std::chrono::milliseconds timeout_;
  int max_retries_;
};

}  // namespace cper
