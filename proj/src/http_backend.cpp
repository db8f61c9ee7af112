#include "cper/http_backend.hpp"

#include <httplib.h>
#include <spdlog/spdlog.h>

#include <algorithm>
#include <random>
#include <thread>

#include "cper/errors.hpp"

namespace cper {

using nlohmann::json;

namespace {

struct SplitUrl {
  std::string origin;  // scheme://host[:port]
  std::string prefix;  // path prefix without trailing slash
};

SplitUrl split_url(const std::string& base_url) {
  const auto scheme_end = base_url.find("://");
  if (scheme_end == std::string::npos) {
    throw InvalidInput("base URL needs a scheme: " + base_url);
  }
  const auto path_start = base_url.find('/', scheme_end + 3);
  SplitUrl out;
  if (path_start == std::string::npos) {
    out.origin = base_url;
  } else {
    out.origin = base_url.substr(0, path_start);
    out.prefix = base_url.substr(path_start);
  }
  while (!out.prefix.empty() && out.prefix.back() == '/') out.prefix.pop_back();
  return out;
}

std::chrono::milliseconds backoff(const RetryPolicy& retry, int attempt) {
  thread_local std::mt19937 rng{std::random_device{}()};
  std::uniform_real_distribution<double> jitter(1.0 - retry.jitter, 1.0 + retry.jitter);
  double ms = static_cast<double>(retry.initial_backoff.count());
  for (int i = 0; i < attempt; ++i) ms *= retry.factor;
  ms = std::min(ms, static_cast<double>(retry.max_backoff.count())) * jitter(rng);
  return std::chrono::milliseconds(static_cast<long long>(ms));
}

}  // namespace

json post_json(const HttpEndpoint& endpoint, const std::string& path, const json& body,
               std::chrono::milliseconds timeout, int max_retries, const RetryPolicy& retry) {
  const auto url = split_url(endpoint.base_url);
  const auto secs = std::chrono::duration_cast<std::chrono::seconds>(timeout);
  const auto usecs = std::chrono::duration_cast<std::chrono::microseconds>(timeout - secs);

  httplib::Headers headers;
  if (!endpoint.api_key.empty()) {
    headers.emplace("Authorization", "Bearer " + endpoint.api_key);
  }
  const std::string payload = body.dump();
  std::string last_error;

  for (int attempt = 0; attempt <= max_retries; ++attempt) {
    if (attempt > 0) std::this_thread::sleep_for(backoff(retry, attempt - 1));

    httplib::Client client(url.origin);
    client.set_connection_timeout(secs.count(), usecs.count());
    client.set_read_timeout(secs.count(), usecs.count());
    client.set_write_timeout(secs.count(), usecs.count());

    auto res = client.Post(url.prefix + path, headers, payload, "application/json");
    if (!res) {
      last_error = "transport error: " + httplib::to_string(res.error());
      spdlog::warn("POST {}{} attempt {}: {}", url.origin, path, attempt + 1, last_error);
      continue;
    }
    if (res->status == 429 || res->status >= 500) {
      last_error = "HTTP status " + std::to_string(res->status);
      spdlog::warn("POST {}{} attempt {}: {}", url.origin, path, attempt + 1, last_error);
      continue;
    }
    if (res->status < 200 || res->status >= 300) {
      throw ProtocolError("HTTP status " + std::to_string(res->status) + ": " + res->body);
    }
    try {
      return json::parse(res->body);
    } catch (const json::parse_error& e) {
      throw ProtocolError(std::string("malformed JSON from provider: ") + e.what());
    }
  }
  throw BackendUnavailable("POST " + url.origin + url.prefix + path + " failed after " +
                           std::to_string(max_retries + 1) + " attempt(s): " + last_error);
}

HttpChatBackend::HttpChatBackend(HttpEndpoint endpoint, RetryPolicy retry, bool batched_sampling,
                                 std::size_t max_parallel)
    : endpoint_(std::move(endpoint)),
      retry_(retry),
      batched_sampling_(batched_sampling),
      max_parallel_(max_parallel) {}

std::vector<std::string> HttpChatBackend::request(std::span<const ChatMessage> messages,
                                                  const GenerationConfig& config, int n) {
  json body{{"model", config.model_name},
            {"temperature", config.temperature},
            {"n", n},
            {"max_tokens", config.max_tokens}};
  auto& msgs = body["messages"] = json::array();
  for (const auto& m : messages) msgs.push_back({{"role", to_string(m.role)}, {"content", m.content}});

  const json reply =
      post_json(endpoint_, "/chat/completions", body, config.timeout, config.max_retries, retry_);

  if (!reply.contains("choices") || !reply["choices"].is_array() || reply["choices"].empty()) {
    throw ProtocolError("chat completion response has no choices");
  }
  std::vector<std::pair<std::size_t, std::string>> indexed;
  std::size_t position = 0;
  for (const auto& choice : reply["choices"]) {
    const auto* content = choice.contains("message") ? &choice["message"] : nullptr;
    if (!content || !content->contains("content") || !(*content)["content"].is_string()) {
      throw ProtocolError("choice without message.content");
    }
    const std::size_t index = choice.value("index", position);
    indexed.emplace_back(index, (*content)["content"].get<std::string>());
    ++position;
  }
  std::stable_sort(indexed.begin(), indexed.end(),
                   [](const auto& a, const auto& b) { return a.first < b.first; });
  std::vector<std::string> out;
  for (auto& [index, text] : indexed) out.push_back(std::move(text));
  return out;
}

std::string HttpChatBackend::do_complete(std::span<const ChatMessage> messages,
                                         const GenerationConfig& config, std::size_t) {
  return request(messages, config, 1).front();
}

std::vector<std::string> HttpChatBackend::do_sample_n(std::span<const ChatMessage> messages,
                                                      const GenerationConfig& config) {
  if (!batched_sampling_ || config.sample_count == 1) {
    return ChatModel::do_sample_n(messages, config);
  }
  auto out = request(messages, config, config.sample_count);
  const auto want = static_cast<std::size_t>(config.sample_count);
  if (out.size() > want) out.resize(want);
  // Some providers ignore n; top up with independent calls.
  while (out.size() < want) out.push_back(request(messages, config, 1).front());
  return out;
}

HttpEmbeddingBackend::HttpEmbeddingBackend(HttpEndpoint endpoint, std::string model,
                                           std::size_t dimension, RetryPolicy retry,
                                           std::chrono::milliseconds timeout, int max_retries)
    : endpoint_(std::move(endpoint)),
      model_(std::move(model)),
      dimension_(dimension),
      retry_(retry),
      timeout_(timeout),
      max_retries_(max_retries) {}

std::vector<Embedding> HttpEmbeddingBackend::do_embed(std::span<const std::string> texts) {
  const json body{{"model", model_}, {"input", std::vector<std::string>(texts.begin(), texts.end())}};
  const json reply = post_json(endpoint_, "/embeddings", body, timeout_, max_retries_, retry_);
  if (!reply.contains("data") || !reply["data"].is_array()) {
    throw ProtocolError("embedding response has no data array");
  }

  std::vector<std::pair<std::size_t, Embedding>> indexed;
  std::size_t position = 0;
  for (const auto& item : reply["data"]) {
    if (!item.contains("embedding") || !item["embedding"].is_array()) {
      throw ProtocolError("embedding item without an embedding array");
    }
    std::vector<double> values;
    try {
      values = item["embedding"].get<std::vector<double>>();
    } catch (const json::exception& e) {
      throw ProtocolError(std::string("non-numeric embedding: ") + e.what());
    }
    try {
      indexed.emplace_back(item.value("index", position), Embedding(std::move(values)));
    } catch (const InvalidInput& e) {
      throw ProtocolError(std::string("invalid embedding from provider: ") + e.what());
    }
    ++position;
  }
  std::stable_sort(indexed.begin(), indexed.end(),
                   [](const auto& a, const auto& b) { return a.first < b.first; });

  std::vector<Embedding> out;
  for (auto& [index, e] : indexed) {
    std::size_t expected = 0;
    if (dimension_.compare_exchange_strong(expected, e.dimension()) ||
        expected == e.dimension()) {
      out.push_back(std::move(e));
    } else {
      throw ProtocolError("embedding dimension " + std::to_string(e.dimension()) +
                          " differs from backend dimension " + std::to_string(expected));
    }
  }
  return out;
}

}  // namespace cper
