#include "cper/backend_factory.hpp"

#include <cstdlib>

#include "cper/errors.hpp"
#include "cper/mock_backend.hpp"

namespace cper {

namespace {

std::string env_or(const char* name, std::string fallback) {
  const char* v = std::getenv(name);
  return v && *v ? std::string(v) : std::move(fallback);
}

}  // namespace

std::string_view to_string(BackendKind kind) {
  return kind == BackendKind::kHttp ? "http" : "mock";
}

BackendKind parse_backend_kind(std::string_view text) {
  if (text == "mock") return BackendKind::kMock;
  if (text == "http") return BackendKind::kHttp;
  throw InvalidInput("backend must be 'mock' or 'http', got '" + std::string(text) + "'");
}

BackendSettings settings_from_env() {
  BackendSettings s;
  s.kind = parse_backend_kind(env_or("CPER_BACKEND", "mock"));
  s.chat_endpoint.base_url = env_or("MODEL_API_BASE", "");
  s.chat_endpoint.api_key = env_or("MODEL_API_KEY", "");
  s.embed_endpoint.base_url = env_or("EMBED_API_BASE", s.chat_endpoint.base_url);
  s.embed_endpoint.api_key = env_or("EMBED_API_KEY", s.chat_endpoint.api_key);
  s.embed_model = env_or("EMBED_MODEL", s.embed_model);
  return s;
}

Backends make_backends(const BackendSettings& settings) {
  if (settings.kind == BackendKind::kMock) {
    return {std::make_shared<MockChatBackend>(settings.seed),
            std::make_shared<MockEmbeddingBackend>(settings.seed, settings.mock_dimension)};
  }
  if (settings.chat_endpoint.base_url.empty()) {
    throw InvalidInput("http backend selected but MODEL_API_BASE is not set");
  }
  if (settings.embed_endpoint.base_url.empty()) {
    throw InvalidInput("http backend selected but EMBED_API_BASE is not set");
  }
  return {std::make_shared<HttpChatBackend>(settings.chat_endpoint),
          std::make_shared<HttpEmbeddingBackend>(settings.embed_endpoint, settings.embed_model)};
}

}  // namespace cper
