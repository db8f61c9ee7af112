#pragma once

#include <cstdint>
#include <memory>
#include <string>

#include "cper/http_backend.hpp"
#include "cper/model_gateway.hpp"

namespace cper {

enum class BackendKind { kMock, kHttp };

std::string_view to_string(BackendKind kind);
BackendKind parse_backend_kind(std::string_view text);

struct BackendSettings {
  BackendKind kind = BackendKind::kMock;
  std::uint64_t seed = 0;
  HttpEndpoint chat_endpoint;
  HttpEndpoint embed_endpoint;
  std::string embed_model = "bge-large-en-v1.5";
  std::size_t mock_dimension = 64;
};

// Reads CPER_BACKEND, MODEL_API_BASE, MODEL_API_KEY, EMBED_API_BASE,
// EMBED_API_KEY and EMBED_MODEL. Unset variables keep the defaults; an unset
// EMBED_API_BASE falls back to MODEL_API_BASE.
BackendSettings settings_from_env();

struct Backends {
  std::shared_ptr<ChatModel> chat;
  std::shared_ptr<EmbeddingModel> embedder;
};

// Throws InvalidInput when the http kind is selected without a base URL.
Backends make_backends(const BackendSettings& settings);

}  // namespace cper
