#pragma once

#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include <nlohmann/json.hpp>

namespace cper {

struct ParsedOutput {
  nlohmann::json value;               // always a JSON object
  std::vector<std::string> repairs;   // empty when the text parsed as-is
};

// Parses a model's JSON-object reply. If the text does not parse directly,
// one repair pass runs:
//   1. strip ``` code fences
//   2. keep the outermost balanced {...} (drops surrounding prose)
//   3. rewrite single-quoted strings as double-quoted
//   4. drop trailing commas before } or ]
// and the result is parsed once more. Anything still unparseable, or not an
// object, yields nullopt so the caller can fall back.
std::optional<ParsedOutput> parse_structured_output(std::string_view text);

// Object member by key, ignoring ASCII case. nullptr when absent.
const nlohmann::json* find_field(const nlohmann::json& object, std::string_view key);

// String member by key (case-insensitive); non-string scalars are dumped.
// nullopt when absent or null.
std::optional<std::string> text_field(const nlohmann::json& object, std::string_view key);

}  // namespace cper
